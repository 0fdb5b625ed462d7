#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gknet/kinetics.hpp"

namespace gknet {

struct Standardization {
    std::vector<double> means;  // per candidate column, before scaling
    std::vector<double> sds;    // population s.d.; 0 for dropped columns
    std::vector<bool> dropped;  // zero-variance candidates
    double response_mean = 0.0;
    double response_sd = 1.0;
};

/// Regression of one child's (log) phospho level on the log phospho levels of
/// every other species, all mean-variance standardised.
struct LinearDesign {
    Species child = 0;
    bool adjusted = false;
    std::vector<Species> candidate_ids;  // p - 1 entries, in species order
    Eigen::VectorXd response;
    Eigen::MatrixXd candidates;          // n x (p - 1); dropped columns are zero
    Standardization record;

    std::size_t samples() const { return static_cast<std::size_t>(response.size()); }
    std::size_t candidate_count() const { return candidate_ids.size(); }
};

/// Response log X_child, or log(X_child / U_child) when adjusted. Zero-variance
/// candidates are dropped with a warning; a zero-variance response throws
/// DegenerateDesign.
LinearDesign make_design(const Dataset& data, Species child, bool adjusted);

/// Standardises a raw response/candidate pair the same way make_design does.
LinearDesign standardize_design(Species child, std::vector<Species> candidate_ids, const Eigen::VectorXd& response,
                                const Eigen::MatrixXd& candidates, bool adjusted = false);

enum class LinearMethod { bayes, lasso };

struct CandidateWeights {
    Species child = 0;
    std::string method;
    LinearMethod kind = LinearMethod::bayes;
    std::vector<Species> candidate_ids;
    std::vector<double> weight;

    /// LASSO candidates with exactly zero weight are unranked.
    bool is_na(std::size_t k) const { return kind == LinearMethod::lasso && weight[k] == 0.0; }
};

/// Log marginal likelihood of the subset under the g-prior with g = n, a flat
/// intercept prior and p(sigma) proportional to 1/sigma:
///   log m = -((n-1)/2) log pi - (1/2) log n - log 2 + lgamma((n-1)/2)
///           - (d/2) log(1+g) - ((n-1)/2) log(y'y - g/(1+g) y'Py)
/// where y is the centred response and P the projection onto the subset
/// columns. Rank-deficient subsets give -infinity with a warning.
double gprior_log_evidence(const LinearDesign& design, const std::vector<std::size_t>& subset);

inline constexpr std::size_t kMaxInDegree = 3;

/// Posterior inclusion probabilities by exhaustive model averaging over every
/// subset of at most min(3, n - 2) candidates; the model prior is uniform
/// over in-degree.
CandidateWeights bayes_inclusion_probs(const LinearDesign& design);

/// Coordinate-descent LASSO on centred columns,
/// minimising (1/2n)|y - X b|^2 + lambda |b|_1, for each lambda in turn with
/// warm starts. Returns a (columns x lambdas) coefficient matrix.
Eigen::MatrixXd lasso_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<double>& lambdas,
                           double tolerance = 1e-10, std::size_t max_sweeps = 100000);

/// 100 log-spaced values from max_j |x_j'y| / n down to 1e-4 of it.
std::vector<double> lambda_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t points = 100,
                                double ratio = 1e-4);

struct LassoCvResult {
    CandidateWeights weights;
    std::vector<double> lambdas;
    std::vector<double> cv_error;
    std::size_t selected = 0;
};

/// K-fold cross-validated LASSO; weights are |coefficients| at the lambda with
/// the lowest mean squared prediction error. Folds come from the seed.
LassoCvResult lasso_cv(const LinearDesign& design, std::size_t folds = 5, std::uint64_t seed = 0);

}  // namespace gknet
