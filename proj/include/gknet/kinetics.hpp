#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gknet {

using Species = std::size_t;

/// Paired steady-state measurements. Rows are samples, columns species.
struct Dataset {
    std::vector<std::string> species_names;
    Eigen::MatrixXd phospho;    // X_i
    Eigen::MatrixXd unphospho;  // X_i^0
    bool normalized = false;

    std::size_t samples() const { return static_cast<std::size_t>(phospho.rows()); }
    std::size_t species() const { return static_cast<std::size_t>(phospho.cols()); }

    /// Total protein U = X + X^0 for one entry.
    double total(std::size_t sample, Species j) const {
        return phospho(sample, j) + unphospho(sample, j);
    }
};

/// One kinase of a child and the competitive inhibitors acting on it.
struct KinaseTerm {
    Species kinase = 0;
    std::vector<Species> inhibitors;  // sorted, unique

    friend bool operator==(const KinaseTerm&, const KinaseTerm&) = default;
    friend auto operator<=>(const KinaseTerm&, const KinaseTerm&) = default;
};

/// Phosphorylation mechanism of a single child: its kinases and, per kinase,
/// the inhibitors. Terms are kept sorted by kinase index so that equal
/// mechanisms compare equal.
struct MechanismModel {
    Species child = 0;
    std::vector<KinaseTerm> terms;

    bool empty() const { return terms.empty(); }
    std::size_t kinase_count() const { return terms.size(); }
    std::size_t inhibitor_count() const;
    bool has_kinase(Species j) const;
    /// Index of the term for kinase j, or terms.size() if absent.
    std::size_t term_index(Species j) const;

    /// Parent set: kinases plus all inhibitors, sorted and unique.
    std::vector<Species> parents() const;
    bool is_parent(Species j) const;
    bool is_inhibitor(Species j) const;

    /// Compact text form, e.g. "3[1|4];5[]"; "empty" for no kinases.
    std::string signature() const;
    /// As signature() but with species names.
    std::string signature(std::span<const std::string> names) const;

    friend bool operator==(const MechanismModel&, const MechanismModel&) = default;
    friend auto operator<=>(const MechanismModel&, const MechanismModel&) = default;
};

/// Throws InvalidInput if child is a kinase or inhibitor of itself, a kinase
/// inhibits itself, indices are out of range, or orderings are broken.
void validate(const MechanismModel& model, std::size_t species);

/// Rates for one kinase term; k_i is aligned with KinaseTerm::inhibitors.
struct KinaseRates {
    double v = 1.0;    // V_E / V_0
    double k_e = 1.0;  // Michaelis constant
    std::vector<double> k_i;

    friend bool operator==(const KinaseRates&, const KinaseRates&) = default;
};

/// Continuous parameters of a mechanism; rates is aligned with
/// MechanismModel::terms.
struct KineticParams {
    std::vector<KinaseRates> rates;
    double sigma = 0.2;
    double mu = 1.0;

    friend bool operator==(const KineticParams&, const KineticParams&) = default;
};

/// True when params has exactly one rate block per term and one K_I per
/// inhibitor.
bool matches(const MechanismModel& model, const KineticParams& params);

/// Sample mean of the child's phospho column (1 for an empty dataset).
double empty_model_mean(const Dataset& data, Species child);

/// Goldbeter-Koshland prediction f_i for one sample row.
double eval_gk(const MechanismModel& model, const KineticParams& params, const Dataset& data,
               std::size_t sample);

/// f_i for every sample. out.size() must equal data.samples().
void predict_gk(const MechanismModel& model, const KineticParams& params, const Dataset& data,
                std::span<double> out);

/// Gaussian log-likelihood of log X_i around log f_i with s.d. sigma.
double log_likelihood(const MechanismModel& model, const KineticParams& params,
                      const Dataset& data);

/// Same density expressed through the sum of squared log residuals.
double log_likelihood_from_ssr(double ssr, std::size_t samples, double sigma);

// Priors: rates and Michaelis constants ~ Gamma(shape 2, scale 1/2);
// sigma ~ InverseGamma(shape 6, scale 1).
inline constexpr double kRateShape = 2.0;
inline constexpr double kRateScale = 0.5;
inline constexpr double kNoiseShape = 6.0;
inline constexpr double kNoiseScale = 1.0;

double log_gamma_density(double x, double shape, double scale);
double log_inverse_gamma_density(double x, double shape, double scale);

/// Prior log-density of a rate ratio or any Michaelis/inhibition constant.
double log_prior_rate(double x);
double log_prior_sigma(double sigma);

/// Sum of prior log-densities over v, K_E, K_I and sigma. mu has no prior.
double log_prior_params(const KineticParams& params);

template <class Rng>
double draw_rate(Rng& rng) {
    std::gamma_distribution<double> gamma(kRateShape, kRateScale);
    return gamma(rng);
}

template <class Rng>
double draw_sigma(Rng& rng) {
    // 1/Y with Y ~ Gamma(shape, rate = scale) is InverseGamma(shape, scale).
    std::gamma_distribution<double> gamma(kNoiseShape, 1.0 / kNoiseScale);
    return 1.0 / gamma(rng);
}

/// Number of continuous parameters: 2 per kinase, 1 per inhibitor, plus sigma.
std::size_t param_dimension(const MechanismModel& model);

}  // namespace gknet
