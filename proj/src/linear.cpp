#include "gknet/linear.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "gknet/errors.hpp"
#include "gknet/log.hpp"
#include "gknet/model_prior.hpp"
#include "gknet/rng.hpp"

namespace gknet {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct ColumnStats {
    double mean;
    double sd;
};

ColumnStats column_stats(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double mean = v.mean();
    const double var = (v.array() - mean).square().mean();
    return {mean, std::sqrt(var)};
}

bool zero_variance(const ColumnStats& s) { return !(s.sd > 1e-12 * std::max(1.0, std::abs(s.mean))); }

// log evidence and a flag telling whether the subset was rank deficient.
std::pair<double, bool> evidence(const LinearDesign& design, const std::vector<std::size_t>& subset) {
    const auto n = static_cast<Eigen::Index>(design.samples());
    const std::size_t d = subset.size();
    if (design.samples() < 3 || d + 2 > design.samples()) {
        throw InvalidInput(fmt::format("subset size {} needs at least {} samples", d, d + 2));
    }
    const Eigen::VectorXd y = design.response.array() - design.response.mean();
    const double yy = y.squaredNorm();
    double explained = 0.0;
    if (d > 0) {
        Eigen::MatrixXd dm(n, static_cast<Eigen::Index>(d));
        for (std::size_t k = 0; k < d; ++k) {
            if (subset[k] >= design.candidate_count()) throw InvalidInput("subset index out of range");
            if (design.record.dropped[subset[k]]) return {kNegInf, true};
            dm.col(static_cast<Eigen::Index>(k)) = design.candidates.col(static_cast<Eigen::Index>(subset[k]));
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dm);
        qr.setThreshold(1e-10);
        if (qr.rank() < static_cast<Eigen::Index>(d)) return {kNegInf, true};
        const Eigen::VectorXd beta = qr.solve(y);
        explained = y.dot(dm * beta);
    }
    const double nn = static_cast<double>(n);
    const double g = nn;
    const double q = yy - g / (1.0 + g) * explained;
    const double half = 0.5 * (nn - 1.0);
    const double log_m = -half * std::log(std::numbers::pi) - 0.5 * std::log(nn) - std::log(2.0) + std::lgamma(half) -
                         0.5 * static_cast<double>(d) * std::log(1.0 + g) - half * std::log(q);
    return {log_m, false};
}

double log_sum_exp(const std::vector<double>& xs) {
    double hi = kNegInf;
    for (double x : xs) hi = std::max(hi, x);
    if (!std::isfinite(hi)) return hi;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - hi);
    return hi + std::log(acc);
}

}  // namespace

LinearDesign standardize_design(Species child, std::vector<Species> candidate_ids, const Eigen::VectorXd& response,
                                const Eigen::MatrixXd& candidates, bool adjusted) {
    if (candidates.rows() != response.size() ||
        static_cast<std::size_t>(candidates.cols()) != candidate_ids.size()) {
        throw InvalidInput("design dimensions disagree");
    }
    LinearDesign out;
    out.child = child;
    out.adjusted = adjusted;
    out.candidate_ids = std::move(candidate_ids);

    const auto ys = column_stats(response);
    if (zero_variance(ys)) {
        throw DegenerateDesign(fmt::format("response for child {} has zero variance", child));
    }
    out.record.response_mean = ys.mean;
    out.record.response_sd = ys.sd;
    out.response = (response.array() - ys.mean) / ys.sd;

    out.candidates = Eigen::MatrixXd::Zero(candidates.rows(), candidates.cols());
    for (Eigen::Index k = 0; k < candidates.cols(); ++k) {
        const auto cs = column_stats(candidates.col(k));
        out.record.means.push_back(cs.mean);
        if (zero_variance(cs)) {
            warn(fmt::format("candidate {} of child {} has zero variance and was dropped",
                             out.candidate_ids[static_cast<std::size_t>(k)], child));
            out.record.sds.push_back(0.0);
            out.record.dropped.push_back(true);
            continue;
        }
        out.record.sds.push_back(cs.sd);
        out.record.dropped.push_back(false);
        out.candidates.col(k) = (candidates.col(k).array() - cs.mean) / cs.sd;
    }
    return out;
}

LinearDesign make_design(const Dataset& data, Species child, bool adjusted) {
    if (!data.normalized) throw InvalidInput("linear designs require normalised data");
    const std::size_t p = data.species();
    if (child >= p) throw InvalidInput(fmt::format("child {} out of range (p = {})", child, p));
    const auto n = static_cast<Eigen::Index>(data.samples());
    const auto c = static_cast<Eigen::Index>(child);

    Eigen::VectorXd response(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        const double x = data.phospho(s, c);
        const double value = adjusted ? x / (x + data.unphospho(s, c)) : x;
        if (!(value > 0.0)) throw UndefinedLikelihood(fmt::format("nonpositive response at sample {}", s));
        response(s) = std::log(value);
    }
    std::vector<Species> ids;
    Eigen::MatrixXd cands(n, static_cast<Eigen::Index>(p - 1));
    for (Species j = 0; j < p; ++j) {
        if (j == child) continue;
        const auto col = static_cast<Eigen::Index>(ids.size());
        for (Eigen::Index s = 0; s < n; ++s) {
            const double x = data.phospho(s, static_cast<Eigen::Index>(j));
            if (!(x > 0.0)) throw UndefinedLikelihood(fmt::format("nonpositive candidate value at sample {}", s));
            cands(s, col) = std::log(x);
        }
        ids.push_back(j);
    }
    return standardize_design(child, std::move(ids), response, cands, adjusted);
}

double gprior_log_evidence(const LinearDesign& design, const std::vector<std::size_t>& subset) {
    auto [value, deficient] = evidence(design, subset);
    if (deficient) warn(fmt::format("rank-deficient subset of size {} for child {}", subset.size(), design.child));
    return value;
}

CandidateWeights bayes_inclusion_probs(const LinearDesign& design) {
    CandidateWeights out;
    out.child = design.child;
    out.method = design.adjusted ? "lin-bayes-adj" : "lin-bayes";
    out.kind = LinearMethod::bayes;
    out.candidate_ids = design.candidate_ids;
    out.weight.assign(design.candidate_count(), 0.0);

    std::vector<std::size_t> active;
    for (std::size_t k = 0; k < design.candidate_count(); ++k) {
        if (!design.record.dropped[k]) active.push_back(k);
    }
    const std::size_t n = design.samples();
    if (n < 3) throw InvalidInput("Bayesian variable selection needs at least 3 samples");
    const std::size_t max_d = std::min({kMaxInDegree, n - 2, active.size()});
    const double log_strata = std::log(static_cast<double>(max_d + 1));

    std::vector<std::vector<std::size_t>> subsets;
    std::vector<double> log_post;
    std::size_t deficient = 0;
    std::vector<std::size_t> current;
    std::function<void(std::size_t)> visit = [&](std::size_t from) {
        auto [log_m, bad] = evidence(design, current);
        if (bad) ++deficient;
        const double log_prior = -log_strata - std::log(binomial(active.size(), current.size()));
        subsets.push_back(current);
        log_post.push_back(log_m + log_prior);
        if (current.size() == max_d) return;
        for (std::size_t a = from; a < active.size(); ++a) {
            current.push_back(active[a]);
            visit(a + 1);
            current.pop_back();
        }
    };
    visit(0);
    if (deficient) {
        warn(fmt::format("{} rank-deficient subsets given zero weight for child {}", deficient, design.child));
    }

    const double norm = log_sum_exp(log_post);
    for (std::size_t m = 0; m < subsets.size(); ++m) {
        const double w = std::exp(log_post[m] - norm);
        for (std::size_t k : subsets[m]) out.weight[k] += w;
    }
    for (double& w : out.weight) w = std::clamp(w, 0.0, 1.0);
    return out;
}

Eigen::MatrixXd lasso_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<double>& lambdas,
                           double tolerance, std::size_t max_sweeps) {
    const auto n = static_cast<double>(x.rows());
    const Eigen::Index q = x.cols();
    Eigen::MatrixXd path = Eigen::MatrixXd::Zero(q, static_cast<Eigen::Index>(lambdas.size()));
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd residual = y;
    Eigen::VectorXd scale(q);
    for (Eigen::Index j = 0; j < q; ++j) scale(j) = x.col(j).squaredNorm() / n;

    for (std::size_t l = 0; l < lambdas.size(); ++l) {
        const double lambda = lambdas[l];
        for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
            double max_change = 0.0;
            for (Eigen::Index j = 0; j < q; ++j) {
                if (scale(j) == 0.0) continue;
                const double rho = x.col(j).dot(residual) / n + scale(j) * beta(j);
                double updated = 0.0;
                if (rho > lambda) {
                    updated = (rho - lambda) / scale(j);
                } else if (rho < -lambda) {
                    updated = (rho + lambda) / scale(j);
                }
                const double delta = updated - beta(j);
                if (delta != 0.0) {
                    residual -= delta * x.col(j);
                    beta(j) = updated;
                    max_change = std::max(max_change, std::abs(delta) * std::sqrt(scale(j)));
                }
            }
            if (max_change < tolerance) break;
        }
        path.col(static_cast<Eigen::Index>(l)) = beta;
    }
    return path;
}

std::vector<double> lambda_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t points, double ratio) {
    const double n = static_cast<double>(x.rows());
    double lambda_max = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) lambda_max = std::max(lambda_max, std::abs(x.col(j).dot(y)) / n);
    std::vector<double> grid;
    if (!(lambda_max > 0.0) || points == 0) return grid;
    for (std::size_t k = 0; k < points; ++k) {
        const double t = points == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(points - 1);
        grid.push_back(lambda_max * std::pow(ratio, t));
    }
    return grid;
}

LassoCvResult lasso_cv(const LinearDesign& design, std::size_t folds, std::uint64_t seed) {
    const std::size_t n = design.samples();
    if (folds < 2 || folds > n) throw InvalidInput(fmt::format("need 2 <= folds <= n, got {} folds for n = {}", folds, n));

    LassoCvResult out;
    out.weights.child = design.child;
    out.weights.method = design.adjusted ? "lasso-adj" : "lasso";
    out.weights.kind = LinearMethod::lasso;
    out.weights.candidate_ids = design.candidate_ids;
    out.weights.weight.assign(design.candidate_count(), 0.0);

    const Eigen::MatrixXd& x = design.candidates;
    const Eigen::VectorXd& y = design.response;
    out.lambdas = lambda_grid(x, y);
    if (out.lambdas.empty()) return out;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_stream(seed, stream::folds, design.child, design.adjusted ? 1 : 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> fold_of(n);
    for (std::size_t i = 0; i < n; ++i) fold_of[order[i]] = i % folds;

    std::vector<double> sse(out.lambdas.size(), 0.0);
    for (std::size_t k = 0; k < folds; ++k) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < n; ++i) (fold_of[i] == k ? test : train).push_back(static_cast<Eigen::Index>(i));
        Eigen::MatrixXd xt(static_cast<Eigen::Index>(train.size()), x.cols());
        Eigen::VectorXd yt(static_cast<Eigen::Index>(train.size()));
        for (std::size_t r = 0; r < train.size(); ++r) {
            xt.row(static_cast<Eigen::Index>(r)) = x.row(train[r]);
            yt(static_cast<Eigen::Index>(r)) = y(train[r]);
        }
        const Eigen::RowVectorXd x_mean = xt.colwise().mean();
        const double y_mean = yt.mean();
        xt.rowwise() -= x_mean;
        yt.array() -= y_mean;
        const Eigen::MatrixXd path = lasso_path(xt, yt, out.lambdas);
        for (Eigen::Index row : test) {
            const Eigen::RowVectorXd centred = x.row(row) - x_mean;
            for (std::size_t l = 0; l < out.lambdas.size(); ++l) {
                const double pred = y_mean + centred.dot(path.col(static_cast<Eigen::Index>(l)));
                const double e = y(row) - pred;
                sse[l] += e * e;
            }
        }
    }
    out.cv_error.resize(sse.size());
    for (std::size_t l = 0; l < sse.size(); ++l) out.cv_error[l] = sse[l] / static_cast<double>(n);
    out.selected = static_cast<std::size_t>(std::min_element(out.cv_error.begin(), out.cv_error.end()) - out.cv_error.begin());

    const Eigen::MatrixXd full = lasso_path(x, y, out.lambdas);
    for (std::size_t k = 0; k < design.candidate_count(); ++k) {
        out.weights.weight[k] = std::abs(full(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(out.selected)));
    }
    return out;
}

}  // namespace gknet
