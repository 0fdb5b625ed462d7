#include "gknet/kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "gknet/errors.hpp"

namespace gknet {

std::size_t MechanismModel::inhibitor_count() const {
    std::size_t count = 0;
    for (const auto& term : terms) count += term.inhibitors.size();
    return count;
}

bool MechanismModel::has_kinase(Species j) const { return term_index(j) < terms.size(); }

std::size_t MechanismModel::term_index(Species j) const {
    auto it = std::lower_bound(terms.begin(), terms.end(), j,
                               [](const KinaseTerm& t, Species s) { return t.kinase < s; });
    if (it != terms.end() && it->kinase == j) return static_cast<std::size_t>(it - terms.begin());
    return terms.size();
}

std::vector<Species> MechanismModel::parents() const {
    std::vector<Species> out;
    for (const auto& term : terms) {
        out.push_back(term.kinase);
        out.insert(out.end(), term.inhibitors.begin(), term.inhibitors.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool MechanismModel::is_parent(Species j) const { return has_kinase(j) || is_inhibitor(j); }

bool MechanismModel::is_inhibitor(Species j) const {
    return std::any_of(terms.begin(), terms.end(), [j](const KinaseTerm& t) {
        return std::binary_search(t.inhibitors.begin(), t.inhibitors.end(), j);
    });
}

namespace {

template <class Name>
std::string format_signature(const MechanismModel& model, Name name) {
    if (model.terms.empty()) return "empty";
    std::string out;
    for (std::size_t t = 0; t < model.terms.size(); ++t) {
        if (t) out += ';';
        out += name(model.terms[t].kinase);
        out += '[';
        for (std::size_t m = 0; m < model.terms[t].inhibitors.size(); ++m) {
            if (m) out += '|';
            out += name(model.terms[t].inhibitors[m]);
        }
        out += ']';
    }
    return out;
}

}  // namespace

std::string MechanismModel::signature() const {
    return format_signature(*this, [](Species j) { return std::to_string(j); });
}

std::string MechanismModel::signature(std::span<const std::string> names) const {
    return format_signature(*this, [names](Species j) { return names[j]; });
}

void validate(const MechanismModel& model, std::size_t species) {
    if (model.child >= species) {
        throw InvalidInput(fmt::format("child index {} out of range (p = {})", model.child, species));
    }
    for (std::size_t t = 0; t < model.terms.size(); ++t) {
        const auto& term = model.terms[t];
        if (term.kinase >= species || term.kinase == model.child) {
            throw InvalidInput(fmt::format("invalid kinase {} for child {}", term.kinase, model.child));
        }
        if (t > 0 && model.terms[t - 1].kinase >= term.kinase) {
            throw InvalidInput("kinases must be strictly increasing");
        }
        for (std::size_t m = 0; m < term.inhibitors.size(); ++m) {
            Species inh = term.inhibitors[m];
            if (inh >= species || inh == model.child || inh == term.kinase) {
                throw InvalidInput(
                    fmt::format("invalid inhibitor {} for kinase {} of child {}", inh, term.kinase, model.child));
            }
            if (m > 0 && term.inhibitors[m - 1] >= inh) {
                throw InvalidInput("inhibitors must be strictly increasing");
            }
        }
    }
}

bool matches(const MechanismModel& model, const KineticParams& params) {
    if (model.terms.size() != params.rates.size()) return false;
    for (std::size_t t = 0; t < model.terms.size(); ++t) {
        if (model.terms[t].inhibitors.size() != params.rates[t].k_i.size()) return false;
    }
    return true;
}

double empty_model_mean(const Dataset& data, Species child) {
    if (data.samples() == 0) return 1.0;
    return data.phospho.col(static_cast<Eigen::Index>(child)).mean();
}

double eval_gk(const MechanismModel& model, const KineticParams& params, const Dataset& data,
               std::size_t sample) {
    if (!matches(model, params)) throw InvalidInput("parameters do not match mechanism");
    const auto row = static_cast<Eigen::Index>(sample);
    double f;
    if (model.terms.empty()) {
        f = params.mu;
    } else {
        const double x0 = data.unphospho(row, static_cast<Eigen::Index>(model.child));
        f = 0.0;
        for (std::size_t t = 0; t < model.terms.size(); ++t) {
            const auto& term = model.terms[t];
            const auto& rate = params.rates[t];
            double inhibition = 1.0;
            for (std::size_t m = 0; m < term.inhibitors.size(); ++m) {
                inhibition += data.phospho(row, static_cast<Eigen::Index>(term.inhibitors[m])) / rate.k_i[m];
            }
            const double xe = data.phospho(row, static_cast<Eigen::Index>(term.kinase));
            f += rate.v * xe * x0 / (x0 + rate.k_e * inhibition);
        }
    }
    if (!std::isfinite(f)) throw InvalidInput("non-finite Goldbeter-Koshland prediction");
    return f;
}

void predict_gk(const MechanismModel& model, const KineticParams& params, const Dataset& data,
                std::span<double> out) {
    if (out.size() != data.samples()) throw InvalidInput("prediction buffer has wrong length");
    for (std::size_t s = 0; s < out.size(); ++s) out[s] = eval_gk(model, params, data, s);
}

double log_likelihood_from_ssr(double ssr, std::size_t samples, double sigma) {
    const double var = sigma * sigma;
    return -0.5 * static_cast<double>(samples) * std::log(2.0 * std::numbers::pi * var) - ssr / (2.0 * var);
}

double log_likelihood(const MechanismModel& model, const KineticParams& params,
                      const Dataset& data) {
    if (!(params.sigma > 0.0)) throw DomainError("sigma must be positive");
    const auto child = static_cast<Eigen::Index>(model.child);
    double ssr = 0.0;
    for (std::size_t s = 0; s < data.samples(); ++s) {
        const double x = data.phospho(static_cast<Eigen::Index>(s), child);
        const double f = eval_gk(model, params, data, s);
        if (!(x > 0.0) || !(f > 0.0)) {
            throw UndefinedLikelihood(
                fmt::format("nonpositive value in log-likelihood at sample {} (X = {}, f = {})", s, x, f));
        }
        const double r = std::log(x) - std::log(f);
        ssr += r * r;
    }
    return log_likelihood_from_ssr(ssr, data.samples(), params.sigma);
}

double log_gamma_density(double x, double shape, double scale) {
    if (!(x > 0.0)) throw DomainError(fmt::format("gamma density evaluated at {}", x));
    return -std::lgamma(shape) - shape * std::log(scale) + (shape - 1.0) * std::log(x) - x / scale;
}

double log_inverse_gamma_density(double x, double shape, double scale) {
    if (!(x > 0.0)) throw DomainError(fmt::format("inverse-gamma density evaluated at {}", x));
    return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double log_prior_rate(double x) { return log_gamma_density(x, kRateShape, kRateScale); }

double log_prior_sigma(double sigma) {
    return log_inverse_gamma_density(sigma, kNoiseShape, kNoiseScale);
}

double log_prior_params(const KineticParams& params) {
    double lp = log_prior_sigma(params.sigma);
    for (const auto& rate : params.rates) {
        lp += log_prior_rate(rate.v) + log_prior_rate(rate.k_e);
        for (double k : rate.k_i) lp += log_prior_rate(k);
    }
    return lp;
}

std::size_t param_dimension(const MechanismModel& model) {
    return 2 * model.kinase_count() + model.inhibitor_count() + 1;
}

}  // namespace gknet
