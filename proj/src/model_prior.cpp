#include "gknet/model_prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "gknet/errors.hpp"

namespace gknet {
namespace {

using Count = __int128;

Count exact_binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    Count out = 1;
    for (std::size_t i = 1; i <= k; ++i) out = out * static_cast<Count>(n - k + i) / static_cast<Count>(i);
    return out;
}

double log_sum_exp(const std::vector<double>& xs) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : xs) hi = std::max(hi, x);
    if (!std::isfinite(hi)) return hi;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - hi);
    return hi + std::log(acc);
}

}  // namespace

double binomial(std::size_t n, std::size_t k) { return static_cast<double>(exact_binomial(n, k)); }

ModelPrior::ModelPrior(Species child, std::vector<Species> candidates, ModelPriorConfig config,
                       std::vector<Species> prior_parents)
    : child_(child), candidates_(std::move(candidates)), config_(config) {
    std::sort(candidates_.begin(), candidates_.end());
    candidates_.erase(std::unique(candidates_.begin(), candidates_.end()), candidates_.end());
    if (std::find(candidates_.begin(), candidates_.end(), child_) != candidates_.end()) {
        throw InvalidInput("a child cannot be its own candidate parent");
    }
    std::size_t universe = child_ + 1;
    if (!candidates_.empty()) universe = std::max(universe, candidates_.back() + 1);
    for (Species j : prior_parents) universe = std::max(universe, j + 1);
    is_candidate_.assign(universe, false);
    in_prior_.assign(universe, false);
    for (Species j : candidates_) is_candidate_[j] = true;
    for (Species j : prior_parents) {
        if (j < universe && is_candidate_[j] && !in_prior_[j]) {
            in_prior_[j] = true;
            ++prior_in_candidates_;
        }
    }

    const std::size_t q = candidates_.size();
    inhibitor_cap_ = q == 0 ? 0 : std::min(config_.m_max, q - 1);
    max_parents_ = std::min(q, config_.d_max * (1 + inhibitor_cap_));

    // Bound on log2 f(t) so the integer inclusion-exclusion cannot overflow.
    const double bits = static_cast<double>(max_parents_) +
                        static_cast<double>(config_.d_max) * std::max<double>(0.0, static_cast<double>(max_parents_) - 1.0);
    if (bits > 120.0) {
        throw InvalidInput(fmt::format("model caps d_max = {}, m_max = {} are too large", config_.d_max, config_.m_max));
    }

    std::vector<Count> within(max_parents_ + 1);
    for (std::size_t t = 0; t <= max_parents_; ++t) {
        const Count h = static_cast<Count>(subsets_in(t));
        Count total = 0;
        Count power = 1;
        for (std::size_t d = 0; d <= std::min(config_.d_max, t); ++d) {
            total += exact_binomial(t, d) * power;
            power *= h;
        }
        within[t] = total;
    }
    within_.resize(max_parents_ + 1);
    exact_.resize(max_parents_ + 1);
    for (std::size_t s = 0; s <= max_parents_; ++s) {
        Count g = 0;
        for (std::size_t t = 0; t <= s; ++t) {
            const Count term = exact_binomial(s, t) * within[t];
            g += ((s - t) % 2 == 0) ? term : -term;
        }
        within_[s] = static_cast<double>(within[s]);
        exact_[s] = static_cast<double>(g);
        if (g > 0) ++group_count_;
    }

    const std::size_t r = prior_in_candidates_;
    log_tilt_.assign(max_parents_ + 1, -std::numeric_limits<double>::infinity());
    std::vector<double> log_group(max_parents_ + 1, -std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s <= max_parents_; ++s) {
        if (exact_[s] <= 0.0) continue;
        std::vector<double> terms;
        for (std::size_t o = 0; o <= std::min(r, s); ++o) {
            if (s - o > q - r) continue;
            terms.push_back(std::log(binomial(r, o)) + std::log(binomial(q - r, s - o)) +
                            config_.kappa * static_cast<double>(o));
        }
        log_tilt_[s] = log_sum_exp(terms);
        log_group[s] = log_tilt_[s] - std::log(binomial(q, s)) - std::log(static_cast<double>(group_count_));
    }
    log_norm_ = log_sum_exp(log_group);
    group_mass_.resize(max_parents_ + 1);
    for (std::size_t s = 0; s <= max_parents_; ++s) group_mass_[s] = std::exp(log_group[s] - log_norm_);
}

std::size_t ModelPrior::subsets_in(std::size_t s) const {
    if (s == 0) return 0;
    std::size_t total = 0;
    for (std::size_t m = 0; m <= std::min(inhibitor_cap_, s - 1); ++m) {
        total += static_cast<std::size_t>(exact_binomial(s - 1, m));
    }
    return total;
}

std::size_t ModelPrior::overlap(const std::vector<Species>& parents) const {
    std::size_t o = 0;
    for (Species j : parents) {
        if (j < in_prior_.size() && in_prior_[j]) ++o;
    }
    return o;
}

bool ModelPrior::admissible(const MechanismModel& model) const {
    if (model.child != child_ || model.kinase_count() > config_.d_max) return false;
    auto candidate = [this](Species j) { return j < is_candidate_.size() && is_candidate_[j]; };
    for (std::size_t t = 0; t < model.terms.size(); ++t) {
        const auto& term = model.terms[t];
        if (!candidate(term.kinase) || term.inhibitors.size() > inhibitor_cap_) return false;
        if (t > 0 && model.terms[t - 1].kinase >= term.kinase) return false;
        for (std::size_t m = 0; m < term.inhibitors.size(); ++m) {
            const Species inh = term.inhibitors[m];
            if (!candidate(inh) || inh == term.kinase) return false;
            if (m > 0 && term.inhibitors[m - 1] >= inh) return false;
        }
    }
    return true;
}

double ModelPrior::log_prob(const MechanismModel& model) const {
    if (!admissible(model)) return -std::numeric_limits<double>::infinity();
    const auto parents = model.parents();
    const std::size_t s = parents.size();
    return config_.kappa * static_cast<double>(overlap(parents)) - std::log(static_cast<double>(group_count_)) -
           log_group_size(s) - log_norm_;
}

double ModelPrior::log_group_size(std::size_t s) const {
    if (s > max_parents_ || exact_[s] <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(binomial(candidates_.size(), s)) + std::log(exact_[s]);
}

double ModelPrior::group_mass(std::size_t s) const { return s < group_mass_.size() ? group_mass_[s] : 0.0; }

double log_prior_model(const MechanismModel& model, const std::optional<MechanismModel>& prior_model,
                       std::size_t species, const ModelPriorConfig& config) {
    std::vector<Species> candidates;
    for (Species j = 0; j < species; ++j) {
        if (j != model.child) candidates.push_back(j);
    }
    std::vector<Species> prior_parents;
    if (prior_model) prior_parents = prior_model->parents();
    return ModelPrior(model.child, std::move(candidates), config, std::move(prior_parents)).log_prob(model);
}

}  // namespace gknet
