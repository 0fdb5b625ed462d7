#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "gknet/kinetics.hpp"

namespace gknet {

struct ModelPriorConfig {
    std::size_t d_max = 3;  // kinases per child
    std::size_t m_max = 2;  // inhibitors per kinase
    double kappa = 0.0;     // log-weight per parent shared with the prior model
};

/// Objective prior over the mechanisms of one child.
///
/// Mechanisms are grouped by parent-set size |pi_i|. Every non-empty group
/// receives the same base mass, spread uniformly over the mechanism
/// configurations in it. That base weight is multiplied by
/// exp(kappa * |pi_i intersect pi_i^0|) and the result renormalised over the
/// whole space, so kappa = 0 (or an empty prior model) gives exactly the
/// uniform-over-in-degree prior.
///
/// The number of configurations whose parent set equals a fixed s-set is
/// obtained by inclusion-exclusion over the count of configurations whose
/// parents lie inside an s-set, so nothing is enumerated.
class ModelPrior {
  public:
    /// candidates: species allowed as parents of child (child excluded).
    ModelPrior(Species child, std::vector<Species> candidates, ModelPriorConfig config,
               std::vector<Species> prior_parents = {});

    /// log p(M); -infinity when a cap is violated or a parent is not a
    /// candidate.
    double log_prob(const MechanismModel& model) const;

    bool admissible(const MechanismModel& model) const;

    /// Draws a mechanism exactly from the prior.
    template <class Rng>
    MechanismModel sample(Rng& rng) const;

    Species child() const { return child_; }
    const std::vector<Species>& candidates() const { return candidates_; }
    const ModelPriorConfig& config() const { return config_; }
    /// Largest reachable parent-set size.
    std::size_t max_parents() const { return max_parents_; }
    /// Number of parent-set sizes that carry mass.
    std::size_t group_count() const { return group_count_; }
    /// log of the number of mechanisms with exactly s parents (-inf if none).
    double log_group_size(std::size_t s) const;
    /// Prior probability of the parent-set-size group s.
    double group_mass(std::size_t s) const;
    /// Effective inhibitor cap, min(m_max, candidates - 1).
    std::size_t inhibitor_cap() const { return inhibitor_cap_; }

  private:
    std::size_t overlap(const std::vector<Species>& parents) const;
    std::size_t subsets_in(std::size_t s) const;  // h(s): inhibitor sets of one kinase inside an s-set

    Species child_;
    std::vector<Species> candidates_;
    std::vector<bool> is_candidate_;
    std::vector<bool> in_prior_;
    ModelPriorConfig config_;
    std::size_t prior_in_candidates_ = 0;
    std::size_t inhibitor_cap_ = 0;
    std::size_t max_parents_ = 0;
    std::size_t group_count_ = 0;
    std::vector<double> within_;      // f(s): configurations with parents inside a fixed s-set
    std::vector<double> exact_;       // g(s): configurations with parents equal to a fixed s-set
    std::vector<double> log_tilt_;    // log sum_o C(r,o) C(q-r,s-o) e^{kappa o}
    std::vector<double> group_mass_;
    double log_norm_ = 0.0;
};

/// Free-function form: log p(model) given an optional prior model and the
/// number of species (every other species is a candidate).
double log_prior_model(const MechanismModel& model, const std::optional<MechanismModel>& prior_model,
                       std::size_t species, const ModelPriorConfig& config);

/// Binomial coefficient as a double (exact for the sizes used here).
double binomial(std::size_t n, std::size_t k);

namespace detail {

/// Uniform k-subset of items, returned sorted.
template <class Rng>
std::vector<Species> choose_subset(const std::vector<Species>& items, std::size_t k, Rng& rng) {
    std::vector<Species> pool = items;
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

template <class Rng>
std::size_t draw_weighted(const std::vector<double>& weights, Rng& rng) {
    std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
    return dist(rng);
}

}  // namespace detail

template <class Rng>
MechanismModel ModelPrior::sample(Rng& rng) const {
    const std::size_t q = candidates_.size();
    const std::size_t r = prior_in_candidates_;
    const std::size_t s = detail::draw_weighted(group_mass_, rng);

    MechanismModel model;
    model.child = child_;
    if (s == 0) return model;

    // Parent set U: o members from the prior model, tilted by kappa.
    std::vector<Species> prior_pool, other_pool;
    for (Species j : candidates_) (in_prior_[j] ? prior_pool : other_pool).push_back(j);
    std::vector<double> overlap_weights(std::min(r, s) + 1, 0.0);
    for (std::size_t o = 0; o < overlap_weights.size(); ++o) {
        if (s - o > q - r) continue;
        overlap_weights[o] = binomial(r, o) * binomial(q - r, s - o) * std::exp(config_.kappa * static_cast<double>(o));
    }
    const std::size_t o = detail::draw_weighted(overlap_weights, rng);
    std::vector<Species> parent_set = detail::choose_subset(prior_pool, o, rng);
    auto rest = detail::choose_subset(other_pool, s - o, rng);
    parent_set.insert(parent_set.end(), rest.begin(), rest.end());
    std::sort(parent_set.begin(), parent_set.end());

    // Uniform configuration with parents inside U, accepted when they fill U.
    const std::size_t m_cap = std::min(inhibitor_cap_, s - 1);
    std::vector<double> kinase_weights(std::min(config_.d_max, s) + 1, 0.0);
    const double h = static_cast<double>(subsets_in(s));
    for (std::size_t d = 0; d < kinase_weights.size(); ++d) {
        kinase_weights[d] = binomial(s, d) * std::pow(h, static_cast<double>(d));
    }
    std::vector<double> inhibitor_weights(m_cap + 1);
    for (std::size_t m = 0; m <= m_cap; ++m) inhibitor_weights[m] = binomial(s - 1, m);

    for (;;) {
        model.terms.clear();
        const std::size_t d = detail::draw_weighted(kinase_weights, rng);
        for (Species e : detail::choose_subset(parent_set, d, rng)) {
            std::vector<Species> others;
            for (Species j : parent_set) {
                if (j != e) others.push_back(j);
            }
            const std::size_t m = detail::draw_weighted(inhibitor_weights, rng);
            model.terms.push_back({e, detail::choose_subset(others, m, rng)});
        }
        if (model.parents().size() == s) return model;
    }
}

}  // namespace gknet
