#include "gknet/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "gknet/errors.hpp"

namespace gknet {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kAuditTolerance = 1e-9;
constexpr std::size_t npos = static_cast<std::size_t>(-1);

double sigma_prior_mean() { return kNoiseScale / (kNoiseShape - 1.0); }

template <class T>
T pick_uniform(const std::vector<T>& items, Rng& rng) {
    std::uniform_int_distribution<std::size_t> dist(0, items.size() - 1);
    return items[dist(rng)];
}

std::size_t pick_index(std::size_t n, Rng& rng) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(rng);
}

double finite_or_neg_inf(double x) { return std::isfinite(x) ? x : kNegInf; }

template <class Proposal>
double draw_log_normal(const Proposal& q, Rng& rng) {
    std::normal_distribution<double> normal(q.center, q.scale);
    return std::exp(normal(rng));
}

}  // namespace

const char* to_string(MoveKind kind) {
    switch (kind) {
        case MoveKind::kinase_birth: return "kinase-birth";
        case MoveKind::kinase_death: return "kinase-death";
        case MoveKind::inhibitor_birth: return "inhibitor-birth";
        case MoveKind::inhibitor_death: return "inhibitor-death";
        case MoveKind::swap: return "kinase-swap";
    }
    return "unknown";
}

void validate(const SamplerConfig& config) {
    if (config.total_iters == 0 || config.burn_in >= config.total_iters) {
        throw InvalidInput(fmt::format("burn-in ({}) must be smaller than the iteration count ({})", config.burn_in,
                                       config.total_iters));
    }
    if (!(config.step_size_log > 0.0) || !std::isfinite(config.step_size_log)) {
        throw InvalidInput("step_size_log must be positive");
    }
    const auto& w = config.move_weights;
    for (double x : {w.kinase, w.inhibitor, w.swap, w.none}) {
        if (!(x > 0.0)) throw InvalidInput("move weights must be positive");
    }
    if (std::abs(w.kinase + w.inhibitor + w.swap + w.none - 1.0) > 1e-12) {
        throw InvalidInput("move weights must sum to one");
    }
    if (config.n_restarts == 0) throw InvalidInput("at least one restart is required");
    if (config.audit_interval == 0) throw InvalidInput("audit interval must be positive");
}

RjChain::RjChain(const Dataset& data, Species child, SamplerConfig config, ChildOptions options, std::size_t restart)
    : data_(data),
      child_(child),
      config_(std::move(config)),
      prior_([&] {
          if (child >= data.species()) {
              throw InvalidInput(fmt::format("child {} out of range (p = {})", child, data.species()));
          }
          std::vector<Species> candidates;
          for (Species j = 0; j < data.species(); ++j) {
              if (j != child && std::find(options.excluded.begin(), options.excluded.end(), j) == options.excluded.end()) {
                  candidates.push_back(j);
              }
          }
          return ModelPrior(child, std::move(candidates), config_.prior, options.prior_parents);
      }()),
      rng_(make_stream(config_.seed, stream::chain, child, restart)) {
    validate(config_);
    if (!data_.normalized) throw InvalidInput("the sampler requires unit-mean normalised data");
    const auto col = static_cast<Eigen::Index>(child_);
    log_x_.resize(data_.samples());
    for (std::size_t s = 0; s < data_.samples(); ++s) {
        const double x = data_.phospho(static_cast<Eigen::Index>(s), col);
        if (!(x > 0.0) || !std::isfinite(x)) {
            throw UndefinedLikelihood(fmt::format("nonpositive phospho value at sample {} of child {}", s, child_));
        }
        log_x_[s] = std::log(x);
    }
    x0_ = data_.unphospho.col(col).data();
    for (Species j = 0; j < data_.species(); ++j) mean_x_.push_back(data_.phospho.col(static_cast<Eigen::Index>(j)).mean());
    initialize(restart);
}

void RjChain::initialize(std::size_t restart) {
    KineticParams params;
    params.mu = empty_model_mean(data_, child_);
    if (restart == 0) {
        params.sigma = sigma_prior_mean();
        set_state(MechanismModel{child_, {}}, std::move(params));
        return;
    }
    MechanismModel model = prior_.sample(rng_);
    for (int attempt = 0;; ++attempt) {
        params.rates.clear();
        for (const auto& term : model.terms) {
            KinaseRates rate{draw_rate(rng_), draw_rate(rng_), {}};
            for (std::size_t m = 0; m < term.inhibitors.size(); ++m) rate.k_i.push_back(draw_rate(rng_));
            params.rates.push_back(std::move(rate));
        }
        params.sigma = draw_sigma(rng_);
        if (std::isfinite(fit(model, params).ssr) || attempt == 100) break;
    }
    set_state(std::move(model), std::move(params));
}

void RjChain::set_state(MechanismModel model, KineticParams params) {
    if (!matches(model, params)) throw InvalidInput("parameters do not match the mechanism");
    const double lp_model = prior_.log_prob(model);
    if (!std::isfinite(lp_model)) throw InvalidInput("state has zero prior mass");
    auto f = fit(model, params);
    state_.model = std::move(model);
    state_.params = std::move(params);
    state_.cached_log_prior = lp_model + log_prior_params(state_.params);
    state_.cached_log_lik = finite_or_neg_inf(log_likelihood_from_ssr(f.ssr, log_x_.size(), state_.params.sigma));
    ssr_ = f.ssr;
    contributions_ = std::move(f.contributions);
}

void RjChain::term_contribution(const KinaseTerm& term, const KinaseRates& rate, std::span<double> out) const {
    const std::size_t n = out.size();
    const double* xe = data_.phospho.col(static_cast<Eigen::Index>(term.kinase)).data();
    if (term.inhibitors.empty()) {
        for (std::size_t s = 0; s < n; ++s) out[s] = rate.v * xe[s] * x0_[s] / (x0_[s] + rate.k_e);
        return;
    }
    for (std::size_t s = 0; s < n; ++s) {
        double inhibition = 1.0;
        for (std::size_t m = 0; m < term.inhibitors.size(); ++m) {
            inhibition += data_.phospho(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(term.inhibitors[m])) /
                          rate.k_i[m];
        }
        out[s] = rate.v * xe[s] * x0_[s] / (x0_[s] + rate.k_e * inhibition);
    }
}

double RjChain::ssr_of(const std::vector<std::vector<double>>& contributions, double mu) const {
    const std::size_t n = log_x_.size();
    double ssr = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        double f = contributions.empty() ? mu : 0.0;
        for (const auto& c : contributions) f += c[s];
        if (!(f > 0.0) || !std::isfinite(f)) return std::numeric_limits<double>::quiet_NaN();
        const double r = log_x_[s] - std::log(f);
        ssr += r * r;
    }
    return ssr;
}

RjChain::Fit RjChain::fit(const MechanismModel& model, const KineticParams& params) const {
    Fit out;
    out.contributions.resize(model.terms.size());
    for (std::size_t t = 0; t < model.terms.size(); ++t) {
        out.contributions[t].resize(log_x_.size());
        term_contribution(model.terms[t], params.rates[t], out.contributions[t]);
    }
    out.ssr = ssr_of(out.contributions, params.mu);
    return out;
}

double RjChain::log_prior_of(const MechanismModel& model, const KineticParams& params) const {
    return prior_.log_prob(model) + log_prior_params(params);
}

RjChain::RateProposal RjChain::rate_proposal(const std::vector<double>& a, bool others_empty, const KinaseTerm& term,
                                             const KinaseRates& rates) const {
    const std::size_t n = log_x_.size();
    KinaseRates unit = rates;
    unit.v = 1.0;
    std::vector<double> g(n);
    term_contribution(term, unit, g);
    double u = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        if (!(g[s] > 0.0) || !std::isfinite(g[s])) return {};
        u += log_x_[s] - std::log(g[s]);
    }
    u /= static_cast<double>(n);

    // Gauss-Newton on u = log v with step halving; exact in one step when
    // the rest is empty.
    auto evaluate = [&](double uu, double* ssr, double* grad, double* info) {
        const double v = std::exp(uu);
        *ssr = *grad = *info = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const double f = a[s] + v * g[s];
            const double r = log_x_[s] - std::log(f);
            const double w = v * g[s] / f;
            *ssr += r * r;
            *grad += r * w;
            *info += w * w;
        }
    };
    double ssr, grad, info;
    evaluate(u, &ssr, &grad, &info);
    if (!others_empty) {
        for (int it = 0; it < 10; ++it) {
            double delta = std::clamp(grad / std::max(info, 1e-12), -3.0, 3.0);
            bool moved = false;
            for (int half = 0; half < 30; ++half, delta *= 0.5) {
                const double next = std::clamp(u + delta, -20.0, 20.0);
                double s2, g2, i2;
                evaluate(next, &s2, &g2, &i2);
                if (s2 < ssr) {
                    u = next;
                    ssr = s2;
                    grad = g2;
                    info = i2;
                    moved = true;
                    break;
                }
            }
            if (!moved || std::abs(delta) < 1e-3) break;
        }
    }
    const double sd = info > 0.0 ? 1.5 * state_.params.sigma / std::sqrt(info) : 1.0;
    return {u, std::clamp(sd, 0.02, 1.0)};
}

double RjChain::log_rate_weight(const RateProposal& q, double v) const {
    const double u = std::log(v);
    const double z = (u - q.center) / q.scale;
    const double log_q = -0.5 * z * z - std::log(q.scale) - 0.5 * std::log(2.0 * std::numbers::pi) - u;
    return log_prior_rate(v) - log_q;
}

namespace {

constexpr int kGridBins = 20;
constexpr double kGridLow = -4.0;
constexpr double kGridHigh = 4.5;
constexpr double kGridWidth = (kGridHigh - kGridLow) / kGridBins;
constexpr double kPriorShare = 0.2;

// Prior density of u = log x for a rate.
double log_prior_log_rate(double u) { return log_prior_rate(std::exp(u)) + u; }

}  // namespace

double RjChain::GridProposal::log_density(double u) const {
    double grid = kNegInf;
    if (u >= kGridLow && u < kGridHigh) {
        const int bin = std::min(kGridBins - 1, static_cast<int>((u - kGridLow) / kGridWidth));
        grid = log_mass[static_cast<std::size_t>(bin)] - std::log(kGridWidth);
    }
    const double a = std::log1p(-kPriorShare) + grid;
    const double b = std::log(kPriorShare) + log_prior_log_rate(u);
    const double hi = std::max(a, b);
    return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

double RjChain::GridProposal::draw(Rng& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (unif(rng) < kPriorShare) return std::log(draw_rate(rng));
    std::vector<double> mass(log_mass.size());
    for (std::size_t b = 0; b < mass.size(); ++b) mass[b] = std::exp(log_mass[b]);
    const std::size_t bin = detail::draw_weighted(mass, rng);
    return kGridLow + kGridWidth * (static_cast<double>(bin) + unif(rng));
}

RjChain::GridProposal RjChain::inhibitor_proposal(const std::vector<double>& others, const KinaseTerm& base,
                                                  const KinaseRates& base_rates, Species inhibitor) const {
    const std::size_t n = log_x_.size();
    KinaseTerm term = base;
    KinaseRates rates = base_rates;
    const auto at = std::lower_bound(term.inhibitors.begin(), term.inhibitors.end(), inhibitor) - term.inhibitors.begin();
    term.inhibitors.insert(term.inhibitors.begin() + at, inhibitor);
    rates.k_i.insert(rates.k_i.begin() + at, 1.0);

    std::vector<double> mine(n);
    GridProposal q;
    q.log_mass.resize(kGridBins);
    for (int b = 0; b < kGridBins; ++b) {
        const double u = kGridLow + kGridWidth * (b + 0.5);
        const double k_i = std::exp(u);
        const double c = 1.0 + mean_x_[inhibitor] / k_i;
        rates.k_i[static_cast<std::size_t>(at)] = k_i;
        rates.k_e = base_rates.k_e / c;
        term_contribution(term, rates, mine);
        double ssr = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const double r = log_x_[s] - std::log(others[s] + mine[s]);
            ssr += r * r;
        }
        double lp = log_likelihood_from_ssr(ssr, n, state_.params.sigma) + log_prior_log_rate(u) +
                    log_prior_rate(rates.k_e) - log_prior_rate(base_rates.k_e) - std::log(c);
        q.log_mass[static_cast<std::size_t>(b)] = std::isfinite(lp) ? lp : kNegInf;
    }
    double hi = *std::max_element(q.log_mass.begin(), q.log_mass.end());
    if (!std::isfinite(hi)) {
        std::fill(q.log_mass.begin(), q.log_mass.end(), -std::log(static_cast<double>(kGridBins)));
        return q;
    }
    double total = 0.0;
    for (double x : q.log_mass) total += std::exp(x - hi);
    const double norm = hi + std::log(total);
    for (double& x : q.log_mass) x -= norm;
    return q;
}

std::vector<double> RjChain::others_sum(std::size_t term) const {
    std::vector<double> out(log_x_.size(), 0.0);
    for (std::size_t t = 0; t < contributions_.size(); ++t) {
        if (t == term) continue;
        for (std::size_t s = 0; s < out.size(); ++s) out[s] += contributions_[t][s];
    }
    return out;
}

std::vector<Species> RjChain::non_kinases(const MechanismModel& model) const {
    std::vector<Species> out;
    for (Species j : prior_.candidates()) {
        if (!model.has_kinase(j)) out.push_back(j);
    }
    return out;
}

std::size_t RjChain::kinase_choice_count(const MechanismModel& model) const { return non_kinases(model).size(); }

std::optional<Proposal> RjChain::finish(MoveKind kind, MechanismModel model, KineticParams params,
                                        double log_proposal_ratio) const {
    Proposal p{kind, {}, 0.0, {}, kNegInf};
    const double lp_new = prior_.log_prob(model);
    const double lp_old = prior_.log_prob(state_.model);
    if (std::isfinite(lp_new)) {
        auto f = fit(model, params);
        p.ssr = f.ssr;
        p.contributions = std::move(f.contributions);
        p.state.cached_log_lik = finite_or_neg_inf(log_likelihood_from_ssr(f.ssr, log_x_.size(), params.sigma));
        p.state.cached_log_prior = lp_new + log_prior_params(params);
        if (std::isfinite(p.state.cached_log_lik)) {
            p.log_accept = (lp_new - lp_old) + (p.state.cached_log_lik - state_.cached_log_lik) + log_proposal_ratio;
        }
    } else {
        p.state.cached_log_lik = kNegInf;
        p.state.cached_log_prior = kNegInf;
    }
    p.state.model = std::move(model);
    p.state.params = std::move(params);
    return p;
}

std::optional<Proposal> RjChain::propose_kinase_birth(Species kinase, std::vector<Species> inhibitors,
                                                      KinaseRates rates, const RateProposal* hint) const {
    const auto& cands = prior_.candidates();
    if (!std::binary_search(cands.begin(), cands.end(), kinase) || state_.model.has_kinase(kinase)) return std::nullopt;
    std::sort(inhibitors.begin(), inhibitors.end());
    if (inhibitors.size() != rates.k_i.size() || inhibitors.size() > prior_.inhibitor_cap()) return std::nullopt;
    for (Species inh : inhibitors) {
        if (inh == kinase || !std::binary_search(cands.begin(), cands.end(), inh)) return std::nullopt;
    }

    const std::size_t d = state_.model.kinase_count();
    const std::size_t choices = kinase_choice_count(state_.model);
    const std::size_t m = inhibitors.size();
    const double log_forward = -std::log(static_cast<double>(choices)) -
                               std::log(static_cast<double>(prior_.inhibitor_cap() + 1)) -
                               std::log(binomial(cands.size() - 1, m));
    const double log_reverse = -std::log(static_cast<double>(d + 1));
    double log_weight = 0.0;
    if (config_.informed_proposals) {
        const auto q = hint ? *hint : rate_proposal(others_sum(npos), state_.model.empty(), KinaseTerm{kinase, inhibitors}, rates);
        log_weight = log_rate_weight(q, rates.v);
    }

    MechanismModel model = state_.model;
    KineticParams params = state_.params;
    const std::size_t at = static_cast<std::size_t>(
        std::lower_bound(model.terms.begin(), model.terms.end(), kinase,
                         [](const KinaseTerm& t, Species s) { return t.kinase < s; }) -
        model.terms.begin());
    model.terms.insert(model.terms.begin() + static_cast<std::ptrdiff_t>(at), KinaseTerm{kinase, std::move(inhibitors)});
    params.rates.insert(params.rates.begin() + static_cast<std::ptrdiff_t>(at), std::move(rates));
    return finish(MoveKind::kinase_birth, std::move(model), std::move(params), log_reverse - log_forward + log_weight);
}

std::optional<Proposal> RjChain::propose_kinase_death(std::size_t term) const {
    const std::size_t d = state_.model.kinase_count();
    if (term >= d) return std::nullopt;
    const auto& cands = prior_.candidates();
    const std::size_t m = state_.model.terms[term].inhibitors.size();
    double log_weight = 0.0;
    if (config_.informed_proposals) {
        const auto& rates = state_.params.rates[term];
        const auto q = rate_proposal(others_sum(term), d == 1, state_.model.terms[term], rates);
        log_weight = log_rate_weight(q, rates.v);
    }

    MechanismModel model = state_.model;
    KineticParams params = state_.params;
    model.terms.erase(model.terms.begin() + static_cast<std::ptrdiff_t>(term));
    params.rates.erase(params.rates.begin() + static_cast<std::ptrdiff_t>(term));

    const double log_forward = -std::log(static_cast<double>(d));
    const double log_reverse = -std::log(static_cast<double>(kinase_choice_count(model))) -
                               std::log(static_cast<double>(prior_.inhibitor_cap() + 1)) -
                               std::log(binomial(cands.size() - 1, m));
    return finish(MoveKind::kinase_death, std::move(model), std::move(params), log_reverse - log_forward - log_weight);
}

std::optional<Proposal> RjChain::propose_inhibitor_birth(std::size_t term, Species inhibitor, double k_i,
                                                         const GridProposal* hint) const {
    if (term >= state_.model.kinase_count()) return std::nullopt;
    const auto& cands = prior_.candidates();
    const auto& current = state_.model.terms[term];
    if (inhibitor == current.kinase || !std::binary_search(cands.begin(), cands.end(), inhibitor) ||
        std::binary_search(current.inhibitors.begin(), current.inhibitors.end(), inhibitor)) {
        return std::nullopt;
    }
    const std::size_t m = current.inhibitors.size();
    const std::size_t pool = cands.size() - 1 - m;

    MechanismModel model = state_.model;
    KineticParams params = state_.params;
    auto& inh = model.terms[term].inhibitors;
    auto& ks = params.rates[term].k_i;
    const auto at = std::lower_bound(inh.begin(), inh.end(), inhibitor) - inh.begin();
    inh.insert(inh.begin() + at, inhibitor);
    ks.insert(ks.begin() + at, k_i);

    double log_ratio = std::log(static_cast<double>(pool)) - std::log(static_cast<double>(m + 1));
    if (config_.informed_proposals) {
        const auto q = hint ? *hint : inhibitor_proposal(others_sum(term), current, state_.params.rates[term], inhibitor);
        log_ratio += log_prior_rate(k_i) - (q.log_density(std::log(k_i)) - std::log(k_i));
        // K_E' = K_E / c; the Jacobian of the map is 1/c.
        const double c = 1.0 + mean_x_[inhibitor] / k_i;
        double& k_e = params.rates[term].k_e;
        const double old = k_e;
        k_e = old / c;
        log_ratio += log_prior_rate(k_e) - log_prior_rate(old) - std::log(c);
    }
    return finish(MoveKind::inhibitor_birth, std::move(model), std::move(params), log_ratio);
}

std::optional<Proposal> RjChain::propose_inhibitor_death(std::size_t term, std::size_t position) const {
    if (term >= state_.model.kinase_count()) return std::nullopt;
    const std::size_t m = state_.model.terms[term].inhibitors.size();
    if (position >= m) return std::nullopt;
    const std::size_t pool_after = prior_.candidates().size() - m;

    MechanismModel model = state_.model;
    KineticParams params = state_.params;
    const Species removed = model.terms[term].inhibitors[position];
    const double k_i = params.rates[term].k_i[position];
    model.terms[term].inhibitors.erase(model.terms[term].inhibitors.begin() + static_cast<std::ptrdiff_t>(position));
    params.rates[term].k_i.erase(params.rates[term].k_i.begin() + static_cast<std::ptrdiff_t>(position));

    double log_ratio = std::log(static_cast<double>(m)) - std::log(static_cast<double>(pool_after));
    if (config_.informed_proposals) {
        const double c = 1.0 + mean_x_[removed] / k_i;
        double& k_e = params.rates[term].k_e;
        const double old = k_e;
        k_e = old * c;
        log_ratio += log_prior_rate(k_e) - log_prior_rate(old) + std::log(c);
        const auto q = inhibitor_proposal(others_sum(term), model.terms[term], params.rates[term], removed);
        log_ratio -= log_prior_rate(k_i) - (q.log_density(std::log(k_i)) - std::log(k_i));
    }
    return finish(MoveKind::inhibitor_death, std::move(model), std::move(params), log_ratio);
}

std::optional<Proposal> RjChain::propose_swap(std::size_t term, Species kinase, double v, double k_e,
                                              const RateProposal* hint) const {
    if (term >= state_.model.kinase_count()) return std::nullopt;
    const auto& cands = prior_.candidates();
    const auto& current = state_.model.terms[term];
    if (!std::binary_search(cands.begin(), cands.end(), kinase) || state_.model.has_kinase(kinase) ||
        std::binary_search(current.inhibitors.begin(), current.inhibitors.end(), kinase)) {
        return std::nullopt;
    }
    MechanismModel model = state_.model;
    KineticParams params = state_.params;
    KinaseTerm moved{kinase, current.inhibitors};
    KinaseRates rates{v, k_e, params.rates[term].k_i};
    double log_weight = 0.0;
    if (config_.informed_proposals) {
        const auto others = others_sum(term);
        const bool alone = state_.model.kinase_count() == 1;
        const auto q_new = hint ? *hint : rate_proposal(others, alone, moved, rates);
        const auto q_old = rate_proposal(others, alone, current, state_.params.rates[term]);
        log_weight = log_rate_weight(q_new, v) - log_rate_weight(q_old, state_.params.rates[term].v);
    }
    model.terms.erase(model.terms.begin() + static_cast<std::ptrdiff_t>(term));
    params.rates.erase(params.rates.begin() + static_cast<std::ptrdiff_t>(term));
    const auto at = std::lower_bound(model.terms.begin(), model.terms.end(), kinase,
                                     [](const KinaseTerm& t, Species s) { return t.kinase < s; }) -
                    model.terms.begin();
    model.terms.insert(model.terms.begin() + at, std::move(moved));
    params.rates.insert(params.rates.begin() + at, std::move(rates));
    // Forward and reverse target pools have equal size.
    return finish(MoveKind::swap, std::move(model), std::move(params), log_weight);
}

void RjChain::accept(Proposal proposal) {
    if (!matches(proposal.state.model, proposal.state.params)) {
        throw std::logic_error("accepted proposal with mismatched parameters");
    }
    state_ = std::move(proposal.state);
    ssr_ = proposal.ssr;
    contributions_ = std::move(proposal.contributions);
}

bool RjChain::structural_move(MoveKind kind) {
    auto& counter = stats_.structural[static_cast<std::size_t>(kind)];
    ++counter.proposed;
    const auto& model = state_.model;
    const auto& cands = prior_.candidates();
    std::optional<Proposal> proposal;

    switch (kind) {
        case MoveKind::kinase_birth: {
            const auto choices = non_kinases(model);
            if (choices.empty()) break;
            const Species kinase = pick_uniform(choices, rng_);
            std::uniform_int_distribution<std::size_t> count(0, prior_.inhibitor_cap());
            const std::size_t m = count(rng_);
            std::vector<Species> pool;
            for (Species j : cands) {
                if (j != kinase) pool.push_back(j);
            }
            auto inhibitors = detail::choose_subset(pool, m, rng_);
            KinaseRates rates{draw_rate(rng_), draw_rate(rng_), {}};
            for (std::size_t i = 0; i < m; ++i) rates.k_i.push_back(draw_rate(rng_));
            std::optional<RateProposal> q;
            if (config_.informed_proposals) {
                q = rate_proposal(others_sum(npos), model.empty(), KinaseTerm{kinase, inhibitors}, rates);
                rates.v = draw_log_normal(*q, rng_);
            }
            proposal = propose_kinase_birth(kinase, std::move(inhibitors), std::move(rates), q ? &*q : nullptr);
            break;
        }
        case MoveKind::kinase_death:
            if (model.empty()) break;
            proposal = propose_kinase_death(pick_index(model.kinase_count(), rng_));
            break;
        case MoveKind::inhibitor_birth: {
            if (model.empty()) break;
            const std::size_t term = pick_index(model.kinase_count(), rng_);
            const auto& t = model.terms[term];
            std::vector<Species> pool;
            for (Species j : cands) {
                if (j != t.kinase && !std::binary_search(t.inhibitors.begin(), t.inhibitors.end(), j)) pool.push_back(j);
            }
            if (pool.empty()) break;
            const Species inhibitor = pick_uniform(pool, rng_);
            std::optional<GridProposal> q;
            double k_i = 0.0;
            if (config_.informed_proposals) {
                q = inhibitor_proposal(others_sum(term), t, state_.params.rates[term], inhibitor);
                k_i = std::exp(q->draw(rng_));
            } else {
                k_i = draw_rate(rng_);
            }
            proposal = propose_inhibitor_birth(term, inhibitor, k_i, q ? &*q : nullptr);
            break;
        }
        case MoveKind::inhibitor_death: {
            if (model.empty()) break;
            const std::size_t term = pick_index(model.kinase_count(), rng_);
            const std::size_t m = model.terms[term].inhibitors.size();
            if (m == 0) break;
            proposal = propose_inhibitor_death(term, pick_index(m, rng_));
            break;
        }
        case MoveKind::swap: {
            if (model.empty()) break;
            const std::size_t term = pick_index(model.kinase_count(), rng_);
            const auto& t = model.terms[term];
            std::vector<Species> pool;
            for (Species j : cands) {
                if (!model.has_kinase(j) && !std::binary_search(t.inhibitors.begin(), t.inhibitors.end(), j)) {
                    pool.push_back(j);
                }
            }
            if (pool.empty()) break;
            const Species kinase = pick_uniform(pool, rng_);
            double v = draw_rate(rng_);
            const double k_e = draw_rate(rng_);
            std::optional<RateProposal> q;
            if (config_.informed_proposals) {
                const KinaseRates shape{1.0, k_e, state_.params.rates[term].k_i};
                q = rate_proposal(others_sum(term), model.kinase_count() == 1, KinaseTerm{kinase, t.inhibitors}, shape);
                v = draw_log_normal(*q, rng_);
            }
            proposal = propose_swap(term, kinase, v, k_e, q ? &*q : nullptr);
            break;
        }
    }
    if (!proposal) return false;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (std::log(unif(rng_)) < proposal->log_accept) {
        accept(std::move(*proposal));
        ++counter.accepted;
        return true;
    }
    return false;
}

double RjChain::sigma_log_accept(double sigma_new) const {
    const double sigma = state_.params.sigma;
    const std::size_t n = log_x_.size();
    const double ll_new = log_likelihood_from_ssr(ssr_, n, sigma_new);
    return log_prior_sigma(sigma_new) - log_prior_sigma(sigma) + std::log(sigma_new) - std::log(sigma) + ll_new -
           state_.cached_log_lik;
}

void RjChain::update_sigma(double step) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double z = normal(rng_);
    const double u = unif(rng_);
    ++stats_.within.proposed;
    const double sigma = state_.params.sigma;
    const double proposed = sigma * std::exp(step * z);
    if (!(proposed > 0.0) || !std::isfinite(proposed)) return;
    const double log_accept = sigma_log_accept(proposed);
    if (std::log(u) < log_accept) {
        state_.cached_log_prior += log_prior_sigma(proposed) - log_prior_sigma(sigma);
        state_.cached_log_lik = log_likelihood_from_ssr(ssr_, log_x_.size(), proposed);
        state_.params.sigma = proposed;
        ++stats_.within.accepted;
    }
}

void RjChain::update_rate(std::size_t term, double KinaseRates::*field, double step) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double z = normal(rng_);
    const double u = unif(rng_);
    ++stats_.within.proposed;

    KinaseRates rate = state_.params.rates[term];
    const double current = rate.*field;
    const double proposed = current * std::exp(step * z);
    if (!(proposed > 0.0) || !std::isfinite(proposed)) return;
    rate.*field = proposed;

    auto& fresh = scratch_;
    fresh.resize(log_x_.size());
    term_contribution(state_.model.terms[term], rate, fresh);
    std::swap(contributions_[term], fresh);
    const double ssr = ssr_of(contributions_, state_.params.mu);
    const double ll = finite_or_neg_inf(log_likelihood_from_ssr(ssr, log_x_.size(), state_.params.sigma));
    const double log_accept = log_prior_rate(proposed) - log_prior_rate(current) + std::log(proposed) -
                              std::log(current) + ll - state_.cached_log_lik;
    if (std::isfinite(ll) && std::log(u) < log_accept) {
        state_.cached_log_prior += log_prior_rate(proposed) - log_prior_rate(current);
        state_.cached_log_lik = ll;
        state_.params.rates[term].*field = proposed;
        ssr_ = ssr;
        ++stats_.within.accepted;
    } else {
        std::swap(contributions_[term], fresh);
    }
}

void RjChain::update_inhibitor(std::size_t term, std::size_t position, double step) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double z = normal(rng_);
    const double u = unif(rng_);
    ++stats_.within.proposed;

    KinaseRates rate = state_.params.rates[term];
    const double current = rate.k_i[position];
    const double proposed = current * std::exp(step * z);
    if (!(proposed > 0.0) || !std::isfinite(proposed)) return;
    rate.k_i[position] = proposed;

    auto& fresh = scratch_;
    fresh.resize(log_x_.size());
    term_contribution(state_.model.terms[term], rate, fresh);
    std::swap(contributions_[term], fresh);
    const double ssr = ssr_of(contributions_, state_.params.mu);
    const double ll = finite_or_neg_inf(log_likelihood_from_ssr(ssr, log_x_.size(), state_.params.sigma));
    const double log_accept = log_prior_rate(proposed) - log_prior_rate(current) + std::log(proposed) -
                              std::log(current) + ll - state_.cached_log_lik;
    if (std::isfinite(ll) && std::log(u) < log_accept) {
        state_.cached_log_prior += log_prior_rate(proposed) - log_prior_rate(current);
        state_.cached_log_lik = ll;
        state_.params.rates[term].k_i[position] = proposed;
        ssr_ = ssr;
        ++stats_.within.accepted;
    } else {
        std::swap(contributions_[term], fresh);
    }
}

void RjChain::within_model_update(double step) {
    for (std::size_t t = 0; t < state_.model.kinase_count(); ++t) {
        update_rate(t, &KinaseRates::v, step);
        update_rate(t, &KinaseRates::k_e, step);
        for (std::size_t m = 0; m < state_.model.terms[t].inhibitors.size(); ++m) update_inhibitor(t, m, step);
    }
    update_sigma(step);
}

void RjChain::step() {
    const auto& w = config_.move_weights;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t k = 0; k < config_.structural_moves; ++k) {
        const double u = unif(rng_);
        const bool birth = unif(rng_) < 0.5;
        if (u < w.kinase) {
            structural_move(birth ? MoveKind::kinase_birth : MoveKind::kinase_death);
        } else if (u < w.kinase + w.inhibitor) {
            structural_move(birth ? MoveKind::inhibitor_birth : MoveKind::inhibitor_death);
        } else if (u < w.kinase + w.inhibitor + w.swap) {
            structural_move(MoveKind::swap);
        }
    }
    within_model_update(config_.step_size_log);
    ++iteration_;
    if (iteration_ % config_.audit_interval == 0) audit();
}

void RjChain::audit() {
    if (!matches(state_.model, state_.params) || !prior_.admissible(state_.model)) {
        throw std::logic_error("chain state violates the mechanism invariants");
    }
    const double ll = log_likelihood(state_.model, state_.params, data_);
    const double lp = log_prior_of(state_.model, state_.params);
    if (std::abs(ll - state_.cached_log_lik) > kAuditTolerance || std::abs(lp - state_.cached_log_prior) > kAuditTolerance) {
        throw std::logic_error(fmt::format("cache audit failed: log-lik {} vs {}, log-prior {} vs {}",
                                           state_.cached_log_lik, ll, state_.cached_log_prior, lp));
    }
    state_.cached_log_lik = ll;
    state_.cached_log_prior = lp;
    ++stats_.audits;
}

ChainStats run_chain(const Dataset& data, Species child, const SamplerConfig& config, std::size_t restart,
                     const SampleObserver& observer, const ChildOptions& options) {
    RjChain chain(data, child, config, options, restart);
    for (std::size_t it = 0; it < config.total_iters; ++it) {
        chain.step();
        if (it >= config.burn_in && observer) observer(it, chain.state());
    }
    return chain.stats();
}

std::vector<ChainState> run_chain(const Dataset& data, Species child, const SamplerConfig& config,
                                  std::size_t restart, const ChildOptions& options) {
    std::vector<ChainState> out;
    out.reserve(config.total_iters - config.burn_in);
    run_chain(data, child, config, restart, [&](std::size_t, const ChainState& s) { out.push_back(s); }, options);
    return out;
}

EdgeTally::EdgeTally(std::size_t species, Species child)
    : child_(child), edge_(species, 0), kinase_(species, 0), inhibitor_(species, 0) {}

void EdgeTally::add(const MechanismModel& model) {
    ++samples_;
    for (Species j : model.parents()) ++edge_[j];
    for (const auto& term : model.terms) ++kinase_[term.kinase];
    std::vector<Species> inhibitors;
    for (const auto& term : model.terms) inhibitors.insert(inhibitors.end(), term.inhibitors.begin(), term.inhibitors.end());
    std::sort(inhibitors.begin(), inhibitors.end());
    inhibitors.erase(std::unique(inhibitors.begin(), inhibitors.end()), inhibitors.end());
    for (Species j : inhibitors) ++inhibitor_[j];
    ++models_[model];
}

double EdgeTally::edge_prob(Species j) const {
    return samples_ ? static_cast<double>(edge_[j]) / static_cast<double>(samples_) : 0.0;
}
double EdgeTally::kinase_prob(Species j) const {
    return samples_ ? static_cast<double>(kinase_[j]) / static_cast<double>(samples_) : 0.0;
}
double EdgeTally::inhibitor_prob(Species j) const {
    return samples_ ? static_cast<double>(inhibitor_[j]) / static_cast<double>(samples_) : 0.0;
}

ChildPosterior summarize(std::span<const EdgeTally> restarts) {
    if (restarts.empty()) throw InvalidInput("no restarts to summarise");
    const std::size_t p = restarts.front().species();
    ChildPosterior out;
    out.child = restarts.front().child();
    std::size_t total = 0;
    std::vector<std::size_t> edge(p, 0), kinase(p, 0), inhibitor(p, 0);
    for (const auto& tally : restarts) {
        if (tally.samples() == 0) throw InvalidInput("a restart produced no samples");
        if (tally.species() != p || tally.child() != out.child) throw InvalidInput("restart tallies disagree");
        total += tally.samples();
        std::vector<double> probs(p);
        for (Species j = 0; j < p; ++j) {
            edge[j] += tally.edge_count(j);
            kinase[j] += tally.kinase_count(j);
            inhibitor[j] += tally.inhibitor_count(j);
            probs[j] = tally.edge_prob(j);
        }
        out.restart_edge_prob.push_back(std::move(probs));
        for (const auto& [model, count] : tally.model_counts()) out.model_freq[model] += static_cast<double>(count);
    }
    out.samples = total;
    const double n = static_cast<double>(total);
    out.edge_prob.resize(p);
    out.kinase_prob.resize(p);
    out.inhibitor_prob.resize(p);
    out.discrepancy.assign(p, 0.0);
    for (Species j = 0; j < p; ++j) {
        out.edge_prob[j] = static_cast<double>(edge[j]) / n;
        out.kinase_prob[j] = static_cast<double>(kinase[j]) / n;
        out.inhibitor_prob[j] = static_cast<double>(inhibitor[j]) / n;
        double lo = 1.0, hi = 0.0;
        for (const auto& r : out.restart_edge_prob) {
            lo = std::min(lo, r[j]);
            hi = std::max(hi, r[j]);
        }
        out.discrepancy[j] = hi - lo;
        out.max_discrepancy = std::max(out.max_discrepancy, out.discrepancy[j]);
    }
    for (auto& [model, freq] : out.model_freq) freq /= n;
    out.converged = out.max_discrepancy <= kConvergenceTolerance;
    return out;
}

ChildPosterior summarize(std::size_t species, Species child,
                         const std::vector<std::vector<ChainState>>& samples_per_restart) {
    std::vector<EdgeTally> tallies;
    for (const auto& samples : samples_per_restart) {
        EdgeTally tally(species, child);
        for (const auto& s : samples) tally.add(s.model);
        tallies.push_back(std::move(tally));
    }
    return summarize(tallies);
}

double PosteriorSummary::nonconverged_fraction() const {
    std::size_t pairs = 0, flagged = 0;
    for (Species i : children) {
        for (Species j = 0; j < species; ++j) {
            if (j == i) continue;
            ++pairs;
            if (discrepancy(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) > kConvergenceTolerance) ++flagged;
        }
    }
    return pairs ? static_cast<double>(flagged) / static_cast<double>(pairs) : 0.0;
}

PosteriorSummary infer_network(const Dataset& data, const SamplerConfig& config, std::span<const Species> children,
                               const InferenceOptions& options) {
    validate(config);
    const std::size_t p = data.species();
    for (Species c : children) {
        if (c >= p) throw InvalidInput(fmt::format("child index {} out of range (p = {})", c, p));
    }
    const std::size_t restarts = config.n_restarts;
    const std::size_t jobs = children.size() * restarts;

    std::vector<std::optional<EdgeTally>> tallies(jobs);
    std::vector<ChainStats> stats(jobs);
    std::vector<std::exception_ptr> errors(jobs);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t job = next++; job < jobs; job = next++) {
            const Species child = children[job / restarts];
            const std::size_t restart = job % restarts;
            try {
                ChildOptions child_options;
                if (auto it = options.child_options.find(child); it != options.child_options.end()) {
                    child_options = it->second;
                }
                EdgeTally tally(p, child);
                stats[job] = run_chain(
                    data, child, config, restart,
                    [&](std::size_t iteration, const ChainState& state) {
                        tally.add(state.model);
                        if (options.trace) options.trace(child, restart, iteration, state);
                    },
                    child_options);
                tallies[job] = std::move(tally);
            } catch (...) {
                errors[job] = std::current_exception();
            }
        }
    };

    std::size_t threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, std::max<std::size_t>(jobs, 1));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    PosteriorSummary out;
    out.species = p;
    out.children.assign(children.begin(), children.end());
    const auto P = static_cast<Eigen::Index>(p);
    out.edge_prob = Eigen::MatrixXd::Zero(P, P);
    out.kinase_prob = Eigen::MatrixXd::Zero(P, P);
    out.inhibitor_prob = Eigen::MatrixXd::Zero(P, P);
    out.discrepancy = Eigen::MatrixXd::Zero(P, P);
    out.restart_edge_prob.assign(restarts, Eigen::MatrixXd::Zero(P, P));
    out.model_freq.resize(p);
    out.stats = stats;
    for (std::size_t c = 0; c < children.size(); ++c) {
        std::vector<EdgeTally> chain_tallies;
        for (std::size_t r = 0; r < restarts; ++r) chain_tallies.push_back(std::move(*tallies[c * restarts + r]));
        const auto post = summarize(chain_tallies);
        const auto i = static_cast<Eigen::Index>(children[c]);
        for (Species j = 0; j < p; ++j) {
            const auto row = static_cast<Eigen::Index>(j);
            out.edge_prob(row, i) = post.edge_prob[j];
            out.kinase_prob(row, i) = post.kinase_prob[j];
            out.inhibitor_prob(row, i) = post.inhibitor_prob[j];
            out.discrepancy(row, i) = post.discrepancy[j];
            for (std::size_t r = 0; r < restarts; ++r) out.restart_edge_prob[r](row, i) = post.restart_edge_prob[r][j];
        }
        out.model_freq[children[c]] = post.model_freq;
        out.max_discrepancy = std::max(out.max_discrepancy, post.max_discrepancy);
    }
    out.converged = out.max_discrepancy <= kConvergenceTolerance;
    return out;
}

}  // namespace gknet
