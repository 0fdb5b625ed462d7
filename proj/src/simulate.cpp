#include "gknet/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "gknet/errors.hpp"
#include "gknet/log.hpp"
#include "gknet/model_prior.hpp"
#include "gknet/rng.hpp"

namespace gknet {

void validate(const SimConfig& c) {
    if (c.p < 2) throw InvalidInput("simulation needs p >= 2");
    if (c.n < 1) throw InvalidInput("simulation needs n >= 1");
    if (!(c.noise_sd >= 0.0) || !std::isfinite(c.noise_sd)) throw InvalidInput("noise s.d. must be >= 0");
    if (!(c.root_prob >= 0.0 && c.root_prob <= 1.0)) throw InvalidInput("root probability must lie in [0, 1]");
    if (c.max_kinases < 1) throw InvalidInput("max_kinases must be >= 1");
    if (!(c.total_sd >= 0.0) || !std::isfinite(c.total_sd)) throw InvalidInput("total s.d. must be >= 0");
    if (!(0.0 < c.phi_low && c.phi_low <= c.phi_high && c.phi_high < 1.0)) {
        throw InvalidInput("phi range must satisfy 0 < low <= high < 1");
    }
}

const char* to_string(EdgeRole role) { return role == EdgeRole::kinase ? "kinase" : "inhibitor"; }

std::vector<TruthEdge> GroundTruthNetwork::edges() const {
    std::vector<TruthEdge> out;
    for (Species i = 0; i < species(); ++i) {
        std::vector<TruthEdge> local;
        for (const auto& term : mechanisms[i].terms) {
            local.push_back({i, term.kinase, EdgeRole::kinase});
            for (Species inh : term.inhibitors) local.push_back({i, inh, EdgeRole::inhibitor});
        }
        std::sort(local.begin(), local.end(), [](const TruthEdge& a, const TruthEdge& b) {
            return std::pair(a.parent, a.role) < std::pair(b.parent, b.role);
        });
        local.erase(std::unique(local.begin(), local.end(),
                                [](const TruthEdge& a, const TruthEdge& b) {
                                    return a.parent == b.parent && a.role == b.role;
                                }),
                    local.end());
        out.insert(out.end(), local.begin(), local.end());
    }
    return out;
}

void validate(const GroundTruthNetwork& net) {
    const std::size_t p = net.species();
    if (net.params.size() != p || net.phi.size() != p) throw InvalidInput("network arrays disagree in length");
    for (Species i = 0; i < p; ++i) {
        validate(net.mechanisms[i], p);
        if (net.mechanisms[i].child != i) throw InvalidInput(fmt::format("mechanism {} has child {}", i, net.mechanisms[i].child));
        if (!matches(net.mechanisms[i], net.params[i])) throw InvalidInput(fmt::format("parameters of node {} do not match", i));
        if (net.is_root(i) != net.phi[i].has_value()) throw InvalidInput(fmt::format("phi must be set exactly for roots (node {})", i));
        if (net.phi[i] && !(*net.phi[i] > 0.0 && *net.phi[i] < 1.0)) throw InvalidInput(fmt::format("phi of node {} outside (0, 1)", i));
    }
}

GroundTruthNetwork generate_network(const SimConfig& config, std::size_t attempt) {
    validate(config);
    auto rng = make_stream(config.seed, stream::network, attempt);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> phi(config.phi_low, config.phi_high);

    GroundTruthNetwork net;
    const std::size_t p = config.p;
    for (Species i = 0; i < p; ++i) {
        net.names.push_back(fmt::format("P{}", i + 1));
        MechanismModel model{i, {}};
        KineticParams params;
        // ρ = 1 must give only roots and ρ = 0 none, so compare strictly.
        const bool root = unit(rng) < config.root_prob;
        if (root) {
            net.phi.emplace_back(phi(rng));
        } else {
            std::vector<Species> others;
            for (Species j = 0; j < p; ++j) {
                if (j != i) others.push_back(j);
            }
            std::uniform_int_distribution<std::size_t> kcount(1, std::min(config.max_kinases, others.size()));
            const auto kinases = detail::choose_subset(others, kcount(rng), rng);
            std::vector<Species> pool;
            for (Species j : others) {
                if (!std::binary_search(kinases.begin(), kinases.end(), j)) pool.push_back(j);
            }
            for (Species e : kinases) {
                std::uniform_int_distribution<std::size_t> mcount(0, std::min(config.max_inhibitors, pool.size()));
                KinaseTerm term{e, detail::choose_subset(pool, mcount(rng), rng)};
                KinaseRates rates;
                rates.v = draw_rate(rng);
                rates.k_e = draw_rate(rng);
                for (std::size_t k = 0; k < term.inhibitors.size(); ++k) rates.k_i.push_back(draw_rate(rng));
                model.terms.push_back(std::move(term));
                params.rates.push_back(std::move(rates));
            }
            net.phi.emplace_back(std::nullopt);
        }
        params.sigma = config.noise_sd;
        net.mechanisms.push_back(std::move(model));
        net.params.push_back(std::move(params));
    }
    return net;
}

double balance_rhs(const GroundTruthNetwork& net, std::span<const double> x, std::span<const double> totals,
                   Species i, double xi) {
    const auto& model = net.mechanisms[i];
    const auto& params = net.params[i];
    const double free = totals[i] - xi;
    double f = 0.0;
    for (std::size_t t = 0; t < model.terms.size(); ++t) {
        const auto& term = model.terms[t];
        const auto& rate = params.rates[t];
        double scale = 1.0;
        for (std::size_t k = 0; k < term.inhibitors.size(); ++k) scale += x[term.inhibitors[k]] / rate.k_i[k];
        f += rate.v * x[term.kinase] * free / (free + rate.k_e * scale);
    }
    return f;
}

double balance_residual(const GroundTruthNetwork& net, std::span<const double> x, std::span<const double> totals) {
    double worst = 0.0;
    for (Species i = 0; i < net.species(); ++i) {
        const double target = net.is_root(i) ? *net.phi[i] * totals[i] : balance_rhs(net, x, totals, i, x[i]);
        worst = std::max(worst, std::abs(x[i] - target) / totals[i]);
    }
    return worst;
}

namespace {

// Sweeps continue past the contract tolerance so callers get a polished fixed point.
constexpr double kSolveTarget = 1e-13;

// x - rhs(x) rises from <= 0 at 0 to U at U, so the sign change is unique.
double solve_node(const GroundTruthNetwork& net, std::span<const double> x, std::span<const double> totals,
                  Species i) {
    double lo = 0.0;
    double hi = totals[i];
    if (lo - balance_rhs(net, x, totals, i, lo) >= 0.0) return lo;
    for (int it = 0; it < 2000; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (mid - balance_rhs(net, x, totals, i, mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> solve_steady_state(const GroundTruthNetwork& net, std::span<const double> totals) {
    const std::size_t p = net.species();
    if (totals.size() != p) throw InvalidInput("one total per node required");
    for (Species i = 0; i < p; ++i) {
        if (!(totals[i] > 0.0) || !std::isfinite(totals[i])) throw InvalidInput(fmt::format("total of node {} must be positive", i));
    }
    std::vector<double> x(p);
    for (Species i = 0; i < p; ++i) x[i] = net.is_root(i) ? *net.phi[i] * totals[i] : 0.5 * totals[i];

    bool damped = false;
    double last_change = std::numeric_limits<double>::infinity();
    for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
        if (balance_residual(net, x, totals) < kSolveTarget) return x;
        double change = 0.0;
        for (Species i = 0; i < p; ++i) {
            if (net.is_root(i)) continue;
            const double target = solve_node(net, x, totals, i);
            const double next = damped ? x[i] + 0.5 * (target - x[i]) : target;
            change = std::max(change, std::abs(next - x[i]) / totals[i]);
            x[i] = next;
        }
        if (change > last_change) damped = true;
        last_change = change;
    }
    const double worst = balance_residual(net, x, totals);
    if (worst < kBalanceTolerance) return x;
    throw SolverError(fmt::format("steady state not reached after {} sweeps (residual {:.3g})", kMaxSweeps, worst), worst);
}

SimulatedData simulate_dataset(const GroundTruthNetwork& net, const SimConfig& config, std::size_t attempt) {
    validate(config);
    validate(net);
    const std::size_t p = net.species();
    if (p != config.p) throw InvalidInput("network size differs from config.p");
    const auto n = static_cast<Eigen::Index>(config.n);

    SimulatedData out;
    out.network = net;
    out.attempt = attempt;
    out.data.species_names = net.names;
    out.data.phospho.resize(n, static_cast<Eigen::Index>(p));
    out.data.unphospho.resize(n, static_cast<Eigen::Index>(p));
    out.totals.resize(n, static_cast<Eigen::Index>(p));
    out.clean.resize(n, static_cast<Eigen::Index>(p));

    std::vector<double> totals(p);
    for (Eigen::Index s = 0; s < n; ++s) {
        auto rng = make_stream(config.seed, stream::sample, static_cast<std::uint64_t>(s), attempt);
        std::normal_distribution<double> z(0.0, 1.0);
        for (Species i = 0; i < p; ++i) totals[i] = std::exp(config.total_sd * z(rng));
        const auto x = solve_steady_state(net, totals);
        for (Species i = 0; i < p; ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            out.totals(s, c) = totals[i];
            out.clean(s, c) = x[i];
            out.data.phospho(s, c) = x[i] * std::exp(config.noise_sd * z(rng));
            out.data.unphospho(s, c) = (totals[i] - x[i]) * std::exp(config.noise_sd * z(rng));
        }
    }
    return out;
}

SimulatedData simulate(const SimConfig& config) {
    validate(config);
    for (std::size_t attempt = 0;; ++attempt) {
        auto net = generate_network(config, attempt);
        try {
            return simulate_dataset(net, config, attempt);
        } catch (const SolverError& e) {
            if (attempt >= config.max_retries) throw;
            warn(fmt::format("network draw {} rejected: {}", attempt, e.what()));
        }
    }
}

}  // namespace gknet
