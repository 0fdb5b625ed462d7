// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails. Pass criterion numbers to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "../oracles/gk_evidence.hpp"
#include "../oracles/gprior_quadrature.hpp"
#include "../oracles/mann_whitney.hpp"
#include "../oracles/topo_solve.hpp"
#include "gknet/evaluation.hpp"
#include "gknet/io.hpp"
#include "gknet/linear.hpp"
#include "gknet/log.hpp"
#include "gknet/pipeline.hpp"
#include "gknet/rng.hpp"
#include "gknet/sampler.hpp"
#include "gknet/simulate.hpp"

using namespace gknet;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1

Outcome sampler_exactness() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string rows;
    for (std::uint64_t problem = 1; problem <= 5; ++problem) {
        SimConfig sc;
        sc.p = 3;
        sc.n = 8;
        sc.seed = 1000 + problem;
        sc.root_prob = 0.0;
        const auto data = normalize_unit_mean(simulate(sc).data);
        const int child = static_cast<int>(problem % 3);
        const int a = (child + 1) % 3, b = (child + 2) % 3;

        // every mechanism with at most one kinase and one inhibitor
        const std::vector<oracle::Mechanism> models{{-1, -1}, {a, -1}, {b, -1}, {a, b}, {b, a}};
        const std::vector<double> prior{1.0 / 3, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
        const oracle::SigmaTable sigma(8);
        std::vector<double> logpost;
        for (std::size_t m = 0; m < models.size(); ++m) {
            logpost.push_back(std::log(prior[m]) + oracle::log_evidence(data.phospho, data.unphospho, child, models[m],
                                                                        sigma, 1000000, 77 + m));
        }
        const double top = *std::max_element(logpost.begin(), logpost.end());
        double z = 0.0;
        for (double& l : logpost) z += std::exp(l - top);

        SamplerConfig cfg;
        cfg.seed = problem;
        cfg.prior.d_max = 1;
        cfg.prior.m_max = 1;
        const std::vector<Species> children{static_cast<Species>(child)};
        const auto post = infer_network(data, cfg, children);
        const auto& freq = post.model_freq[static_cast<std::size_t>(child)];
        auto as_model = [&](const oracle::Mechanism& m) {
            MechanismModel out{static_cast<Species>(child), {}};
            if (m.kinase >= 0) {
                KinaseTerm t{static_cast<Species>(m.kinase), {}};
                if (m.inhibitor >= 0) t.inhibitors.push_back(static_cast<Species>(m.inhibitor));
                out.terms.push_back(t);
            }
            return out;
        };
        std::string line;
        for (std::size_t m = 0; m < models.size(); ++m) {
            const double exact = std::exp(logpost[m] - top) / z;
            const auto it = freq.find(as_model(models[m]));
            const double chain = it == freq.end() ? 0.0 : it->second;
            worst = std::max(worst, std::abs(exact - chain));
            line += fmt::format(" {:.3f}/{:.3f}", chain, exact);
        }
        rows += fmt::format("\n    problem {} child {} (chain/oracle):{}", problem, child, line);
    }
    const double secs = seconds_since(t0);
    return {worst <= 0.05 && secs < 300,
            fmt::format("max |chain - oracle| = {:.4f} (limit 0.05), {:.0f} s (limit 300){}", worst, secs, rows)};
}

// ---------------------------------------------------------------- 2, 3, 9

struct DatasetResult {
    std::map<std::string, double> aur;
    double flagged_fraction = 0.0;
    double max_discrepancy = 0.0;
};

struct Study {
    std::vector<DatasetResult> datasets;
    double seconds = 0.0;
};

Study run_study(double noise) {
    const auto t0 = std::chrono::steady_clock::now();
    Study study;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SimConfig sc;
        sc.seed = seed;
        sc.noise_sd = noise;
        const auto sim = simulate(sc);
        const auto data = normalize_unit_mean(sim.data);
        const auto truth = sim.network.edges();
        DatasetResult r;
        for (Method m : kAllMethods) {
            InferenceRequest req;
            req.method = m;
            req.sampler.seed = seed;
            const auto out = infer_edges(data, req);
            r.aur[to_string(m)] = aur(score_edges(out.edges, data.species_names, truth));
            if (out.posterior) {
                r.flagged_fraction = out.posterior->nonconverged_fraction();
                r.max_discrepancy = out.posterior->max_discrepancy;
            }
        }
        study.datasets.push_back(r);
    }
    study.seconds = seconds_since(t0);
    return study;
}

std::map<std::string, double> mean_aur(const Study& s) {
    std::map<std::string, double> out;
    for (const auto& d : s.datasets) {
        for (const auto& [m, v] : d.aur) out[m] += v / static_cast<double>(s.datasets.size());
    }
    return out;
}

std::string aur_table(const Study& s) {
    std::string text;
    for (Method m : kAllMethods) {
        text += fmt::format("\n    {:<14}", to_string(m));
        for (const auto& d : s.datasets) text += fmt::format(" {:.3f}", d.aur.at(to_string(m)));
        text += fmt::format("  mean {:.4f}", mean_aur(s).at(to_string(m)));
    }
    return text;
}

bool gk_beats_linear(const std::map<std::string, double>& means) {
    for (const auto& [m, v] : means) {
        if (m != "gk" && !(means.at("gk") > v)) return false;
    }
    return true;
}

const Study& noisy_study() {
    static const Study s = run_study(0.2);
    return s;
}

Outcome comparative() {
    const auto& s = noisy_study();
    const auto means = mean_aur(s);
    const bool ok = gk_beats_linear(means) && means.at("gk") >= 0.8 && s.seconds < 1800;
    return {ok, fmt::format("mean AUR gk {:.4f} (needs >= 0.8 and > every linear method), {:.0f} s (limit 1800){}",
                            means.at("gk"), s.seconds, aur_table(s))};
}

Outcome noiseless() {
    const auto s = run_study(0.0);
    const auto means = mean_aur(s);
    return {gk_beats_linear(means),
            fmt::format("sigma = 0: mean AUR gk {:.4f} must exceed every linear method{}", means.at("gk"), aur_table(s))};
}

Outcome convergence() {
    const auto& s = noisy_study();
    bool ok = true;
    std::string text;
    double pooled = 0.0;
    for (std::size_t k = 0; k < s.datasets.size(); ++k) {
        const auto& d = s.datasets[k];
        ok = ok && d.flagged_fraction <= 0.1;
        pooled += d.flagged_fraction / static_cast<double>(s.datasets.size());
        text += fmt::format(" {:.3f}", d.flagged_fraction);
    }
    return {ok, fmt::format("share of pairs with restart discrepancy > 0.1, per dataset (each must be <= 0.10):{}; "
                            "pooled {:.3f}",
                            text, pooled)};
}

// ---------------------------------------------------------------- 4

Outcome prior_moments() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = 1000000;
    struct Target {
        const char* name;
        double mean, var;
        std::function<double(Rng&)> draw;
    };
    const std::vector<Target> targets{
        {"V", 1.0, 0.5, [](Rng& r) { return draw_rate(r); }},
        {"K", 1.0, 0.5, [](Rng& r) { return draw_rate(r); }},
        {"sigma", 0.2, 0.01, [](Rng& r) { return draw_sigma(r); }},
    };
    bool ok = true;
    std::string text;
    std::uint64_t salt = 0;
    for (const auto& t : targets) {
        auto rng = make_stream(2024, 50, ++salt);
        std::vector<double> x(n);
        for (auto& v : x) v = t.draw(rng);
        double mean = 0.0;
        for (double v : x) mean += v / static_cast<double>(n);
        double m2 = 0.0, m4 = 0.0;
        for (double v : x) {
            const double d = (v - mean) * (v - mean);
            m2 += d / static_cast<double>(n);
            m4 += d * d / static_cast<double>(n);
        }
        const double var = m2 * static_cast<double>(n) / static_cast<double>(n - 1);
        const double se_mean = std::sqrt(var / static_cast<double>(n));
        const double se_var = std::sqrt((m4 - m2 * m2) / static_cast<double>(n));
        const double zm = (mean - t.mean) / se_mean, zv = (var - t.var) / se_var;
        ok = ok && std::abs(zm) <= 3 && std::abs(zv) <= 3;
        text += fmt::format(" {}: mean {:.5f} (z {:+.2f}), var {:.5f} (z {:+.2f});", t.name, mean, zm, var, zv);
    }
    const double secs = seconds_since(t0);
    return {ok && secs < 10, fmt::format("{} {:.1f} s (limit 10)", text, secs)};
}

// ---------------------------------------------------------------- 5

GroundTruthNetwork random_dag(std::uint64_t seed, std::size_t p) {
    std::mt19937_64 rng(seed);
    std::vector<Species> label(p);
    for (Species k = 0; k < p; ++k) label[k] = k;
    std::shuffle(label.begin(), label.end(), rng);
    std::gamma_distribution<double> rate(2.0, 0.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    GroundTruthNetwork net;
    net.mechanisms.resize(p);
    net.params.resize(p);
    net.phi.resize(p);
    for (Species k = 0; k < p; ++k) {
        const Species i = label[k];
        net.names.push_back("N" + std::to_string(k));
        net.mechanisms[i].child = i;
        if (k == 0 || unit(rng) < 0.25) {
            net.phi[i] = 0.2 + 0.6 * unit(rng);
            continue;
        }
        std::vector<Species> earlier(label.begin(), label.begin() + static_cast<std::ptrdiff_t>(k));
        std::shuffle(earlier.begin(), earlier.end(), rng);
        const std::size_t kinases = std::min<std::size_t>(earlier.size(), 1 + (unit(rng) < 0.5));
        std::vector<KinaseTerm> terms;
        std::vector<KinaseRates> rates;
        for (std::size_t e = 0; e < kinases; ++e) {
            KinaseTerm t{earlier[e], {}};
            if (earlier.size() > kinases && unit(rng) < 0.5) t.inhibitors.push_back(earlier[kinases]);
            KinaseRates r{rate(rng), rate(rng), {}};
            for (std::size_t m = 0; m < t.inhibitors.size(); ++m) r.k_i.push_back(rate(rng));
            terms.push_back(t);
            rates.push_back(r);
        }
        std::vector<std::size_t> idx(terms.size());
        for (std::size_t q = 0; q < idx.size(); ++q) idx[q] = q;
        std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return terms[x].kinase < terms[y].kinase; });
        for (auto q : idx) {
            net.mechanisms[i].terms.push_back(terms[q]);
            net.params[i].rates.push_back(rates[q]);
        }
    }
    return net;
}

Outcome solver() {
    double worst_sim = 0.0;
    std::size_t samples = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SimConfig sc;
        sc.seed = seed;
        const auto sim = simulate(sc);
        for (Eigen::Index s = 0; s < sim.clean.rows(); ++s) {
            const Eigen::VectorXd x = sim.clean.row(s).transpose();
            const Eigen::VectorXd u = sim.totals.row(s).transpose();
            worst_sim = std::max(worst_sim, balance_residual(sim.network, {x.data(), static_cast<std::size_t>(x.size())},
                                                             {u.data(), static_cast<std::size_t>(u.size())}));
            ++samples;
        }
    }

    GroundTruthNetwork two;
    two.names = {"E", "S"};
    two.mechanisms = {MechanismModel{0, {}}, MechanismModel{1, {{0, {}}}}};
    two.params.resize(2);
    two.params[1].rates = {{1.0, 1.0, {}}};
    two.phi = {0.5, std::nullopt};
    const auto x2 = solve_steady_state(two, std::vector<double>{2.0, 1.0});
    const double quad_err = std::abs(x2[1] - (3.0 - std::sqrt(5.0)) / 2.0);

    double worst_topo = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto net = random_dag(seed, 10);
        validate(net);
        std::mt19937_64 rng(seed + 7);
        std::lognormal_distribution<double> tot(0.0, 0.5);
        std::vector<double> u(10);
        for (auto& v : u) v = tot(rng);
        const auto gs = solve_steady_state(net, u);
        const auto ref = oracle::topo_solve(net, u);
        for (std::size_t i = 0; i < u.size(); ++i) worst_topo = std::max(worst_topo, std::abs(gs[i] - ref[i]));
    }
    return {worst_sim < 1e-10 && quad_err < 1e-9 && worst_topo < 1e-10,
            fmt::format("max balance residual over {} simulated samples {:.2e} (< 1e-10); p = 2 quadratic error "
                        "{:.2e} (< 1e-9); acyclic Gauss-Seidel vs topological solve {:.2e} over 50 networks (< 1e-10)",
                        samples, worst_sim, quad_err, worst_topo)};
}

// ---------------------------------------------------------------- 6

Outcome gprior() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(606);
    std::normal_distribution<double> z;
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const int q = 4;
        Eigen::MatrixXd x(8, q);
        for (Eigen::Index r = 0; r < 8; ++r) {
            for (Eigen::Index c = 0; c < q; ++c) x(r, c) = z(rng);
        }
        const Eigen::VectorXd y = x.col(0) * z(rng) + Eigen::VectorXd::NullaryExpr(8, [&] { return z(rng); });
        const auto design = standardize_design(0, {1, 2, 3, 4}, y, x);
        std::vector<std::size_t> subset;
        const int d = k % 3;
        for (int j = 0; j < d; ++j) subset.push_back(static_cast<std::size_t>((k + j) % q));
        const double ours = gprior_log_evidence(design, subset);
        const double ref = oracle::gprior_log_evidence(design.response, design.candidates, subset);
        worst = std::max(worst, std::abs(std::expm1(ours - ref)));
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-6 && secs < 60,
            fmt::format("max relative error {:.2e} over 20 cases (limit 1e-6), {:.1f} s", worst, secs)};
}

// ---------------------------------------------------------------- 7

Outcome roc_agreement() {
    std::mt19937_64 rng(707);
    std::uniform_int_distribution<int> size(5, 80), level(0, 9);
    std::bernoulli_distribution na(0.1), coarse(0.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = size(rng);
        const double share = 0.1 + 0.8 * unit(rng);
        const bool ties = coarse(rng);
        std::vector<ScoredEdge> edges;
        std::vector<std::optional<double>> pos, neg;
        for (int k = 0; k < n; ++k) {
            std::optional<double> w;
            if (!na(rng)) w = ties ? level(rng) / 9.0 : unit(rng);
            Label l = unit(rng) < share ? Label::positive : Label::negative;
            if (k == 0) l = Label::positive;
            if (k == 1) l = Label::negative;
            edges.push_back({0, static_cast<Species>(k + 1), w, l});
            (l == Label::positive ? pos : neg).push_back(w);
        }
        worst = std::max(worst, std::abs(aur(edges) - oracle::mann_whitney_auc(pos, neg)));
    }
    return {worst <= 1e-12, fmt::format("max |trapezoid - Mann-Whitney| = {:.2e} over 100 score sets", worst)};
}

// ---------------------------------------------------------------- 8

std::map<std::string, std::string> csv_files(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (e.path().extension() != ".csv") continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream s;
        s << in.rdbuf();
        out[std::filesystem::relative(e.path(), dir).string()] = s.str();
    }
    return out;
}

void full_pipeline(const std::filesystem::path& dir) {
    RunConfig base;
    base.seed = 31;
    base.out = dir;
    base.sim.p = 6;
    base.sampler.total_iters = 6000;
    base.sampler.burn_in = 1000;

    auto sim = base;
    sim.command = "simulate";
    run_pipeline(sim);

    auto inf = base;
    inf.command = "infer";
    inf.phospho = dir / "phospho.csv";
    inf.unphospho = dir / "unphospho.csv";
    inf.methods.assign(std::begin(kAllMethods), std::end(kAllMethods));
    inf.trace = true;
    run_pipeline(inf);

    std::vector<std::filesystem::path> weights;
    for (Method m : kAllMethods) weights.push_back(dir / fmt::format("edges_{}.csv", to_string(m)));
    auto ev = base;
    ev.command = "evaluate";
    ev.truth = dir / "truth.csv";
    ev.weights = weights;
    run_pipeline(ev);

    auto rk = base;
    rk.command = "rank";
    rk.weights = weights;
    rk.known = {{"P1", "P2"}, {"P4", "P3"}};
    run_pipeline(rk);
}

Outcome determinism() {
    const auto root = std::filesystem::temp_directory_path() / "gknet_acceptance_determinism";
    std::filesystem::remove_all(root);
    full_pipeline(root / "a");
    full_pipeline(root / "b");
    const auto a = csv_files(root / "a");
    const auto b = csv_files(root / "b");
    std::size_t same = 0;
    for (const auto& [name, text] : a) {
        const auto it = b.find(name);
        if (it != b.end() && it->second == text) ++same;
    }
    const bool ok = a.size() == b.size() && same == a.size() && a.size() >= 12;
    return {ok, fmt::format("{} of {} CSV artifacts byte-identical across two seeded runs", same, a.size())};
}

}  // namespace

int main(int argc, char** argv) {
    // Sampler and solver warnings are part of the diagnostics, not of the verdicts.
    std::size_t warnings = 0;
    set_warning_sink([&](const std::string&) { ++warnings; });

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"sampler exactness vs enumeration oracle", sampler_exactness},
        {"gk beats linear baselines, mean AUR >= 0.8", comparative},
        {"noiseless variant: gk beats linear baselines", noiseless},
        {"prior moments", prior_moments},
        {"steady-state solver", solver},
        {"g-prior evidence vs quadrature", gprior},
        {"ROC trapezoid vs Mann-Whitney", roc_agreement},
        {"determinism of CSV artifacts", determinism},
        {"restart convergence", convergence},
    };
    std::set<int> wanted;
    for (int k = 1; k < argc; ++k) wanted.insert(std::atoi(argv[k]));

    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k + 1);
        if (!wanted.empty() && !wanted.count(id)) continue;
        Outcome out;
        try {
            out = criteria[k].second();
        } catch (const std::exception& e) {
            out = {false, fmt::format("threw: {}", e.what())};
        }
        failed += !out.pass;
        std::printf("criterion %d %s: %s\n  %s\n", id, out.pass ? "PASS" : "FAIL", criteria[k].first, out.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d criterion(s) failed; %zu warning(s) suppressed\n", failed, warnings);
    return failed ? 1 : 0;
}
