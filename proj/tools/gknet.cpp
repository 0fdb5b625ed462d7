// gknet: simulate, infer, evaluate and rank phosphorylation networks.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gknet/errors.hpp"
#include "gknet/pipeline.hpp"

namespace {

struct Flags {
    std::string config, phospho, unphospho, out, method, children, exclude, truth, known, dataset;
    std::vector<std::string> weights;
    std::size_t iters = 0, burnin = 0, restarts = 0, dmax = 0, mmax = 0, threads = 0;
    std::size_t p = 0, n = 0, max_kinases = 0, max_inhibitors = 0;
    double kappa = 0, step = 0, noise = 0, root_prob = 0, total_sd = 0;
    std::uint64_t seed = 0;
    bool trace = false;
};

void add_flags(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON config file; flags override it");
    app->add_option("--seed", f.seed, "master random seed (required)");
    app->add_option("--out", f.out, "output directory");
    app->add_option("--phospho", f.phospho, "phospho CSV (species header, one row per sample)");
    app->add_option("--unphospho", f.unphospho, "unphospho CSV with the same header");
    app->add_option("--method", f.method, "gk|lin-bayes|lin-bayes-adj|lasso|lasso-adj, comma separated");
    app->add_option("--iters", f.iters, "sampler iterations per restart (30000)");
    app->add_option("--burnin", f.burnin, "discarded iterations per restart (5000)");
    app->add_option("--restarts", f.restarts, "independent restarts per child (3)");
    app->add_option("--children", f.children, "comma list of children to infer (default: all)");
    app->add_option("--exclude", f.exclude, "child=cand1|cand2,... candidates never considered");
    app->add_option("--dmax", f.dmax, "maximum kinases per child (3)");
    app->add_option("--mmax", f.mmax, "maximum inhibitors per kinase (2)");
    app->add_option("--kappa", f.kappa, "prior-model overlap bonus (0)");
    app->add_option("--step", f.step, "random-walk step on log parameters (0.25)");
    app->add_option("--threads", f.threads, "worker threads (0: all cores)");
    app->add_flag("--trace", f.trace, "write per-iteration sample log for gk");
    app->add_option("--weights", f.weights, "edge weight CSV files")->delimiter(',');
    app->add_option("--truth", f.truth, "truth CSV (child,parent,role)");
    app->add_option("--known", f.known, "target=kinase,... for rank");
    app->add_option("--dataset", f.dataset, "dataset label for AUR tables");
    app->add_option("--p", f.p, "species count (12)");
    app->add_option("--n", f.n, "samples (24)");
    app->add_option("--noise", f.noise, "log-scale noise s.d. (0.2)");
    app->add_option("--root-prob", f.root_prob, "chance a node has no kinase (0.25)");
    app->add_option("--max-kinases", f.max_kinases, "kinases per non-root node, at most (2)");
    app->add_option("--max-inhibitors", f.max_inhibitors, "inhibitors per kinase, at most (1)");
    app->add_option("--total-sd", f.total_sd, "log-scale s.d. of total protein (0.5)");
}

gknet::RunConfig build(const CLI::App& app, const Flags& f) {
    gknet::RunConfig cfg;
    cfg.command = app.get_name();
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw gknet::InvalidInput("cannot open config " + f.config);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw gknet::ParseError(f.config + ": " + e.what());
        }
        gknet::apply_json(cfg, j);
    }
    auto given = [&](const char* name) { return app.count(name) > 0; };
    if (given("--seed")) cfg.seed = f.seed;
    if (given("--out")) cfg.out = f.out;
    if (given("--phospho")) cfg.phospho = f.phospho;
    if (given("--unphospho")) cfg.unphospho = f.unphospho;
    if (given("--method")) gknet::apply_json(cfg, {{"method", f.method}});
    if (given("--iters")) cfg.sampler.total_iters = f.iters;
    if (given("--burnin")) cfg.sampler.burn_in = f.burnin;
    if (given("--restarts")) cfg.sampler.n_restarts = f.restarts;
    if (given("--children")) gknet::apply_json(cfg, {{"children", f.children}});
    if (given("--exclude")) cfg.exclude = gknet::parse_exclusions(f.exclude);
    if (given("--dmax")) cfg.sampler.prior.d_max = f.dmax;
    if (given("--mmax")) cfg.sampler.prior.m_max = f.mmax;
    if (given("--kappa")) cfg.sampler.prior.kappa = f.kappa;
    if (given("--step")) cfg.sampler.step_size_log = f.step;
    if (given("--threads")) cfg.threads = f.threads;
    if (given("--trace")) cfg.trace = f.trace;
    if (given("--weights")) cfg.weights.assign(f.weights.begin(), f.weights.end());
    if (given("--truth")) cfg.truth = f.truth;
    if (given("--known")) cfg.known = gknet::parse_pairs(f.known);
    if (given("--dataset")) cfg.dataset = f.dataset;
    if (given("--p")) cfg.sim.p = f.p;
    if (given("--n")) cfg.sim.n = f.n;
    if (given("--noise")) cfg.sim.noise_sd = f.noise;
    if (given("--root-prob")) cfg.sim.root_prob = f.root_prob;
    if (given("--max-kinases")) cfg.sim.max_kinases = f.max_kinases;
    if (given("--max-inhibitors")) cfg.sim.max_inhibitors = f.max_inhibitors;
    if (given("--total-sd")) cfg.sim.total_sd = f.total_sd;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Phosphorylation network inference with Goldbeter-Koshland kinetics"};
    app.require_subcommand(1);
    Flags flags;
    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "generate a synthetic network and dataset"},
        {"infer", "compute edge weights with one or more methods"},
        {"evaluate", "ROC curves and AUR against a truth file"},
        {"rank", "rank of known kinases among candidates"},
    };
    for (const auto& [name, help] : commands) add_flags(app.add_subcommand(name, help), flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        const auto* sub = app.get_subcommands().front();
        return gknet::run_pipeline(build(*sub, flags));
    } catch (const gknet::Error& e) {
        std::cerr << "gknet: error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "gknet: internal error: " << e.what() << '\n';
        return 3;
    }
}
