#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gknet/errors.hpp"
#include "gknet/pipeline.hpp"

using namespace gknet;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "gknet_unit" / name;
    std::filesystem::remove_all(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

RunConfig base(const std::string& command, const std::filesystem::path& out) {
    RunConfig c;
    c.command = command;
    c.out = out;
    c.seed = 5;
    c.sim.p = 4;
    c.sim.n = 12;
    c.sampler.total_iters = 300;
    c.sampler.burn_in = 50;
    c.sampler.structural_moves = 2;
    return c;
}

}  // namespace

TEST_CASE("json config keys") {
    RunConfig c;
    apply_json(c, nlohmann::json{{"method", "gk,lasso"}, {"iters", 100}, {"burnin", 10}, {"exclude", "A=B|C"},
                                 {"seed", 3}, {"noise", 0.0}, {"known", {{"S6", "p70"}}}});
    CHECK(c.methods == std::vector<Method>{Method::gk, Method::lasso});
    CHECK(c.sampler.total_iters == 100);
    CHECK(c.exclude.at("A") == std::vector<std::string>{"B", "C"});
    CHECK(*c.seed == 3);
    CHECK(c.sim.noise_sd == 0.0);
    CHECK(c.known.at("S6") == "p70");
    CHECK_THROWS_AS(apply_json(c, nlohmann::json{{"bogus", 1}}), InvalidInput);
    CHECK_THROWS_AS(apply_json(c, nlohmann::json{{"iters", "many"}}), InvalidInput);
    CHECK_THROWS_AS(apply_json(c, nlohmann::json{{"method", "svm"}}), InvalidInput);
}

TEST_CASE("seed is mandatory") {
    RunConfig c;
    c.command = "simulate";
    CHECK_THROWS_AS(finalize(c), InvalidInput);
    c.seed = 1;
    CHECK_NOTHROW(finalize(c));
    CHECK(c.sim.seed == 1);
}

TEST_CASE("pairs and exclusions parse") {
    CHECK(parse_pairs("a=b,c=d").at("c") == "d");
    CHECK_THROWS_AS(parse_pairs("a"), InvalidInput);
    CHECK_THROWS_AS(parse_exclusions("=b"), InvalidInput);
}

TEST_CASE("simulate, infer, evaluate and rank end to end") {
    const auto dir = scratch("pipeline");
    REQUIRE(run_pipeline(base("simulate", dir)) == 0);
    for (const char* f : {"phospho.csv", "unphospho.csv", "truth.csv", "manifest_simulate.json"}) {
        CHECK(std::filesystem::exists(dir / f));
    }

    auto infer = base("infer", dir);
    infer.phospho = dir / "phospho.csv";
    infer.unphospho = dir / "unphospho.csv";
    infer.methods = {Method::gk, Method::lin_bayes, Method::lin_bayes_adj, Method::lasso, Method::lasso_adj};
    infer.exclude = {{"P1", {"P2"}}};
    infer.trace = true;
    REQUIRE(run_pipeline(infer) == 0);
    const auto gk = read_edges(dir / "edges_gk.csv");
    CHECK(gk.size() == 4 * 3 - 1);
    for (const auto& e : gk) {
        CHECK_FALSE(e.child == e.candidate);
        CHECK_FALSE((e.child == "P1" && e.candidate == "P2"));
        CHECK(*e.weight >= 0.0);
        CHECK(*e.weight <= 1.0);
        CHECK(e.kinase_prob);
    }
    for (const auto& e : read_edges(dir / "edges_lin-bayes.csv")) {
        CHECK(e.weight);
        CHECK_FALSE(e.kinase_prob);
    }
    const auto trace = slurp(dir / "samples_gk.csv");
    CHECK(trace.rfind("child,restart,iteration,model,log_posterior\n", 0) == 0);
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest_infer.json"));
    CHECK(manifest["seed"] == 5);
    CHECK(manifest["model_prior"] == "uniform-indegree");
    CHECK(manifest["diagnostics"]["gk"].contains("max_discrepancy"));

    auto eval = base("evaluate", dir);
    eval.truth = dir / "truth.csv";
    eval.weights = {dir / "edges_gk.csv", dir / "edges_lasso.csv"};
    REQUIRE(run_pipeline(eval) == 0);
    const auto aur = slurp(dir / "aur.csv");
    CHECK(aur.find("dataset,gk,") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "roc_lasso.csv"));

    auto rank = base("rank", dir);
    rank.weights = {dir / "edges_gk.csv", dir / "edges_lin-bayes.csv"};
    rank.known = {{"P3", "P1"}};
    REQUIRE(run_pipeline(rank) == 0);
    const auto ranks = slurp(dir / "ranks.csv");
    CHECK(ranks.rfind("method,P3\ngk,", 0) == 0);
    CHECK(ranks.find("candidates,3") != std::string::npos);
}

TEST_CASE("commands reject missing inputs") {
    auto c = base("infer", scratch("missing"));
    CHECK_THROWS_AS(run_pipeline(c), InvalidInput);
    c.command = "evaluate";
    CHECK_THROWS_AS(run_pipeline(c), InvalidInput);
    c.command = "rank";
    CHECK_THROWS_AS(run_pipeline(c), InvalidInput);
    c.command = "infer";
    c.phospho = "/nonexistent/a.csv";
    c.unphospho = "/nonexistent/b.csv";
    CHECK_THROWS_AS(run_pipeline(c), ParseError);
}
