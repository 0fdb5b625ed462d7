#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gknet/evaluation.hpp"
#include "gknet/io.hpp"
#include "gknet/sampler.hpp"
#include "gknet/simulate.hpp"

namespace gknet {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kModelPriorFlag = "uniform-indegree";

enum class Method { gk, lin_bayes, lin_bayes_adj, lasso, lasso_adj };
inline constexpr Method kAllMethods[] = {Method::gk, Method::lin_bayes, Method::lin_bayes_adj, Method::lasso,
                                         Method::lasso_adj};

const char* to_string(Method m);
/// Throws InvalidInput for an unknown method name.
Method parse_method(const std::string& name);

struct RunConfig {
    std::string command;  // simulate | infer | evaluate | rank
    std::filesystem::path phospho;
    std::filesystem::path unphospho;
    std::filesystem::path out = ".";
    std::vector<Method> methods{Method::gk};
    SamplerConfig sampler;
    SimConfig sim;
    std::optional<std::uint64_t> seed;             // mandatory; no clock default
    std::vector<std::string> children;             // empty: all species
    std::map<std::string, std::vector<std::string>> exclude;  // child -> candidates
    std::vector<std::filesystem::path> weights;    // edge files for evaluate/rank
    std::filesystem::path truth;
    std::map<std::string, std::string> known;      // rank: target -> known kinase
    std::string dataset = "dataset";
    std::size_t threads = 0;
    bool trace = false;
};

/// Applies keys of a JSON object onto cfg. Keys mirror the long flag names
/// without dashes (e.g. "iters", "burnin", "exclude"). Unknown keys throw.
void apply_json(RunConfig& cfg, const nlohmann::json& j);

/// Parses "child=a|b,other=c".
std::map<std::string, std::vector<std::string>> parse_exclusions(const std::string& text);
/// Parses "target=kinase,...".
std::map<std::string, std::string> parse_pairs(const std::string& text);

/// Checks the mandatory fields of the command and copies the seed into the
/// sampler and simulator configs.
void finalize(RunConfig& cfg);

/// Edge weights for every selected child and its non-excluded candidates, in
/// (child, candidate) species order. data must be normalised.
struct InferenceResult {
    std::vector<EdgeRecord> edges;
    std::optional<PosteriorSummary> posterior;  // gk only
    std::vector<std::string> warnings;
};

struct InferenceRequest {
    Method method = Method::gk;
    SamplerConfig sampler;
    std::vector<Species> children;  // empty: all
    std::map<Species, std::vector<Species>> exclude;
    std::size_t threads = 0;
    decltype(InferenceOptions::trace) trace;
};

InferenceResult infer_edges(const Dataset& data, const InferenceRequest& request);

/// Labels edge records against the truth (positive iff the candidate is a
/// parent of the child, any role).
std::vector<ScoredEdge> score_edges(const std::vector<EdgeRecord>& edges, const std::vector<std::string>& names,
                                    const std::vector<TruthEdge>& truth);

/// Runs one command; returns the process exit status. Errors propagate as
/// exceptions.
int run_pipeline(RunConfig cfg);

}  // namespace gknet
