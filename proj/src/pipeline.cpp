#include "gknet/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "gknet/errors.hpp"
#include "gknet/linear.hpp"
#include "gknet/log.hpp"

namespace gknet {

using nlohmann::json;

namespace {

std::vector<std::string> split_list(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, sep)) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<std::string> string_list(const json& v, char sep = ',') {
    if (v.is_string()) return split_list(v.get<std::string>(), sep);
    return v.get<std::vector<std::string>>();
}

Species species_index(const std::vector<std::string>& names, const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InvalidInput(fmt::format("unknown species '{}'", name));
    return static_cast<Species>(it - names.begin());
}

std::string timestamp() {
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                     std::chrono::system_clock::now())));
}

json config_json(const RunConfig& c) {
    json methods = json::array();
    for (Method m : c.methods) methods.push_back(to_string(m));
    json weights = json::array();
    for (const auto& w : c.weights) weights.push_back(w.string());
    return {
        {"command", c.command},
        {"phospho", c.phospho.string()},
        {"unphospho", c.unphospho.string()},
        {"out", c.out.string()},
        {"method", methods},
        {"seed", c.seed.value_or(0)},
        {"children", c.children},
        {"exclude", c.exclude},
        {"iters", c.sampler.total_iters},
        {"burnin", c.sampler.burn_in},
        {"restarts", c.sampler.n_restarts},
        {"step", c.sampler.step_size_log},
        {"moves", c.sampler.structural_moves},
        {"informed", c.sampler.informed_proposals},
        {"dmax", c.sampler.prior.d_max},
        {"mmax", c.sampler.prior.m_max},
        {"kappa", c.sampler.prior.kappa},
        {"p", c.sim.p},
        {"n", c.sim.n},
        {"noise", c.sim.noise_sd},
        {"root_prob", c.sim.root_prob},
        {"max_kinases", c.sim.max_kinases},
        {"max_inhibitors", c.sim.max_inhibitors},
        {"total_sd", c.sim.total_sd},
        {"weights", weights},
        {"truth", c.truth.string()},
        {"known", c.known},
        {"dataset", c.dataset},
    };
}

json manifest(const RunConfig& c) {
    return {{"version", kVersion},
            {"seed", c.seed.value_or(0)},
            {"model_prior", kModelPriorFlag},
            {"timestamp", timestamp()},
            {"config", config_json(c)}};
}

LinearDesign select_columns(const LinearDesign& d, const std::vector<std::size_t>& keep) {
    LinearDesign out;
    out.child = d.child;
    out.adjusted = d.adjusted;
    out.response = d.response;
    out.record.response_mean = d.record.response_mean;
    out.record.response_sd = d.record.response_sd;
    out.candidates.resize(d.candidates.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.candidate_ids.push_back(d.candidate_ids[keep[k]]);
        out.candidates.col(static_cast<Eigen::Index>(k)) = d.candidates.col(static_cast<Eigen::Index>(keep[k]));
        out.record.means.push_back(d.record.means[keep[k]]);
        out.record.sds.push_back(d.record.sds[keep[k]]);
        out.record.dropped.push_back(d.record.dropped[keep[k]]);
    }
    return out;
}

std::vector<Species> allowed_candidates(std::size_t p, Species child, const std::vector<Species>& excluded) {
    std::vector<Species> out;
    for (Species j = 0; j < p; ++j) {
        if (j != child && std::find(excluded.begin(), excluded.end(), j) == excluded.end()) out.push_back(j);
    }
    return out;
}

}  // namespace

const char* to_string(Method m) {
    switch (m) {
        case Method::gk: return "gk";
        case Method::lin_bayes: return "lin-bayes";
        case Method::lin_bayes_adj: return "lin-bayes-adj";
        case Method::lasso: return "lasso";
        case Method::lasso_adj: return "lasso-adj";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    for (Method m : kAllMethods) {
        if (name == to_string(m)) return m;
    }
    throw InvalidInput(fmt::format("unknown method '{}' (expected gk, lin-bayes, lin-bayes-adj, lasso or lasso-adj)", name));
}

std::map<std::string, std::vector<std::string>> parse_exclusions(const std::string& text) {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& item : split_list(text, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw InvalidInput(fmt::format("bad exclusion '{}' (want child=a|b)", item));
        auto& list = out[item.substr(0, eq)];
        for (auto& c : split_list(item.substr(eq + 1), '|')) list.push_back(c);
    }
    return out;
}

std::map<std::string, std::string> parse_pairs(const std::string& text) {
    std::map<std::string, std::string> out;
    for (const auto& item : split_list(text, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
            throw InvalidInput(fmt::format("bad pair '{}' (want target=kinase)", item));
        }
        out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

void apply_json(RunConfig& c, const json& j) {
    if (!j.is_object()) throw InvalidInput("config file must hold a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "phospho") c.phospho = v.get<std::string>();
            else if (key == "unphospho") c.unphospho = v.get<std::string>();
            else if (key == "out") c.out = v.get<std::string>();
            else if (key == "method") {
                c.methods.clear();
                for (const auto& m : string_list(v)) c.methods.push_back(parse_method(m));
            }
            else if (key == "iters") c.sampler.total_iters = v.get<std::size_t>();
            else if (key == "burnin") c.sampler.burn_in = v.get<std::size_t>();
            else if (key == "restarts") c.sampler.n_restarts = v.get<std::size_t>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "children") c.children = string_list(v);
            else if (key == "exclude") {
                if (v.is_string()) {
                    c.exclude = parse_exclusions(v.get<std::string>());
                } else {
                    c.exclude.clear();
                    for (const auto& [child, list] : v.items()) c.exclude[child] = string_list(list, '|');
                }
            }
            else if (key == "dmax") c.sampler.prior.d_max = v.get<std::size_t>();
            else if (key == "mmax") c.sampler.prior.m_max = v.get<std::size_t>();
            else if (key == "kappa") c.sampler.prior.kappa = v.get<double>();
            else if (key == "step") c.sampler.step_size_log = v.get<double>();
            else if (key == "moves") c.sampler.structural_moves = v.get<std::size_t>();
            else if (key == "informed") c.sampler.informed_proposals = v.get<bool>();
            else if (key == "threads") c.threads = v.get<std::size_t>();
            else if (key == "trace") c.trace = v.get<bool>();
            else if (key == "weights") {
                c.weights.clear();
                for (const auto& w : string_list(v)) c.weights.emplace_back(w);
            }
            else if (key == "truth") c.truth = v.get<std::string>();
            else if (key == "known") {
                c.known = v.is_string() ? parse_pairs(v.get<std::string>()) : v.get<std::map<std::string, std::string>>();
            }
            else if (key == "dataset") c.dataset = v.get<std::string>();
            else if (key == "p") c.sim.p = v.get<std::size_t>();
            else if (key == "n") c.sim.n = v.get<std::size_t>();
            else if (key == "noise") c.sim.noise_sd = v.get<double>();
            else if (key == "root_prob") c.sim.root_prob = v.get<double>();
            else if (key == "max_kinases") c.sim.max_kinases = v.get<std::size_t>();
            else if (key == "max_inhibitors") c.sim.max_inhibitors = v.get<std::size_t>();
            else if (key == "total_sd") c.sim.total_sd = v.get<double>();
            else throw InvalidInput(fmt::format("unknown config key '{}'", key));
        }
    } catch (const json::exception& e) {
        throw InvalidInput(fmt::format("bad config value: {}", e.what()));
    }
}

void finalize(RunConfig& c) {
    static const std::set<std::string> commands{"simulate", "infer", "evaluate", "rank"};
    if (!commands.count(c.command)) throw InvalidInput(fmt::format("unknown command '{}'", c.command));
    if (!c.seed) throw InvalidInput("a seed is required (--seed)");
    c.sampler.seed = *c.seed;
    c.sim.seed = *c.seed;
    if (c.command == "simulate") validate(c.sim);
    if (c.command == "infer") {
        if (c.phospho.empty() || c.unphospho.empty()) throw InvalidInput("infer needs --phospho and --unphospho");
        if (c.methods.empty()) throw InvalidInput("no method given");
        validate(c.sampler);
    }
    if (c.command == "evaluate" && (c.weights.empty() || c.truth.empty())) {
        throw InvalidInput("evaluate needs --weights and --truth");
    }
    if (c.command == "rank" && (c.weights.empty() || c.known.empty())) {
        throw InvalidInput("rank needs --weights and --known");
    }
}

InferenceResult infer_edges(const Dataset& data, const InferenceRequest& req) {
    if (!data.normalized) throw InvalidInput("inference requires normalised data");
    const std::size_t p = data.species();
    std::vector<Species> children = req.children;
    if (children.empty()) {
        for (Species i = 0; i < p; ++i) children.push_back(i);
    }
    auto excluded_of = [&](Species child) {
        const auto it = req.exclude.find(child);
        return it == req.exclude.end() ? std::vector<Species>{} : it->second;
    };
    const auto& names = data.species_names;
    const std::string method = to_string(req.method);
    InferenceResult result;

    if (req.method == Method::gk) {
        InferenceOptions options;
        options.threads = req.threads;
        options.trace = req.trace;
        for (Species c : children) options.child_options[c].excluded = excluded_of(c);
        auto post = infer_network(data, req.sampler, children, options);
        for (Species i : children) {
            for (Species j : allowed_candidates(p, i, excluded_of(i))) {
                const auto r = static_cast<Eigen::Index>(j), c = static_cast<Eigen::Index>(i);
                result.edges.push_back({names[i], names[j], post.edge_prob(r, c), post.kinase_prob(r, c),
                                        post.inhibitor_prob(r, c), method});
            }
        }
        if (!post.converged) {
            result.warnings.push_back(fmt::format(
                "restarts disagree: max edge-probability discrepancy {:.3f}, {:.1f}% of pairs above {}",
                post.max_discrepancy, 100.0 * post.nonconverged_fraction(), kConvergenceTolerance));
        }
        result.posterior = std::move(post);
        return result;
    }

    const bool adjusted = req.method == Method::lin_bayes_adj || req.method == Method::lasso_adj;
    const bool lasso = req.method == Method::lasso || req.method == Method::lasso_adj;
    for (Species i : children) {
        const auto allowed = allowed_candidates(p, i, excluded_of(i));
        std::vector<std::optional<double>> weight(allowed.size(), lasso ? std::nullopt : std::optional<double>(0.0));
        try {
            const auto full = make_design(data, i, adjusted);
            std::vector<std::size_t> keep;
            for (std::size_t k = 0; k < full.candidate_count(); ++k) {
                if (std::binary_search(allowed.begin(), allowed.end(), full.candidate_ids[k])) keep.push_back(k);
            }
            const auto design = select_columns(full, keep);
            const auto w = lasso ? lasso_cv(design, std::min<std::size_t>(5, design.samples()), req.sampler.seed).weights
                                 : bayes_inclusion_probs(design);
            for (std::size_t k = 0; k < allowed.size(); ++k) {
                weight[k] = w.is_na(k) ? std::nullopt : std::optional<double>(w.weight[k]);
            }
        } catch (const DegenerateDesign& e) {
            const auto msg = fmt::format("{}: {}; all weights set to zero", names[i], e.what());
            warn(msg);
            result.warnings.push_back(msg);
        }
        for (std::size_t k = 0; k < allowed.size(); ++k) {
            result.edges.push_back({names[i], names[allowed[k]], weight[k], std::nullopt, std::nullopt, method});
        }
    }
    return result;
}

std::vector<ScoredEdge> score_edges(const std::vector<EdgeRecord>& edges, const std::vector<std::string>& names,
                                    const std::vector<TruthEdge>& truth) {
    std::set<std::pair<Species, Species>> parents;
    for (const auto& t : truth) parents.insert({t.child, t.parent});
    std::vector<ScoredEdge> out;
    for (const auto& e : edges) {
        const Species c = species_index(names, e.child);
        const Species j = species_index(names, e.candidate);
        out.push_back({c, j, e.weight, parents.count({c, j}) ? Label::positive : Label::negative});
    }
    return out;
}

namespace {

std::map<Species, std::vector<Species>> resolve_exclusions(const RunConfig& c, const std::vector<std::string>& names) {
    std::map<Species, std::vector<Species>> out;
    for (const auto& [child, list] : c.exclude) {
        auto& v = out[species_index(names, child)];
        for (const auto& name : list) v.push_back(species_index(names, name));
        std::sort(v.begin(), v.end());
    }
    return out;
}

int run_simulate(const RunConfig& c) {
    const auto sim = simulate(c.sim);
    write_dataset(c.out, sim.data);
    std::ostringstream truth;
    write_truth(truth, sim.network);
    write_text(c.out / "truth.csv", truth.str());
    auto m = manifest(c);
    double worst = 0.0;
    for (Eigen::Index s = 0; s < sim.clean.rows(); ++s) {
        const Eigen::VectorXd x = sim.clean.row(s).transpose();
        const Eigen::VectorXd u = sim.totals.row(s).transpose();
        worst = std::max(worst, balance_residual(sim.network, std::span<const double>(x.data(), x.size()),
                                                 std::span<const double>(u.data(), u.size())));
    }
    m["diagnostics"] = {{"network_attempt", sim.attempt},
                        {"edges", sim.network.edges().size()},
                        {"max_balance_residual", worst}};
    write_text(c.out / "manifest_simulate.json", m.dump(2) + "\n");
    return 0;
}

int run_infer(const RunConfig& c) {
    const auto data = normalize_unit_mean(load_dataset(c.phospho, c.unphospho));
    const auto& names = data.species_names;
    InferenceRequest req;
    req.sampler = c.sampler;
    req.threads = c.threads;
    req.exclude = resolve_exclusions(c, names);
    for (const auto& name : c.children) req.children.push_back(species_index(names, name));
    std::sort(req.children.begin(), req.children.end());
    req.children.erase(std::unique(req.children.begin(), req.children.end()), req.children.end());

    auto m = manifest(c);
    json diagnostics = json::object();
    for (Method method : c.methods) {
        req.method = method;
        const std::size_t restarts = c.sampler.n_restarts;
        std::vector<Species> children = req.children;
        if (children.empty()) {
            for (Species i = 0; i < data.species(); ++i) children.push_back(i);
        }
        // One buffer per (child, restart) job, so workers never share one.
        std::vector<std::string> trace_lines(c.trace && method == Method::gk ? children.size() * restarts : 0);
        req.trace = nullptr;
        if (!trace_lines.empty()) {
            req.trace = [&](Species child, std::size_t restart, std::size_t iteration, const ChainState& state) {
                const auto slot = static_cast<std::size_t>(
                    std::lower_bound(children.begin(), children.end(), child) - children.begin());
                trace_lines[slot * restarts + restart] += fmt::format(
                    "{},{},{},{},{}\n", names[child], restart, iteration, state.model.signature(names),
                    format_number(state.log_posterior()));
            };
        }
        const auto result = infer_edges(data, req);
        std::ostringstream edges;
        write_edges(edges, result.edges);
        write_text(c.out / fmt::format("edges_{}.csv", to_string(method)), edges.str());
        if (!trace_lines.empty()) {
            std::string text = "child,restart,iteration,model,log_posterior\n";
            for (const auto& chunk : trace_lines) text += chunk;
            write_text(c.out / "samples_gk.csv", text);
        }
        json d = {{"warnings", result.warnings}};
        if (result.posterior) {
            const auto& post = *result.posterior;
            for (const auto& w : result.warnings) warn(w);
            d["max_discrepancy"] = post.max_discrepancy;
            d["nonconverged_fraction"] = post.nonconverged_fraction();
            d["converged"] = post.converged;
            json flagged = json::array();
            for (Species i : post.children) {
                for (Species j = 0; j < post.species; ++j) {
                    const double gap = post.discrepancy(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
                    if (j != i && gap > kConvergenceTolerance) {
                        flagged.push_back({{"child", names[i]}, {"candidate", names[j]}, {"discrepancy", gap}});
                    }
                }
            }
            d["flagged_pairs"] = flagged;
            json rates = json::object();
            std::array<MoveCounter, kMoveKinds> totals{};
            MoveCounter within;
            for (const auto& s : post.stats) {
                for (std::size_t k = 0; k < kMoveKinds; ++k) {
                    totals[k].proposed += s.structural[k].proposed;
                    totals[k].accepted += s.structural[k].accepted;
                }
                within.proposed += s.within.proposed;
                within.accepted += s.within.accepted;
            }
            for (std::size_t k = 0; k < kMoveKinds; ++k) rates[to_string(static_cast<MoveKind>(k))] = totals[k].rate();
            rates["within_model"] = within.rate();
            d["acceptance_rates"] = rates;
        }
        diagnostics[to_string(method)] = d;
    }
    m["diagnostics"] = diagnostics;
    write_text(c.out / "manifest_infer.json", m.dump(2) + "\n");
    return 0;
}

std::vector<std::string> names_from(const std::vector<EdgeRecord>& edges) {
    std::vector<std::string> names;
    auto add = [&](const std::string& n) {
        if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
    };
    for (const auto& e : edges) {
        add(e.child);
        add(e.candidate);
    }
    return names;
}

std::string method_of(const std::vector<EdgeRecord>& edges, const std::filesystem::path& path) {
    return edges.empty() ? path.stem().string() : edges.front().method;
}

int run_evaluate(const RunConfig& c) {
    std::string aur_csv = "dataset,method,AUR\n";
    std::string per_child_csv = "dataset,method,child,AUR\n";
    json results = json::object();
    for (const auto& path : c.weights) {
        const auto edges = read_edges(path);
        auto names = names_from(edges);
        {
            // Truth may mention species absent from the weights file.
            const auto t = read_csv(c.truth);
            for (const auto& row : t.rows) {
                for (std::size_t k = 0; k < std::min<std::size_t>(2, row.size()); ++k) {
                    if (std::find(names.begin(), names.end(), row[k]) == names.end()) names.push_back(row[k]);
                }
            }
        }
        const auto truth = read_truth(c.truth, names);
        const auto scored = score_edges(edges, names, truth);
        const std::string method = method_of(edges, path);
        const auto curve = roc_curve(scored);
        const double area = auc(curve);
        std::string roc_csv = "fpr,tpr\n";
        for (const auto& pt : curve) roc_csv += fmt::format("{},{}\n", format_number(pt.fpr), format_number(pt.tpr));
        write_text(c.out / fmt::format("roc_{}.csv", method), roc_csv);
        aur_csv += fmt::format("{},{},{}\n", c.dataset, method, format_number(area));
        for (const auto& [child, value] : aur_per_child(scored)) {
            per_child_csv += fmt::format("{},{},{},{}\n", c.dataset, method, names[child], format_number(value));
        }
        results[method] = area;
    }
    write_text(c.out / "aur.csv", aur_csv);
    write_text(c.out / "aur_per_child.csv", per_child_csv);
    auto m = manifest(c);
    m["diagnostics"] = {{"aur", results}};
    write_text(c.out / "manifest_evaluate.json", m.dump(2) + "\n");
    return 0;
}

int run_rank(const RunConfig& c) {
    std::vector<std::string> targets;
    for (const auto& [target, kinase] : c.known) targets.push_back(target);
    std::string header = "method";
    for (const auto& t : targets) header += "," + t;
    std::string body;
    std::map<std::string, std::size_t> candidate_counts;
    for (const auto& path : c.weights) {
        const auto edges = read_edges(path);
        const auto names = names_from(edges);
        std::string row = method_of(edges, path);
        for (const auto& target : targets) {
            std::vector<Species> ids;
            std::vector<std::optional<double>> weights;
            for (const auto& e : edges) {
                if (e.child != target) continue;
                ids.push_back(species_index(names, e.candidate));
                weights.push_back(e.weight);
            }
            if (ids.empty()) throw InvalidInput(fmt::format("{}: no candidates for target '{}'", path.string(), target));
            std::vector<Species> excluded;
            if (auto it = c.exclude.find(target); it != c.exclude.end()) {
                for (const auto& name : it->second) {
                    if (std::find(names.begin(), names.end(), name) != names.end()) excluded.push_back(species_index(names, name));
                }
            }
            const auto known = c.known.at(target);
            const auto report = rank_candidates(ids, weights, species_index(names, known), excluded);
            row += "," + report.text();
            candidate_counts.try_emplace(target, report.candidates);
        }
        body += row + "\n";
    }
    std::string counts = "candidates";
    for (const auto& t : targets) counts += "," + std::to_string(candidate_counts[t]);
    write_text(c.out / "ranks.csv", header + "\n" + body + counts + "\n");
    auto m = manifest(c);
    write_text(c.out / "manifest_rank.json", m.dump(2) + "\n");
    return 0;
}

}  // namespace

int run_pipeline(RunConfig cfg) {
    finalize(cfg);
    if (cfg.command == "simulate") return run_simulate(cfg);
    if (cfg.command == "infer") return run_infer(cfg);
    if (cfg.command == "evaluate") return run_evaluate(cfg);
    return run_rank(cfg);
}

}  // namespace gknet
