#include "gknet/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "gknet/errors.hpp"

namespace gknet {
namespace {

// NA sorts after every number; otherwise descending.
bool higher(const std::optional<double>& a, const std::optional<double>& b) {
    if (!a) return false;
    if (!b) return true;
    return *a > *b;
}

}  // namespace

std::vector<RocPoint> roc_curve(std::span<const ScoredEdge> edges) {
    std::vector<const ScoredEdge*> labelled;
    std::size_t pos = 0, neg = 0;
    for (const auto& e : edges) {
        if (e.child == e.candidate) throw InvalidInput(fmt::format("self edge ({0},{0}) in scored edges", e.child));
        if (e.weight && !std::isfinite(*e.weight)) throw InvalidInput("non-finite edge weight");
        if (e.label == Label::unknown) continue;
        labelled.push_back(&e);
        (e.label == Label::positive ? pos : neg) += 1;
    }
    if (pos == 0 || neg == 0) throw InvalidInput("ROC needs at least one positive and one negative edge");

    std::stable_sort(labelled.begin(), labelled.end(),
                     [](const ScoredEdge* a, const ScoredEdge* b) { return higher(a->weight, b->weight); });
    std::vector<RocPoint> out{{0.0, 0.0}};
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < labelled.size();) {
        std::size_t end = k;
        while (end < labelled.size() && labelled[end]->weight == labelled[k]->weight) {
            (labelled[end]->label == Label::positive ? tp : fp) += 1;
            ++end;
        }
        out.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                       static_cast<double>(tp) / static_cast<double>(pos)});
        k = end;
    }
    return out;
}

double auc(std::span<const RocPoint> points) {
    double area = 0.0;
    for (std::size_t k = 1; k < points.size(); ++k) {
        area += (points[k].fpr - points[k - 1].fpr) * 0.5 * (points[k].tpr + points[k - 1].tpr);
    }
    return area;
}

double aur(std::span<const ScoredEdge> edges) {
    const auto curve = roc_curve(edges);
    return auc(curve);
}

std::map<Species, double> aur_per_child(std::span<const ScoredEdge> edges) {
    std::map<Species, std::vector<ScoredEdge>> by_child;
    for (const auto& e : edges) by_child[e.child].push_back(e);
    std::map<Species, double> out;
    for (const auto& [child, list] : by_child) {
        const bool has_pos = std::any_of(list.begin(), list.end(), [](auto& e) { return e.label == Label::positive; });
        const bool has_neg = std::any_of(list.begin(), list.end(), [](auto& e) { return e.label == Label::negative; });
        if (has_pos && has_neg) out[child] = aur(list);
    }
    return out;
}

RankReport rank_candidates(std::span<const Species> candidates, std::span<const std::optional<double>> weights,
                           Species known, std::span<const Species> excluded) {
    if (candidates.size() != weights.size()) throw InvalidInput("candidates and weights differ in length");
    auto is_excluded = [&](Species j) { return std::find(excluded.begin(), excluded.end(), j) != excluded.end(); };
    if (is_excluded(known)) throw InvalidInput(fmt::format("known candidate {} is excluded", known));

    const std::optional<double>* known_weight = nullptr;
    RankReport report;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (is_excluded(candidates[k])) continue;
        ++report.candidates;
        if (candidates[k] == known) known_weight = &weights[k];
    }
    if (!known_weight) throw InvalidInput(fmt::format("unknown candidate id {}", known));
    if (known_weight->has_value() && !std::isfinite(**known_weight)) throw InvalidInput("non-finite weight");
    if (!known_weight->has_value()) return report;

    std::size_t above = 0;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (!is_excluded(candidates[k]) && higher(weights[k], *known_weight)) ++above;
    }
    report.rank = above + 1;
    return report;
}

}  // namespace gknet
