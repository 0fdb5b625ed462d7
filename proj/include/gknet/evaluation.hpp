#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gknet/kinetics.hpp"

namespace gknet {

enum class Label { negative, positive, unknown };

/// One (child, candidate) score. An empty weight is NA and ranks below every
/// numeric weight.
struct ScoredEdge {
    Species child = 0;
    Species candidate = 0;
    std::optional<double> weight;
    Label label = Label::unknown;
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

/// ROC curve over every labelled edge, sweeping unique thresholds from high
/// to low with ties in one step. Unknown labels are skipped. Throws
/// InvalidInput without at least one positive and one negative, for a
/// self-edge, or for a non-finite weight.
std::vector<RocPoint> roc_curve(std::span<const ScoredEdge> edges);

/// Trapezoidal area under a curve given in sweep order.
double auc(std::span<const RocPoint> points);

/// auc(roc_curve(edges)).
double aur(std::span<const ScoredEdge> edges);

/// AUR of each child's own edges; children lacking a positive or a negative
/// are omitted.
std::map<Species, double> aur_per_child(std::span<const ScoredEdge> edges);

struct RankReport {
    std::optional<std::size_t> rank;  // empty when the known candidate is NA
    std::size_t candidates = 0;       // after exclusions

    std::string text() const { return rank ? std::to_string(*rank) : "NA"; }
};

/// Competition rank (ties share the best rank) of `known` by descending
/// weight, after removing `excluded`. Throws InvalidInput when `known` is not
/// among the remaining candidates or the inputs disagree in length.
RankReport rank_candidates(std::span<const Species> candidates, std::span<const std::optional<double>> weights,
                           Species known, std::span<const Species> excluded = {});

}  // namespace gknet
