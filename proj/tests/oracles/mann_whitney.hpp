#pragma once

// Test-only AUC as the Mann-Whitney statistic: the share of (positive,
// negative) pairs ordered correctly, ties counting one half. NA scores below
// every number and ties with other NA scores.

#include <optional>
#include <vector>

namespace oracle {

inline double mann_whitney_auc(const std::vector<std::optional<double>>& pos,
                               const std::vector<std::optional<double>>& neg) {
    double credit = 0.0;
    for (const auto& a : pos) {
        for (const auto& b : neg) {
            if (!a && !b) {
                credit += 0.5;
            } else if (!b) {
                credit += 1.0;
            } else if (a) {
                credit += *a > *b ? 1.0 : (*a == *b ? 0.5 : 0.0);
            }
        }
    }
    return credit / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace oracle
