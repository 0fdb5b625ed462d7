#pragma once

#include <string>
#include <vector>

#include "gknet/kinetics.hpp"
#include "gknet/log.hpp"

namespace testing {

/// Collects warnings for the lifetime of the object.
class WarningCapture {
  public:
    WarningCapture() {
        previous_ = gknet::set_warning_sink([this](const std::string& m) { messages.push_back(m); });
    }
    ~WarningCapture() { gknet::set_warning_sink(previous_); }
    std::vector<std::string> messages;

  private:
    gknet::WarningSink previous_;
};

/// Dataset with columns given as phospho and unphospho rows-by-species lists.
inline gknet::Dataset make_dataset(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& x0) {
    gknet::Dataset d;
    const auto n = static_cast<Eigen::Index>(x.size());
    const auto p = static_cast<Eigen::Index>(x.front().size());
    d.phospho.resize(n, p);
    d.unphospho.resize(n, p);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < p; ++c) {
            d.phospho(r, c) = x[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            d.unphospho(r, c) = x0[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
    }
    for (Eigen::Index c = 0; c < p; ++c) d.species_names.push_back("S" + std::to_string(c));
    return d;
}

}  // namespace testing
