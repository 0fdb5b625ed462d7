#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gknet/kinetics.hpp"

namespace gknet {

struct SimConfig {
    std::size_t p = 12;
    std::size_t n = 24;
    double noise_sd = 0.2;
    double root_prob = 0.25;        // chance a node has no kinase
    std::size_t max_kinases = 2;    // non-roots draw 1..max_kinases
    std::size_t max_inhibitors = 1; // per kinase, 0..max_inhibitors
    double total_sd = 0.5;          // log-scale s.d. of total protein
    double phi_low = 0.2;
    double phi_high = 0.8;
    std::uint64_t seed = 0;
    std::size_t max_retries = 10;
};

/// Throws InvalidInput for p < 2, n < 1, negative noise, root_prob outside
/// [0, 1] or a bad phi range.
void validate(const SimConfig& config);

enum class EdgeRole { kinase, inhibitor };
const char* to_string(EdgeRole role);

struct TruthEdge {
    Species child;
    Species parent;
    EdgeRole role;
};

struct GroundTruthNetwork {
    std::vector<std::string> names;
    std::vector<MechanismModel> mechanisms;  // one per node
    std::vector<KineticParams> params;
    std::vector<std::optional<double>> phi;  // set exactly for roots

    std::size_t species() const { return mechanisms.size(); }
    bool is_root(Species i) const { return mechanisms[i].empty(); }
    /// adjacency(j, i) is true iff j is a parent of i.
    bool edge(Species parent, Species child) const { return mechanisms[child].is_parent(parent); }
    std::vector<TruthEdge> edges() const;
};

/// Throws InvalidInput unless every mechanism is valid, the parameters
/// match, and exactly the roots carry phi in (0, 1).
void validate(const GroundTruthNetwork& net);

/// Random network; cycles are allowed. attempt selects an independent draw
/// from the same seed.
GroundTruthNetwork generate_network(const SimConfig& config, std::size_t attempt = 0);

inline constexpr double kBalanceTolerance = 1e-10;
inline constexpr std::size_t kMaxSweeps = 10000;

/// Balance right-hand side for node i at the current state:
///   sum_E v_E X_E (U_i - x) / ((U_i - x) + K_E (1 + sum_I X_I / K_I))
double balance_rhs(const GroundTruthNetwork& net, std::span<const double> x, std::span<const double> totals,
                   Species i, double xi);

/// Largest |X_i - f_i| / U_i over all nodes.
double balance_residual(const GroundTruthNetwork& net, std::span<const double> x, std::span<const double> totals);

/// Steady-state phospho levels given per-node totals, by Gauss-Seidel sweeps
/// with a bisection solve per node. Throws SolverError after kMaxSweeps.
std::vector<double> solve_steady_state(const GroundTruthNetwork& net, std::span<const double> totals);

struct SimulatedData {
    GroundTruthNetwork network;
    Dataset data;                // unnormalised, noisy
    Eigen::MatrixXd totals;      // n x p, before noise
    Eigen::MatrixXd clean;       // noiseless phospho, n x p
    std::size_t attempt = 0;     // network draw that succeeded
};

/// Draws totals and noise for every sample of a fixed network.
SimulatedData simulate_dataset(const GroundTruthNetwork& net, const SimConfig& config, std::size_t attempt = 0);

/// generate_network + simulate_dataset, redrawing the network on solver
/// failure up to max_retries times.
SimulatedData simulate(const SimConfig& config);

}  // namespace gknet
