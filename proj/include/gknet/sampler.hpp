#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gknet/kinetics.hpp"
#include "gknet/model_prior.hpp"
#include "gknet/rng.hpp"

namespace gknet {

/// Probabilities of the structural move drawn at the start of each iteration.
/// `none` skips the structural step; the within-model sweep always runs.
struct MoveWeights {
    double kinase = 0.35;     // birth or death, 1/2 each
    double inhibitor = 0.25;  // birth or death, 1/2 each
    double swap = 0.15;
    double none = 0.25;
};

struct SamplerConfig {
    std::size_t total_iters = 30000;
    std::size_t burn_in = 5000;
    std::uint64_t seed = 0;
    double step_size_log = 0.25;
    MoveWeights move_weights;
    std::size_t n_restarts = 3;
    ModelPriorConfig prior;
    std::size_t audit_interval = 1000;
    /// Data-informed structural moves: a newborn kinase's v is drawn from a
    /// log-normal centred on its conditional least-squares value, and
    /// inhibitor births/deaths rescale K_E so the mean effective Michaelis
    /// constant is unchanged. When false every new parameter is a prior draw.
    /// Either choice leaves the posterior invariant.
    bool informed_proposals = true;
    /// Structural moves drawn per iteration before the within-model sweep.
    std::size_t structural_moves = 10;

};

/// Throws InvalidInput unless burn_in < total_iters, the step is positive and
/// the move weights are positive and sum to one.
void validate(const SamplerConfig& config);

/// Per-child restrictions of the model space.
struct ChildOptions {
    std::vector<Species> excluded;       // never proposed as parents
    std::vector<Species> prior_parents;  // parents of the prior model M^0
};

struct ChainState {
    MechanismModel model;
    KineticParams params;
    double cached_log_lik = 0.0;
    double cached_log_prior = 0.0;

    double log_posterior() const { return cached_log_lik + cached_log_prior; }
};

enum class MoveKind : std::size_t { kinase_birth, kinase_death, inhibitor_birth, inhibitor_death, swap };
inline constexpr std::size_t kMoveKinds = 5;
const char* to_string(MoveKind kind);

struct MoveCounter {
    std::size_t proposed = 0;
    std::size_t accepted = 0;
    double rate() const { return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

struct ChainStats {
    std::array<MoveCounter, kMoveKinds> structural{};
    MoveCounter within;
    std::size_t audits = 0;
};

/// A fully evaluated candidate state and its Metropolis-Hastings log ratio.
struct Proposal {
    MoveKind kind;
    ChainState state;
    double ssr = 0.0;
    std::vector<std::vector<double>> contributions;
    double log_accept = 0.0;  // log of A(s,s') p(D|s') / p(D|s)
};

/// Reversible-jump chain over the mechanisms of one child.
///
/// Every iteration draws one structural move and then updates each continuous
/// parameter by a random walk on its logarithm. Births draw new parameters from
/// their priors, so prior and proposal densities cancel and the acceptance
/// ratio reduces to the model-prior ratio, the ratio of move-selection
/// probabilities and the likelihood ratio.
class RjChain {
  public:
    /// data must stay alive and unmodified while the chain exists.
    RjChain(const Dataset& data, Species child, SamplerConfig config, ChildOptions options = {},
            std::size_t restart = 0);

    const ChainState& state() const { return state_; }
    const ChainStats& stats() const { return stats_; }
    const ModelPrior& model_prior() const { return prior_; }
    const std::vector<Species>& candidates() const { return prior_.candidates(); }
    Rng& rng() { return rng_; }

    /// Replaces the state; throws InvalidInput when it has zero prior mass or
    /// the parameters do not match the mechanism.
    void set_state(MechanismModel model, KineticParams params);

    /// One full iteration: a structural move followed by the within-model sweep.
    void step();
    /// One structural move of the given kind, drawn and then accepted or rejected.
    bool structural_move(MoveKind kind);
    /// Random-walk update of every continuous parameter in turn.
    void within_model_update(double step);

    // Deterministic proposals. Return nullopt when the move has no legal target.
    // Optional hints carry an already computed proposal density for the new
    // parameter so it is not rebuilt.
    struct RateProposal;
    struct GridProposal;
    std::optional<Proposal> propose_kinase_birth(Species kinase, std::vector<Species> inhibitors,
                                                 KinaseRates rates, const RateProposal* hint = nullptr) const;
    std::optional<Proposal> propose_kinase_death(std::size_t term) const;
    std::optional<Proposal> propose_inhibitor_birth(std::size_t term, Species inhibitor, double k_i,
                                                    const GridProposal* hint = nullptr) const;
    std::optional<Proposal> propose_inhibitor_death(std::size_t term, std::size_t position) const;
    std::optional<Proposal> propose_swap(std::size_t term, Species kinase, double v, double k_e,
                                         const RateProposal* hint = nullptr) const;

    void accept(Proposal proposal);

    /// Recomputes likelihood and prior from scratch; throws std::logic_error if
    /// the caches differ by more than 1e-9, otherwise refreshes them.
    void audit();

    /// log-acceptance of a sigma move; exposed for inspection.
    double sigma_log_accept(double sigma_new) const;

    /// Proposal for log v of `term` given the summed contributions of every
    /// other term: a normal with this centre and scale.
    struct RateProposal {
        double center = 0.0;
        double scale = 1.0;
    };
    RateProposal rate_proposal(const std::vector<double>& others, bool others_empty, const KinaseTerm& term,
                               const KinaseRates& rates) const;

    /// Piecewise-constant density on log K_I over a fixed grid, proportional
    /// to the target evaluated at bin centres, mixed with the prior.
    struct GridProposal {
        std::vector<double> log_mass;  // normalised, one per bin
        double log_density(double u) const;
        double draw(Rng& rng) const;
    };
    /// Grid proposal for adding `inhibitor` to a term given the other terms'
    /// contributions. base is the term without the inhibitor.
    GridProposal inhibitor_proposal(const std::vector<double>& others, const KinaseTerm& base,
                                    const KinaseRates& base_rates, Species inhibitor) const;

  private:
    struct Fit {
        double ssr;
        std::vector<std::vector<double>> contributions;
    };

    Fit fit(const MechanismModel& model, const KineticParams& params) const;
    void term_contribution(const KinaseTerm& term, const KinaseRates& rate, std::span<double> out) const;
    double ssr_of(const std::vector<std::vector<double>>& contributions, double mu) const;
    double log_prior_of(const MechanismModel& model, const KineticParams& params) const;
    /// log p(v) - log q(v) for a newborn rate; zero for prior draws.
    double log_rate_weight(const RateProposal& q, double v) const;
    /// Sum of every cached term contribution except `term` (npos: none left out).
    std::vector<double> others_sum(std::size_t term) const;
    std::optional<Proposal> finish(MoveKind kind, MechanismModel model, KineticParams params,
                                   double log_proposal_ratio) const;
    std::vector<Species> non_kinases(const MechanismModel& model) const;
    std::size_t kinase_choice_count(const MechanismModel& model) const;
    void update_rate(std::size_t term, double KinaseRates::*field, double step);
    void update_inhibitor(std::size_t term, std::size_t position, double step);

    void update_sigma(double step);
    void initialize(std::size_t restart);

    const Dataset& data_;
    Species child_;
    SamplerConfig config_;
    ModelPrior prior_;
    Rng rng_;
    std::vector<double> log_x_;
    std::vector<double> mean_x_;  // phospho column means
    const double* x0_ = nullptr;
    ChainState state_;
    double ssr_ = 0.0;
    std::vector<std::vector<double>> contributions_;
    std::vector<double> scratch_;
    ChainStats stats_;
    std::size_t iteration_ = 0;
};

using SampleObserver = std::function<void(std::size_t iteration, const ChainState& state)>;

/// Runs one restart for one child, calling observer for every post-burn-in
/// iteration.
ChainStats run_chain(const Dataset& data, Species child, const SamplerConfig& config, std::size_t restart,
                     const SampleObserver& observer, const ChildOptions& options = {});

/// Convenience form returning the post-burn-in states.
std::vector<ChainState> run_chain(const Dataset& data, Species child, const SamplerConfig& config,
                                  std::size_t restart = 0, const ChildOptions& options = {});

/// Streaming counts of parent roles and mechanism visits for one chain.
class EdgeTally {
  public:
    EdgeTally(std::size_t species, Species child);
    void add(const MechanismModel& model);

    Species child() const { return child_; }
    std::size_t species() const { return kinase_.size(); }
    std::size_t samples() const { return samples_; }
    double edge_prob(Species j) const;
    double kinase_prob(Species j) const;
    double inhibitor_prob(Species j) const;
    std::size_t edge_count(Species j) const { return edge_[j]; }
    std::size_t kinase_count(Species j) const { return kinase_[j]; }
    std::size_t inhibitor_count(Species j) const { return inhibitor_[j]; }
    const std::map<MechanismModel, std::size_t>& model_counts() const { return models_; }

  private:
    Species child_;
    std::size_t samples_ = 0;
    std::vector<std::size_t> edge_, kinase_, inhibitor_;
    std::map<MechanismModel, std::size_t> models_;
};

inline constexpr double kConvergenceTolerance = 0.1;

struct ChildPosterior {
    Species child = 0;
    std::vector<double> edge_prob;       // indexed by candidate parent j
    std::vector<double> kinase_prob;
    std::vector<double> inhibitor_prob;
    std::vector<std::vector<double>> restart_edge_prob;
    std::vector<double> discrepancy;     // range of restart edge probabilities
    double max_discrepancy = 0.0;
    bool converged = true;
    std::map<MechanismModel, double> model_freq;
    std::size_t samples = 0;
};

/// Pools restart tallies for one child. Throws InvalidInput if there are no
/// restarts or any restart has no samples.
ChildPosterior summarize(std::span<const EdgeTally> restarts);
ChildPosterior summarize(std::size_t species, Species child,
                         const std::vector<std::vector<ChainState>>& samples_per_restart);

struct PosteriorSummary {
    std::size_t species = 0;
    std::vector<Species> children;
    Eigen::MatrixXd edge_prob;       // (j, i): P(j in pi_i | D)
    Eigen::MatrixXd kinase_prob;
    Eigen::MatrixXd inhibitor_prob;
    Eigen::MatrixXd discrepancy;
    std::vector<Eigen::MatrixXd> restart_edge_prob;
    std::vector<std::map<MechanismModel, double>> model_freq;  // indexed by child
    std::vector<ChainStats> stats;                             // per (child, restart), child-major
    double max_discrepancy = 0.0;
    bool converged = true;

    /// Fraction of inferred (candidate, child) pairs whose discrepancy exceeds
    /// the tolerance.
    double nonconverged_fraction() const;
};

struct InferenceOptions {
    std::map<Species, ChildOptions> child_options;
    std::size_t threads = 0;  // 0: hardware concurrency
    /// Optional per-(child, restart) sample observer. Called from worker
    /// threads; each (child, restart) pair is handled by one thread.
    std::function<void(Species child, std::size_t restart, std::size_t iteration, const ChainState&)> trace;
};

/// Runs n_restarts chains for every child and reduces them.
PosteriorSummary infer_network(const Dataset& data, const SamplerConfig& config, std::span<const Species> children,
                               const InferenceOptions& options = {});

}  // namespace gknet
