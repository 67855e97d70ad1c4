#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dppsp/feasible_set.hpp"
#include "dppsp/mixing.hpp"
#include "dppsp/resolvent.hpp"
#include "dppsp/saddle.hpp"

namespace dppsp {

/// Which recursion the engine runs. Both trace the same trajectory up to
/// resolvent tolerance; the eliminated form communicates one vector per
/// round, the dual-carrying form keeps the consensus multiplier q explicit.
enum class RecursionForm { Eliminated, DualCarrying };

enum class ExecMode { Serial, Parallel };

struct AlgoConfig {
    double alpha = 0.5;
    int rounds = 100;  // outer rounds T
    /// Inner-solver settings; the alpha member is ignored (the outer alpha
    /// above is authoritative for every resolve).
    ResolventConfig resolvent;
    RecursionForm form = RecursionForm::Eliminated;
    ExecMode exec = ExecMode::Parallel;
    std::uint64_t seed = 0;  // echoed into traces; consumed by the harness
    int snapshot_every = 0;  // store the stacked iterate every k rounds; 0 = off
};

/// Network state after round t: N blocks of dimension block_dim.
struct StackedState {
    Eigen::VectorXd current;   // z^t
    Eigen::VectorXd previous;  // z^{t-1}
    Eigen::VectorXd last_rhs;  // resolvent input that produced `current`
    int round = 0;
    int block_dim = 0;

    int node_count() const {
        return block_dim > 0 ? static_cast<int>(current.size()) / block_dim : 0;
    }
    /// The operator selection (gradient plus normal-cone element) at
    /// `current`, recovered exactly from the producing resolve as
    /// (last_rhs - current)/alpha. Using the selection the resolvent actually
    /// chose keeps the next round's right-hand side consistent at boundary
    /// points, where re-evaluating the gradient alone would drop the
    /// normal-cone term.
    Eigen::VectorXd cached_op(double alpha) const {
        return (last_rhs - current) / alpha;
    }
};

/// Consensus multiplier carried by the dual form. q^0 = 0; every increment
/// lies in the range of U, so q stays orthogonal to the consensus subspace.
struct DualState {
    Eigen::VectorXd q;
};

struct TraceRecord {
    int round = 0;
    double stationarity_gap = 0.0;  // (1/alpha)*||sum_n (z_n^{t-1} - z_n^t)||
    double consensus_error = 0.0;   // ||U z^t||
    double mean_inner_iters = 0.0;
    double wall_time_ms = 0.0;
};

struct Snapshot {
    int round = 0;
    Eigen::VectorXd state;
};

struct RunTrace {
    std::vector<TraceRecord> records;
    std::vector<Snapshot> snapshots;
    AlgoConfig config;
    Eigen::VectorXd final_state;
    double initial_consensus_error = 0.0;  // ||U z^0|| after projection
    /// Worst over all rounds of
    /// ||alpha*sum_n cached_op_n - sum_n (z_n^{t-1} - z_n^t)||,
    /// a cheap structural check: summing the update over nodes telescopes
    /// because the mixing weights have unit column sums.
    double identity_residual = 0.0;
    std::vector<std::string> warnings;
    std::string error;  // nonempty when a resolve failed and the run aborted

    bool completed() const { return error.empty(); }
    int rounds_recorded() const { return static_cast<int>(records.size()); }
};

/// Runs the decentralized proximal-point recursion over a fixed mixing
/// matrix. Per-node resolvent solvers are built once at construction; the
/// per-round node loop is the only parallel region.
class Engine {
public:
    Engine(std::vector<LocalSaddle> problems, std::vector<FeasibleSet> sets,
           MixingMatrix mixing, AlgoConfig cfg);

    int node_count() const { return static_cast<int>(problems_.size()); }
    int block_dim() const { return block_dim_; }
    const AlgoConfig& config() const { return cfg_; }
    const MixingMatrix& mixing() const { return mixing_; }
    const std::vector<std::string>& regime_warnings() const { return warnings_; }

    /// Blockwise projection of the zero vector: the default initial point.
    Eigen::VectorXd default_z0() const;

    /// Round-0 state: blocks projected onto their feasible sets.
    StackedState make_initial_state(const Eigen::VectorXd& z0) const;

    /// First round: z^1_n = resolve_n(sum_m (2 w_nm - delta_nm) z^0_m).
    StackedState init_step(const StackedState& start,
                           Eigen::VectorXd* inner_iters = nullptr) const;

    /// One round of the eliminated recursion,
    ///   z^{t+1}_n = resolve_n(sum_m w_nm (2 z^t_m - z^{t-1}_m)
    ///                         + alpha*cached_op_n),
    /// computed as current + (last_rhs - previous) + (W-I)(2 current - previous)
    /// so that for a single node the right-hand side cancels to z^t exactly
    /// in floating point and the run reduces to plain proximal point.
    StackedState step(const StackedState& state,
                      Eigen::VectorXd* inner_iters = nullptr) const;

    /// One round of the dual-carrying recursion:
    ///   z^{t+1} = resolve(2 W_hat z^t - z^t - U q^t),  q^{t+1} = U z^t + q^t.
    StackedState step_q_form(const StackedState& state, DualState& dual,
                           Eigen::VectorXd* inner_iters = nullptr) const;

    /// Full run: init plus rounds-1 steps (or `rounds` dual steps from q=0),
    /// one trace record per round. A resolve failure aborts the run and
    /// returns the partial trace with the error recorded.
    RunTrace run(const Eigen::VectorXd& z0) const;
    RunTrace run() const;  // from default_z0()

private:
    Eigen::VectorXd resolve_all(const Eigen::VectorXd& rhs,
                                const Eigen::VectorXd& warm,
                                Eigen::VectorXd* inner_iters) const;

    std::vector<LocalSaddle> problems_;
    std::vector<FeasibleSet> sets_;
    MixingMatrix mixing_;
    AlgoConfig cfg_;
    std::vector<ResolventSolver> solvers_;
    Eigen::MatrixXd weights_minus_identity_;
    std::vector<std::string> warnings_;
    int block_dim_ = 0;
};

/// Plain proximal point z^{t+1} = resolve(z^t), the single-node baseline.
/// Returns the iterates z^1..z^rounds.
std::vector<Eigen::VectorXd> proximal_point_reference(
    const LocalSaddle& node, const FeasibleSet& set, const Eigen::VectorXd& z0,
    int rounds, ResolventConfig cfg);

/// Uniform draw from the recorded rounds. Throws EmptyTrace.
int sample_iterate(const RunTrace& trace, std::uint64_t seed);

/// CSV with header round,stationarity_gap,consensus_error,mean_inner_iters,
/// wall_time_ms; 17 significant digits.
void write_trace_csv(const RunTrace& trace, const std::string& path);

/// Sidecar CSV of stored iterates: one line per snapshot,
/// round,v_0,...,v_{Nd-1}.
void write_snapshots_csv(const RunTrace& trace, const std::string& path);

}  // namespace dppsp
