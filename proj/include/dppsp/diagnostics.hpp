#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dppsp/core.hpp"
#include "dppsp/feasible_set.hpp"
#include "dppsp/mixing.hpp"
#include "dppsp/saddle.hpp"

namespace dppsp {

/// (1/alpha) ||sum_n (z_n^{t-1} - z_n^t)||: the norm of the aggregate
/// operator selection at the new iterate, recovered from the displacement.
double stationarity_gap(const StackedState& after, double alpha);

/// Largest alpha keeping the lifted splitting operator strongly monotone
/// with margin lambda_min(W)/4. Infinite for monotone problems.
double margin_stepsize_cap(double lambda_min_w, double rho);

/// Largest alpha for which the averaged-iterate guarantees apply
/// (1/(2 rho)); infinite for monotone problems.
double gap_stepsize_cap(double rho);

/// Empirical strong-monotonicity margin of the splitting operator
///   E(z, q) = [z + alpha B(z) + 2 U q ; q]
/// as the smallest quotient <E(v1)-E(v2), v1-v2>/||v1-v2||^2 over sampled
/// pairs. Samples stay strictly inside the sets so the normal-cone term is
/// zero; boundary selections only increase the quotient, so the interior
/// estimate is the binding one. The estimate never undershoots the true
/// margin of the sampled region.
double strong_monotonicity_margin(const MixingMatrix& mixing,
                                  const std::vector<LocalSaddle>& problems,
                                  const std::vector<FeasibleSet>& sets,
                                  double alpha, int pairs, std::uint64_t seed);

/// Exact margin for affine operators: lambda_min of the symmetric part of
/// the dense assembled matrix [[I + alpha blkdiag(A_n), 2U], [0, I]].
/// Throws ValidationError when any node lacks an affine form.
double strong_monotonicity_margin_affine(const MixingMatrix& mixing,
                                         const std::vector<LocalSaddle>& problems,
                                         double alpha);

struct MviReport {
    bool holds = true;
    double worst = 0.0;       // minimum of B_n(z)'(z - z*) over the probe set
    Eigen::VectorXd witness;  // where the minimum occurred
    int node = -1;            // which node produced it
};

/// Per-node sign condition B_n(z)'(z - z*) >= 0 over Z. Deterministic grid
/// of roughly `budget` points for block dims <= 3, seeded samples above.
/// A report, not an assertion: holds = (worst >= -1e-10).
MviReport check_mvi(const std::vector<LocalSaddle>& problems,
                    const std::vector<FeasibleSet>& sets,
                    const Eigen::VectorXd& z_star_block, int budget,
                    std::uint64_t seed = 0);

/// Everything the guarantee formulas consume, derived from one reference
/// stationary pair (z*, q*) and the run's start point.
struct BoundInputs {
    Eigen::VectorXd z_star;  // stacked, all blocks equal
    Eigen::VectorXd q_star;
    double rho = 0.0;
    double alpha = 0.0;
    int nodes = 0;
    double diameter = 0.0;
    double lambda_min_w = 0.0;
    /// ||z0 - z*|| in the lifted-W seminorm plus ||U z0 - q*||.
    double phi0_m_norm = 0.0;
};

/// Builds BoundInputs for a consensus stationary block. q* is the
/// minimum-norm solution of U q* = -alpha F(z*) (or zero when zero_dual is
/// set, admissible for the sign-condition guarantee). Throws NumericalError
/// when the pair fails to certify stationarity to 1e-8.
BoundInputs make_bound_inputs(const MixingMatrix& mixing,
                              const std::vector<LocalSaddle>& problems,
                              const std::vector<FeasibleSet>& sets,
                              const Eigen::VectorXd& z_star_block, double alpha,
                              const Eigen::VectorXd& z0, bool zero_dual = false);

struct GuaranteeBounds {
    double gap = 0.0;
    double consensus = 0.0;
};

/// Averaged-iterate guarantee for weakly monotone operators, valid for
/// alpha <= 1/(2 rho) (RegimeViolation above):
///   gap       <= (1/alpha) sqrt(N/lambda_min) (phi0/sqrt(T) + floor)
///   consensus <= phi0/sqrt(T) + floor,     floor = sqrt(2 alpha rho N) D.
GuaranteeBounds weakly_monotone_bounds(const BoundInputs& b, int rounds);

/// Guarantee under the per-node sign condition at z*:
///   gap <= N D / (alpha sqrt(T)),   consensus <= sqrt(N) D / sqrt(T).
GuaranteeBounds mvi_bounds(int nodes, double diameter, double alpha, int rounds);

/// Exact expectation of the recorded gap under uniform round sampling,
/// evaluated over both sampling windows ({1..T} and {2..T}); the larger is
/// returned so the reported value covers either indexing convention.
double expected_gap(const RunTrace& trace);

/// Same for consensus over {1..T}, {2..T} and {0..T-1}; round 0 enters via
/// the trace's recorded initial consensus error.
double expected_consensus(const RunTrace& trace);

/// Least-squares slope of log(running-mean gap) against log(round) over
/// rounds [first_round, last_round]. Throws DegenerateFit when the window
/// has fewer than 10 positive gaps or the gap reaches the numerical floor.
double rate_slope(const RunTrace& trace, int first_round, int last_round);

enum class RefMethod { ClosedForm, Extragradient, Grid };

/// Consensus stationary block of the aggregate operator sum_n B_n over the
/// common feasible set. ClosedForm solves the affine aggregate, the
/// extragradient loop iterates to natural-residual 1e-9 from the set
/// center, and Grid scans block dims <= 2 at step 1e-3, breaking residual
/// ties toward the candidate that best satisfies the sign condition.
/// Throws OracleInconclusive when the chosen method cannot certify a point.
Eigen::VectorXd reference_solution(const std::vector<LocalSaddle>& problems,
                                   const std::vector<FeasibleSet>& sets,
                                   RefMethod method, std::uint64_t seed = 0);

}  // namespace dppsp
