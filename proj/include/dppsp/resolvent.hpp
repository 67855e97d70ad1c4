#pragma once

#include <Eigen/Dense>

#include "dppsp/feasible_set.hpp"
#include "dppsp/saddle.hpp"

namespace dppsp {

struct ResolventConfig {
    double alpha = 0.5;
    double inner_tol = 1e-10;
    int max_inner_iters = 10000;
    /// Relaxation for the projected fixed-point iteration, in (0, 1].
    /// 0 selects the default 1 / (1 + alpha * Lhat) with Lhat estimated from
    /// 100 sampled difference quotients of B.
    double inner_step = 0.0;
};

/// Solves z + alpha * (B + N_Z)(z) = rhs for one node, i.e. evaluates the
/// resolvent of the constrained local operator. Construction precomputes
/// everything reusable across calls: the relaxation parameter, and for
/// affine B an LU factorization of I + alpha*A.
///
/// solve() returns a point of Z whose fixed-point residual
/// ||z - proj(rhs - alpha B(z))|| is at most inner_tol. The unconstrained
/// affine solution is used directly whenever it already lies in Z; otherwise
/// the damped iteration
///     z <- (1 - eta) z + eta proj(rhs - alpha B(z))
/// runs from the warm start.
class ResolventSolver {
public:
    ResolventSolver(const LocalSaddle& node, const FeasibleSet& set,
                    ResolventConfig cfg);

    /// Throws StepSizeViolation when alpha * rho >= 1 (checked at
    /// construction), NoConvergence when the budget runs out.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs, const Eigen::VectorXd& warm,
                          int* inner_iters = nullptr) const;

    /// ||z - proj(rhs - alpha B(z))||.
    double residual(const Eigen::VectorXd& z, const Eigen::VectorXd& rhs) const;

    double eta() const { return eta_; }
    const ResolventConfig& config() const { return cfg_; }

private:
    const LocalSaddle* node_;
    const FeasibleSet* set_;
    ResolventConfig cfg_;
    double eta_ = 1.0;
    bool affine_ = false;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;  // I + alpha * A
    Eigen::VectorXd alpha_offset_;             // alpha * b
};

/// One-shot convenience wrapper around ResolventSolver. Warm starts from
/// proj(rhs) when no warm point is given.
Eigen::VectorXd resolve(const LocalSaddle& node, const FeasibleSet& set,
                        const Eigen::VectorXd& rhs, const ResolventConfig& cfg,
                        const Eigen::VectorXd* warm = nullptr,
                        int* inner_iters = nullptr);

/// Direct linear-solve resolvent for affine B(z) = A z + b: solves
/// (I + alpha A) z = rhs - alpha b and returns the solution when it lies in
/// the set (SingularSystem when the system is near-singular). Falls back to
/// the damped iteration when the unconstrained solution is infeasible.
Eigen::VectorXd resolve_affine_exact(const Eigen::MatrixXd& A,
                                     const Eigen::VectorXd& b,
                                     const FeasibleSet& set,
                                     const Eigen::VectorXd& rhs,
                                     const ResolventConfig& cfg);

}  // namespace dppsp
