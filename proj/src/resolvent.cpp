#include "dppsp/resolvent.hpp"

#include <cmath>

#include "dppsp/errors.hpp"

namespace dppsp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Seed for the one-time Lipschitz probe behind the default relaxation.
constexpr std::uint64_t kEtaProbeSeed = 0x9c0ffee1;

}  // namespace

ResolventSolver::ResolventSolver(const LocalSaddle& node, const FeasibleSet& set,
                                 ResolventConfig cfg)
    : node_(&node), set_(&set), cfg_(cfg) {
    if (set.dim() != node.dim())
        throw DimensionMismatch("feasible set does not match node dims");
    if (cfg_.alpha <= 0.0 || !std::isfinite(cfg_.alpha))
        throw NumericalError("alpha must be positive and finite");
    if (cfg_.alpha * node.rho >= 1.0)
        throw StepSizeViolation("alpha * rho = " +
                                std::to_string(cfg_.alpha * node.rho) +
                                " >= 1: resolvent may be multivalued");
    if (cfg_.inner_tol <= 0.0) throw NumericalError("inner_tol must be positive");
    if (cfg_.max_inner_iters < 1) throw NumericalError("max_inner_iters must be >= 1");

    if (cfg_.inner_step != 0.0) {
        if (!(cfg_.inner_step > 0.0) || cfg_.inner_step > 1.0)
            throw NumericalError("inner_step must lie in (0, 1]");
        eta_ = cfg_.inner_step;
    } else {
        double lhat = estimate_lipschitz(node, set, 100, kEtaProbeSeed);
        eta_ = 1.0 / (1.0 + cfg_.alpha * lhat);
    }

    if (node.is_affine()) {
        affine_ = true;
        const int d = node.dim();
        lu_.compute(MatrixXd::Identity(d, d) + cfg_.alpha * (*node.affine_matrix));
        alpha_offset_ = cfg_.alpha * (*node.affine_offset);
    }
}

Eigen::VectorXd ResolventSolver::solve(const Eigen::VectorXd& rhs,
                                       const Eigen::VectorXd& warm,
                                       int* inner_iters) const {
    if (rhs.size() != node_->dim() || warm.size() != node_->dim())
        throw DimensionMismatch("rhs/warm do not match node dims");
    if (inner_iters) *inner_iters = 0;

    if (affine_) {
        // alpha*rho < 1 makes I + alpha*A strongly nonsingular, and the
        // unconstrained solution is the resolvent whenever it is feasible
        VectorXd z = lu_.solve(rhs - alpha_offset_);
        if (set_->contains(z, 0.0)) return z;
        if (set_->contains(z, 1e-12)) return set_->project(z);
        // infeasible: constraint is active, run the damped iteration
    }

    VectorXd z = set_->contains(warm, 0.0) ? warm : set_->project(warm);
    double resid = 0.0;
    for (int k = 0; k < cfg_.max_inner_iters; ++k) {
        VectorXd target = set_->project(rhs - cfg_.alpha * node_->eval(z));
        resid = (z - target).norm();
        if (resid <= cfg_.inner_tol) {
            if (inner_iters) *inner_iters = k;
            return z;
        }
        z += eta_ * (target - z);
    }
    throw NoConvergence("resolvent stalled at residual " + std::to_string(resid),
                        resid);
}

double ResolventSolver::residual(const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& rhs) const {
    return (z - set_->project(rhs - cfg_.alpha * node_->eval(z))).norm();
}

Eigen::VectorXd resolve(const LocalSaddle& node, const FeasibleSet& set,
                        const Eigen::VectorXd& rhs, const ResolventConfig& cfg,
                        const Eigen::VectorXd* warm, int* inner_iters) {
    ResolventSolver solver(node, set, cfg);
    VectorXd start = warm ? *warm : set.project(rhs);
    return solver.solve(rhs, start, inner_iters);
}

Eigen::VectorXd resolve_affine_exact(const Eigen::MatrixXd& A,
                                     const Eigen::VectorXd& b,
                                     const FeasibleSet& set,
                                     const Eigen::VectorXd& rhs,
                                     const ResolventConfig& cfg) {
    const int d = static_cast<int>(A.rows());
    if (A.cols() != d || b.size() != d || rhs.size() != d || set.dim() != d)
        throw DimensionMismatch("affine resolvent shapes disagree");

    const MatrixXd M = MatrixXd::Identity(d, d) + cfg.alpha * A;
    Eigen::JacobiSVD<MatrixXd> svd(M);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    if (smin <= 1e-12 * std::max(1.0, smax))
        throw SingularSystem("I + alpha*A is numerically singular");

    VectorXd z = M.partialPivLu().solve(rhs - cfg.alpha * b);
    if (set.contains(z, 0.0)) return z;
    if (set.contains(z, 1e-12)) return set.project(z);

    LocalSaddle node = LocalSaddle::affine(d, 0, A, b);
    return resolve(node, set, rhs, cfg);
}

}  // namespace dppsp
