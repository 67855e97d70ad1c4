#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "dppsp/feasible_set.hpp"

namespace dppsp {

/// One node's local payoff f_n(x, y), held as gradient oracles. The node's
/// monotone-splitting operator is
///     B(z) = [ grad_x f(x, y) ; -grad_y f(x, y) ],   z = [x; y].
/// `rho` is the declared weak-monotonicity modulus of B (0 for monotone).
/// When B is affine, `affine_matrix`/`affine_offset` carry B(z) = A z + b so
/// resolvents can use a direct linear solve.
struct LocalSaddle {
    int dim_x = 0;
    int dim_y = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> grad_x;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> grad_y;
    /// Payoff value, used only by finite-difference validation. May be null.
    std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> value;
    double rho = 0.0;
    std::optional<Eigen::MatrixXd> affine_matrix;
    std::optional<Eigen::VectorXd> affine_offset;

    int dim() const { return dim_x + dim_y; }
    bool is_affine() const { return affine_matrix.has_value(); }

    /// [grad_x; -grad_y] at a stacked point z = [x; y].
    Eigen::VectorXd eval(const Eigen::VectorXd& z) const;

    /// Node with affine operator B(z) = A z + b. rho is derived from the
    /// symmetric part of A unless overridden. No payoff value is attached.
    static LocalSaddle affine(int dim_x, int dim_y, Eigen::MatrixXd A,
                              Eigen::VectorXd b);

    /// Quadratic payoff
    ///   f(x,y) = x'Px/2 + x'Ay - y'Qy/2 + b'x + c'y,
    /// giving B(z) = [[P, A], [-A', Q]] z + [b; -c]. P and Q must be
    /// symmetric; rho = max(0, -lambda_min(diag(P, Q))).
    static LocalSaddle quadratic(const Eigen::MatrixXd& P, const Eigen::MatrixXd& A,
                                 const Eigen::MatrixXd& Q, const Eigen::VectorXd& b,
                                 const Eigen::VectorXd& c);
};

/// Empirical weak-monotonicity modulus: over `pairs` sampled pairs from the
/// set, the largest value of -<B(z1)-B(z2), z1-z2> / ||z1-z2||^2, floored
/// at 0. Never exceeds the true modulus.
double probe_weak_monotonicity(const LocalSaddle& node, const FeasibleSet& set,
                               int pairs, std::uint64_t seed);

/// Empirical Lipschitz constant of B from sampled difference quotients.
double estimate_lipschitz(const LocalSaddle& node, const FeasibleSet& set,
                          int samples, std::uint64_t seed);

/// Largest norm-relative deviation between the gradient oracles and central
/// finite differences of the payoff value, over sampled interior points.
/// Requires node.value (OracleInconclusive otherwise).
double max_gradient_fd_error(const LocalSaddle& node, const FeasibleSet& set,
                             int points, std::uint64_t seed, double step = 1e-6);

/// Throws NumericalError when max_gradient_fd_error exceeds rel_tol.
void validate_gradients(const LocalSaddle& node, const FeasibleSet& set,
                        int points, std::uint64_t seed, double step = 1e-6,
                        double rel_tol = 1e-5);

/// Largest deviation between eval() and the declared affine form, over
/// sampled points. Zero for consistently constructed nodes.
double max_affine_mismatch(const LocalSaddle& node, const FeasibleSet& set,
                           int points, std::uint64_t seed);

}  // namespace dppsp
