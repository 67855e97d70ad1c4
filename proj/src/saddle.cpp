#include "dppsp/saddle.hpp"

#include <cmath>
#include <memory>
#include <random>

#include "dppsp/errors.hpp"

namespace dppsp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::VectorXd LocalSaddle::eval(const Eigen::VectorXd& z) const {
    if (z.size() != dim()) throw DimensionMismatch("point does not match node dims");
    const VectorXd x = z.head(dim_x);
    const VectorXd y = z.tail(dim_y);
    VectorXd out(dim());
    out.head(dim_x) = grad_x(x, y);
    out.tail(dim_y) = -grad_y(x, y);
    return out;
}

LocalSaddle LocalSaddle::affine(int dim_x, int dim_y, Eigen::MatrixXd A,
                                Eigen::VectorXd b) {
    const int d = dim_x + dim_y;
    if (A.rows() != d || A.cols() != d || b.size() != d)
        throw DimensionMismatch("affine operator does not match dim_x + dim_y");
    LocalSaddle n;
    n.dim_x = dim_x;
    n.dim_y = dim_y;
    Eigen::SelfAdjointEigenSolver<MatrixXd> sym(0.5 * (A + A.transpose()),
                                                Eigen::EigenvaluesOnly);
    n.rho = std::max(0.0, -sym.eigenvalues().minCoeff());
    auto Ash = std::make_shared<MatrixXd>(std::move(A));
    auto bsh = std::make_shared<VectorXd>(std::move(b));
    n.affine_matrix = *Ash;
    n.affine_offset = *bsh;
    n.grad_x = [Ash, bsh, dim_x, dim_y](const VectorXd& x, const VectorXd& y) {
        VectorXd z(dim_x + dim_y);
        z << x, y;
        return ((*Ash) * z + (*bsh)).head(dim_x).eval();
    };
    n.grad_y = [Ash, bsh, dim_x, dim_y](const VectorXd& x, const VectorXd& y) {
        VectorXd z(dim_x + dim_y);
        z << x, y;
        // B's y-block is -grad_y
        return (-((*Ash) * z + (*bsh)).tail(dim_y)).eval();
    };
    return n;
}

LocalSaddle LocalSaddle::quadratic(const Eigen::MatrixXd& P, const Eigen::MatrixXd& A,
                                   const Eigen::MatrixXd& Q, const Eigen::VectorXd& b,
                                   const Eigen::VectorXd& c) {
    const int p = static_cast<int>(P.rows());
    const int q = static_cast<int>(Q.rows());
    if (P.cols() != p || Q.cols() != q || A.rows() != p || A.cols() != q ||
        b.size() != p || c.size() != q)
        throw DimensionMismatch("quadratic blocks have inconsistent shapes");
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
        (Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw NumericalError("P and Q must be symmetric");

    MatrixXd M(p + q, p + q);
    M.topLeftCorner(p, p) = P;
    M.topRightCorner(p, q) = A;
    M.bottomLeftCorner(q, p) = -A.transpose();
    M.bottomRightCorner(q, q) = Q;
    VectorXd off(p + q);
    off << b, -c;

    LocalSaddle n = affine(p, q, std::move(M), std::move(off));
    // the coupling block is skew in M, so the modulus comes from P and Q alone
    auto Ps = std::make_shared<MatrixXd>(P);
    auto As = std::make_shared<MatrixXd>(A);
    auto Qs = std::make_shared<MatrixXd>(Q);
    auto bs = std::make_shared<VectorXd>(b);
    auto cs = std::make_shared<VectorXd>(c);
    n.value = [Ps, As, Qs, bs, cs](const VectorXd& x, const VectorXd& y) {
        return 0.5 * x.dot(*Ps * x) + x.dot(*As * y) - 0.5 * y.dot(*Qs * y) +
               bs->dot(x) + cs->dot(y);
    };
    return n;
}

namespace {

std::pair<VectorXd, VectorXd> split_xy(const LocalSaddle& node, const VectorXd& z) {
    return {z.head(node.dim_x), z.tail(node.dim_y)};
}

}  // namespace

double probe_weak_monotonicity(const LocalSaddle& node, const FeasibleSet& set,
                               int pairs, std::uint64_t seed) {
    if (pairs < 1) throw NumericalError("probe needs at least one pair");
    if (set.dim() != node.dim()) throw DimensionMismatch("set does not match node");
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int k = 0; k < pairs; ++k) {
        VectorXd z1 = set.sample(rng);
        VectorXd z2 = set.sample(rng);
        VectorXd dz = z1 - z2;
        double nn = dz.squaredNorm();
        if (nn < 1e-24) continue;
        double s = (node.eval(z1) - node.eval(z2)).dot(dz) / nn;
        worst = std::max(worst, -s);
    }
    return worst;
}

double estimate_lipschitz(const LocalSaddle& node, const FeasibleSet& set,
                          int samples, std::uint64_t seed) {
    if (samples < 1) throw NumericalError("lipschitz estimate needs samples");
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        VectorXd z1 = set.sample(rng);
        VectorXd z2 = set.sample(rng);
        double nn = (z1 - z2).norm();
        if (nn < 1e-12) continue;
        worst = std::max(worst, (node.eval(z1) - node.eval(z2)).norm() / nn);
    }
    return worst;
}

double max_gradient_fd_error(const LocalSaddle& node, const FeasibleSet& set,
                             int points, std::uint64_t seed, double step) {
    if (!node.value)
        throw OracleInconclusive("node has no payoff value oracle to difference");
    if (set.dim() != node.dim()) throw DimensionMismatch("set does not match node");
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int k = 0; k < points; ++k) {
        VectorXd z = set.interior_sample(rng);
        auto [x, y] = split_xy(node, z);

        VectorXd gx = node.grad_x(x, y);
        VectorXd gy = node.grad_y(x, y);
        VectorXd fx(node.dim_x), fy(node.dim_y);
        for (int i = 0; i < node.dim_x; ++i) {
            VectorXd hi = x, lo = x;
            hi(i) += step;
            lo(i) -= step;
            fx(i) = (node.value(hi, y) - node.value(lo, y)) / (2.0 * step);
        }
        for (int i = 0; i < node.dim_y; ++i) {
            VectorXd hi = y, lo = y;
            hi(i) += step;
            lo(i) -= step;
            fy(i) = (node.value(x, hi) - node.value(x, lo)) / (2.0 * step);
        }
        double ex = (gx - fx).norm() / std::max(1.0, gx.norm());
        double ey = node.dim_y > 0 ? (gy - fy).norm() / std::max(1.0, gy.norm()) : 0.0;
        worst = std::max({worst, ex, ey});
    }
    return worst;
}

void validate_gradients(const LocalSaddle& node, const FeasibleSet& set, int points,
                        std::uint64_t seed, double step, double rel_tol) {
    double err = max_gradient_fd_error(node, set, points, seed, step);
    if (err > rel_tol)
        throw NumericalError("gradient oracle deviates from finite differences by " +
                             std::to_string(err));
}

double max_affine_mismatch(const LocalSaddle& node, const FeasibleSet& set,
                           int points, std::uint64_t seed) {
    if (!node.is_affine())
        throw OracleInconclusive("node declares no affine form");
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int k = 0; k < points; ++k) {
        VectorXd z = set.sample(rng);
        VectorXd direct = *node.affine_matrix * z + *node.affine_offset;
        worst = std::max(worst, (node.eval(z) - direct).cwiseAbs().maxCoeff());
    }
    return worst;
}

}  // namespace dppsp
