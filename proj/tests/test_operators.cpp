#include <doctest.h>

#include <random>

#include "dppsp/errors.hpp"
#include "dppsp/feasible_set.hpp"
#include "dppsp/saddle.hpp"
#include "oracles.hpp"

using namespace dppsp;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

LocalSaddle bilinear_xy() {
    // f(x, y) = x * y on scalars
    MatrixXd P = MatrixXd::Zero(1, 1), Q = MatrixXd::Zero(1, 1);
    MatrixXd A = MatrixXd::Constant(1, 1, 1.0);
    return LocalSaddle::quadratic(P, A, Q, VectorXd::Zero(1), VectorXd::Zero(1));
}

}  // namespace

TEST_SUITE("operators") {

TEST_CASE("operator of f = xy") {
    LocalSaddle n = bilinear_xy();
    CHECK(n.eval(Vector2d(2.0, 3.0)) == Vector2d(3.0, -2.0));
    CHECK(n.rho == 0.0);  // skew coupling only
}

TEST_CASE("operator of f = x^2/2 - y^2/2") {
    MatrixXd P = MatrixXd::Identity(1, 1);
    MatrixXd Q = MatrixXd::Identity(1, 1);
    MatrixXd A = MatrixXd::Zero(1, 1);
    LocalSaddle n = LocalSaddle::quadratic(P, A, Q, VectorXd::Zero(1), VectorXd::Zero(1));
    CHECK(n.eval(Vector2d(1.0, 1.0)) == Vector2d(1.0, 1.0));
    CHECK(n.rho == 0.0);  // strongly monotone in both blocks
}

TEST_CASE("box projection clips componentwise") {
    FeasibleSet s = FeasibleSet::centered_box(1.0, 2);
    CHECK(s.project(Vector2d(2.0, 0.5)) == Vector2d(1.0, 0.5));
    CHECK(s.project(Vector2d(-3.0, -0.25)) == Vector2d(-1.0, -0.25));
}

TEST_CASE("ball projection rescales radially") {
    FeasibleSet s = FeasibleSet::ball(VectorXd::Zero(2), 1.0);
    VectorXd p = s.project(Vector2d(3.0, 4.0));
    CHECK(p(0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(p(1) == doctest::Approx(0.8).epsilon(1e-15));
    // interior points are untouched
    CHECK(s.project(Vector2d(0.1, 0.2)) == Vector2d(0.1, 0.2));
}

TEST_CASE("product projection works blockwise") {
    FeasibleSet s = FeasibleSet::product(
        {FeasibleSet::centered_box(1.0, 1), FeasibleSet::ball(VectorXd::Zero(2), 1.0)});
    VectorXd v(3);
    v << 5.0, 3.0, 4.0;
    VectorXd p = s.project(v);
    CHECK(p(0) == 1.0);
    CHECK(p(1) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(p(2) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("projection is idempotent and satisfies the optimality inequality") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss(0.0, 3.0);
    std::vector<FeasibleSet> sets;
    sets.push_back(FeasibleSet::centered_box(1.0, 4));
    sets.push_back(FeasibleSet::ball(Vector2d(0.5, -0.5), 2.0));
    sets.push_back(FeasibleSet::product(
        {FeasibleSet::centered_box(0.5, 2), FeasibleSet::ball(VectorXd::Zero(3), 1.5)}));
    sets.push_back(FeasibleSet::singleton(Vector2d(0.25, -1.0)));

    for (const auto& s : sets) {
        for (int k = 0; k < 200; ++k) {
            VectorXd v(s.dim());
            for (int i = 0; i < s.dim(); ++i) v(i) = gauss(rng);
            VectorXd p = s.project(v);
            CHECK(s.contains(p, 1e-12));
            CHECK((s.project(p) - p).cwiseAbs().maxCoeff() <= 1e-15);
            // <v - p, w - p> <= 0 for every member w
            for (int j = 0; j < 20; ++j) {
                VectorXd w = s.sample(rng);
                CHECK((v - p).dot(w - p) <= 1e-10);
            }
        }
    }
}

TEST_CASE("diameter and norm radius are the analytic values") {
    CHECK(FeasibleSet::centered_box(1.0, 2).diameter() ==
          doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-15));
    CHECK(FeasibleSet::centered_box(2.0, 3).diameter() ==
          doctest::Approx(4.0 * std::sqrt(3.0)).epsilon(1e-15));
    CHECK(FeasibleSet::ball(VectorXd::Zero(5), 1.5).diameter() == 3.0);
    CHECK(FeasibleSet::singleton(Vector2d(1.0, 2.0)).diameter() == 0.0);

    CHECK(FeasibleSet::centered_box(1.0, 4).norm_radius() == doctest::Approx(2.0));
    CHECK(FeasibleSet::ball(Vector2d(3.0, 4.0), 2.0).norm_radius() ==
          doctest::Approx(7.0));

    FeasibleSet prod = FeasibleSet::product(
        {FeasibleSet::centered_box(1.0, 2), FeasibleSet::ball(VectorXd::Zero(2), 1.0)});
    CHECK(prod.diameter() == doctest::Approx(std::sqrt(8.0 + 4.0)).epsilon(1e-15));

    // diameter really bounds sampled pairwise distances
    std::mt19937_64 rng(5);
    for (int k = 0; k < 500; ++k) {
        VectorXd a = prod.sample(rng), b = prod.sample(rng);
        CHECK((a - b).norm() <= prod.diameter() + 1e-12);
    }
}

TEST_CASE("samples are members; interior samples stay strictly inside boxes") {
    std::mt19937_64 rng(17);
    FeasibleSet box = FeasibleSet::centered_box(1.0, 3);
    for (int k = 0; k < 500; ++k) {
        CHECK(box.contains(box.sample(rng), 0.0));
        VectorXd v = box.interior_sample(rng);
        CHECK(v.cwiseAbs().maxCoeff() < 1.0);
    }
    FeasibleSet ball = FeasibleSet::ball(VectorXd::Zero(4), 2.0);
    for (int k = 0; k < 500; ++k) CHECK(ball.contains(ball.sample(rng), 1e-12));
}

TEST_CASE("weak-monotonicity probe: skew operator scores zero") {
    LocalSaddle n = bilinear_xy();
    FeasibleSet s = FeasibleSet::centered_box(1.0, 2);
    CHECK(probe_weak_monotonicity(n, s, 1000, 3) == 0.0);
}

TEST_CASE("weak-monotonicity probe: curvature -rho is recovered") {
    // f = -(rho/2) x^2 + xy + (rho/2) y^2, rho = 0.5: the symmetric part of
    // the operator matrix is -rho I, so every pair scores exactly rho.
    const double rho = 0.5;
    MatrixXd P = MatrixXd::Constant(1, 1, -rho);
    MatrixXd Q = MatrixXd::Constant(1, 1, -rho);
    MatrixXd A = MatrixXd::Constant(1, 1, 1.0);
    LocalSaddle n = LocalSaddle::quadratic(P, A, Q, VectorXd::Zero(1), VectorXd::Zero(1));
    CHECK(n.rho == doctest::Approx(rho).epsilon(1e-12));

    FeasibleSet s = FeasibleSet::centered_box(1.0, 2);
    double probed = probe_weak_monotonicity(n, s, 10000, 7);
    CHECK(probed >= 0.45);
    CHECK(probed <= rho + 1e-9);
}

TEST_CASE("weak-monotonicity probe: strongly monotone operator scores zero") {
    MatrixXd P = MatrixXd::Identity(2, 2);
    MatrixXd Q = MatrixXd::Identity(2, 2);
    MatrixXd A = MatrixXd::Random(2, 2);
    LocalSaddle n = LocalSaddle::quadratic(P, A, Q, VectorXd::Zero(2), VectorXd::Zero(2));
    FeasibleSet s = FeasibleSet::centered_box(2.0, 4);
    CHECK(probe_weak_monotonicity(n, s, 5000, 1) == 0.0);
}

TEST_CASE("gradient oracles match central finite differences") {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> gauss(0.0, 1.0);

    MatrixXd P(2, 2), Q(1, 1), A(2, 1);
    P << 1.0, 0.3, 0.3, 2.0;
    Q << 0.7;
    A << 0.5, -1.2;
    VectorXd b(2), c(1);
    b << 0.1, -0.4;
    c << 0.9;
    LocalSaddle quad = LocalSaddle::quadratic(P, A, Q, b, c);
    FeasibleSet s3 = FeasibleSet::centered_box(1.0, 3);
    CHECK(max_gradient_fd_error(quad, s3, 50, 101) <= 1e-5);
    CHECK_NOTHROW(validate_gradients(quad, s3, 50, 101));

    // non-polynomial payoff keeps the differencing honest
    LocalSaddle trig;
    trig.dim_x = 1;
    trig.dim_y = 1;
    trig.value = [](const VectorXd& x, const VectorXd& y) {
        return std::sin(x(0)) * std::cos(y(0)) + 0.25 * x(0) * x(0);
    };
    trig.grad_x = [](const VectorXd& x, const VectorXd& y) {
        VectorXd g(1);
        g << std::cos(x(0)) * std::cos(y(0)) + 0.5 * x(0);
        return g;
    };
    trig.grad_y = [](const VectorXd& x, const VectorXd& y) {
        VectorXd g(1);
        g << -std::sin(x(0)) * std::sin(y(0));
        return g;
    };
    trig.rho = 1.0;
    FeasibleSet s2 = FeasibleSet::centered_box(1.0, 2);
    CHECK(max_gradient_fd_error(trig, s2, 50, 55) <= 1e-5);

    // a corrupted oracle is caught
    LocalSaddle broken = trig;
    broken.grad_x = [](const VectorXd& x, const VectorXd&) {
        VectorXd g(1);
        g << std::cos(x(0)) + 1e-3;
        return g;
    };
    CHECK_THROWS_AS(validate_gradients(broken, s2, 50, 55), NumericalError);

    LocalSaddle no_value = LocalSaddle::affine(1, 1, MatrixXd::Identity(2, 2),
                                               VectorXd::Zero(2));
    CHECK_THROWS_AS(max_gradient_fd_error(no_value, s2, 10, 1), OracleInconclusive);
}

TEST_CASE("oracles agree with the declared affine form") {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 5; ++rep) {
        MatrixXd P = MatrixXd::Random(2, 2);
        P = (0.5 * (P + P.transpose())).eval();
        MatrixXd Q = MatrixXd::Random(2, 2);
        Q = (0.5 * (Q + Q.transpose())).eval();
        MatrixXd A = MatrixXd::Random(2, 2);
        LocalSaddle n = LocalSaddle::quadratic(P, A, Q, VectorXd::Random(2),
                                               VectorXd::Random(2));
        FeasibleSet s = FeasibleSet::centered_box(2.0, 4);
        CHECK(max_affine_mismatch(n, s, 100, rep) <= 1e-12);
    }
}

TEST_CASE("dimension mismatches are rejected") {
    LocalSaddle n = bilinear_xy();
    CHECK_THROWS_AS(n.eval(VectorXd::Zero(3)), DimensionMismatch);
    FeasibleSet s = FeasibleSet::centered_box(1.0, 2);
    CHECK_THROWS_AS(s.project(VectorXd::Zero(5)), DimensionMismatch);
    CHECK_THROWS_AS(FeasibleSet::box(VectorXd::Zero(2), VectorXd::Zero(3)),
                    DimensionMismatch);
    VectorXd lo(1), hi(1);
    lo << 1.0;
    hi << -1.0;
    CHECK_THROWS_AS(FeasibleSet::box(lo, hi), NumericalError);
}

}  // TEST_SUITE
