#include "dppsp/problems.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dppsp/errors.hpp"

namespace dppsp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void validate_common(const InstanceSpec& spec) {
    if (spec.nodes < 1) throw ValidationError("nodes", "must be >= 1");
    if (spec.box_radius <= 0.0) throw ValidationError("box_radius", "must be > 0");
    if (spec.heterogeneity < 0.0)
        throw ValidationError("heterogeneity", "must be >= 0");
    if (spec.offset_scale < 0.0)
        throw ValidationError("offset_scale", "must be >= 0");
}

void validate_dims(const InstanceSpec& spec) {
    if (spec.dim_x < 1) throw ValidationError("dim_x", "must be >= 1");
    if (spec.dim_y < 1) throw ValidationError("dim_y", "must be >= 1");
}

MatrixXd gaussian_matrix(std::mt19937_64& rng, int rows, int cols) {
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
    return m;
}

VectorXd gaussian_vector(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
}

/// Random orthogonal matrix from the QR factorization of a Gaussian draw.
MatrixXd random_orthogonal(std::mt19937_64& rng, int n) {
    if (n == 1) return MatrixXd::Ones(1, 1);
    Eigen::HouseholderQR<MatrixXd> qr(gaussian_matrix(rng, n, n));
    return qr.householderQ() * MatrixXd::Identity(n, n);
}

/// Spectral-norm normalization of the shared coupling base.
MatrixXd normalized_coupling(std::mt19937_64& rng, int p, int q) {
    MatrixXd base = gaussian_matrix(rng, p, q);
    const double top = base.jacobiSvd().singularValues()(0);
    if (top > 0.0) base /= top;
    return base;
}

/// Symmetric matrix whose smallest eigenvalue is exactly `low`; the rest of
/// the spectrum is drawn from [inner_lo, inner_hi].
MatrixXd pinned_spectrum(std::mt19937_64& rng, int n, double low,
                         double inner_lo, double inner_hi) {
    VectorXd eigs(n);
    eigs(0) = low;
    std::uniform_real_distribution<double> unif(inner_lo, inner_hi);
    for (int i = 1; i < n; ++i) eigs(i) = unif(rng);
    if (n == 1) {
        MatrixXd m(1, 1);
        m << low;
        return m;
    }
    const MatrixXd v = random_orthogonal(rng, n);
    MatrixXd m = v * eigs.asDiagonal() * v.transpose();
    return 0.5 * (m + m.transpose());
}

std::vector<VectorXd> zero_sum_offsets(std::mt19937_64& rng, int nodes, int dim,
                                       double scale) {
    std::vector<VectorXd> out(nodes, VectorXd::Zero(dim));
    if (scale <= 0.0) return out;
    VectorXd mean = VectorXd::Zero(dim);
    for (int n = 0; n < nodes; ++n) {
        out[n] = scale * gaussian_vector(rng, dim);
        mean += out[n];
    }
    mean /= nodes;
    for (int n = 0; n < nodes; ++n) out[n] -= mean;
    return out;
}

/// Aggregate stationary point of affine nodes: solves sum_n B_n(v) = 0.
VectorXd aggregate_solution(const std::vector<LocalSaddle>& nodes) {
    const int d = nodes[0].dim();
    MatrixXd sum_a = MatrixXd::Zero(d, d);
    VectorXd sum_b = VectorXd::Zero(d);
    for (const auto& node : nodes) {
        sum_a += *node.affine_matrix;
        sum_b += *node.affine_offset;
    }
    const Eigen::JacobiSVD<MatrixXd> svd(sum_a);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (smin <= 1e-10 * std::max(1.0, smax))
        throw SingularKKT("aggregate operator matrix is numerically singular");
    return sum_a.partialPivLu().solve(-sum_b);
}

/// Shrinks every offset uniformly until the (linear-in-offsets) solution
/// sits inside half the box.
void fit_solution_in_box(std::vector<VectorXd>& bs, std::vector<VectorXd>& cs,
                         VectorXd& solution, double radius) {
    const double reach = solution.lpNorm<Eigen::Infinity>();
    if (reach <= 0.5 * radius) return;
    const double shrink = 0.5 * radius / reach;
    for (auto& b : bs) b *= shrink;
    for (auto& c : cs) c *= shrink;
    solution *= shrink;
}

}  // namespace

std::string family_name(Family f) {
    switch (f) {
        case Family::Bilinear: return "bilinear";
        case Family::ScScQuadratic: return "scsc-quadratic";
        case Family::WeaklyQuadratic: return "weakly-quadratic";
        case Family::MviScalar: return "mvi-scalar";
    }
    throw ValidationError("family", "unhandled family enum value");
}

Family family_from_name(const std::string& name) {
    if (name == "bilinear") return Family::Bilinear;
    if (name == "scsc-quadratic") return Family::ScScQuadratic;
    if (name == "weakly-quadratic") return Family::WeaklyQuadratic;
    if (name == "mvi-scalar") return Family::MviScalar;
    throw ValidationError("family", "unknown family '" + name + "'");
}

Instance make_bilinear(const InstanceSpec& spec) {
    validate_common(spec);
    validate_dims(spec);
    const int p = spec.dim_x, q = spec.dim_y;
    std::mt19937_64 rng(spec.seed);

    const MatrixXd base = normalized_coupling(rng, p, q);
    auto bs = zero_sum_offsets(rng, spec.nodes, p, spec.offset_scale);
    auto cs = zero_sum_offsets(rng, spec.nodes, q, spec.offset_scale);

    Instance inst;
    inst.spec = spec;
    const double perturb = spec.heterogeneity / std::sqrt(double(p) * q);
    for (int n = 0; n < spec.nodes; ++n) {
        const MatrixXd a = base + perturb * gaussian_matrix(rng, p, q);
        inst.problems.push_back(LocalSaddle::quadratic(
            MatrixXd::Zero(p, p), a, MatrixXd::Zero(q, q), bs[n], cs[n]));
        inst.sets.push_back(FeasibleSet::centered_box(spec.box_radius, p + q));
    }
    inst.has_solution = true;
    inst.solution = VectorXd::Zero(p + q);  // zero-sum offsets keep it here
    inst.diameter = inst.sets[0].diameter();
    return inst;
}

Instance make_scsc_quadratic(const InstanceSpec& spec) {
    validate_common(spec);
    validate_dims(spec);
    const int p = spec.dim_x, q = spec.dim_y;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double mu = 0.3;

    const MatrixXd base = normalized_coupling(rng, p, q);
    std::vector<MatrixXd> ps, qs, as;
    for (int n = 0; n < spec.nodes; ++n) {
        const double px = 1.0 + 0.5 * spec.heterogeneity * std::abs(normal(rng));
        const double qx = 1.0 + 0.5 * spec.heterogeneity * std::abs(normal(rng));
        const MatrixXd gp = gaussian_matrix(rng, p, p);
        const MatrixXd gq = gaussian_matrix(rng, q, q);
        MatrixXd pm = px * (gp.transpose() * gp) / p + mu * MatrixXd::Identity(p, p);
        MatrixXd qm = qx * (gq.transpose() * gq) / q + mu * MatrixXd::Identity(q, q);
        ps.push_back(0.5 * (pm + pm.transpose()));
        qs.push_back(0.5 * (qm + qm.transpose()));
        as.push_back(base +
                     spec.heterogeneity / std::sqrt(double(p) * q) *
                         gaussian_matrix(rng, p, q));
    }
    std::vector<VectorXd> bs, cs;
    for (int n = 0; n < spec.nodes; ++n)
        bs.push_back(spec.offset_scale * gaussian_vector(rng, p));
    for (int n = 0; n < spec.nodes; ++n)
        cs.push_back(spec.offset_scale * gaussian_vector(rng, q));

    Instance inst;
    inst.spec = spec;
    for (int n = 0; n < spec.nodes; ++n)
        inst.problems.push_back(
            LocalSaddle::quadratic(ps[n], as[n], qs[n], bs[n], cs[n]));

    VectorXd solution = aggregate_solution(inst.problems);
    fit_solution_in_box(bs, cs, solution, spec.box_radius);
    inst.problems.clear();
    for (int n = 0; n < spec.nodes; ++n) {
        inst.problems.push_back(
            LocalSaddle::quadratic(ps[n], as[n], qs[n], bs[n], cs[n]));
        inst.sets.push_back(FeasibleSet::centered_box(spec.box_radius, p + q));
    }
    inst.has_solution = true;
    inst.solution = solution;
    inst.diameter = inst.sets[0].diameter();
    return inst;
}

Instance make_weakly_quadratic(const InstanceSpec& spec) {
    validate_common(spec);
    validate_dims(spec);
    if (spec.rho < 0.0) throw ValidationError("rho", "must be >= 0");
    const int p = spec.dim_x, q = spec.dim_y;

    for (std::uint64_t attempt = 0; attempt < 8; ++attempt) {
        std::mt19937_64 rng(spec.seed + attempt * 0x9e3779b97f4a7c15ull);
        const MatrixXd base = normalized_coupling(rng, p, q);
        const double inner_lo = -0.5 * spec.rho;
        const double inner_hi = 1.0;

        std::vector<MatrixXd> ps, qs, as;
        for (int n = 0; n < spec.nodes; ++n) {
            ps.push_back(pinned_spectrum(rng, p, -spec.rho, inner_lo, inner_hi));
            qs.push_back(pinned_spectrum(rng, q, -spec.rho, inner_lo, inner_hi));
            as.push_back(base +
                         spec.heterogeneity / std::sqrt(double(p) * q) *
                             gaussian_matrix(rng, p, q));
        }
        auto bs = zero_sum_offsets(rng, spec.nodes, p, spec.offset_scale);
        auto cs = zero_sum_offsets(rng, spec.nodes, q, spec.offset_scale);

        Instance inst;
        inst.spec = spec;
        for (int n = 0; n < spec.nodes; ++n)
            inst.problems.push_back(
                LocalSaddle::quadratic(ps[n], as[n], qs[n], bs[n], cs[n]));

        VectorXd solution;
        try {
            solution = aggregate_solution(inst.problems);
        } catch (const SingularKKT&) {
            continue;  // unlucky aggregate spectrum; redraw everything
        }
        fit_solution_in_box(bs, cs, solution, spec.box_radius);
        inst.problems.clear();
        for (int n = 0; n < spec.nodes; ++n) {
            inst.problems.push_back(
                LocalSaddle::quadratic(ps[n], as[n], qs[n], bs[n], cs[n]));
            inst.sets.push_back(FeasibleSet::centered_box(spec.box_radius, p + q));
        }
        inst.has_solution = true;
        inst.solution = solution;
        inst.diameter = inst.sets[0].diameter();
        return inst;
    }
    throw ConstructionFailed(
        "weakly-quadratic generation kept producing a singular aggregate");
}

Instance make_mvi_scalar(const InstanceSpec& spec) {
    validate_common(spec);
    if (spec.mvi_gamma <= 0.0) throw ValidationError("mvi_gamma", "must be > 0");
    if (spec.mvi_lo >= spec.mvi_hi)
        throw ValidationError("mvi_lo", "interval must be nonempty");
    if (spec.mvi_x0 <= spec.mvi_lo || spec.mvi_x0 >= spec.mvi_hi)
        throw ValidationError("mvi_x0", "must lie strictly inside the interval");

    const double x0 = spec.mvi_x0;
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);

    Instance inst;
    inst.spec = spec;
    for (int n = 0; n < spec.nodes; ++n) {
        const double factor =
            std::max(0.25, 1.0 + 0.5 * spec.heterogeneity * unif(rng));
        const double gamma = spec.mvi_gamma * factor;

        LocalSaddle node;
        node.dim_x = 1;
        node.dim_y = 1;
        node.grad_x = [gamma, x0](const VectorXd& x, const VectorXd&) {
            VectorXd g(1);
            g(0) = gamma * x(0) * x(0) * (x(0) - x0);
            return g;
        };
        node.grad_y = [](const VectorXd&, const VectorXd&) {
            return VectorXd::Zero(1).eval();
        };
        node.value = [gamma, x0](const VectorXd& x, const VectorXd&) {
            const double t = x(0);
            return gamma * (t * t * t * t / 4.0 - x0 * t * t * t / 3.0);
        };
        // F'(x) = gamma (3x^2 - 2 x0 x) is minimized on the interval at the
        // clamped vertex x0/3, which fixes the exact weak-monotonicity modulus
        const double vertex =
            std::clamp(x0 / 3.0, spec.mvi_lo, spec.mvi_hi);
        const double min_slope =
            gamma * (3.0 * vertex * vertex - 2.0 * x0 * vertex);
        node.rho = std::max(0.0, -min_slope);
        if (node.rho <= 1e-9)
            throw ConstructionFailed(
                "scalar operator is monotone on the requested interval");

        inst.problems.push_back(std::move(node));

        std::vector<FeasibleSet> parts;
        VectorXd lo(1), hi(1);
        lo << spec.mvi_lo;
        hi << spec.mvi_hi;
        parts.push_back(FeasibleSet::box(lo, hi));
        parts.push_back(FeasibleSet::singleton(VectorXd::Zero(1)));
        inst.sets.push_back(FeasibleSet::product(std::move(parts)));

        // sign condition on the generation grid: F(x)(x - x0) >= 0
        for (double x = spec.mvi_lo; x <= spec.mvi_hi; x += 1e-3) {
            const double f = gamma * x * x * (x - x0);
            if (f * (x - x0) < -1e-12)
                throw ConstructionFailed(
                    "sign condition failed on the generation grid");
        }
    }
    inst.has_solution = true;
    inst.solution = VectorXd::Zero(2);
    inst.solution(0) = x0;
    inst.diameter = inst.sets[0].diameter();
    return inst;
}

Instance make_instance(const InstanceSpec& spec) {
    switch (spec.family) {
        case Family::Bilinear: return make_bilinear(spec);
        case Family::ScScQuadratic: return make_scsc_quadratic(spec);
        case Family::WeaklyQuadratic: return make_weakly_quadratic(spec);
        case Family::MviScalar: return make_mvi_scalar(spec);
    }
    throw ValidationError("family", "unhandled family enum value");
}

}  // namespace dppsp
