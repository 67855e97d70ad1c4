#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dppsp/feasible_set.hpp"
#include "dppsp/saddle.hpp"

namespace dppsp {

/// Synthetic instance families with known structure, so every guarantee the
/// diagnostics compute can be checked against ground truth.
enum class Family { Bilinear, ScScQuadratic, WeaklyQuadratic, MviScalar };

std::string family_name(Family f);
Family family_from_name(const std::string& name);  // ValidationError on unknown

/// Deterministic recipe for one network instance. p = dim_x and q = dim_y
/// are shared by every node; the scalar operator family ignores them and
/// always produces one primal coordinate plus a pinned dual coordinate.
struct InstanceSpec {
    Family family = Family::Bilinear;
    int nodes = 3;
    int dim_x = 1;
    int dim_y = 1;
    std::uint64_t seed = 0;
    double rho = 0.0;            // target modulus, weakly-quadratic only
    double box_radius = 1.0;     // feasible box half-width per coordinate
    double heterogeneity = 0.5;  // scale of per-node matrix perturbations
    /// Scale of the linear offsets. Zero keeps the stationary point at the
    /// origin; the bilinear family draws zero-sum offsets so it stays there
    /// either way, the quadratic families rescale offsets until the
    /// stationary point sits inside half the box.
    double offset_scale = 0.0;
    // scalar operator family: F(x) = gamma * x^2 (x - x0) on [lo, hi]
    double mvi_x0 = 1.0;
    double mvi_gamma = 1.0;
    double mvi_lo = -0.5;
    double mvi_hi = 2.0;
};

struct Instance {
    InstanceSpec spec;
    std::vector<LocalSaddle> problems;
    std::vector<FeasibleSet> sets;
    bool has_solution = false;
    Eigen::VectorXd solution;  // consensus stationary block, one node's dims
    double diameter = 0.0;     // analytic diameter of each node's set
};

/// f_n = x'A_n y + b_n'x + c_n'y: skew stacked operator, modulus exactly 0.
/// Offsets are zero-sum across nodes, so the origin stays the aggregate
/// stationary point. With zero offsets the per-node sign condition
/// B_n(z)'(z - z*) >= 0 holds everywhere (skew form); nonzero offsets keep
/// only the aggregate version.
Instance make_bilinear(const InstanceSpec& spec);

/// f_n = x'P_n x/2 + x'A_n y - y'Q_n y/2 + offsets with P_n, Q_n uniformly
/// positive definite; the aggregate KKT system gives the interior solution
/// in closed form. Throws SingularKKT if that system degenerates.
Instance make_scsc_quadratic(const InstanceSpec& spec);

/// Same quadratic shape but P_n and Q_n are conjugated so their smallest
/// eigenvalue is exactly -spec.rho: the declared modulus is tight, not an
/// upper bound. rho = 0 degenerates to a monotone instance.
Instance make_weakly_quadratic(const InstanceSpec& spec);

/// Scalar non-monotone operator F(x) = gamma x^2 (x - x0): zero at x0,
/// sign matching x - x0, derivative negative near x0/3. Embedded as a saddle
/// problem by pinning the dual coordinate to a singleton {0}. Throws
/// ConstructionFailed when the parameters make F monotone on the interval
/// or the sign condition fails on the generation grid.
Instance make_mvi_scalar(const InstanceSpec& spec);

/// Dispatch on spec.family.
Instance make_instance(const InstanceSpec& spec);

}  // namespace dppsp
