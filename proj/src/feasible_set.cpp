#include "dppsp/feasible_set.hpp"

#include <cmath>

#include "dppsp/errors.hpp"

namespace dppsp {

using Eigen::VectorXd;

FeasibleSet FeasibleSet::box(VectorXd lo, VectorXd hi) {
    if (lo.size() != hi.size() || lo.size() == 0)
        throw DimensionMismatch("box bounds must have equal positive length");
    if ((hi - lo).minCoeff() < 0.0)
        throw NumericalError("box has an upper bound below its lower bound");
    FeasibleSet s;
    s.kind_ = SetKind::Box;
    s.dim_ = static_cast<int>(lo.size());
    s.lo_ = std::move(lo);
    s.hi_ = std::move(hi);
    s.diameter_ = (s.hi_ - s.lo_).norm();
    s.norm_radius_ = std::sqrt(s.lo_.cwiseAbs2().cwiseMax(s.hi_.cwiseAbs2()).sum());
    return s;
}

FeasibleSet FeasibleSet::centered_box(double radius, int dim) {
    if (radius < 0.0) throw NumericalError("box radius must be nonnegative");
    return box(VectorXd::Constant(dim, -radius), VectorXd::Constant(dim, radius));
}

FeasibleSet FeasibleSet::singleton(VectorXd point) {
    return box(point, point);
}

FeasibleSet FeasibleSet::ball(VectorXd center, double radius) {
    if (center.size() == 0) throw DimensionMismatch("ball center must be non-empty");
    if (radius < 0.0) throw NumericalError("ball radius must be nonnegative");
    FeasibleSet s;
    s.kind_ = SetKind::Ball;
    s.dim_ = static_cast<int>(center.size());
    s.center_ = std::move(center);
    s.radius_ = radius;
    s.diameter_ = 2.0 * radius;
    s.norm_radius_ = s.center_.norm() + radius;
    return s;
}

FeasibleSet FeasibleSet::product(std::vector<FeasibleSet> parts) {
    if (parts.empty()) throw DimensionMismatch("product of zero sets");
    if (parts.size() == 1) return parts[0];
    FeasibleSet s;
    s.kind_ = SetKind::Product;
    double diam_sq = 0.0, nr_sq = 0.0;
    for (const auto& p : parts) {
        s.dim_ += p.dim_;
        diam_sq += p.diameter_ * p.diameter_;
        nr_sq += p.norm_radius_ * p.norm_radius_;
    }
    s.diameter_ = std::sqrt(diam_sq);
    s.norm_radius_ = std::sqrt(nr_sq);
    s.parts_ = std::move(parts);
    return s;
}

namespace {

void check_dim(const FeasibleSet& s, const VectorXd& v) {
    if (v.size() != s.dim())
        throw DimensionMismatch("vector does not match set dimension");
}

}  // namespace

VectorXd FeasibleSet::project(const VectorXd& v) const {
    check_dim(*this, v);
    switch (kind_) {
        case SetKind::Box:
            return v.cwiseMax(lo_).cwiseMin(hi_);
        case SetKind::Ball: {
            VectorXd delta = v - center_;
            double norm = delta.norm();
            if (norm <= radius_) return v;
            return center_ + (radius_ / norm) * delta;
        }
        case SetKind::Product: {
            VectorXd out(dim_);
            int at = 0;
            for (const auto& p : parts_) {
                out.segment(at, p.dim_) = p.project(v.segment(at, p.dim_));
                at += p.dim_;
            }
            return out;
        }
    }
    throw Error("unreachable");
}

bool FeasibleSet::contains(const VectorXd& v, double tol) const {
    check_dim(*this, v);
    switch (kind_) {
        case SetKind::Box:
            return (v - lo_).minCoeff() >= -tol && (hi_ - v).minCoeff() >= -tol;
        case SetKind::Ball:
            return (v - center_).norm() <= radius_ + tol;
        case SetKind::Product: {
            int at = 0;
            for (const auto& p : parts_) {
                if (!p.contains(v.segment(at, p.dim_), tol)) return false;
                at += p.dim_;
            }
            return true;
        }
    }
    throw Error("unreachable");
}

VectorXd FeasibleSet::center() const {
    switch (kind_) {
        case SetKind::Box:
            return 0.5 * (lo_ + hi_);
        case SetKind::Ball:
            return center_;
        case SetKind::Product: {
            VectorXd out(dim_);
            int at = 0;
            for (const auto& p : parts_) {
                out.segment(at, p.dim_) = p.center();
                at += p.dim_;
            }
            return out;
        }
    }
    throw Error("unreachable");
}

VectorXd FeasibleSet::sample(std::mt19937_64& rng) const {
    switch (kind_) {
        case SetKind::Box: {
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            VectorXd out(dim_);
            for (int i = 0; i < dim_; ++i) out(i) = lo_(i) + unit(rng) * (hi_(i) - lo_(i));
            return out;
        }
        case SetKind::Ball: {
            std::normal_distribution<double> gauss(0.0, 1.0);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            VectorXd dir(dim_);
            for (int i = 0; i < dim_; ++i) dir(i) = gauss(rng);
            double norm = dir.norm();
            if (norm == 0.0) return center_;
            double r = radius_ * std::pow(unit(rng), 1.0 / dim_);
            return center_ + (r / norm) * dir;
        }
        case SetKind::Product: {
            VectorXd out(dim_);
            int at = 0;
            for (const auto& p : parts_) {
                out.segment(at, p.dim_) = p.sample(rng);
                at += p.dim_;
            }
            return out;
        }
    }
    throw Error("unreachable");
}

VectorXd FeasibleSet::interior_sample(std::mt19937_64& rng, double shrink) const {
    VectorXd c = center();
    return c + shrink * (sample(rng) - c);
}

void FeasibleSet::bounding_box(VectorXd& lo, VectorXd& hi) const {
    switch (kind_) {
        case SetKind::Box:
            lo = lo_;
            hi = hi_;
            return;
        case SetKind::Ball:
            lo = center_.array() - radius_;
            hi = center_.array() + radius_;
            return;
        case SetKind::Product: {
            lo.resize(dim_);
            hi.resize(dim_);
            int at = 0;
            for (const auto& p : parts_) {
                VectorXd plo, phi;
                p.bounding_box(plo, phi);
                lo.segment(at, p.dim_) = plo;
                hi.segment(at, p.dim_) = phi;
                at += p.dim_;
            }
            return;
        }
    }
    throw Error("unreachable");
}

}  // namespace dppsp
