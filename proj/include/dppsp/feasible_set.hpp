#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

namespace dppsp {

enum class SetKind { Box, Ball, Product };

/// Closed convex constraint set with an exact Euclidean projection.
/// Three shapes cover everything the solver needs: axis-aligned boxes
/// (possibly degenerate in some coordinates), Euclidean balls, and products
/// of the two.
class FeasibleSet {
public:
    static FeasibleSet box(Eigen::VectorXd lo, Eigen::VectorXd hi);
    static FeasibleSet centered_box(double radius, int dim);
    static FeasibleSet singleton(Eigen::VectorXd point);
    static FeasibleSet ball(Eigen::VectorXd center, double radius);
    static FeasibleSet product(std::vector<FeasibleSet> parts);

    SetKind kind() const { return kind_; }
    int dim() const { return dim_; }

    /// Largest distance between two members.
    double diameter() const { return diameter_; }
    /// Largest Euclidean norm of a member.
    double norm_radius() const { return norm_radius_; }

    Eigen::VectorXd project(const Eigen::VectorXd& v) const;
    bool contains(const Eigen::VectorXd& v, double tol = 1e-12) const;
    Eigen::VectorXd center() const;

    /// Uniform member (boxes exactly, balls via radial rescaling).
    Eigen::VectorXd sample(std::mt19937_64& rng) const;
    /// Member pulled toward the center: center + shrink * (sample - center).
    Eigen::VectorXd interior_sample(std::mt19937_64& rng, double shrink = 0.9) const;

    /// Axis-aligned bounding box (exact for boxes, center +- r for balls).
    void bounding_box(Eigen::VectorXd& lo, Eigen::VectorXd& hi) const;

    const std::vector<FeasibleSet>& parts() const { return parts_; }
    const Eigen::VectorXd& lower() const { return lo_; }
    const Eigen::VectorXd& upper() const { return hi_; }
    double radius() const { return radius_; }

private:
    FeasibleSet() = default;

    SetKind kind_ = SetKind::Box;
    int dim_ = 0;
    double diameter_ = 0.0;
    double norm_radius_ = 0.0;

    Eigen::VectorXd lo_, hi_;     // box
    Eigen::VectorXd center_;      // ball
    double radius_ = 0.0;         // ball
    std::vector<FeasibleSet> parts_;  // product
};

}  // namespace dppsp
