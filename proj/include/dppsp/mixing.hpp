#pragma once

#include <string>

#include <Eigen/Dense>

#include "dppsp/graph.hpp"

namespace dppsp {

/// Symmetric mixing matrix W over a connected graph, with the spectral
/// properties the algorithm needs:
///   W = W^T exactly, W 1 = 1, spectrum inside (0, 1], eigenvalue 1 simple,
///   and w_nm = 0 whenever (n, m) is not an edge (n != m).
///
/// A symmetric eigendecomposition of W is computed once at construction and
/// reused for every product with U = (I - W (x) I)^{1/2} and its
/// pseudoinverse; the lifted Nd x Nd operators are never materialized.
struct MixingMatrix {
    Eigen::MatrixXd weights;
    Eigen::VectorXd eigenvalues;   // ascending
    Eigen::MatrixXd eigenvectors;  // columns paired with eigenvalues
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double fiedler_gap = 0.0;  // 1 - second largest eigenvalue

    int size() const { return static_cast<int>(weights.rows()); }

    /// U z for a stacked vector z (N blocks of block_dim each).
    Eigen::VectorXd apply_u(const Eigen::VectorXd& z, int block_dim) const;

    /// Minimum-norm solution q of U q = w (components along the consensus
    /// eigenspace are dropped).
    Eigen::VectorXd apply_u_pinv(const Eigen::VectorXd& w, int block_dim) const;
};

/// Eigenvalue-coincidence tolerance used when deciding multiplicities and
/// when truncating the U pseudoinverse.
inline constexpr double kEigenMultiplicityTol = 1e-10;

/// W = I - L / tau. Requires tau > lambda_max(L) strictly (SpectrumViolation
/// otherwise) and a connected graph (Disconnected when eigenvalue 1 is not
/// simple). The returned matrix has passed validate_mixing.
MixingMatrix mixing_from_laplacian(const Eigen::MatrixXd& L, double tau);

/// Convenience: tau = tau_factor * lambda_max(L), falling back to tau = 1
/// for a single-node graph (lambda_max = 0). Also checks the sparsity
/// pattern against g.
MixingMatrix mixing_for_graph(const Graph& g, double tau_factor = 1.1);

/// Re-checks every structural requirement listed on MixingMatrix; throws
/// SpectrumViolation / Disconnected / NumericalError. The graph, when given,
/// is used for the sparsity-pattern check.
void validate_mixing(const MixingMatrix& m, const Graph* g = nullptr);

/// (W (x) I) z, blockwise: out_n = sum_m W(n,m) z_m.
Eigen::VectorXd apply_lifted(const MixingMatrix& m, const Eigen::VectorXd& z,
                             int block_dim);

/// Same, for an arbitrary N x N matrix S in place of W.
Eigen::VectorXd apply_lifted_matrix(const Eigen::MatrixXd& S,
                                    const Eigen::VectorXd& z, int block_dim);

/// ||U z|| = sqrt(z^T (I - W (x) I) z), evaluated as a quadratic form.
/// A slightly negative form value (>= -1e-12) is treated as zero;
/// anything lower is a NumericalError.
double consensus_seminorm(const MixingMatrix& m, const Eigen::VectorXd& z,
                          int block_dim);

/// Thin handle for W (x) I acting on stacked vectors with a fixed block size.
struct LiftedOperator {
    const MixingMatrix* mix = nullptr;
    int block_dim = 0;

    Eigen::VectorXd apply(const Eigen::VectorXd& z) const {
        return apply_lifted(*mix, z, block_dim);
    }
};

/// Dense CSV (17 significant digits), one matrix row per line.
std::string write_matrix_csv(const Eigen::MatrixXd& m);

}  // namespace dppsp
