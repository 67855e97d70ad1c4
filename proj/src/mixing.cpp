#include "dppsp/mixing.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "dppsp/errors.hpp"

namespace dppsp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::Map<const MatrixXd> as_blocks(const VectorXd& z, int block_dim) {
    if (block_dim <= 0) throw DimensionMismatch("block_dim must be positive");
    if (z.size() % block_dim != 0)
        throw DimensionMismatch("stacked vector length not a multiple of block_dim");
    return {z.data(), block_dim, z.size() / block_dim};
}

void check_block_count(const MixingMatrix& m, const VectorXd& z, int block_dim) {
    if (z.size() != static_cast<Eigen::Index>(m.size()) * block_dim)
        throw DimensionMismatch("stacked vector does not match mixing size");
}

// Spectral function of W applied through the cached eigendecomposition:
// out = Z * V g(lambda) V^T  with g acting entrywise on the eigenvalues.
template <typename G>
VectorXd apply_spectral(const MixingMatrix& m, const VectorXd& z, int block_dim,
                        G&& g) {
    check_block_count(m, z, block_dim);
    const auto Z = as_blocks(z, block_dim);
    VectorXd diag = m.eigenvalues.unaryExpr(g);
    MatrixXd S = m.eigenvectors * diag.asDiagonal() * m.eigenvectors.transpose();
    VectorXd out(z.size());
    Eigen::Map<MatrixXd>(out.data(), Z.rows(), Z.cols()) = Z * S;
    return out;
}

}  // namespace

Eigen::VectorXd MixingMatrix::apply_u(const Eigen::VectorXd& z, int block_dim) const {
    // 1 - lambda vanishes on the consensus eigenspace; clip its round-off
    // before the sqrt amplifies it
    return apply_spectral(*this, z, block_dim, [](double lam) {
        double s = 1.0 - lam;
        return s > kEigenMultiplicityTol ? std::sqrt(s) : 0.0;
    });
}

Eigen::VectorXd MixingMatrix::apply_u_pinv(const Eigen::VectorXd& w,
                                           int block_dim) const {
    return apply_spectral(*this, w, block_dim, [](double lam) {
        double s = 1.0 - lam;
        return s > kEigenMultiplicityTol ? 1.0 / std::sqrt(s) : 0.0;
    });
}

MixingMatrix mixing_from_laplacian(const Eigen::MatrixXd& L, double tau) {
    if (L.rows() != L.cols() || L.rows() < 1)
        throw DimensionMismatch("laplacian must be square and non-empty");
    const int n = static_cast<int>(L.rows());

    Eigen::SelfAdjointEigenSolver<MatrixXd> lap_eig(L, Eigen::EigenvaluesOnly);
    if (lap_eig.info() != Eigen::Success)
        throw NumericalError("laplacian eigendecomposition failed");
    const double lap_max = lap_eig.eigenvalues().maxCoeff();

    if (!(tau > 0.0) || !std::isfinite(tau))
        throw SpectrumViolation("tau must be positive and finite");
    // strict inequality, with slack for round-off in the computed eigenvalue
    if (!(tau > lap_max + kEigenMultiplicityTol * std::max(1.0, lap_max)))
        throw SpectrumViolation("tau must exceed the top laplacian eigenvalue (" +
                                std::to_string(lap_max) + "), got " +
                                std::to_string(tau));

    MixingMatrix m;
    m.weights = MatrixXd::Identity(n, n) - L / tau;
    m.weights = 0.5 * (m.weights + m.weights.transpose()).eval();  // exact symmetry

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m.weights);
    if (eig.info() != Eigen::Success)
        throw NumericalError("mixing eigendecomposition failed");
    m.eigenvalues = eig.eigenvalues();
    m.eigenvectors = eig.eigenvectors();
    m.lambda_min = m.eigenvalues(0);
    m.lambda_max = m.eigenvalues(n - 1);
    m.fiedler_gap = n > 1 ? 1.0 - m.eigenvalues(n - 2) : 0.0;

    validate_mixing(m);
    return m;
}

MixingMatrix mixing_for_graph(const Graph& g, double tau_factor) {
    if (!is_connected(g)) throw Disconnected("mixing_for_graph: graph is disconnected");
    const MatrixXd L = laplacian(g);
    double tau;
    if (g.edge_count() == 0) {
        tau = 1.0;  // single node: L = [[0]], any tau > 0 gives W = [[1]]
    } else {
        Eigen::SelfAdjointEigenSolver<MatrixXd> lap_eig(L, Eigen::EigenvaluesOnly);
        tau = tau_factor * lap_eig.eigenvalues().maxCoeff();
    }
    MixingMatrix m = mixing_from_laplacian(L, tau);
    validate_mixing(m, &g);
    return m;
}

void validate_mixing(const MixingMatrix& m, const Graph* g) {
    const int n = m.size();
    if (n < 1) throw DimensionMismatch("empty mixing matrix");
    if (m.weights != m.weights.transpose())
        throw NumericalError("mixing matrix is not exactly symmetric");

    const VectorXd row_sums = m.weights.rowwise().sum();
    for (int i = 0; i < n; ++i) {
        if (std::abs(row_sums(i) - 1.0) > 1e-12)
            throw NumericalError("row " + std::to_string(i) +
                                 " of mixing matrix does not sum to 1");
    }

    if (!(m.lambda_min > 0.0))
        throw SpectrumViolation("mixing matrix has an eigenvalue <= 0");
    if (m.lambda_max > 1.0 + kEigenMultiplicityTol)
        throw SpectrumViolation("mixing matrix has an eigenvalue above 1");
    if (std::abs(m.lambda_max - 1.0) > kEigenMultiplicityTol)
        throw SpectrumViolation("top mixing eigenvalue is not 1");

    int top_multiplicity = 0;
    for (int i = 0; i < n; ++i) {
        if (m.eigenvalues(i) >= m.lambda_max - kEigenMultiplicityTol) ++top_multiplicity;
    }
    if (top_multiplicity != 1)
        throw Disconnected("eigenvalue 1 of the mixing matrix is not simple");

    if (g != nullptr) {
        if (g->node_count != n)
            throw DimensionMismatch("graph size does not match mixing matrix");
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (m.weights(i, j) != 0.0 && !g->has_edge(i, j))
                    throw NumericalError("nonzero weight on non-edge (" +
                                         std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
}

Eigen::VectorXd apply_lifted(const MixingMatrix& m, const Eigen::VectorXd& z,
                             int block_dim) {
    check_block_count(m, z, block_dim);
    return apply_lifted_matrix(m.weights, z, block_dim);
}

Eigen::VectorXd apply_lifted_matrix(const Eigen::MatrixXd& S,
                                    const Eigen::VectorXd& z, int block_dim) {
    const auto Z = as_blocks(z, block_dim);
    if (S.rows() != S.cols() || S.rows() != Z.cols())
        throw DimensionMismatch("lift matrix does not match block count");
    VectorXd out(z.size());
    // out_n = sum_m S(n,m) z_m  <=>  Out = Z S^T
    Eigen::Map<MatrixXd>(out.data(), Z.rows(), Z.cols()) = Z * S.transpose();
    return out;
}

double consensus_seminorm(const MixingMatrix& m, const Eigen::VectorXd& z,
                          int block_dim) {
    check_block_count(m, z, block_dim);
    const auto Z = as_blocks(z, block_dim);
    const MatrixXd WZ = Z * m.weights;
    const double form = z.squaredNorm() - Z.cwiseProduct(WZ).sum();
    if (form < -1e-12)
        throw NumericalError("consensus quadratic form is negative: " +
                             std::to_string(form));
    return std::sqrt(std::max(form, 0.0));
}

std::string write_matrix_csv(const Eigen::MatrixXd& m) {
    std::ostringstream out;
    char buf[64];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
            out << buf << (j + 1 < m.cols() ? "," : "");
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace dppsp
