#include "dppsp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "dppsp/errors.hpp"

namespace dppsp {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

Eigen::VectorXd block_sum(const Eigen::VectorXd& v, int block_dim) {
    Eigen::Map<const Eigen::MatrixXd> blocks(v.data(), block_dim,
                                             v.size() / block_dim);
    return blocks.rowwise().sum();
}

Eigen::VectorXd stacked_eval(const std::vector<LocalSaddle>& problems,
                             const Eigen::VectorXd& z) {
    const int d = problems.front().dim();
    Eigen::VectorXd out(z.size());
    for (std::size_t n = 0; n < problems.size(); ++n) {
        out.segment(static_cast<int>(n) * d, d) =
            problems[n].eval(z.segment(static_cast<int>(n) * d, d));
    }
    return out;
}

void check_instance_shapes(const std::vector<LocalSaddle>& problems,
                           const std::vector<FeasibleSet>& sets) {
    if (problems.empty()) throw ValidationError("problems", "must be nonempty");
    if (sets.size() != problems.size())
        throw ValidationError("sets", "one feasible set per node required");
    const int d = problems.front().dim();
    for (std::size_t n = 0; n < problems.size(); ++n) {
        if (problems[n].dim() != d || sets[n].dim() != d)
            throw DimensionMismatch("node dimensions disagree across the instance");
    }
}

/// Dense square root of I - W restricted to the non-consensus spectrum,
/// lifted to blocks of size block_dim. Matches the operator used by
/// MixingMatrix::apply_u, including the clipping of the consensus eigenvalue.
Eigen::MatrixXd dense_u_lifted(const MixingMatrix& mixing, int block_dim) {
    const int n = mixing.size();
    Eigen::VectorXd factors(n);
    for (int i = 0; i < n; ++i) {
        const double gap = 1.0 - mixing.eigenvalues(i);
        factors(i) = gap <= kEigenMultiplicityTol ? 0.0 : std::sqrt(gap);
    }
    const Eigen::MatrixXd small = mixing.eigenvectors * factors.asDiagonal() *
                                  mixing.eigenvectors.transpose();
    Eigen::MatrixXd lifted = Eigen::MatrixXd::Zero(n * block_dim, n * block_dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            lifted.block(i * block_dim, j * block_dim, block_dim, block_dim) =
                small(i, j) * Eigen::MatrixXd::Identity(block_dim, block_dim);
    return lifted;
}

/// Probe points for the sign-condition check: a deterministic grid for low
/// block dims, seeded feasible samples otherwise. The reference block is
/// always included.
std::vector<Eigen::VectorXd> mvi_probe_points(const FeasibleSet& set,
                                              const Eigen::VectorXd& z_star,
                                              int budget, std::uint64_t seed) {
    std::vector<Eigen::VectorXd> points;
    points.push_back(z_star);
    const int d = set.dim();
    Eigen::VectorXd lo(d), hi(d);
    set.bounding_box(lo, hi);
    std::vector<int> active;
    for (int k = 0; k < d; ++k)
        if (hi(k) - lo(k) > 1e-12) active.push_back(k);
    if (d <= 3 && !active.empty()) {
        const int per_dim = std::max(
            2, static_cast<int>(std::floor(std::pow(
                   static_cast<double>(budget), 1.0 / active.size()))));
        std::vector<int> idx(active.size(), 0);
        Eigen::VectorXd point = lo;
        while (true) {
            for (std::size_t a = 0; a < active.size(); ++a) {
                const int k = active[a];
                point(k) = lo(k) + (hi(k) - lo(k)) * idx[a] / (per_dim - 1);
            }
            points.push_back(set.project(point));
            std::size_t a = 0;
            for (; a < active.size(); ++a) {
                if (++idx[a] < per_dim) break;
                idx[a] = 0;
            }
            if (a == active.size()) break;
        }
    } else if (!active.empty()) {
        std::mt19937_64 rng(seed);
        for (int s = 0; s < budget; ++s) points.push_back(set.sample(rng));
    }
    return points;
}

double window_mean(const std::vector<TraceRecord>& records, std::size_t first,
                   double (*field)(const TraceRecord&)) {
    double sum = 0.0;
    for (std::size_t i = first; i < records.size(); ++i) sum += field(records[i]);
    return sum / static_cast<double>(records.size() - first);
}

Eigen::VectorXd aggregate_eval(const std::vector<LocalSaddle>& problems,
                               const Eigen::VectorXd& v) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
    for (const auto& node : problems) out += node.eval(v);
    return out;
}

Eigen::VectorXd closed_form_reference(const std::vector<LocalSaddle>& problems,
                                      const FeasibleSet& set) {
    const int d = problems.front().dim();
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd offset = Eigen::VectorXd::Zero(d);
    for (const auto& node : problems) {
        if (!node.is_affine())
            throw OracleInconclusive(
                "closed-form reference requires affine nodes");
        total += *node.affine_matrix;
        offset += *node.affine_offset;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(total);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(d - 1);
    if (smin <= 1e-10 * std::max(1.0, smax))
        throw SingularKKT("aggregate affine system is numerically singular");
    const Eigen::VectorXd v = total.partialPivLu().solve(-offset);
    if (!set.contains(v, 1e-9))
        throw OracleInconclusive(
            "unconstrained aggregate solution leaves the feasible set");
    return v;
}

Eigen::VectorXd extragradient_reference(const std::vector<LocalSaddle>& problems,
                                        const FeasibleSet& set,
                                        std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double lipschitz = 1e-6;
    for (int s = 0; s < 256; ++s) {
        const Eigen::VectorXd a = set.sample(rng);
        const Eigen::VectorXd b = set.sample(rng);
        const double dist = (a - b).norm();
        if (dist < 1e-12) continue;
        lipschitz = std::max(
            lipschitz,
            (aggregate_eval(problems, a) - aggregate_eval(problems, b)).norm() /
                dist);
    }
    const double step = 0.45 / lipschitz;
    Eigen::VectorXd v = set.project(set.center());
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 200000; ++it) {
        const Eigen::VectorXd fv = aggregate_eval(problems, v);
        residual = (v - set.project(v - fv)).norm();
        if (residual <= 1e-9) return v;
        const Eigen::VectorXd half = set.project(v - step * fv);
        v = set.project(v - step * aggregate_eval(problems, half));
    }
    throw OracleInconclusive("extragradient stalled at natural residual " +
                             fmt(residual));
}

/// Scans the set at a fixed resolution for the smallest natural residual.
/// Ties within 1e-6 are broken toward the candidate whose worst-case sign
/// condition over a coarse probe grid is largest, so spurious stationary
/// points that fail the sign condition lose to genuine solutions.
Eigen::VectorXd grid_reference(const std::vector<LocalSaddle>& problems,
                               const FeasibleSet& set) {
    const int d = set.dim();
    if (d > 2)
        throw OracleInconclusive("grid reference supports block dims <= 2");
    Eigen::VectorXd lo(d), hi(d);
    set.bounding_box(lo, hi);
    std::vector<int> counts(d, 1);
    for (int k = 0; k < d; ++k) {
        const double extent = hi(k) - lo(k);
        if (extent > 1e-12)
            counts[k] = static_cast<int>(std::lround(extent / 1e-3)) + 1;
    }
    const auto point_at = [&](const std::vector<int>& idx) {
        Eigen::VectorXd p(d);
        for (int k = 0; k < d; ++k)
            p(k) = counts[k] == 1
                       ? lo(k)
                       : lo(k) + (hi(k) - lo(k)) * idx[k] / (counts[k] - 1);
        return p;
    };
    const auto natural_residual = [&](const Eigen::VectorXd& p) {
        return (p - set.project(p - aggregate_eval(problems, p))).norm();
    };
    const auto for_each_index = [&](auto&& visit) {
        std::vector<int> idx(d, 0);
        while (true) {
            visit(idx);
            int k = 0;
            for (; k < d; ++k) {
                if (++idx[k] < counts[k]) break;
                idx[k] = 0;
            }
            if (k == d) break;
        }
    };
    double best = std::numeric_limits<double>::infinity();
    for_each_index([&](const std::vector<int>& idx) {
        best = std::min(best, natural_residual(point_at(idx)));
    });
    std::vector<Eigen::VectorXd> candidates;
    for_each_index([&](const std::vector<int>& idx) {
        if (candidates.size() >= 4096) return;
        const Eigen::VectorXd p = point_at(idx);
        if (natural_residual(p) <= best + 1e-6) candidates.push_back(p);
    });
    std::vector<int> coarse(d, 1);
    for (int k = 0; k < d; ++k)
        if (hi(k) - lo(k) > 1e-12) coarse[k] = 41;
    std::vector<Eigen::VectorXd> probes;
    {
        std::vector<int> idx(d, 0);
        while (true) {
            Eigen::VectorXd p(d);
            for (int k = 0; k < d; ++k)
                p(k) = coarse[k] == 1
                           ? lo(k)
                           : lo(k) + (hi(k) - lo(k)) * idx[k] / (coarse[k] - 1);
            probes.push_back(p);
            int k = 0;
            for (; k < d; ++k) {
                if (++idx[k] < coarse[k]) break;
                idx[k] = 0;
            }
            if (k == d) break;
        }
    }
    double best_score = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd winner = candidates.front();
    for (const auto& c : candidates) {
        double score = std::numeric_limits<double>::infinity();
        for (const auto& u : probes)
            score = std::min(score, aggregate_eval(problems, u).dot(u - c));
        if (score > best_score + 1e-12) {
            best_score = score;
            winner = c;
        }
    }
    return winner;
}

}  // namespace

double stationarity_gap(const StackedState& after, double alpha) {
    if (alpha <= 0.0) throw ValidationError("alpha", "must be > 0");
    return block_sum(after.previous - after.current, after.block_dim).norm() /
           alpha;
}

double margin_stepsize_cap(double lambda_min_w, double rho) {
    if (lambda_min_w <= 0.0 || lambda_min_w > 1.0)
        throw ValidationError("lambda_min_w", "must lie in (0, 1]");
    if (rho < 0.0) throw ValidationError("rho", "must be >= 0");
    if (rho == 0.0) return std::numeric_limits<double>::infinity();
    return (1.0 - std::sqrt(1.0 - lambda_min_w)) / (2.0 * rho);
}

double gap_stepsize_cap(double rho) {
    if (rho < 0.0) throw ValidationError("rho", "must be >= 0");
    if (rho == 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / (2.0 * rho);
}

double strong_monotonicity_margin(const MixingMatrix& mixing,
                                  const std::vector<LocalSaddle>& problems,
                                  const std::vector<FeasibleSet>& sets,
                                  double alpha, int pairs, std::uint64_t seed) {
    check_instance_shapes(problems, sets);
    if (mixing.size() != static_cast<int>(problems.size()))
        throw DimensionMismatch("mixing size does not match the node count");
    if (alpha < 0.0) throw ValidationError("alpha", "must be >= 0");
    if (pairs < 1) throw ValidationError("pairs", "must be >= 1");
    const int d = problems.front().dim();
    const int nd = mixing.size() * d;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto sample_primal = [&]() {
        Eigen::VectorXd z(nd);
        for (std::size_t n = 0; n < sets.size(); ++n)
            z.segment(static_cast<int>(n) * d, d) = sets[n].interior_sample(rng);
        return z;
    };
    const auto sample_dual = [&]() {
        Eigen::VectorXd q(nd);
        for (int i = 0; i < nd; ++i) q(i) = gauss(rng);
        return q;
    };
    double margin = std::numeric_limits<double>::infinity();
    for (int p = 0; p < pairs; ++p) {
        const Eigen::VectorXd z1 = sample_primal();
        const Eigen::VectorXd z2 = sample_primal();
        const Eigen::VectorXd q1 = sample_dual();
        const Eigen::VectorXd q2 = sample_dual();
        const Eigen::VectorXd dz = z1 - z2;
        const Eigen::VectorXd dq = q1 - q2;
        const double denom = dz.squaredNorm() + dq.squaredNorm();
        if (denom < 1e-20) continue;
        const Eigen::VectorXd de_z =
            dz +
            alpha * (stacked_eval(problems, z1) - stacked_eval(problems, z2)) +
            2.0 * mixing.apply_u(dq, d);
        margin = std::min(margin, (de_z.dot(dz) + dq.squaredNorm()) / denom);
    }
    return margin;
}

double strong_monotonicity_margin_affine(const MixingMatrix& mixing,
                                         const std::vector<LocalSaddle>& problems,
                                         double alpha) {
    if (problems.empty()) throw ValidationError("problems", "must be nonempty");
    if (mixing.size() != static_cast<int>(problems.size()))
        throw DimensionMismatch("mixing size does not match the node count");
    if (alpha < 0.0) throw ValidationError("alpha", "must be >= 0");
    const int d = problems.front().dim();
    const int nd = mixing.size() * d;
    Eigen::MatrixXd top_left = Eigen::MatrixXd::Identity(nd, nd);
    for (std::size_t n = 0; n < problems.size(); ++n) {
        if (!problems[n].is_affine() || problems[n].dim() != d)
            throw ValidationError("problems",
                                  "affine margin requires affine nodes of "
                                  "equal dimension");
        top_left.block(static_cast<int>(n) * d, static_cast<int>(n) * d, d, d) +=
            alpha * (*problems[n].affine_matrix);
    }
    Eigen::MatrixXd op = Eigen::MatrixXd::Zero(2 * nd, 2 * nd);
    op.topLeftCorner(nd, nd) = top_left;
    op.topRightCorner(nd, nd) = 2.0 * dense_u_lifted(mixing, d);
    op.bottomRightCorner(nd, nd) = Eigen::MatrixXd::Identity(nd, nd);
    const Eigen::MatrixXd sym = 0.5 * (op + op.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success)
        throw NumericalError("eigengap solve failed for the assembled operator");
    return eig.eigenvalues()(0);
}

MviReport check_mvi(const std::vector<LocalSaddle>& problems,
                    const std::vector<FeasibleSet>& sets,
                    const Eigen::VectorXd& z_star_block, int budget,
                    std::uint64_t seed) {
    check_instance_shapes(problems, sets);
    if (budget < 1) throw ValidationError("budget", "must be >= 1");
    if (z_star_block.size() != problems.front().dim())
        throw DimensionMismatch("reference block has the wrong dimension");
    const auto points =
        mvi_probe_points(sets.front(), z_star_block, budget, seed);
    MviReport report;
    report.worst = std::numeric_limits<double>::infinity();
    for (const auto& z : points) {
        const Eigen::VectorXd dir = z - z_star_block;
        for (std::size_t n = 0; n < problems.size(); ++n) {
            const double value = problems[n].eval(z).dot(dir);
            if (value < report.worst) {
                report.worst = value;
                report.witness = z;
                report.node = static_cast<int>(n);
            }
        }
    }
    report.holds = report.worst >= -1e-10;
    return report;
}

BoundInputs make_bound_inputs(const MixingMatrix& mixing,
                              const std::vector<LocalSaddle>& problems,
                              const std::vector<FeasibleSet>& sets,
                              const Eigen::VectorXd& z_star_block, double alpha,
                              const Eigen::VectorXd& z0, bool zero_dual) {
    check_instance_shapes(problems, sets);
    if (mixing.size() != static_cast<int>(problems.size()))
        throw DimensionMismatch("mixing size does not match the node count");
    if (alpha <= 0.0) throw ValidationError("alpha", "must be > 0");
    const int d = problems.front().dim();
    const int nd = mixing.size() * d;
    if (z_star_block.size() != d)
        throw DimensionMismatch("reference block has the wrong dimension");
    if (z0.size() != nd)
        throw DimensionMismatch("start point has the wrong stacked dimension");
    for (const auto& set : sets)
        if (!set.contains(z_star_block, 1e-9))
            throw ValidationError("z_star", "reference block is infeasible");
    BoundInputs b;
    b.nodes = mixing.size();
    b.alpha = alpha;
    b.lambda_min_w = mixing.lambda_min;
    b.diameter = sets.front().diameter();
    b.rho = 0.0;
    for (const auto& node : problems) b.rho = std::max(b.rho, node.rho);
    b.z_star = z_star_block.replicate(b.nodes, 1);
    const Eigen::VectorXd scaled_field =
        alpha * stacked_eval(problems, b.z_star);
    b.q_star = zero_dual ? Eigen::VectorXd::Zero(nd)
                         : mixing.apply_u_pinv(-scaled_field, d);
    // The pair certifies stationarity only if the dual variable cancels the
    // scaled operator field along non-consensus directions.
    const double certificate =
        (mixing.apply_u(b.q_star, d) + scaled_field).norm();
    if (certificate > 1e-8)
        throw NumericalError(
            "reference pair fails the stationarity certificate: residual " +
            fmt(certificate));
    const Eigen::VectorXd dz = z0 - b.z_star;
    const double lifted_sq = dz.dot(apply_lifted(mixing, dz, d));
    b.phi0_m_norm = std::sqrt(std::max(0.0, lifted_sq)) +
                    (mixing.apply_u(z0, d) - b.q_star).norm();
    return b;
}

GuaranteeBounds weakly_monotone_bounds(const BoundInputs& b, int rounds) {
    if (rounds < 1) throw ValidationError("rounds", "must be >= 1");
    if (b.alpha <= 0.0) throw ValidationError("alpha", "must be > 0");
    if (b.lambda_min_w <= 0.0)
        throw ValidationError("lambda_min_w", "must be > 0");
    if (b.rho > 0.0 && b.alpha > (1.0 + 1e-12) / (2.0 * b.rho))
        throw RegimeViolation("alpha = " + fmt(b.alpha) +
                              " exceeds 1/(2*rho) = " + fmt(1.0 / (2.0 * b.rho)) +
                              "; the averaged-iterate bounds do not apply");
    const double n = static_cast<double>(b.nodes);
    const double root_t = std::sqrt(static_cast<double>(rounds));
    const double floor = std::sqrt(2.0 * b.alpha * b.rho * n) * b.diameter;
    GuaranteeBounds out;
    out.consensus = b.phi0_m_norm / root_t + floor;
    out.gap = std::sqrt(n / b.lambda_min_w) / b.alpha * out.consensus;
    return out;
}

GuaranteeBounds mvi_bounds(int nodes, double diameter, double alpha,
                           int rounds) {
    if (nodes < 1) throw ValidationError("nodes", "must be >= 1");
    if (diameter <= 0.0) throw ValidationError("diameter", "must be > 0");
    if (alpha <= 0.0) throw ValidationError("alpha", "must be > 0");
    if (rounds < 1) throw ValidationError("rounds", "must be >= 1");
    const double n = static_cast<double>(nodes);
    const double root_t = std::sqrt(static_cast<double>(rounds));
    GuaranteeBounds out;
    out.gap = n * diameter / (alpha * root_t);
    out.consensus = std::sqrt(n) * diameter / root_t;
    return out;
}

double expected_gap(const RunTrace& trace) {
    if (trace.records.empty()) throw EmptyTrace("trace has no recorded rounds");
    const auto gap = [](const TraceRecord& r) { return r.stationarity_gap; };
    double value = window_mean(trace.records, 0, gap);
    if (trace.records.size() >= 2)
        value = std::max(value, window_mean(trace.records, 1, gap));
    return value;
}

double expected_consensus(const RunTrace& trace) {
    if (trace.records.empty()) throw EmptyTrace("trace has no recorded rounds");
    const auto consensus = [](const TraceRecord& r) {
        return r.consensus_error;
    };
    double value = window_mean(trace.records, 0, consensus);
    if (trace.records.size() >= 2)
        value = std::max(value, window_mean(trace.records, 1, consensus));
    // The window shifted one round earlier replaces the last record with the
    // start point's consensus error.
    double shifted = trace.initial_consensus_error;
    for (std::size_t i = 0; i + 1 < trace.records.size(); ++i)
        shifted += trace.records[i].consensus_error;
    value = std::max(value, shifted / static_cast<double>(trace.records.size()));
    return value;
}

double rate_slope(const RunTrace& trace, int first_round, int last_round) {
    if (trace.records.empty()) throw EmptyTrace("trace has no recorded rounds");
    const int recorded = trace.records.back().round;
    if (first_round < 1 || last_round < first_round || last_round > recorded)
        throw ValidationError("window", "need 1 <= first <= last <= rounds");
    std::vector<double> xs, ys;
    double running = 0.0;
    int count = 0;
    for (int t = first_round; t <= last_round; ++t) {
        const double gap = trace.records[t - 1].stationarity_gap;
        if (gap <= 1e-14)
            throw DegenerateFit(
                "stationarity gap reached the numerical floor at round " +
                    std::to_string(t),
                t);
        running += gap;
        ++count;
        xs.push_back(std::log(static_cast<double>(t)));
        ys.push_back(std::log(running / count));
    }
    if (count < 10)
        throw DegenerateFit("window has fewer than 10 positive records",
                            last_round);
    const double x_mean =
        std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double y_mean =
        std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double cov = 0.0, var = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        cov += (xs[i] - x_mean) * (ys[i] - y_mean);
        var += (xs[i] - x_mean) * (xs[i] - x_mean);
    }
    if (var <= 0.0)
        throw DegenerateFit("window spans a single round", last_round);
    return cov / var;
}

Eigen::VectorXd reference_solution(const std::vector<LocalSaddle>& problems,
                                   const std::vector<FeasibleSet>& sets,
                                   RefMethod method, std::uint64_t seed) {
    check_instance_shapes(problems, sets);
    switch (method) {
        case RefMethod::ClosedForm:
            return closed_form_reference(problems, sets.front());
        case RefMethod::Extragradient:
            return extragradient_reference(problems, sets.front(), seed);
        case RefMethod::Grid:
            return grid_reference(problems, sets.front());
    }
    throw ValidationError("method", "unhandled reference method");
}

}  // namespace dppsp
