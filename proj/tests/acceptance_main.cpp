// Acceptance gate: one line per criterion, exit code = number of failures.
// Each criterion re-derives its expected values independently of the library
// internals it checks (dense linear algebra, direct averaging, raw residual
// recomputation), so a pass is evidence rather than tautology.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dppsp/core.hpp"
#include "dppsp/diagnostics.hpp"
#include "dppsp/errors.hpp"
#include "dppsp/graph.hpp"
#include "dppsp/mixing.hpp"
#include "dppsp/problems.hpp"
#include "dppsp/resolvent.hpp"

using namespace dppsp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Result {
    bool pass = false;
    std::string detail;
};

std::vector<std::pair<double, double>> identity_ledger;  // residual, limit

void note_identity(const RunTrace& trace, int nodes, double inner_tol) {
    identity_ledger.emplace_back(trace.identity_residual,
                                 10.0 * nodes * inner_tol);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
}

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

MixingMatrix path_mixing(int n) {
    return mixing_for_graph(build_path_graph(n), 1.1);
}

AlgoConfig algo(double alpha, int rounds, std::uint64_t seed = 0) {
    AlgoConfig cfg;
    cfg.alpha = alpha;
    cfg.rounds = rounds;
    cfg.seed = seed;
    cfg.resolvent.inner_tol = 1e-12;
    return cfg;
}

VectorXd sampled_start(const Instance& inst, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int d = inst.problems.front().dim();
    VectorXd z0(static_cast<int>(inst.sets.size()) * d);
    for (std::size_t n = 0; n < inst.sets.size(); ++n)
        z0.segment(static_cast<int>(n) * d, d) = inst.sets[n].sample(rng);
    return z0;
}

MatrixXd kron_identity(const MatrixXd& m, int d) {
    MatrixXd out = MatrixXd::Zero(m.rows() * d, m.cols() * d);
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j)
            out.block(i * d, j * d, d, d) =
                m(i, j) * MatrixXd::Identity(d, d);
    return out;
}

// ---------------------------------------------------------------------------
// 1. The q-carrying and eliminated recursions trace the same trajectory.

Result criterion_forms() {
    const auto start = std::chrono::steady_clock::now();
    const int node_counts[] = {2, 3, 5};
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        InstanceSpec spec;
        spec.family = (k % 2 == 0) ? Family::Bilinear : Family::WeaklyQuadratic;
        spec.nodes = node_counts[k % 3];
        spec.seed = 1000 + k;
        spec.heterogeneity = 0.8;
        spec.offset_scale = 0.4;
        if (spec.family == Family::WeaklyQuadratic) spec.rho = 0.3;
        const Instance inst = make_instance(spec);
        const MixingMatrix mixing = path_mixing(spec.nodes);

        const double alpha =
            spec.rho > 0.0
                ? 0.8 * margin_stepsize_cap(mixing.lambda_min, spec.rho)
                : 0.3;
        const Engine engine(inst.problems, inst.sets, mixing,
                            algo(alpha, 100, spec.seed));
        StackedState elim = engine.make_initial_state(engine.default_z0());
        StackedState carried = elim;
        DualState dual;
        dual.q = VectorXd::Zero(elim.current.size());
        for (int t = 0; t < 100; ++t) {
            elim = (t == 0) ? engine.init_step(elim) : engine.step(elim);
            carried = engine.step_q_form(carried, dual);
            worst = std::max(worst, (elim.current - carried.current)
                                        .lpNorm<Eigen::Infinity>());
        }
    }
    const double elapsed = seconds_since(start);
    return {worst <= 1e-7 && elapsed < 10.0,
            "max deviation " + num(worst) + " over 20 instances, " +
                num(elapsed) + "s"};
}

// ---------------------------------------------------------------------------
// 2. Cached operator values telescope against iterate displacements in every
//    recorded run (ledger filled by the other criteria plus its own sweep).

Result criterion_identity() {
    const struct {
        Family family;
        int nodes;
        double rho;
    } combos[] = {{Family::Bilinear, 3, 0.0},
                  {Family::ScScQuadratic, 4, 0.0},
                  {Family::MviScalar, 2, 0.0},
                  {Family::WeaklyQuadratic, 5, 0.2}};
    for (const auto& combo : combos) {
        InstanceSpec spec;
        spec.family = combo.family;
        spec.nodes = combo.nodes;
        spec.rho = combo.rho;
        spec.seed = 21;
        spec.offset_scale = 0.3;
        const Instance inst = make_instance(spec);
        const MixingMatrix mixing = path_mixing(spec.nodes);
        for (const RecursionForm form :
             {RecursionForm::Eliminated, RecursionForm::DualCarrying}) {
            AlgoConfig cfg = algo(0.1, 60, 3);
            cfg.form = form;
            cfg.exec = form == RecursionForm::Eliminated ? ExecMode::Parallel
                                                         : ExecMode::Serial;
            const Engine engine(inst.problems, inst.sets, mixing, cfg);
            note_identity(engine.run(sampled_start(inst, 5)), spec.nodes,
                          cfg.resolvent.inner_tol);
        }
    }
    double worst_ratio = 0.0;
    for (const auto& [residual, limit] : identity_ledger)
        worst_ratio = std::max(worst_ratio, residual / limit);
    return {worst_ratio <= 1.0,
            "max residual at " + num(100.0 * worst_ratio) +
                "% of the 10*N*tol budget across " +
                std::to_string(identity_ledger.size()) + " runs"};
}

// ---------------------------------------------------------------------------
// 3. A single node with W = [1] reproduces plain proximal point bitwise.

Result criterion_single_node() {
    InstanceSpec spec;
    spec.family = Family::ScScQuadratic;
    spec.nodes = 1;
    spec.seed = 5;
    spec.offset_scale = 0.6;
    const Instance inst = make_instance(spec);
    const MixingMatrix mixing = path_mixing(1);
    AlgoConfig cfg = algo(0.5, 500, 9);
    cfg.snapshot_every = 1;
    const Engine engine(inst.problems, inst.sets, mixing, cfg);
    const VectorXd z0 = sampled_start(inst, 9);
    const RunTrace trace = engine.run(z0);
    note_identity(trace, 1, cfg.resolvent.inner_tol);

    ResolventConfig rc = cfg.resolvent;
    rc.alpha = cfg.alpha;
    const std::vector<VectorXd> reference = proximal_point_reference(
        inst.problems[0], inst.sets[0], z0, cfg.rounds, rc);

    if (!trace.completed() || trace.snapshots.size() != reference.size())
        return {false, "run incomplete or snapshot count mismatch"};
    int exact = 0;
    for (std::size_t t = 0; t < reference.size(); ++t)
        exact += (trace.snapshots[t].state - reference[t]).norm() == 0.0;
    return {exact == 500,
            std::to_string(exact) + "/500 rounds bitwise equal to the "
                                    "reference"};
}

// ---------------------------------------------------------------------------
// 4. Bilinear instances obey the square-root rate law on both graph kinds.

Result criterion_rate() {
    const auto start = std::chrono::steady_clock::now();
    bool pass = true;
    std::string detail;
    for (const bool er : {false, true}) {
        InstanceSpec spec;
        spec.family = Family::Bilinear;
        spec.nodes = 5;
        spec.seed = 7;
        spec.heterogeneity = 0.8;
        const Instance inst = make_instance(spec);
        const Graph graph =
            er ? build_er_graph(5, 0.6, 2) : build_path_graph(5);
        const MixingMatrix mixing = mixing_for_graph(graph, 1.1);
        const Engine engine(inst.problems, inst.sets, mixing,
                            algo(0.2, 10000, 11));
        const RunTrace trace = engine.run(sampled_start(inst, 11));
        note_identity(trace, 5, 1e-12);
        if (!trace.completed()) return {false, "run incomplete"};

        // Exact averages over rounds 1..T, fitted on the decade grid.
        double sum = 0.0;
        std::vector<double> lt, lg;
        for (int t = 1; t <= 10000; ++t) {
            sum += trace.records[t - 1].stationarity_gap;
            if (t == 100 || t == 1000 || t == 10000) {
                lt.push_back(std::log(double(t)));
                lg.push_back(std::log(sum / t));
            }
        }
        const double mt = (lt[0] + lt[1] + lt[2]) / 3.0;
        const double mg = (lg[0] + lg[1] + lg[2]) / 3.0;
        double cov = 0.0, var = 0.0;
        for (int i = 0; i < 3; ++i) {
            cov += (lt[i] - mt) * (lg[i] - mg);
            var += (lt[i] - mt) * (lt[i] - mt);
        }
        const double slope = cov / var;
        const double consensus = trace.records.back().consensus_error;
        pass = pass && slope <= -0.35 && slope >= -1.2 && consensus <= 1e-3;
        detail += std::string(er ? "er" : "path") + " slope " + num(slope) +
                  " consensus " + num(consensus) + "; ";
    }
    const double elapsed = seconds_since(start);
    pass = pass && elapsed < 60.0;
    return {pass, detail + num(elapsed) + "s"};
}

// ---------------------------------------------------------------------------
// 5. Measured averages stay under the weakly monotone guarantee, and the
//    late-run plateau stays under the stepsize floor.

Result criterion_guarantee() {
    int violations = 0, plateau_breaks = 0, rows = 0;
    const int rounds = 1600;
    for (const double rho : {0.1, 0.5}) {
        const MixingMatrix mixing = path_mixing(4);
        const double caps[] = {gap_stepsize_cap(rho),
                               margin_stepsize_cap(mixing.lambda_min, rho)};
        for (const double alpha : caps) {
            for (std::uint64_t seed = 0; seed < 10; ++seed) {
                InstanceSpec spec;
                spec.family = Family::WeaklyQuadratic;
                spec.nodes = 4;
                spec.rho = rho;
                spec.seed = seed;
                spec.offset_scale = 0.5;
                const Instance inst = make_instance(spec);
                const Engine engine(inst.problems, inst.sets, mixing,
                                    algo(alpha, rounds, seed));
                const VectorXd z0 = sampled_start(inst, seed + 31);
                const RunTrace trace = engine.run(z0);
                note_identity(trace, 4, 1e-12);
                if (!trace.completed()) return {false, "run incomplete"};

                VectorXd z0_proj(z0.size());
                const int d = inst.problems.front().dim();
                for (int n = 0; n < 4; ++n)
                    z0_proj.segment(n * d, d) =
                        inst.sets[n].project(z0.segment(n * d, d));
                const BoundInputs inputs =
                    make_bound_inputs(mixing, inst.problems, inst.sets,
                                      inst.solution, alpha, z0_proj);
                for (int t = 100; t <= rounds; t *= 2) {
                    RunTrace part = trace;
                    part.records.resize(t);
                    const GuaranteeBounds bound =
                        weakly_monotone_bounds(inputs, t);
                    violations += expected_gap(part) > bound.gap;
                    violations += expected_consensus(part) > bound.consensus;
                    rows += 2;
                }

                // Plateau: averages over the last quarter of the run.
                double tail_gap = 0.0, tail_consensus = 0.0;
                const int tail = rounds / 4;
                for (int t = rounds - tail; t < rounds; ++t) {
                    tail_gap += trace.records[t].stationarity_gap;
                    tail_consensus += trace.records[t].consensus_error;
                }
                tail_gap /= tail;
                tail_consensus /= tail;
                const double floor =
                    std::sqrt(2.0 * alpha * rho * 4.0) * inst.diameter;
                const double gap_scale =
                    std::sqrt(4.0 / mixing.lambda_min) / alpha;
                plateau_breaks += tail_consensus > floor;
                plateau_breaks += tail_gap > gap_scale * floor;
            }
        }
    }
    return {violations == 0 && plateau_breaks == 0,
            "0 violations expected: got " + std::to_string(violations) +
                " of " + std::to_string(rows) + " bound rows, " +
                std::to_string(plateau_breaks) + " plateau breaks"};
}

// ---------------------------------------------------------------------------
// 6. The interior operator keeps a lambda_min/4 strong-monotonicity margin at
//    the capped stepsize, and the affine path matches dense linear algebra.

Result criterion_margin() {
    bool pass = true;
    std::string detail;

    const auto sampled_case = [&](const Instance& inst,
                                  const MixingMatrix& mixing, double alpha,
                                  const char* name) {
        const double margin = strong_monotonicity_margin(
            mixing, inst.problems, inst.sets, alpha, 10000, 77);
        const double needed = mixing.lambda_min / 4.0 - 1e-8;
        pass = pass && margin >= needed;
        detail += std::string(name) + " margin " + num(margin) + " vs " +
                  num(needed) + "; ";
        return margin;
    };

    InstanceSpec weakly;
    weakly.family = Family::WeaklyQuadratic;
    weakly.nodes = 3;
    weakly.rho = 0.5;
    weakly.seed = 3;
    const Instance w3 = make_instance(weakly);
    const MixingMatrix m3 = path_mixing(3);
    const double cap3 = margin_stepsize_cap(m3.lambda_min, weakly.rho);
    sampled_case(w3, m3, cap3, "path3");

    InstanceSpec er_spec = weakly;
    er_spec.nodes = 5;
    er_spec.rho = 0.1;
    er_spec.seed = 4;
    const Instance w5 = make_instance(er_spec);
    const MixingMatrix m5 = mixing_for_graph(build_er_graph(5, 0.6, 2), 1.1);
    sampled_case(w5, m5, margin_stepsize_cap(m5.lambda_min, er_spec.rho),
                 "er5");

    InstanceSpec bil;
    bil.family = Family::Bilinear;
    bil.nodes = 3;
    bil.seed = 8;
    sampled_case(make_instance(bil), m3, 0.3, "bilinear");

    // Dense cross-check: assemble sym([[I+alpha*D, 2U], [0, I]]) from scratch.
    const int d = w3.problems.front().dim();
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(m3.weights);
    MatrixXd u_small = MatrixXd::Zero(3, 3);
    for (int i = 0; i < 3; ++i) {
        const double gap = std::max(0.0, 1.0 - es.eigenvalues()(i));
        u_small += std::sqrt(gap) * es.eigenvectors().col(i) *
                   es.eigenvectors().col(i).transpose();
    }
    const MatrixXd u_lift = kron_identity(u_small, d);
    MatrixXd blocks = MatrixXd::Zero(3 * d, 3 * d);
    for (int n = 0; n < 3; ++n)
        blocks.block(n * d, n * d, d, d) = *w3.problems[n].affine_matrix;
    const int nd = 3 * d;
    MatrixXd interior = MatrixXd::Zero(2 * nd, 2 * nd);
    interior.topLeftCorner(nd, nd) =
        MatrixXd::Identity(nd, nd) + cap3 * blocks;
    interior.topRightCorner(nd, nd) = 2.0 * u_lift;
    interior.bottomRightCorner(nd, nd) = MatrixXd::Identity(nd, nd);
    const MatrixXd sym = 0.5 * (interior + interior.transpose());
    const double dense_direct =
        Eigen::SelfAdjointEigenSolver<MatrixXd>(sym).eigenvalues().minCoeff();
    const double dense_lib =
        strong_monotonicity_margin_affine(m3, w3.problems, cap3);
    pass = pass && std::abs(dense_direct - dense_lib) <= 1e-6;
    detail += "dense delta " + num(std::abs(dense_direct - dense_lib));
    return {pass, detail};
}

// ---------------------------------------------------------------------------
// 7. Resolvent: residual contract on 10^4 calls, firm nonexpansiveness for
//    monotone nodes, and the stepsize guard at exactly alpha*rho >= 1.

Result criterion_resolvent() {
    InstanceSpec spec;
    spec.family = Family::Bilinear;
    spec.nodes = 2;
    spec.seed = 13;
    const Instance bil = make_instance(spec);
    spec.family = Family::ScScQuadratic;
    spec.offset_scale = 0.5;
    const Instance scsc = make_instance(spec);
    spec.family = Family::MviScalar;
    const Instance mvi = make_instance(spec);

    struct Case {
        const LocalSaddle* node;
        const FeasibleSet* set;
        ResolventConfig cfg;
    };
    std::vector<Case> cases;
    for (const Instance* inst : {&bil, &scsc, &mvi}) {
        ResolventConfig rc;
        rc.alpha = 0.4;
        rc.inner_tol = 1e-10;
        cases.push_back({&inst->problems[0], &inst->sets[0], rc});
    }

    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    int residual_ok = 0;
    const int calls = 10000;
    std::vector<ResolventSolver> solvers;
    for (const auto& c : cases) solvers.emplace_back(*c.node, *c.set, c.cfg);
    for (int k = 0; k < calls; ++k) {
        const int which = k % 3;
        const auto& c = cases[which];
        const int d = c.node->dim();
        VectorXd rhs(d), warm(d);
        for (int i = 0; i < d; ++i) {
            rhs(i) = unif(rng);
            warm(i) = unif(rng);
        }
        const VectorXd z = solvers[which].solve(rhs, c.set->project(warm));
        const double residual =
            (z - c.set->project(rhs - c.cfg.alpha * c.node->eval(z))).norm();
        residual_ok += residual <= c.cfg.inner_tol;
    }

    // Firm nonexpansiveness of (I + alpha(B+N))^{-1} for monotone B.
    int firm_ok = 0;
    const int pairs = 3000;
    for (int k = 0; k < pairs; ++k) {
        const int which = k % 2;  // bilinear and scsc are monotone
        const auto& c = cases[which];
        const int d = c.node->dim();
        VectorXd a(d), b(d);
        for (int i = 0; i < d; ++i) {
            a(i) = unif(rng);
            b(i) = unif(rng);
        }
        const VectorXd ja = solvers[which].solve(a, c.set->project(a));
        const VectorXd jb = solvers[which].solve(b, c.set->project(b));
        firm_ok +=
            (ja - jb).squaredNorm() <= (a - b).dot(ja - jb) + 1e-8;
    }

    LocalSaddle half;
    half.dim_x = 1;
    half.dim_y = 0;
    half.rho = 0.5;
    half.grad_x = [](const VectorXd& x, const VectorXd&) {
        return (-0.5 * x).eval();
    };
    half.grad_y = [](const VectorXd&, const VectorXd&) {
        return VectorXd(0).eval();
    };
    const FeasibleSet box = FeasibleSet::box(VectorXd::Constant(1, -1.0),
                                             VectorXd::Constant(1, 1.0));
    ResolventConfig at;
    at.alpha = 2.0;  // alpha * rho = 1 exactly
    bool guard = false;
    try {
        const ResolventSolver bad(half, box, at);
        (void)bad;
    } catch (const StepSizeViolation&) {
        guard = true;
    }
    at.alpha = 2.0 * (1.0 - 1e-9);
    try {
        const ResolventSolver good(half, box, at);
        (void)good;
    } catch (const StepSizeViolation&) {
        guard = false;
    }

    return {residual_ok == calls && firm_ok == pairs && guard,
            std::to_string(residual_ok) + "/" + std::to_string(calls) +
                " residuals in tolerance, " + std::to_string(firm_ok) + "/" +
                std::to_string(pairs) + " firmly nonexpansive, guard " +
                (guard ? "exact" : "WRONG")};
}

// ---------------------------------------------------------------------------
// 8. Every generated mixing matrix satisfies its invariants; an undersized
//    tau is rejected.

Result criterion_mixing() {
    std::vector<Graph> graphs;
    for (int n = 2; n <= 6; ++n) graphs.push_back(build_path_graph(n));
    graphs.push_back(build_er_graph(5, 0.6, 2));
    graphs.push_back(build_er_graph(6, 0.5, 1));
    graphs.push_back(build_er_graph(8, 0.4, 4));

    double worst = 0.0;
    for (const Graph& g : graphs) {
        const MixingMatrix m = mixing_for_graph(g, 1.1);
        validate_mixing(m, &g);
        const int n = g.node_count;
        worst = std::max(worst,
                         (m.weights - m.weights.transpose()).cwiseAbs().maxCoeff());
        worst = std::max(
            worst, (m.weights * VectorXd::Ones(n) - VectorXd::Ones(n))
                       .cwiseAbs()
                       .maxCoeff());
        if (m.lambda_min <= 0.0 || m.lambda_max > 1.0 + 1e-10 ||
            m.fiedler_gap <= 0.0)
            return {false, "spectrum invariant broken"};
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (m.weights(i, j) != 0.0 && !g.has_edge(i, j))
                    return {false, "sparsity pattern broken"};
    }

    bool rejected = false;
    try {
        mixing_from_laplacian(laplacian(build_path_graph(3)), 3.0);
    } catch (const SpectrumViolation&) {
        rejected = true;
    }
    return {worst <= 1e-12 && rejected,
            "8 graphs pass, defect " + num(worst) + ", tau at lambda_max " +
                (rejected ? "rejected" : "ACCEPTED")};
}

// ---------------------------------------------------------------------------
// 9. Independent oracles agree: extragradient vs grid within 2e-3 on the low
//    dimensional fixtures, gradients vs finite differences within 1e-5.

Result criterion_oracles() {
    bool pass = true;
    std::string detail;
    const auto agree = [&](const InstanceSpec& spec, const char* name) {
        const Instance inst = make_instance(spec);
        const VectorXd via_grid =
            reference_solution(inst.problems, inst.sets, RefMethod::Grid);
        const VectorXd via_eg = reference_solution(
            inst.problems, inst.sets, RefMethod::Extragradient, 1);
        const double delta = (via_grid - via_eg).lpNorm<Eigen::Infinity>();
        pass = pass && delta <= 2e-3;
        detail += std::string(name) + " " + num(delta) + "; ";
    };

    InstanceSpec mvi;
    mvi.family = Family::MviScalar;
    mvi.nodes = 2;
    agree(mvi, "mvi");
    mvi.mvi_x0 = 0.6;
    mvi.mvi_gamma = 2.0;
    mvi.seed = 4;
    agree(mvi, "mvi2");

    InstanceSpec bil;
    bil.family = Family::Bilinear;
    bil.nodes = 2;
    bil.heterogeneity = 0.8;
    bil.seed = 7;
    agree(bil, "bilinear");

    InstanceSpec scsc;
    scsc.family = Family::ScScQuadratic;
    scsc.nodes = 3;
    scsc.offset_scale = 0.7;
    scsc.seed = 23;
    agree(scsc, "scsc");

    double worst_fd = 0.0;
    for (const Family family : {Family::Bilinear, Family::ScScQuadratic,
                                Family::WeaklyQuadratic, Family::MviScalar}) {
        InstanceSpec spec;
        spec.family = family;
        spec.nodes = 3;
        spec.seed = 6;
        spec.rho = family == Family::WeaklyQuadratic ? 0.4 : 0.0;
        spec.offset_scale = 0.3;
        const Instance inst = make_instance(spec);
        for (std::size_t n = 0; n < inst.problems.size(); ++n)
            worst_fd = std::max(
                worst_fd, max_gradient_fd_error(inst.problems[n], inst.sets[n],
                                                25, 100 + n));
    }
    pass = pass && worst_fd <= 1e-5;
    return {pass, detail + "fd error " + num(worst_fd)};
}

}  // namespace

int main() {
    const char* names[] = {
        "recursion forms agree",      "operator-displacement identity",
        "single-node reduction",      "square-root rate law",
        "weakly monotone guarantee",  "strong-monotonicity margin",
        "resolvent contract",         "mixing-matrix validation",
        "independent oracle agreement"};
    Result results[9];
    results[0] = criterion_forms();
    results[2] = criterion_single_node();
    results[3] = criterion_rate();
    results[4] = criterion_guarantee();
    results[5] = criterion_margin();
    results[6] = criterion_resolvent();
    results[7] = criterion_mixing();
    results[8] = criterion_oracles();
    results[1] = criterion_identity();  // folds in traces noted above

    int failures = 0;
    for (int i = 0; i < 9; ++i) {
        std::printf("[%s] %d. %s: %s\n", results[i].pass ? "PASS" : "FAIL",
                    i + 1, names[i], results[i].detail.c_str());
        failures += results[i].pass ? 0 : 1;
    }
    return failures;
}
