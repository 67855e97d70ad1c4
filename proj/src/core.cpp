#include "dppsp/core.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <random>
#include <sstream>
#include <utility>

#include "dppsp/errors.hpp"

namespace dppsp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Sum of the N node blocks, as one block_dim vector.
VectorXd block_sum(const VectorXd& v, int block_dim) {
    Eigen::Map<const MatrixXd> blocks(v.data(), block_dim,
                                      v.size() / block_dim);
    return blocks.rowwise().sum();
}

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

Engine::Engine(std::vector<LocalSaddle> problems, std::vector<FeasibleSet> sets,
               MixingMatrix mixing, AlgoConfig cfg)
    : problems_(std::move(problems)),
      sets_(std::move(sets)),
      mixing_(std::move(mixing)),
      cfg_(cfg) {
    const int n = static_cast<int>(problems_.size());
    if (n == 0) throw ValidationError("problems", "need at least one node");
    if (static_cast<int>(sets_.size()) != n || mixing_.size() != n)
        throw DimensionMismatch("problems, sets and mixing matrix disagree on node count");
    block_dim_ = problems_[0].dim();
    for (int i = 0; i < n; ++i) {
        if (problems_[i].dim() != block_dim_)
            throw DimensionMismatch("all nodes must share one block dimension");
        if (sets_[i].dim() != block_dim_)
            throw DimensionMismatch("feasible set dimension mismatch at node " +
                                    std::to_string(i));
    }
    if (cfg_.rounds < 1) throw ValidationError("rounds", "must be >= 1");
    if (cfg_.snapshot_every < 0)
        throw ValidationError("snapshot_every", "must be >= 0");

    ResolventConfig rc = cfg_.resolvent;
    rc.alpha = cfg_.alpha;
    cfg_.resolvent = rc;
    solvers_.reserve(n);
    for (int i = 0; i < n; ++i) solvers_.emplace_back(problems_[i], sets_[i], rc);

    weights_minus_identity_ =
        mixing_.weights - MatrixXd::Identity(n, n);

    // Stepsize caps are advisory: runs outside a regime still execute, the
    // diagnostics just lose the corresponding guarantee.
    double rho = 0.0;
    for (const auto& p : problems_) rho = std::max(rho, p.rho);
    if (rho > 0.0) {
        const double slack = 1.0 + 1e-12;
        const double cap_margin =
            (1.0 - std::sqrt(1.0 - mixing_.lambda_min)) / (2.0 * rho);
        const double cap_gap = 1.0 / (2.0 * rho);
        if (cfg_.alpha > cap_gap * slack) {
            warnings_.push_back(
                "alpha = " + format_double(cfg_.alpha) + " exceeds 1/(2*rho) = " +
                format_double(cap_gap) +
                "; averaged gap and consensus bounds do not apply");
        } else if (cfg_.alpha > cap_margin * slack) {
            warnings_.push_back(
                "alpha = " + format_double(cfg_.alpha) +
                " exceeds the strong-monotonicity threshold " +
                format_double(cap_margin) +
                "; the lifted fixed-point map loses its contraction margin");
        }
    }
}

Eigen::VectorXd Engine::default_z0() const {
    VectorXd z0(static_cast<Eigen::Index>(node_count()) * block_dim_);
    for (int i = 0; i < node_count(); ++i)
        z0.segment(i * block_dim_, block_dim_) =
            sets_[i].project(VectorXd::Zero(block_dim_));
    return z0;
}

StackedState Engine::make_initial_state(const Eigen::VectorXd& z0) const {
    if (z0.size() != static_cast<Eigen::Index>(node_count()) * block_dim_)
        throw DimensionMismatch("initial point has wrong stacked dimension");
    StackedState s;
    s.block_dim = block_dim_;
    s.round = 0;
    s.current = z0;
    for (int i = 0; i < node_count(); ++i) {
        auto block = s.current.segment(i * block_dim_, block_dim_);
        if (!sets_[i].contains(block, 0.0)) block = sets_[i].project(block);
    }
    s.previous = s.current;
    s.last_rhs = s.current;
    return s;
}

Eigen::VectorXd Engine::resolve_all(const Eigen::VectorXd& rhs,
                                    const Eigen::VectorXd& warm,
                                    Eigen::VectorXd* inner_iters) const {
    const int n = node_count();
    const int d = block_dim_;
    VectorXd out(rhs.size());
    std::vector<std::exception_ptr> failure(n);

    auto solve_node = [&](int i) {
        try {
            int iters = 0;
            out.segment(i * d, d) =
                solvers_[i].solve(rhs.segment(i * d, d), warm.segment(i * d, d),
                                  &iters);
            if (inner_iters) (*inner_iters)(i) = iters;
        } catch (...) {
            failure[i] = std::current_exception();
        }
    };

    if (cfg_.exec == ExecMode::Parallel) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) solve_node(i);
    } else {
        for (int i = 0; i < n; ++i) solve_node(i);
    }

    for (int i = 0; i < n; ++i) {
        if (!failure[i]) continue;
        try {
            std::rethrow_exception(failure[i]);
        } catch (const NoConvergence& e) {
            throw NoConvergence("node " + std::to_string(i) + ": " + e.what(),
                                e.residual);
        }
        // anything else propagates as-is
    }
    return out;
}

StackedState Engine::init_step(const StackedState& start,
                               Eigen::VectorXd* inner_iters) const {
    if (start.round != 0) throw Error("init_step expects a round-0 state");
    const VectorXd wz = apply_lifted(mixing_, start.current, block_dim_);
    const VectorXd rhs = 2.0 * wz - start.current;  // (2 W_hat - I) z^0
    StackedState next;
    next.block_dim = block_dim_;
    next.round = 1;
    next.previous = start.current;
    next.last_rhs = rhs;
    next.current = resolve_all(rhs, start.current, inner_iters);
    return next;
}

StackedState Engine::step(const StackedState& state,
                          Eigen::VectorXd* inner_iters) const {
    if (state.round < 1) throw Error("step expects an initialized state");
    const VectorXd extrap = 2.0 * state.current - state.previous;
    const VectorXd mixed =
        apply_lifted_matrix(weights_minus_identity_, extrap, block_dim_);
    // Equal to W_hat*(2 z^t - z^{t-1}) + alpha*cached_op, grouped so the
    // neighbor contribution vanishes identically when W = I: with one node
    // last_rhs == previous holds bitwise by induction and rhs == current.
    const VectorXd rhs =
        state.current + (state.last_rhs - state.previous) + mixed;
    StackedState next;
    next.block_dim = block_dim_;
    next.round = state.round + 1;
    next.previous = state.current;
    next.last_rhs = rhs;
    next.current = resolve_all(rhs, state.current, inner_iters);
    return next;
}

StackedState Engine::step_q_form(const StackedState& state, DualState& dual,
                               Eigen::VectorXd* inner_iters) const {
    if (dual.q.size() != state.current.size())
        throw DimensionMismatch("dual vector has wrong stacked dimension");
    const VectorXd wz = apply_lifted(mixing_, state.current, block_dim_);
    const VectorXd uq = mixing_.apply_u(dual.q, block_dim_);
    const VectorXd uz = mixing_.apply_u(state.current, block_dim_);
    const VectorXd rhs = 2.0 * wz - state.current - uq;
    StackedState next;
    next.block_dim = block_dim_;
    next.round = state.round + 1;
    next.previous = state.current;
    next.last_rhs = rhs;
    next.current = resolve_all(rhs, state.current, inner_iters);
    dual.q += uz;  // q^{t+1} = U z^t + q^t
    return next;
}

RunTrace Engine::run(const Eigen::VectorXd& z0) const {
    RunTrace trace;
    trace.config = cfg_;
    trace.warnings = warnings_;

    StackedState state = make_initial_state(z0);
    trace.initial_consensus_error =
        consensus_seminorm(mixing_, state.current, block_dim_);

    DualState dual;
    if (cfg_.form == RecursionForm::DualCarrying)
        dual.q = VectorXd::Zero(state.current.size());

    VectorXd iters = VectorXd::Zero(node_count());
    for (int t = 1; t <= cfg_.rounds; ++t) {
        const auto tic = std::chrono::steady_clock::now();
        StackedState next;
        try {
            if (cfg_.form == RecursionForm::DualCarrying)
                next = step_q_form(state, dual, &iters);
            else
                next = (t == 1) ? init_step(state, &iters) : step(state, &iters);
        } catch (const Error& e) {
            trace.error = e.what();
            break;
        }
        const std::chrono::duration<double, std::milli> elapsed =
            std::chrono::steady_clock::now() - tic;

        TraceRecord rec;
        rec.round = t;
        rec.stationarity_gap =
            block_sum(next.previous - next.current, block_dim_).norm() /
            cfg_.alpha;
        rec.consensus_error =
            consensus_seminorm(mixing_, next.current, block_dim_);
        rec.mean_inner_iters = iters.mean();
        rec.wall_time_ms = elapsed.count();
        trace.records.push_back(rec);

        const VectorXd identity_gap =
            block_sum(cfg_.alpha * next.cached_op(cfg_.alpha), block_dim_) -
            block_sum(next.previous - next.current, block_dim_);
        trace.identity_residual =
            std::max(trace.identity_residual, identity_gap.norm());

        if (cfg_.snapshot_every > 0 && t % cfg_.snapshot_every == 0)
            trace.snapshots.push_back({t, next.current});

        state = std::move(next);
    }
    trace.final_state = state.current;
    return trace;
}

RunTrace Engine::run() const { return run(default_z0()); }

std::vector<Eigen::VectorXd> proximal_point_reference(
    const LocalSaddle& node, const FeasibleSet& set, const Eigen::VectorXd& z0,
    int rounds, ResolventConfig cfg) {
    ResolventSolver solver(node, set, cfg);
    VectorXd z = set.contains(z0, 0.0) ? z0 : set.project(z0);
    std::vector<VectorXd> iterates;
    iterates.reserve(rounds);
    for (int t = 0; t < rounds; ++t) {
        z = solver.solve(z, z);
        iterates.push_back(z);
    }
    return iterates;
}

int sample_iterate(const RunTrace& trace, std::uint64_t seed) {
    if (trace.records.empty()) throw EmptyTrace("trace has no recorded rounds");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(
        0, static_cast<int>(trace.records.size()) - 1);
    return trace.records[pick(rng)].round;
}

void write_trace_csv(const RunTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "round,stationarity_gap,consensus_error,mean_inner_iters,"
           "wall_time_ms\n";
    char buf[256];
    for (const auto& r : trace.records) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", r.round,
                      r.stationarity_gap, r.consensus_error, r.mean_inner_iters,
                      r.wall_time_ms);
        out << buf;
    }
}

void write_snapshots_csv(const RunTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    char buf[64];
    for (const auto& snap : trace.snapshots) {
        out << snap.round;
        for (Eigen::Index i = 0; i < snap.state.size(); ++i) {
            std::snprintf(buf, sizeof(buf), ",%.17g", snap.state(i));
            out << buf;
        }
        out << "\n";
    }
}

}  // namespace dppsp
