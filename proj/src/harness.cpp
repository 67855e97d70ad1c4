#include "dppsp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <utility>

#include "dppsp/diagnostics.hpp"
#include "dppsp/errors.hpp"

namespace dppsp {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

struct RawEntry {
    std::string value;
    int line = 0;
    bool used = false;
};

using RawConfig = std::map<std::string, RawEntry>;

RawConfig split_lines(const std::string& text) {
    RawConfig raw;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected 'key = value'", number);
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ParseError("empty key", number);
        if (value.empty())
            throw ParseError("empty value for key '" + key + "'", number);
        if (raw.count(key))
            throw ParseError("duplicate key '" + key + "'", number);
        raw[key] = RawEntry{value, number, false};
    }
    return raw;
}

/// Looks up a key, marking it consumed. Returns nullptr when absent.
RawEntry* find_entry(RawConfig& raw, const std::string& key) {
    const auto it = raw.find(key);
    if (it == raw.end()) return nullptr;
    it->second.used = true;
    return &it->second;
}

double parse_double(const RawEntry& e, const std::string& key) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(e.value, &used);
    } catch (const std::exception&) {
        throw ParseError("key '" + key + "' needs a number, got '" + e.value +
                             "'",
                         e.line);
    }
    if (used != e.value.size())
        throw ParseError("trailing characters after number in key '" + key +
                             "'",
                         e.line);
    return v;
}

long long parse_int(const RawEntry& e, const std::string& key) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(e.value, &used);
    } catch (const std::exception&) {
        throw ParseError("key '" + key + "' needs an integer, got '" + e.value +
                             "'",
                         e.line);
    }
    if (used != e.value.size())
        throw ParseError("trailing characters after integer in key '" + key +
                             "'",
                         e.line);
    return v;
}

std::uint64_t parse_u64(const RawEntry& e, const std::string& key) {
    if (!e.value.empty() && e.value[0] == '-')
        throw ParseError("key '" + key + "' needs a nonnegative integer",
                         e.line);
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(e.value, &used);
    } catch (const std::exception&) {
        throw ParseError("key '" + key + "' needs a nonnegative integer, got '" +
                             e.value + "'",
                         e.line);
    }
    if (used != e.value.size())
        throw ParseError("trailing characters after integer in key '" + key +
                             "'",
                         e.line);
    return v;
}

void take_double(RawConfig& raw, const std::string& key, double* out) {
    if (const RawEntry* e = find_entry(raw, key)) *out = parse_double(*e, key);
}

void take_int(RawConfig& raw, const std::string& key, int* out) {
    if (const RawEntry* e = find_entry(raw, key)) {
        const long long v = parse_int(*e, key);
        if (v < std::numeric_limits<int>::min() ||
            v > std::numeric_limits<int>::max())
            throw ParseError("key '" + key + "' is out of range", e->line);
        *out = static_cast<int>(v);
    }
}

void take_u64(RawConfig& raw, const std::string& key, std::uint64_t* out) {
    if (const RawEntry* e = find_entry(raw, key)) *out = parse_u64(*e, key);
}

void take_string(RawConfig& raw, const std::string& key, std::string* out) {
    if (const RawEntry* e = find_entry(raw, key)) *out = e->value;
}

std::string graph_kind_name(GraphKind k) {
    switch (k) {
        case GraphKind::Path: return "path";
        case GraphKind::Er: return "er";
        case GraphKind::File: return "file";
    }
    throw ValidationError("graph.kind", "unhandled kind");
}

std::string form_name(RecursionForm f) {
    return f == RecursionForm::Eliminated ? "eliminated" : "q-carrying";
}

std::string exec_name(ExecMode e) {
    return e == ExecMode::Parallel ? "parallel" : "serial";
}

std::string init_name(InitKind k) {
    return k == InitKind::Random ? "random" : "origin";
}

ExperimentConfig parse_raw(RawConfig raw, const fs::path& base) {
    ExperimentConfig cfg;

    const RawEntry* family = find_entry(raw, "instance.family");
    if (!family) throw ValidationError("instance.family", "is required");
    cfg.instance.family = family_from_name(family->value);

    const RawEntry* nodes = find_entry(raw, "instance.nodes");
    if (!nodes) throw ValidationError("instance.nodes", "is required");
    cfg.instance.nodes =
        static_cast<int>(parse_int(*nodes, "instance.nodes"));

    take_int(raw, "instance.dim_x", &cfg.instance.dim_x);
    take_int(raw, "instance.dim_y", &cfg.instance.dim_y);
    take_u64(raw, "instance.seed", &cfg.instance.seed);
    take_double(raw, "instance.rho", &cfg.instance.rho);
    take_double(raw, "instance.box_radius", &cfg.instance.box_radius);
    take_double(raw, "instance.heterogeneity", &cfg.instance.heterogeneity);
    take_double(raw, "instance.offset_scale", &cfg.instance.offset_scale);
    take_double(raw, "instance.mvi_x0", &cfg.instance.mvi_x0);
    take_double(raw, "instance.mvi_gamma", &cfg.instance.mvi_gamma);
    take_double(raw, "instance.mvi_lo", &cfg.instance.mvi_lo);
    take_double(raw, "instance.mvi_hi", &cfg.instance.mvi_hi);

    if (const RawEntry* e = find_entry(raw, "graph.kind")) {
        if (e->value == "path")
            cfg.graph_kind = GraphKind::Path;
        else if (e->value == "er")
            cfg.graph_kind = GraphKind::Er;
        else if (e->value == "file")
            cfg.graph_kind = GraphKind::File;
        else
            throw ValidationError("graph.kind",
                                  "must be path, er, or file; got '" +
                                      e->value + "'");
    }
    cfg.graph_n = cfg.instance.nodes;
    take_int(raw, "graph.n", &cfg.graph_n);
    take_double(raw, "graph.p", &cfg.graph_p);
    take_u64(raw, "graph.seed", &cfg.graph_seed);
    take_string(raw, "graph.file", &cfg.graph_file);
    // A relative edge-list path counts from the config file's directory.
    if (!cfg.graph_file.empty() && !base.empty() &&
        fs::path(cfg.graph_file).is_relative())
        cfg.graph_file = (base / cfg.graph_file).string();
    take_double(raw, "graph.tau_factor", &cfg.tau_factor);

    take_double(raw, "algo.alpha", &cfg.algo.alpha);
    const RawEntry* rounds = find_entry(raw, "algo.rounds");
    if (!rounds) throw ValidationError("algo.rounds", "is required");
    cfg.algo.rounds = static_cast<int>(parse_int(*rounds, "algo.rounds"));

    if (const RawEntry* e = find_entry(raw, "algo.form")) {
        if (e->value == "eliminated")
            cfg.algo.form = RecursionForm::Eliminated;
        else if (e->value == "q-carrying")
            cfg.algo.form = RecursionForm::DualCarrying;
        else
            throw ValidationError("algo.form",
                                  "must be eliminated or q-carrying; got '" +
                                      e->value + "'");
    }
    if (const RawEntry* e = find_entry(raw, "algo.exec")) {
        if (e->value == "parallel")
            cfg.algo.exec = ExecMode::Parallel;
        else if (e->value == "serial")
            cfg.algo.exec = ExecMode::Serial;
        else
            throw ValidationError("algo.exec",
                                  "must be parallel or serial; got '" +
                                      e->value + "'");
    }
    take_u64(raw, "algo.seed", &cfg.algo.seed);
    take_int(raw, "algo.snapshot_every", &cfg.algo.snapshot_every);
    take_double(raw, "algo.inner_tol", &cfg.algo.resolvent.inner_tol);
    take_int(raw, "algo.max_inner_iters", &cfg.algo.resolvent.max_inner_iters);
    take_double(raw, "algo.inner_step", &cfg.algo.resolvent.inner_step);
    if (const RawEntry* e = find_entry(raw, "algo.init")) {
        if (e->value == "random")
            cfg.init = InitKind::Random;
        else if (e->value == "origin")
            cfg.init = InitKind::Origin;
        else
            throw ValidationError("algo.init",
                                  "must be random or origin; got '" + e->value +
                                      "'");
    }

    take_string(raw, "output.dir", &cfg.output_dir);
    take_int(raw, "output.repeats", &cfg.repeats);

    for (const auto& [key, entry] : raw)
        if (!entry.used)
            throw ParseError("unknown key '" + key + "'", entry.line);

    // Field validation: the config layer checks everything that does not
    // need the generated instance.
    if (cfg.instance.nodes < 1)
        throw ValidationError("instance.nodes", "must be >= 1");
    if (cfg.graph_n != cfg.instance.nodes)
        throw ValidationError("graph.n",
                              "must match instance.nodes (" +
                                  std::to_string(cfg.instance.nodes) + "), got " +
                                  std::to_string(cfg.graph_n));
    if (cfg.graph_p < 0.0 || cfg.graph_p > 1.0)
        throw ValidationError("graph.p", "must lie in [0, 1]");
    if (cfg.graph_kind == GraphKind::File) {
        if (cfg.graph_file.empty())
            throw ValidationError("graph.file", "is required for kind file");
        if (!fs::exists(cfg.graph_file))
            throw ValidationError("graph.file",
                                  "file '" + cfg.graph_file + "' does not exist");
    }
    if (cfg.tau_factor <= 0.0)
        throw ValidationError("graph.tau_factor", "must be > 0");
    if (cfg.algo.alpha <= 0.0)
        throw ValidationError("algo.alpha", "must be > 0");
    if (cfg.algo.rounds < 1)
        throw ValidationError("algo.rounds", "must be >= 1");
    if (cfg.algo.snapshot_every < 0)
        throw ValidationError("algo.snapshot_every", "must be >= 0");
    if (cfg.algo.resolvent.inner_tol <= 0.0)
        throw ValidationError("algo.inner_tol", "must be > 0");
    if (cfg.algo.resolvent.max_inner_iters < 1)
        throw ValidationError("algo.max_inner_iters", "must be >= 1");
    if (cfg.algo.resolvent.inner_step < 0.0 ||
        cfg.algo.resolvent.inner_step > 1.0)
        throw ValidationError("algo.inner_step",
                              "must lie in (0, 1], or 0 for the default rule");
    if (cfg.output_dir.empty())
        throw ValidationError("output.dir", "must be nonempty");
    if (cfg.repeats < 1)
        throw ValidationError("output.repeats", "must be >= 1");
    return cfg;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    return out;
}

void write_harness_trace_csv(const RunTrace& trace, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << "round,stationarity_gap,consensus_error,mean_inner_iters\n";
    for (const auto& r : trace.records)
        out << r.round << ',' << fmt(r.stationarity_gap) << ','
            << fmt(r.consensus_error) << ',' << fmt(r.mean_inner_iters) << '\n';
}

void write_timing_csv(const RunTrace& trace, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << "round,wall_time_ms\n";
    for (const auto& r : trace.records)
        out << r.round << ',' << fmt(r.wall_time_ms) << '\n';
}

void write_metric_dat(const RunTrace& trace, const fs::path& path,
                      double TraceRecord::*field) {
    std::ofstream out = open_out(path);
    for (const auto& r : trace.records)
        out << r.round << ' ' << fmt(r.*field) << '\n';
}

double max_rho(const std::vector<LocalSaddle>& problems) {
    double rho = 0.0;
    for (const auto& node : problems) rho = std::max(rho, node.rho);
    return rho;
}

void write_report(const fs::path& path, const ExperimentConfig& cfg,
                  const ExperimentSetup& setup,
                  const std::vector<RunTrace>& traces) {
    std::ofstream out = open_out(path);
    const double rho = max_rho(setup.instance.problems);
    out << "family = " << family_name(cfg.instance.family) << '\n';
    out << "nodes = " << setup.mixing.size() << '\n';
    out << "block_dim = " << setup.instance.problems.front().dim() << '\n';
    out << "alpha = " << fmt(cfg.algo.alpha) << '\n';
    out << "rounds = " << cfg.algo.rounds << '\n';
    out << "form = " << form_name(cfg.algo.form) << '\n';
    out << "repeats = " << cfg.repeats << '\n';
    out << "rho = " << fmt(rho) << '\n';
    out << "lambda_min_w = " << fmt(setup.mixing.lambda_min) << '\n';
    out << "lambda_max_w = " << fmt(setup.mixing.lambda_max) << '\n';
    out << "fiedler_gap = " << fmt(setup.mixing.fiedler_gap) << '\n';
    out << "margin_cap = "
        << fmt(margin_stepsize_cap(setup.mixing.lambda_min, rho)) << '\n';
    out << "gap_cap = " << fmt(gap_stepsize_cap(rho)) << '\n';
    // Guarantee formulas consume the pairwise set diameter, not the norm
    // radius; both are reported so readers can tell them apart.
    out << "diameter = " << fmt(setup.instance.sets.front().diameter()) << '\n';
    out << "diameter_kind = pairwise\n";
    out << "norm_radius = " << fmt(setup.instance.sets.front().norm_radius())
        << '\n';

    double gap_mean = 0.0, consensus_mean = 0.0, identity_max = 0.0;
    int completed = 0;
    for (const auto& t : traces) {
        identity_max = std::max(identity_max, t.identity_residual);
        if (!t.completed() || t.records.empty()) continue;
        gap_mean += expected_gap(t);
        consensus_mean += expected_consensus(t);
        ++completed;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    gap_mean = completed ? gap_mean / completed : nan;
    consensus_mean = completed ? consensus_mean / completed : nan;
    out << "completed_repeats = " << completed << '\n';
    out << "expected_gap_mean = " << fmt(gap_mean) << '\n';
    out << "expected_consensus_mean = " << fmt(consensus_mean) << '\n';
    out << "identity_residual_max = " << fmt(identity_max) << '\n';

    std::string slope = "nan", note = "ok";
    if (!traces.empty() && traces.front().completed()) {
        try {
            slope = fmt(rate_slope(traces.front(), 1,
                                   traces.front().rounds_recorded()));
        } catch (const Error& e) {
            note = e.what();
        }
    } else {
        note = "repeat 0 did not complete";
    }
    out << "rate_slope_r0 = " << slope << '\n';
    out << "rate_slope_note = " << note << '\n';

    const std::vector<std::string>& warnings = traces.front().warnings;
    out << "warnings = " << warnings.size() << '\n';
    for (std::size_t i = 0; i < warnings.size(); ++i)
        out << "warning." << i << " = " << warnings[i] << '\n';
}

void write_summary(const fs::path& path, const ExperimentConfig& cfg,
                   const ExperimentSetup& setup,
                   const std::vector<RunTrace>& traces, bool failed) {
    std::ofstream out = open_out(path);
    out << "family,nodes,alpha,rounds,form,repeats,status,expected_gap,"
           "expected_consensus,rate_slope,identity_residual\n";
    double gap_mean = 0.0, consensus_mean = 0.0, identity_max = 0.0;
    int completed = 0;
    for (const auto& t : traces) {
        identity_max = std::max(identity_max, t.identity_residual);
        if (!t.completed() || t.records.empty()) continue;
        gap_mean += expected_gap(t);
        consensus_mean += expected_consensus(t);
        ++completed;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    gap_mean = completed ? gap_mean / completed : nan;
    consensus_mean = completed ? consensus_mean / completed : nan;
    double slope = nan;
    if (!traces.empty() && traces.front().completed()) {
        try {
            slope = rate_slope(traces.front(), 1,
                               traces.front().rounds_recorded());
        } catch (const Error&) {
        }
    }
    out << family_name(cfg.instance.family) << ',' << setup.mixing.size() << ','
        << fmt(cfg.algo.alpha) << ',' << cfg.algo.rounds << ','
        << form_name(cfg.algo.form) << ',' << cfg.repeats << ','
        << (failed ? "failed" : "ok") << ',' << fmt(gap_mean) << ','
        << fmt(consensus_mean) << ',' << fmt(slope) << ','
        << fmt(identity_max) << '\n';
}

void write_baseline_csv(const ExperimentConfig& cfg,
                        const ExperimentSetup& setup, const Eigen::VectorXd& z0,
                        const fs::path& path) {
    const auto& node = setup.instance.problems.front();
    const auto& set = setup.instance.sets.front();
    ResolventConfig rc = cfg.algo.resolvent;
    rc.alpha = cfg.algo.alpha;
    const std::vector<Eigen::VectorXd> iterates =
        proximal_point_reference(node, set, z0, cfg.algo.rounds, rc);
    std::ofstream out = open_out(path);
    out << "round,stationarity_gap\n";
    Eigen::VectorXd prev = set.project(z0);
    for (std::size_t t = 0; t < iterates.size(); ++t) {
        const double gap = (prev - iterates[t]).norm() / cfg.algo.alpha;
        out << (t + 1) << ',' << fmt(gap) << '\n';
        prev = iterates[t];
    }
}

Eigen::VectorXd projected_start(const ExperimentSetup& setup,
                                const Eigen::VectorXd& z0) {
    const int d = setup.instance.problems.front().dim();
    Eigen::VectorXd out(z0.size());
    for (std::size_t n = 0; n < setup.instance.sets.size(); ++n)
        out.segment(static_cast<int>(n) * d, d) =
            setup.instance.sets[n].project(z0.segment(static_cast<int>(n) * d,
                                                      d));
    return out;
}

RunTrace prefix_trace(const RunTrace& trace, int rounds) {
    RunTrace out = trace;
    out.records.resize(rounds);
    out.snapshots.clear();
    return out;
}

Eigen::VectorXd reference_block(const Instance& inst, std::uint64_t seed) {
    try {
        return reference_solution(inst.problems, inst.sets,
                                  RefMethod::ClosedForm);
    } catch (const Error&) {
    }
    try {
        return reference_solution(inst.problems, inst.sets, RefMethod::Grid);
    } catch (const Error&) {
    }
    return reference_solution(inst.problems, inst.sets,
                              RefMethod::Extragradient, seed);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    return parse_raw(split_lines(text), fs::path());
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("config", "cannot read file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_raw(split_lines(buffer.str()),
                     fs::path(path).parent_path());
}

std::string emit_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "instance.family = " << family_name(cfg.instance.family) << '\n';
    out << "instance.nodes = " << cfg.instance.nodes << '\n';
    out << "instance.dim_x = " << cfg.instance.dim_x << '\n';
    out << "instance.dim_y = " << cfg.instance.dim_y << '\n';
    out << "instance.seed = " << cfg.instance.seed << '\n';
    out << "instance.rho = " << fmt(cfg.instance.rho) << '\n';
    out << "instance.box_radius = " << fmt(cfg.instance.box_radius) << '\n';
    out << "instance.heterogeneity = " << fmt(cfg.instance.heterogeneity)
        << '\n';
    out << "instance.offset_scale = " << fmt(cfg.instance.offset_scale) << '\n';
    out << "instance.mvi_x0 = " << fmt(cfg.instance.mvi_x0) << '\n';
    out << "instance.mvi_gamma = " << fmt(cfg.instance.mvi_gamma) << '\n';
    out << "instance.mvi_lo = " << fmt(cfg.instance.mvi_lo) << '\n';
    out << "instance.mvi_hi = " << fmt(cfg.instance.mvi_hi) << '\n';
    out << '\n';
    out << "graph.kind = " << graph_kind_name(cfg.graph_kind) << '\n';
    out << "graph.n = " << cfg.graph_n << '\n';
    out << "graph.p = " << fmt(cfg.graph_p) << '\n';
    out << "graph.seed = " << cfg.graph_seed << '\n';
    if (cfg.graph_kind == GraphKind::File)
        out << "graph.file = " << cfg.graph_file << '\n';
    out << "graph.tau_factor = " << fmt(cfg.tau_factor) << '\n';
    out << '\n';
    out << "algo.alpha = " << fmt(cfg.algo.alpha) << '\n';
    out << "algo.rounds = " << cfg.algo.rounds << '\n';
    out << "algo.form = " << form_name(cfg.algo.form) << '\n';
    out << "algo.exec = " << exec_name(cfg.algo.exec) << '\n';
    out << "algo.seed = " << cfg.algo.seed << '\n';
    out << "algo.snapshot_every = " << cfg.algo.snapshot_every << '\n';
    out << "algo.inner_tol = " << fmt(cfg.algo.resolvent.inner_tol) << '\n';
    out << "algo.max_inner_iters = " << cfg.algo.resolvent.max_inner_iters
        << '\n';
    out << "algo.inner_step = " << fmt(cfg.algo.resolvent.inner_step) << '\n';
    out << "algo.init = " << init_name(cfg.init) << '\n';
    out << '\n';
    out << "output.dir = " << cfg.output_dir << '\n';
    out << "output.repeats = " << cfg.repeats << '\n';
    return out.str();
}

std::string resolve_output_dir(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.output_dir);
    const char* root = std::getenv("DPPSP_OUTPUT_ROOT");
    if (root && *root && dir.is_relative()) return (fs::path(root) / dir).string();
    return dir.string();
}

ExperimentSetup make_setup(const ExperimentConfig& cfg) {
    ExperimentSetup setup;
    setup.instance = make_instance(cfg.instance);
    switch (cfg.graph_kind) {
        case GraphKind::Path:
            setup.graph = build_path_graph(cfg.graph_n);
            break;
        case GraphKind::Er:
            setup.graph = build_er_graph(cfg.graph_n, cfg.graph_p,
                                         cfg.graph_seed);
            break;
        case GraphKind::File:
            setup.graph = read_edge_list_file(cfg.graph_file);
            if (setup.graph.node_count != cfg.graph_n)
                throw ValidationError(
                    "graph.file", "edge list declares " +
                                      std::to_string(setup.graph.node_count) +
                                      " nodes, config expects " +
                                      std::to_string(cfg.graph_n));
            break;
    }
    setup.mixing = mixing_for_graph(setup.graph, cfg.tau_factor);
    return setup;
}

Eigen::VectorXd initial_point(const ExperimentConfig& cfg,
                              const ExperimentSetup& setup, int repeat) {
    const int d = setup.instance.problems.front().dim();
    const int n = static_cast<int>(setup.instance.sets.size());
    Eigen::VectorXd z0(n * d);
    if (cfg.init == InitKind::Origin) {
        for (int i = 0; i < n; ++i)
            z0.segment(i * d, d) =
                setup.instance.sets[i].project(Eigen::VectorXd::Zero(d));
        return z0;
    }
    std::mt19937_64 rng(cfg.algo.seed ^
                        (0x9e3779b97f4a7c15ull *
                         static_cast<std::uint64_t>(repeat + 1)));
    for (int i = 0; i < n; ++i)
        z0.segment(i * d, d) = setup.instance.sets[i].sample(rng);
    return z0;
}

int classify_exit(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e) ||
        dynamic_cast<const ValidationError*>(&e) ||
        dynamic_cast<const DimensionMismatch*>(&e) ||
        dynamic_cast<const SpectrumViolation*>(&e) ||
        dynamic_cast<const Disconnected*>(&e) ||
        dynamic_cast<const ConstructionFailed*>(&e) ||
        dynamic_cast<const StepSizeViolation*>(&e))
        return 3;
    return 2;
}

int run_experiment(const ExperimentConfig& cfg) {
    ExperimentSetup setup;
    fs::path dir;
    std::vector<RunTrace> traces;
    bool failed = false;
    try {
        setup = make_setup(cfg);
        // Engine construction validates the algorithm settings; done before
        // any artifact so configuration errors leave the output untouched.
        Engine engine(setup.instance.problems, setup.instance.sets,
                      setup.mixing, cfg.algo);
        dir = resolve_output_dir(cfg);
        fs::create_directories(dir);
        open_out(dir / "config.txt") << emit_config(cfg);
        write_instance_text(setup.instance, (dir / "instance.txt").string());
        for (int r = 0; r < cfg.repeats; ++r) {
            RunTrace trace = engine.run(initial_point(cfg, setup, r));
            const std::string stem = "trace_r" + std::to_string(r);
            if (!trace.completed()) {
                failed = true;
                std::fprintf(stderr, "dppsp: repeat %d aborted: %s\n", r,
                             trace.error.c_str());
            }
            write_harness_trace_csv(
                trace, dir / (trace.completed() ? stem + ".csv"
                                                : stem + ".csv.partial"));
            write_timing_csv(trace, dir / ("timing_r" + std::to_string(r) +
                                           ".csv"));
            if (!trace.snapshots.empty())
                write_snapshots_csv(trace, (dir / ("snapshots_r" +
                                                   std::to_string(r) + ".csv"))
                                               .string());
            traces.push_back(std::move(trace));
        }
        write_metric_dat(traces.front(), dir / "gap.dat",
                         &TraceRecord::stationarity_gap);
        write_metric_dat(traces.front(), dir / "consensus.dat",
                         &TraceRecord::consensus_error);
        if (setup.mixing.size() == 1)
            write_baseline_csv(cfg, setup, initial_point(cfg, setup, 0),
                               dir / "baseline.csv");
        write_report(dir / "report.txt", cfg, setup, traces);
        write_summary(dir / "summary.csv", cfg, setup, traces, failed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "dppsp: %s\n", e.what());
        return classify_exit(e);
    }
    return failed ? 2 : 0;
}

int sweep_alphas(const ExperimentConfig& cfg, std::vector<double> grid) {
    std::vector<std::string> rows;
    fs::path dir;
    try {
        for (const double alpha : grid)
            if (!(alpha > 0.0) || !std::isfinite(alpha))
                throw ValidationError("algo.alpha",
                                      "grid values must be positive and finite, got " +
                                          fmt(alpha));
        if (grid.empty()) {
            const ExperimentSetup setup = make_setup(cfg);
            const double rho = max_rho(setup.instance.problems);
            const double cap =
                rho > 0.0 ? margin_stepsize_cap(setup.mixing.lambda_min, rho)
                          : 1.0;
            grid = {cap, 0.5 * cap, 0.25 * cap};
        }
        dir = resolve_output_dir(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "dppsp: %s\n", e.what());
        return classify_exit(e);
    }
    int worst = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        ExperimentConfig sub = cfg;
        sub.algo.alpha = grid[i];
        sub.output_dir =
            (fs::path(cfg.output_dir) / ("alpha" + std::to_string(i))).string();
        const int code = run_experiment(sub);
        worst = std::max(worst, code);
        if (code == 3) continue;
        std::ifstream in(fs::path(resolve_output_dir(sub)) / "summary.csv");
        std::string header, row;
        if (in && std::getline(in, header) && std::getline(in, row))
            rows.push_back(row);
    }
    try {
        fs::create_directories(dir);
        std::ofstream out = open_out(dir / "summary.csv");
        out << "family,nodes,alpha,rounds,form,repeats,status,expected_gap,"
               "expected_consensus,rate_slope,identity_residual\n";
        for (const auto& row : rows) out << row << '\n';
    } catch (const std::exception& e) {
        std::fprintf(stderr, "dppsp: %s\n", e.what());
        return std::max(worst, classify_exit(e));
    }
    return worst;
}

BoundsReport compare_bounds(const ExperimentConfig& cfg) {
    if (cfg.algo.rounds < 10)
        throw ValidationError("algo.rounds",
                              "bounds comparison needs at least 10 rounds");
    const ExperimentSetup setup = make_setup(cfg);
    Engine engine(setup.instance.problems, setup.instance.sets, setup.mixing,
                  cfg.algo);
    const Eigen::VectorXd z0 =
        projected_start(setup, initial_point(cfg, setup, 0));
    const RunTrace trace = engine.run(z0);
    if (!trace.completed())
        throw NumericalError("bounds run aborted: " + trace.error);

    BoundsReport report;
    report.reference = reference_block(setup.instance, cfg.algo.seed);
    const double rho = max_rho(setup.instance.problems);
    const double alpha = cfg.algo.alpha;
    const bool in_regime =
        rho == 0.0 || alpha <= (1.0 + 1e-12) / (2.0 * rho);
    const bool sign_mode = cfg.instance.family == Family::MviScalar;

    BoundInputs inputs;
    if (sign_mode) {
        const MviReport mvi = check_mvi(setup.instance.problems,
                                        setup.instance.sets, report.reference,
                                        2001, cfg.algo.seed);
        if (!mvi.holds)
            throw OracleInconclusive(
                "reference point fails the sign condition (worst " +
                fmt(mvi.worst) + ")");
    } else {
        inputs = make_bound_inputs(setup.mixing, setup.instance.problems,
                                   setup.instance.sets, report.reference,
                                   alpha, z0);
    }

    std::vector<int> schedule;
    for (int t = cfg.algo.rounds; t >= 10; t /= 2) schedule.push_back(t);
    std::reverse(schedule.begin(), schedule.end());

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const int t : schedule) {
        const RunTrace part = prefix_trace(trace, t);
        double gap_bound = nan, consensus_bound = nan;
        bool regime_ok = in_regime;
        if (sign_mode) {
            const GuaranteeBounds gb = mvi_bounds(
                setup.mixing.size(), setup.instance.diameter, alpha, t);
            gap_bound = gb.gap;
            consensus_bound = gb.consensus;
        } else {
            try {
                const GuaranteeBounds gb = weakly_monotone_bounds(inputs, t);
                gap_bound = gb.gap;
                consensus_bound = gb.consensus;
                regime_ok = true;
            } catch (const RegimeViolation&) {
                regime_ok = false;
            }
        }
        const auto push = [&](const std::string& quantity, double measured,
                              double bound) {
            BoundsRow row;
            row.rounds = t;
            row.quantity = quantity;
            row.measured = measured;
            row.bound = bound;
            row.regime_ok = regime_ok;
            row.violated =
                regime_ok && measured > bound * (1.0 + 1e-12);
            report.violations += row.violated ? 1 : 0;
            report.regime_breaks += regime_ok ? 0 : 1;
            report.rows.push_back(row);
        };
        push("gap", expected_gap(part), gap_bound);
        push("consensus", expected_consensus(part), consensus_bound);
    }

    const fs::path dir = resolve_output_dir(cfg);
    fs::create_directories(dir);
    const fs::path csv = dir / "bounds.csv";
    std::ofstream out = open_out(csv);
    out << "rounds,quantity,measured,bound,regime_ok,violated\n";
    for (const auto& row : report.rows)
        out << row.rounds << ',' << row.quantity << ',' << fmt(row.measured)
            << ',' << fmt(row.bound) << ',' << (row.regime_ok ? 1 : 0) << ','
            << (row.violated ? 1 : 0) << '\n';
    report.csv_path = csv.string();
    return report;
}

void write_instance_text(const Instance& inst, const std::string& path) {
    std::ofstream out = open_out(path);
    const int d = inst.problems.front().dim();
    out << "family = " << family_name(inst.spec.family) << '\n';
    out << "nodes = " << inst.problems.size() << '\n';
    out << "dim_x = " << inst.problems.front().dim_x << '\n';
    out << "dim_y = " << inst.problems.front().dim_y << '\n';
    out << "dim = " << d << '\n';
    out << "rho = " << fmt(max_rho(inst.problems)) << '\n';
    out << "diameter = " << fmt(inst.sets.front().diameter()) << '\n';
    Eigen::VectorXd lo(d), hi(d);
    inst.sets.front().bounding_box(lo, hi);
    out << "set.lower =";
    for (int k = 0; k < d; ++k) out << ' ' << fmt(lo(k));
    out << '\n';
    out << "set.upper =";
    for (int k = 0; k < d; ++k) out << ' ' << fmt(hi(k));
    out << '\n';
    out << "has_solution = " << (inst.has_solution ? 1 : 0) << '\n';
    if (inst.has_solution) {
        out << "solution =";
        for (int k = 0; k < inst.solution.size(); ++k)
            out << ' ' << fmt(inst.solution(k));
        out << '\n';
    }
    for (std::size_t n = 0; n < inst.problems.size(); ++n) {
        const auto& node = inst.problems[n];
        out << "node." << n << ".rho = " << fmt(node.rho) << '\n';
        out << "node." << n << ".affine = " << (node.is_affine() ? 1 : 0)
            << '\n';
        if (!node.is_affine()) continue;
        out << "node." << n << ".affine_matrix =";
        for (int r = 0; r < node.affine_matrix->rows(); ++r) {
            if (r) out << " ;";
            for (int c = 0; c < node.affine_matrix->cols(); ++c)
                out << ' ' << fmt((*node.affine_matrix)(r, c));
        }
        out << '\n';
        out << "node." << n << ".affine_offset =";
        for (int k = 0; k < node.affine_offset->size(); ++k)
            out << ' ' << fmt((*node.affine_offset)(k));
        out << '\n';
    }
}

}  // namespace dppsp
