#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dppsp/core.hpp"
#include "dppsp/graph.hpp"
#include "dppsp/mixing.hpp"
#include "dppsp/problems.hpp"

namespace dppsp {

enum class GraphKind { Path, Er, File };
enum class InitKind { Random, Origin };

/// One experiment: instance recipe, network, algorithm settings, outputs.
/// Serialized as flat `key = value` lines with dotted keys (# comments);
/// parse_config/emit_config round-trip every field at full precision.
struct ExperimentConfig {
    InstanceSpec instance;
    GraphKind graph_kind = GraphKind::Path;
    int graph_n = 0;  // defaults to instance.nodes
    double graph_p = 0.5;
    std::uint64_t graph_seed = 0;
    std::string graph_file;    // edge list, kind = file only
    double tau_factor = 1.1;   // tau = tau_factor * lambda_max(L)
    AlgoConfig algo;
    /// Start point per repeat: seeded feasible samples, or the projected
    /// origin. Random keeps expectation estimates meaningful for families
    /// whose stationary point is the origin.
    InitKind init = InitKind::Random;
    std::string output_dir = "out";
    int repeats = 1;
};

/// Parses the documented key-value format. Unknown and duplicate keys are
/// rejected (ParseError with the line number); missing required keys and
/// out-of-range values raise ValidationError naming the field. Required:
/// instance.family, instance.nodes, algo.rounds.
ExperimentConfig parse_config_text(const std::string& text);
/// File variant; a relative graph.file is resolved against the config
/// file's directory.
ExperimentConfig parse_config(const std::string& path);

/// Canonical serialization: every field explicit, fixed key order, doubles
/// at 17 significant digits. emit_config(parse_config_text(s)) is a fixed
/// point of parse-then-emit for any valid s.
std::string emit_config(const ExperimentConfig& cfg);

/// Output directory with the DPPSP_OUTPUT_ROOT override applied: a relative
/// output.dir is joined under the root when the variable is set.
std::string resolve_output_dir(const ExperimentConfig& cfg);

/// Everything run_experiment builds before iterating.
struct ExperimentSetup {
    Instance instance;
    Graph graph;
    MixingMatrix mixing;
};

/// Instance + graph + validated mixing matrix from a config.
ExperimentSetup make_setup(const ExperimentConfig& cfg);

/// Start point for one repeat: feasible per-node samples seeded by
/// algo.seed and the repeat index, or the projected origin.
Eigen::VectorXd initial_point(const ExperimentConfig& cfg,
                              const ExperimentSetup& setup, int repeat);

/// Maps an error to the exit-code contract: 3 for configuration problems
/// (parsing, validation, graph or spectrum defects), 2 otherwise.
int classify_exit(const std::exception& e);

/// Runs the configured experiment and writes artifacts under the resolved
/// output directory: per-repeat trace CSVs (deterministic columns; wall
/// times in a timing sidecar), gnuplot files for repeat 0, a diagnostics
/// report, one summary row, the emitted config, and the instance dump.
/// A single-node run also writes the plain proximal-point baseline trace.
/// Returns 0 on success, 2 when a resolve failed (partial trace kept with a
/// .partial suffix), 3 on configuration errors (no artifacts).
int run_experiment(const ExperimentConfig& cfg);

/// Runs run_experiment once per stepsize and merges the summary rows into
/// <output.dir>/summary.csv. An empty grid sweeps the contraction-margin
/// cap scaled by {1, 1/2, 1/4} (or {1, 1/2, 1/4} themselves for monotone
/// instances). Returns the worst per-run exit code.
int sweep_alphas(const ExperimentConfig& cfg, std::vector<double> grid);

struct BoundsRow {
    int rounds = 0;
    std::string quantity;  // "gap" or "consensus"
    double measured = 0.0;
    double bound = 0.0;
    bool regime_ok = true;
    bool violated = false;
};

struct BoundsReport {
    std::vector<BoundsRow> rows;
    int violations = 0;      // rows where the measured value exceeds the bound
    int regime_breaks = 0;   // rows where the stepsize leaves the regime
    Eigen::VectorXd reference;  // consensus stationary block used
    std::string csv_path;
};

/// Runs once at the configured round count and compares exact running
/// averages against the guarantee formulas over a doubling schedule of
/// prefixes (T, T/2, T/4, ... down to 10). Scalar sign-condition instances
/// use the sign-condition bound; all others the weakly monotone bound.
/// Writes bounds.csv and flags every violation. Throws OracleInconclusive
/// when no reference method certifies a solution.
BoundsReport compare_bounds(const ExperimentConfig& cfg);

/// Structured text dump of a generated instance: family, dimensions,
/// moduli, set bounds, and the affine forms where nodes have them.
void write_instance_text(const Instance& inst, const std::string& path);

}  // namespace dppsp
