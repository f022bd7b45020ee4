#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plmpc/controller.hpp"
#include "plmpc/scenarios.hpp"

namespace plmpc {

struct ExperimentConfig {
    std::string scenario;
    /// Nonempty overrides `scenario` with an inline scenario definition
    /// (JSON object, same schema as scenario_from_json_text).
    std::string inline_scenario_json;
    int iterations = 0;  // J
    std::uint64_t master_seed = 0;
    bool seed_set = false;  // an explicit seed is mandatory
    std::string output_dir;

    bool record_shifted_costs = true;
    bool dump_safe_sets = false;
    bool dump_safe_sets_full = false;
    /// Draw theta from the full printed domain instead of the certified
    /// sub-box; iterations whose draws break the seed guarantee then abort.
    bool sample_full_theta_box = false;

    bool extensions_enabled = false;  // varying initial state / model deviation
    VectorXd initial_offset_lo, initial_offset_hi;
    double dyn_dev_scale_A = 0.0;
    double dyn_dev_scale_B = 0.0;

    std::optional<int> horizon_override;
    std::optional<int> candidate_cap;
    std::vector<double> seed_scale_ladder;  // empty = library default

    void validate() const;
    static ExperimentConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

struct MetricsRow {
    int iteration = 0;
    VectorXd theta;
    double optimal_cost = 0.0;       // J*
    double closed_loop_cost = 0.0;   // J^j (nominal)
    double difference = 0.0;         // J^j - J*
    double true_cost = 0.0;
    int qp_solves = 0;
    int qp_infeasible_candidates = 0;
    int warm_plan_steps = 0;
};

struct ShiftedCostTable {
    int iteration = 0;  // j
    std::vector<int> source_iteration;
    std::vector<double> shifted_cost;  // J_{0|0}^{i,j}
    std::vector<bool> feasible;
    double closed_loop_cost = 0.0;
};

struct MetricsReport {
    std::vector<MetricsRow> rows;
    std::vector<ShiftedCostTable> shifted;
};

/// Scenario-level machinery built once per run.
struct RunArtifacts {
    ScenarioSpec scenario;
    FeedbackGainSchedule gains;
    RpiSet rpi;
    TightenedConstraintSchedule tightened;
    SeedResult seed;
};

struct RunResult {
    MetricsReport metrics;
    std::vector<IterationResult> iterations;  // j = 1..J
    RunArtifacts artifacts;
    HistoryStore history;
    std::string run_dir;
};

/// Gains, invariant set, tightened constraints and the certified seed;
/// throws with full context when the scenario admits none (load checks
/// included: every stage polytope must be nonempty).
RunArtifacts build_artifacts(const ScenarioSpec& scenario,
                             const std::vector<double>& seed_ladder = {});

/// Full batch run: builds artifacts, then for j = 1..J samples parameters,
/// builds the safe set, runs the closed loop and the full-horizon oracle,
/// and persists metrics, trajectories and the manifest under
/// config.output_dir. Byte-identical outputs for identical configs.
RunResult run_experiment(const ExperimentConfig& config);

/// Renders figure-shaped files (costs.csv, shifted_costs_<j>.csv,
/// trajectory_<j>.csv, summary.json) from a persisted run directory.
void emit_report(const std::string& run_dir, const std::string& format);

/// Re-executes the invariant suites on persisted outputs: manifest digests,
/// metric-column identities, dynamics consistency, constraint satisfaction
/// and the Theorem-2 rowwise bound. Returns an empty list when everything
/// holds, else one message per failure.
std::vector<std::string> verify_run(const std::string& run_dir);

std::string serialize_tube_artifacts(const RunArtifacts& artifacts);

}  // namespace plmpc
