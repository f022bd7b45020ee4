#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "plmpc/csv.hpp"
#include "plmpc/runner.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& out_override,
                std::uint64_t seed_override, bool seed_given, int iterations_override,
                const std::string& scenario_override) {
    plmpc::ExperimentConfig config;
    if (!config_path.empty())
        config = plmpc::ExperimentConfig::from_json_text(plmpc::read_file(config_path));
    if (!out_override.empty()) config.output_dir = out_override;
    if (seed_given) {
        config.master_seed = seed_override;
        config.seed_set = true;
    }
    if (iterations_override > 0) config.iterations = iterations_override;
    if (!scenario_override.empty()) config.scenario = scenario_override;

    const plmpc::RunResult result = plmpc::run_experiment(config);
    std::printf("run complete: %s (%d iterations)\n", result.run_dir.c_str(),
                static_cast<int>(result.metrics.rows.size()));
    for (const auto& row : result.metrics.rows)
        std::printf("  j=%2d  J*=%.6f  J_lmpc=%.6f  diff=%.6f\n", row.iteration, row.optimal_cost,
                    row.closed_loop_cost, row.difference);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust learning MPC for periodic systems with correlated disturbance"};
    app.require_subcommand(1);

    std::string config_path, out_dir, scenario, run_dir, format = "csv";
    std::uint64_t seed = 0;
    bool seed_given = false;
    int iterations = 0;

    auto* run = app.add_subcommand("run", "Execute a batch learning experiment");
    run->add_option("--config", config_path, "Experiment config file (JSON)");
    run->add_option("--out", out_dir, "Output directory (overrides config)");
    auto* seed_opt = run->add_option("--seed", seed, "Master seed (overrides config)");
    run->add_option("--iterations", iterations, "Iteration count J (overrides config)");
    run->add_option("--scenario", scenario, "spring-mass|building|tiny (overrides config)");

    auto* report = app.add_subcommand("report", "Render figure-shaped data files from a run");
    report->add_option("--run", run_dir, "Run directory")->required();
    report->add_option("--format", format, "csv|json");

    auto* verify = app.add_subcommand("verify", "Re-check invariants on persisted run outputs");
    verify->add_option("--run", run_dir, "Run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) {
            seed_given = seed_opt->count() > 0;
            return run_command(config_path, out_dir, seed, seed_given, iterations, scenario);
        }
        if (report->parsed()) {
            plmpc::emit_report(run_dir, format);
            std::printf("report written under %s\n", run_dir.c_str());
            return 0;
        }
        if (verify->parsed()) {
            const auto failures = plmpc::verify_run(run_dir);
            if (failures.empty()) {
                std::printf("verify: all invariants hold\n");
                return 0;
            }
            for (const auto& f : failures) std::fprintf(stderr, "verify: %s\n", f.c_str());
            return 2;
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
