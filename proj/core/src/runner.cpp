#include "plmpc/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <stdexcept>

#include "plmpc/csv.hpp"
#include <json.hpp>

namespace plmpc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string iter_tag(int j) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", j);
    return buf;
}

json vector_to_json(const VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

VectorXd vector_from_json(const json& a) {
    VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
    return v;
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Stream tags for per-iteration randomness; independent per purpose so
/// toggling one feature never shifts another feature's draws.
enum StreamTag : std::uint64_t { kThetaStream = 1, kResidualStream = 2, kOffsetStream = 3,
                                 kDeviationStream = 4 };

std::string metrics_csv_text(const MetricsReport& report) {
    CsvWriter csv;
    if (report.rows.empty()) return csv.str();
    std::vector<std::string> header{"iteration"};
    for (int i = 0; i < report.rows[0].theta.size(); ++i)
        header.push_back("theta_" + std::to_string(i));
    for (const char* c : {"J_opt", "J_lmpc", "difference", "true_cost", "qp_solves",
                          "qp_infeasible", "warm_plan_steps"})
        header.push_back(c);
    csv.row(header);
    for (const auto& row : report.rows) {
        csv.begin_row();
        csv.cell(row.iteration);
        for (int i = 0; i < row.theta.size(); ++i) csv.cell(row.theta[i]);
        csv.cell(row.optimal_cost);
        csv.cell(row.closed_loop_cost);
        csv.cell(row.difference);
        csv.cell(row.true_cost);
        csv.cell(row.qp_solves);
        csv.cell(row.qp_infeasible_candidates);
        csv.cell(row.warm_plan_steps);
        csv.end_row();
    }
    return csv.str();
}

std::string shifted_csv_text(const ShiftedCostTable& table) {
    CsvWriter csv;
    csv.row({"source_iteration", "shifted_cost", "feasible", "closed_loop_cost"});
    for (std::size_t r = 0; r < table.source_iteration.size(); ++r) {
        csv.begin_row();
        csv.cell(table.source_iteration[r]);
        csv.cell(table.shifted_cost[r]);
        csv.cell(table.feasible[r] ? 1 : 0);
        csv.cell(table.closed_loop_cost);
        csv.end_row();
    }
    return csv.str();
}

json safe_set_summary(const SafeSet& safe_set, bool full) {
    json levels = json::array();
    for (std::size_t k = 0; k < safe_set.levels.size(); ++k) {
        const auto& level = safe_set.levels[k];
        json entry;
        entry["level"] = k;
        entry["count"] = level.size();
        if (!level.empty()) {
            entry["min_Q"] = level.front().cost_to_go;  // sorted by cost
            entry["max_Q"] = level.back().cost_to_go;
        }
        if (full) {
            json items = json::array();
            for (const auto& e : level)
                items.push_back({{"state", vector_to_json(e.state)},
                                 {"cost_to_go", e.cost_to_go},
                                 {"source_iteration", e.source_iteration},
                                 {"shift_start", e.shift_start}});
            entry["entries"] = items;
        }
        levels.push_back(entry);
    }
    return levels;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (scenario.empty() && inline_scenario_json.empty())
        throw std::invalid_argument("config: scenario name or inline scenario missing");
    if (iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
    if (!seed_set)
        throw std::invalid_argument("config: master seed required (no wall-clock default)");
    if (output_dir.empty()) throw std::invalid_argument("config: output_dir missing");
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    const json doc = json::parse(text);
    ExperimentConfig cfg;
    cfg.scenario = doc.value("scenario", "");
    if (doc.contains("inline_scenario")) cfg.inline_scenario_json = doc["inline_scenario"].dump();
    cfg.iterations = doc.value("iterations", 0);
    if (doc.contains("seed")) {
        cfg.master_seed = doc["seed"].get<std::uint64_t>();
        cfg.seed_set = true;
    }
    cfg.output_dir = doc.value("output_dir", "");
    if (doc.contains("toggles")) {
        const auto& t = doc["toggles"];
        cfg.record_shifted_costs = t.value("record_shifted_costs", true);
        cfg.dump_safe_sets = t.value("dump_safe_sets", false);
        cfg.dump_safe_sets_full = t.value("dump_safe_sets_full", false);
        cfg.sample_full_theta_box = t.value("sample_full_theta_box", false);
        cfg.extensions_enabled = t.value("extensions", false);
    }
    if (doc.contains("extensions")) {
        const auto& e = doc["extensions"];
        if (e.contains("initial_offset_lo")) cfg.initial_offset_lo = vector_from_json(e["initial_offset_lo"]);
        if (e.contains("initial_offset_hi")) cfg.initial_offset_hi = vector_from_json(e["initial_offset_hi"]);
        cfg.dyn_dev_scale_A = e.value("dyn_dev_scale_A", 0.0);
        cfg.dyn_dev_scale_B = e.value("dyn_dev_scale_B", 0.0);
    }
    if (doc.contains("overrides")) {
        const auto& o = doc["overrides"];
        if (o.contains("horizon")) cfg.horizon_override = o["horizon"].get<int>();
        if (o.contains("candidate_cap")) cfg.candidate_cap = o["candidate_cap"].get<int>();
        if (o.contains("seed_scale_ladder"))
            cfg.seed_scale_ladder = o["seed_scale_ladder"].get<std::vector<double>>();
    }
    return cfg;
}

std::string ExperimentConfig::to_json_text() const {
    json doc;
    doc["scenario"] = scenario;
    if (!inline_scenario_json.empty()) doc["inline_scenario"] = json::parse(inline_scenario_json);
    doc["iterations"] = iterations;
    doc["seed"] = master_seed;
    doc["output_dir"] = output_dir;
    doc["toggles"] = {{"record_shifted_costs", record_shifted_costs},
                      {"dump_safe_sets", dump_safe_sets},
                      {"dump_safe_sets_full", dump_safe_sets_full},
                      {"sample_full_theta_box", sample_full_theta_box},
                      {"extensions", extensions_enabled}};
    if (extensions_enabled) {
        json e;
        e["initial_offset_lo"] = vector_to_json(initial_offset_lo);
        e["initial_offset_hi"] = vector_to_json(initial_offset_hi);
        e["dyn_dev_scale_A"] = dyn_dev_scale_A;
        e["dyn_dev_scale_B"] = dyn_dev_scale_B;
        doc["extensions"] = e;
    }
    json o;
    if (horizon_override) o["horizon"] = *horizon_override;
    if (candidate_cap) o["candidate_cap"] = *candidate_cap;
    if (!seed_scale_ladder.empty()) o["seed_scale_ladder"] = seed_scale_ladder;
    if (!o.empty()) doc["overrides"] = o;
    return doc.dump(2) + "\n";
}

RunArtifacts build_artifacts(const ScenarioSpec& scenario, const std::vector<double>& seed_ladder) {
    RunArtifacts art;
    art.scenario = scenario;
    art.scenario.validate();
    const auto& model = art.scenario.model;
    const int T = model.period;

    // load check: every stage polytope nonempty
    for (int t = 0; t <= T; ++t) {
        const auto& F = scenario.constraints.F[t];
        const auto& G = scenario.constraints.G[t];
        const int n = static_cast<int>(F.cols()), m = static_cast<int>(G.cols());
        std::vector<Eigen::Triplet<double>> trip;
        for (int i = 0; i < F.rows(); ++i) {
            for (int jj = 0; jj < n; ++jj)
                if (F(i, jj) != 0.0) trip.emplace_back(i, jj, F(i, jj));
            for (int c = 0; c < m; ++c)
                if (G(i, c) != 0.0) trip.emplace_back(i, n + c, G(i, c));
        }
        SparseMat A(static_cast<int>(F.rows()), n + m);
        A.setFromTriplets(trip.begin(), trip.end());
        if (!solve_feasibility(SparseMat(0, n + m), VectorXd(), A, scenario.constraints.f[t], n + m)
                 .feasible)
            throw std::runtime_error("scenario " + scenario.name + ": stage polytope empty at t=" +
                                     std::to_string(t));
    }

    art.gains = lqr_gains(model, scenario.Q_lqr, scenario.R_lqr);

    const bool zero_residual = scenario.basis.residual_lo.cwiseAbs().maxCoeff() == 0.0 &&
                               scenario.basis.residual_hi.cwiseAbs().maxCoeff() == 0.0;
    bool lti = true;
    for (int t = 1; t < T; ++t)
        if (model.A[t] != model.A[0] || model.B[t] != model.B[0] ||
            art.gains.K[t] != art.gains.K[0]) {
            lti = false;
            break;
        }
    std::vector<MatrixXd> phi;
    if (lti || zero_residual) {
        phi = {model.A[0] + model.B[0] * art.gains.K[0]};
    } else {
        for (int t = 0; t < T; ++t)
            if (model.C[t] != model.C[0])
                throw std::runtime_error("scenario " + scenario.name +
                                         ": time-varying C with nonzero residual not supported");
        phi.resize(T);
        for (int t = 0; t < T; ++t) phi[t] = model.A[t] + model.B[t] * art.gains.K[t];
    }
    art.rpi = rpi_outer_approx(phi, model.C[0], scenario.basis.residual_lo,
                               scenario.basis.residual_hi, scenario.rpi_alpha_target,
                               scenario.rpi_horizon_cap);
    art.tightened = tighten_constraints(scenario.constraints, art.gains, art.rpi);
    if (seed_ladder.empty())
        art.seed = build_seed_trajectory(model, art.tightened, scenario.costs, scenario.basis,
                                         scenario.theta_domain, art.gains);
    else
        art.seed = build_seed_trajectory(model, art.tightened, scenario.costs, scenario.basis,
                                         scenario.theta_domain, art.gains, {}, seed_ladder);
    return art;
}

std::string serialize_tube_artifacts(const RunArtifacts& art) {
    json doc;
    doc["scenario"] = art.scenario.name;
    json gains = json::array();
    for (const auto& K : art.gains.K) {
        json rows = json::array();
        for (int i = 0; i < K.rows(); ++i)
            rows.push_back(vector_to_json(K.row(i).transpose()));
        gains.push_back(rows);
    }
    doc["K"] = gains;
    doc["monodromy_spectral_radius"] = art.gains.monodromy_spectral_radius;
    doc["rpi"] = {{"alpha", art.rpi.alpha},
                  {"horizon_s", art.rpi.horizon_s},
                  {"scale", art.rpi.scale},
                  {"phases", art.rpi.phase_count()},
                  {"residual_lo", vector_to_json(art.rpi.residual_lo)},
                  {"residual_hi", vector_to_json(art.rpi.residual_hi)}};
    json gens = json::array();
    for (const auto& phase : art.rpi.generators) {
        json pg = json::array();
        for (const auto& M : phase) {
            json rows = json::array();
            for (int i = 0; i < M.rows(); ++i) rows.push_back(vector_to_json(M.row(i).transpose()));
            pg.push_back(rows);
        }
        gens.push_back(pg);
    }
    doc["rpi"]["generators"] = gens;
    json fbar = json::array();
    for (const auto& f : art.tightened.schedule.f) fbar.push_back(vector_to_json(f));
    doc["tightened_rhs"] = fbar;
    doc["seed"] = {{"certified_scale", art.seed.certified_scale},
                   {"theta0", vector_to_json(art.seed.theta0.coefficients)},
                   {"certified_lo", vector_to_json(art.seed.certified_domain.lo)},
                   {"certified_hi", vector_to_json(art.seed.certified_domain.hi)},
                   {"cost", art.seed.record.trajectory.cumulative_cost}};
    return doc.dump(2) + "\n";
}

RunResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    ScenarioSpec scenario = config.inline_scenario_json.empty()
                                ? scenario_by_name(config.scenario)
                                : scenario_from_json_text(config.inline_scenario_json);
    if (config.horizon_override) scenario.lmpc.horizon = *config.horizon_override;
    if (config.candidate_cap) scenario.lmpc.terminal_candidate_cap = *config.candidate_cap;

    const fs::path out_dir(config.output_dir);
    fs::create_directories(out_dir);
    fs::create_directories(out_dir / "trajectories");
    if (config.record_shifted_costs) fs::create_directories(out_dir / "shifted");
    if (config.dump_safe_sets) fs::create_directories(out_dir / "safe_sets");

    // provisional manifest: flags the run incomplete until the end
    json manifest;
    manifest["complete"] = false;
    manifest["config"] = json::parse(config.to_json_text());
    write_file((out_dir / "manifest.json").string(), manifest.dump(2) + "\n");

    RunResult run;
    run.run_dir = out_dir.string();
    run.artifacts = build_artifacts(scenario, config.seed_scale_ladder);
    const auto& art = run.artifacts;
    const auto& model = art.scenario.model;
    const int T = model.period;
    const int N = art.scenario.lmpc.horizon;
    const int n = model.state_dim();

    std::map<std::string, std::string> files;  // relative path -> contents
    files["tube_artifacts.json"] = serialize_tube_artifacts(art);

    run.history.append(art.seed.record, art.tightened);
    files["trajectories/iter_000_nominal.csv"] = trajectory_csv(art.seed.record.trajectory);
    files["trajectories/iter_000.json"] = trajectory_json(art.seed.record.trajectory) + "\n";

    // theta is drawn from the box on which the seed guarantee was certified;
    // the manifest records that box
    const ThetaDomain& sampling_domain = config.sample_full_theta_box
                                             ? art.scenario.theta_domain
                                             : art.seed.certified_domain;
    for (int j = 1; j <= config.iterations; ++j) {
        const ThetaSample theta =
            sample_theta(sampling_domain, derive_seed(config.master_seed, {kThetaStream,
                                                      static_cast<std::uint64_t>(j)}));
        const std::vector<VectorXd> w_full = generate_realization(
            art.scenario.basis, theta,
            derive_seed(config.master_seed, {kResidualStream, static_cast<std::uint64_t>(j)}));

        ShiftTarget target;
        target.theta = theta;
        VectorXd z0 = model.x_s;
        if (config.extensions_enabled) {
            if (config.initial_offset_lo.size() == n && config.initial_offset_hi.size() == n) {
                Rng rng(derive_seed(config.master_seed, {kOffsetStream,
                                                         static_cast<std::uint64_t>(j)}));
                VectorXd ws(n);
                for (int i = 0; i < n; ++i)
                    ws[i] = rng.uniform(config.initial_offset_lo[i], config.initial_offset_hi[i]);
                target.initial_offset = ws;
                z0 = model.x_s + ws;
            }
            if (config.dyn_dev_scale_A > 0.0 || config.dyn_dev_scale_B > 0.0) {
                Rng rng(derive_seed(config.master_seed, {kDeviationStream,
                                                         static_cast<std::uint64_t>(j)}));
                const double dA = rng.uniform(-config.dyn_dev_scale_A, config.dyn_dev_scale_A);
                const double dB = rng.uniform(-config.dyn_dev_scale_B, config.dyn_dev_scale_B);
                target.dyn_dev_A.resize(T + 1);
                target.dyn_dev_B.resize(T + 1);
                for (int t = 0; t <= T; ++t) {
                    target.dyn_dev_A[t] = dA * model.A[t];
                    target.dyn_dev_B[t] = dB * model.B[t];
                }
                verify_deviation_stability(model, art.gains, target.dyn_dev_A, target.dyn_dev_B);
            }
        }

        SafeSetOptions ss_options;
        ss_options.match_tolerance = art.scenario.lmpc.state_match_tol;
        const bool certified = !config.extensions_enabled &&
                               art.seed.certified_domain.contains(theta.coefficients, 1e-12);
        ss_options.required_level_from = certified ? 0 : N;
        const SafeSet safe_set =
            build_safe_set(run.history, art.scenario.basis, target, art.gains, model, art.tightened,
                           art.scenario.costs, ss_options);

        if (config.dump_safe_sets)
            files["safe_sets/safe_set_" + iter_tag(j) + ".json"] =
                safe_set_summary(safe_set, config.dump_safe_sets_full).dump(2) + "\n";

        // deviated dynamics enter the controller as this iteration's model
        PeriodicLtvModel iter_model = model;
        if (!target.dyn_dev_A.empty())
            for (int t = 0; t <= T; ++t) iter_model.A[t] = model.A[t] + target.dyn_dev_A[t];
        if (!target.dyn_dev_B.empty())
            for (int t = 0; t <= T; ++t) iter_model.B[t] = model.B[t] + target.dyn_dev_B[t];

        IterationResult result = closed_loop_iteration(
            iter_model, art.scenario.constraints, art.tightened, art.scenario.costs, art.gains,
            art.scenario.basis, theta, w_full, safe_set, art.scenario.lmpc, j,
            config.extensions_enabled ? &z0 : nullptr);

        std::vector<VectorXd> w_corr(T + 1);
        for (int t = 0; t <= T; ++t) w_corr[t] = evaluate_correlated(art.scenario.basis, theta, t);
        const FullHorizonResult optimal =
            solve_full_horizon(iter_model, art.tightened, art.scenario.costs, w_corr, {},
                               config.extensions_enabled ? &z0 : nullptr);

        if (config.record_shifted_costs) {
            ShiftedCostTable table;
            table.iteration = j;
            table.closed_loop_cost = result.nominal_cost;
            for (const auto& record : run.history.records) {
                const ShiftResult shift =
                    shift_trajectory(record, art.scenario.basis, target, 0, art.gains, iter_model,
                                     art.tightened, art.scenario.costs);
                table.source_iteration.push_back(record.trajectory.iteration_index);
                table.shifted_cost.push_back(shift.tail_costs[0]);
                table.feasible.push_back(shift.feasible);
            }
            files["shifted/shifted_" + iter_tag(j) + ".csv"] = shifted_csv_text(table);
            run.metrics.shifted.push_back(std::move(table));
        }

        MetricsRow row;
        row.iteration = j;
        row.theta = theta.coefficients;
        row.optimal_cost = optimal.objective;
        row.closed_loop_cost = result.nominal_cost;
        row.difference = result.nominal_cost - optimal.objective;
        row.true_cost = result.true_cost;
        row.qp_solves = result.qp_solves;
        row.qp_infeasible_candidates = result.qp_infeasible_candidates;
        row.warm_plan_steps = result.warm_plan_steps;
        run.metrics.rows.push_back(row);

        files["trajectories/iter_" + iter_tag(j) + "_nominal.csv"] =
            trajectory_csv(result.nominal);
        files["trajectories/iter_" + iter_tag(j) + "_true.csv"] = trajectory_csv(result.true_run);
        files["trajectories/iter_" + iter_tag(j) + ".json"] = trajectory_json(result.nominal) + "\n";

        HistoryRecord record;
        record.trajectory = result.nominal;
        record.initial_offset = target.initial_offset;
        record.dyn_dev_A = target.dyn_dev_A;
        record.dyn_dev_B = target.dyn_dev_B;
        run.history.append(std::move(record), art.tightened);
        run.iterations.push_back(std::move(result));
    }

    files["metrics.csv"] = metrics_csv_text(run.metrics);

    json digests;
    for (const auto& [rel, contents] : files) {
        write_file((out_dir / rel).string(), contents);
        digests[rel] = hex64(fnv1a64(contents));
    }
    manifest["complete"] = true;
    manifest["scenario"] = art.scenario.name;
    manifest["iterations_completed"] = config.iterations;
    manifest["certified_scale"] = art.seed.certified_scale;
    manifest["certified_domain"] = {{"lo", vector_to_json(art.seed.certified_domain.lo)},
                                    {"hi", vector_to_json(art.seed.certified_domain.hi)}};
    manifest["rpi"] = {{"alpha", art.rpi.alpha},
                       {"horizon_s", art.rpi.horizon_s},
                       {"phases", art.rpi.phase_count()}};
    manifest["digests"] = digests;
    write_file((out_dir / "manifest.json").string(), manifest.dump(2) + "\n");

    return run;
}

void emit_report(const std::string& run_dir, const std::string& format) {
    if (format != "csv" && format != "json")
        throw std::invalid_argument("emit_report: format must be csv or json");
    const fs::path dir(run_dir);
    const json manifest = json::parse(read_file((dir / "manifest.json").string()));
    if (!manifest.value("complete", false))
        throw std::runtime_error("emit_report: run manifest is flagged incomplete");
    const int J = manifest["iterations_completed"].get<int>();
    const ExperimentConfig report_cfg =
        ExperimentConfig::from_json_text(manifest["config"].dump());
    const ScenarioSpec scenario = report_cfg.inline_scenario_json.empty()
                                      ? scenario_by_name(manifest["scenario"].get<std::string>())
                                      : scenario_from_json_text(report_cfg.inline_scenario_json);
    const bool have_shifted =
        manifest["config"]["toggles"].value("record_shifted_costs", true);

    const auto metrics = parse_csv(read_file((dir / "metrics.csv").string()));
    json summary;
    summary["scenario"] = scenario.name;
    summary["iterations"] = J;

    // costs.csv: iteration, J_opt, J_lmpc, difference
    {
        const auto& header = metrics[0];
        int col_opt = -1, col_lmpc = -1, col_diff = -1;
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] == "J_opt") col_opt = static_cast<int>(c);
            if (header[c] == "J_lmpc") col_lmpc = static_cast<int>(c);
            if (header[c] == "difference") col_diff = static_cast<int>(c);
        }
        CsvWriter csv;
        csv.row({"iteration", "J_opt", "J_lmpc", "difference"});
        double last_diff = 0.0;
        for (std::size_t r = 1; r < metrics.size(); ++r) {
            csv.row({metrics[r][0], metrics[r][col_opt], metrics[r][col_lmpc],
                     metrics[r][col_diff]});
            last_diff = std::stod(metrics[r][col_diff]);
        }
        if (format == "csv") write_file((dir / "costs.csv").string(), csv.str());
        summary["final_difference"] = last_diff;
    }

    // shifted_costs_<j>.csv: feasible rows only, figure shape
    if (have_shifted) {
        for (int j = 1; j <= J; ++j) {
            const auto table =
                parse_csv(read_file((dir / "shifted" / ("shifted_" + iter_tag(j) + ".csv")).string()));
            CsvWriter csv;
            csv.row({"source_iteration", "shifted_cost", "closed_loop_cost"});
            for (std::size_t r = 1; r < table.size(); ++r)
                if (table[r][2] == "1") csv.row({table[r][0], table[r][1], table[r][3]});
            if (format == "csv")
                write_file((dir / ("shifted_costs_" + iter_tag(j) + ".csv")).string(), csv.str());
        }
    } else {
        summary["shifted_costs"] = "omitted (record_shifted_costs disabled)";
    }

    // trajectory_<j>.csv: t, x1, reference, bounds (plus remaining states)
    for (int j = 1; j <= J; ++j) {
        const auto traj = parse_csv(
            read_file((dir / "trajectories" / ("iter_" + iter_tag(j) + "_true.csv")).string()));
        CsvWriter csv;
        std::vector<std::string> header{"t", "x1", "reference", "lower_bound", "upper_bound"};
        const int n = scenario.model.state_dim();
        for (int i = 1; i < n; ++i) header.push_back("x" + std::to_string(i + 1));
        csv.row(header);
        for (std::size_t r = 1; r < traj.size(); ++r) {
            const int t = std::stoi(traj[r][0]);
            csv.begin_row();
            csv.cell(traj[r][0]);
            csv.cell(traj[r][1]);
            csv.cell(scenario.costs.stages[t].state_ref[0]);
            // bounds on x1 from the raw constraint rows (+x1 <= f[0], -x1 <= f[n])
            csv.cell(-scenario.constraints.f[t][n]);
            csv.cell(scenario.constraints.f[t][0]);
            for (int i = 1; i < n; ++i) csv.cell(traj[r][1 + i]);
            csv.end_row();
        }
        if (format == "csv")
            write_file((dir / ("trajectory_" + iter_tag(j) + ".csv")).string(), csv.str());
    }

    if (format == "json") {
        json doc;
        doc["summary"] = summary;
        doc["metrics"] = metrics;  // raw table, rows of strings
        write_file((dir / "report.json").string(), doc.dump(2) + "\n");
    } else {
        write_file((dir / "summary.json").string(), summary.dump(2) + "\n");
    }
}

std::vector<std::string> verify_run(const std::string& run_dir) {
    std::vector<std::string> failures;
    const fs::path dir(run_dir);
    json manifest;
    try {
        manifest = json::parse(read_file((dir / "manifest.json").string()));
    } catch (const std::exception& e) {
        return {std::string("manifest unreadable: ") + e.what()};
    }
    if (!manifest.value("complete", false)) failures.push_back("manifest flags run incomplete");

    // digest check
    if (manifest.contains("digests"))
        for (const auto& [rel, digest] : manifest["digests"].items()) {
            try {
                const std::string contents = read_file((dir / rel).string());
                if (hex64(fnv1a64(contents)) != digest.get<std::string>())
                    failures.push_back("digest mismatch: " + rel);
            } catch (const std::exception&) {
                failures.push_back("missing file: " + rel);
            }
        }
    if (!failures.empty()) return failures;

    const ExperimentConfig cfg =
        ExperimentConfig::from_json_text(manifest["config"].dump());
    const ScenarioSpec scenario = cfg.inline_scenario_json.empty()
                                      ? scenario_by_name(manifest["scenario"].get<std::string>())
                                      : scenario_from_json_text(cfg.inline_scenario_json);
    const int J = manifest["iterations_completed"].get<int>();
    RunArtifacts art;
    try {
        art = build_artifacts(scenario, cfg.seed_scale_ladder);
    } catch (const std::exception& e) {
        return {std::string("artifact rebuild failed: ") + e.what()};
    }
    const auto& model = art.scenario.model;
    const int T = model.period;
    const int n = model.state_dim();
    const int m = model.input_dim();
    const int d = model.disturbance_dim();

    const auto metrics = parse_csv(read_file((dir / "metrics.csv").string()));
    if (static_cast<int>(metrics.size()) != J + 1)
        failures.push_back("metrics.csv row count != J");
    int col_opt = -1, col_lmpc = -1, col_diff = -1;
    for (std::size_t c = 0; c < metrics[0].size(); ++c) {
        if (metrics[0][c] == "J_opt") col_opt = static_cast<int>(c);
        if (metrics[0][c] == "J_lmpc") col_lmpc = static_cast<int>(c);
        if (metrics[0][c] == "difference") col_diff = static_cast<int>(c);
    }
    for (std::size_t r = 1; r < metrics.size(); ++r) {
        const double opt = std::stod(metrics[r][col_opt]);
        const double lmpc = std::stod(metrics[r][col_lmpc]);
        const double diff = std::stod(metrics[r][col_diff]);
        if (std::abs(diff - (lmpc - opt)) > 1e-12 * (1.0 + std::abs(lmpc) + std::abs(opt)))
            failures.push_back("metrics row " + metrics[r][0] + ": difference column inconsistent");
    }

    auto parse_traj = [&](const std::string& rel) {
        const auto rows = parse_csv(read_file((dir / rel).string()));
        Trajectory traj;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            VectorXd x(n), u(m), w(d);
            int c = 1;
            for (int i = 0; i < n; ++i) x[i] = std::stod(rows[r][c++]);
            for (int i = 0; i < m; ++i) u[i] = std::stod(rows[r][c++]);
            for (int i = 0; i < d; ++i) w[i] = std::stod(rows[r][c++]);
            traj.states.push_back(x);
            traj.inputs.push_back(u);
            traj.disturbances.push_back(w);
            traj.stage_costs.push_back(std::stod(rows[r][c]));
        }
        return traj;
    };

    for (int j = 1; j <= J; ++j) {
        const Trajectory nominal =
            parse_traj("trajectories/iter_" + iter_tag(j) + "_nominal.csv");
        const Trajectory true_run = parse_traj("trajectories/iter_" + iter_tag(j) + "_true.csv");
        if (static_cast<int>(nominal.states.size()) != T + 1) {
            failures.push_back("iteration " + std::to_string(j) + ": trajectory length");
            continue;
        }
        double cumulative = 0.0;
        for (int t = 0; t <= T; ++t) {
            const double cost =
                stage_cost(scenario.costs, t, nominal.states[t], nominal.inputs[t]);
            if (std::abs(cost - nominal.stage_costs[t]) > 1e-9 * (1.0 + cost))
                failures.push_back("iteration " + std::to_string(j) + ": stage cost mismatch at t=" +
                                   std::to_string(t));
            cumulative += nominal.stage_costs[t];
            if (!check_constraints(art.tightened.schedule, t, nominal.states[t], nominal.inputs[t],
                                   1e-7)
                     .satisfied)
                failures.push_back("iteration " + std::to_string(j) +
                                   ": nominal violates tightened constraints at t=" +
                                   std::to_string(t));
            if (!check_constraints(scenario.constraints, t, true_run.states[t], true_run.inputs[t],
                                   1e-6)
                     .satisfied)
                failures.push_back("iteration " + std::to_string(j) +
                                   ": true state violates constraints at t=" + std::to_string(t));
            if (t < T && !cfg.extensions_enabled) {
                const VectorXd next = step(model, t, nominal.states[t], nominal.inputs[t],
                                           nominal.disturbances[t]);
                if ((next - nominal.states[t + 1]).cwiseAbs().maxCoeff() > 1e-9)
                    failures.push_back("iteration " + std::to_string(j) +
                                       ": nominal dynamics inconsistent at t=" + std::to_string(t));
            }
        }
        const double lmpc_cost = std::stod(metrics[j][col_lmpc]);
        if (std::abs(cumulative - lmpc_cost) > 1e-9 * (1.0 + std::abs(cumulative)))
            failures.push_back("iteration " + std::to_string(j) + ": cumulative cost mismatch");
    }

    if (cfg.record_shifted_costs)
        for (int j = 1; j <= J; ++j) {
            const auto table = parse_csv(
                read_file((dir / "shifted" / ("shifted_" + iter_tag(j) + ".csv")).string()));
            for (std::size_t r = 1; r < table.size(); ++r) {
                if (table[r][2] != "1") continue;
                const double shifted = std::stod(table[r][1]);
                const double closed = std::stod(table[r][3]);
                if (closed > shifted + 1e-6)
                    failures.push_back("iteration " + std::to_string(j) +
                                       ": closed-loop cost exceeds shifted cost from source " +
                                       table[r][0]);
            }
        }

    return failures;
}

}  // namespace plmpc
