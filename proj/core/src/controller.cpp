#include "plmpc/controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace plmpc {

namespace {

/// Index bookkeeping for horizon QPs. Variables: states z_{t0..t0+steps},
/// inputs v_{t0..t0+steps-1} (plus v_{t0+steps} when the final stage carries
/// cost and constraints, as in the full-horizon problem), then one auxiliary
/// variable per L1-priced input component per stage.
struct HorizonQp {
    QpProblem problem;
    int t0 = 0;
    int steps = 0;
    bool final_stage = false;
    int n = 0, m = 0;
    int input_count = 0;

    int z_var(int k_rel) const { return k_rel * n; }
    int v_var(int k_rel) const { return (steps + 1) * n + k_rel * m; }
};

HorizonQp build_horizon_qp(const PeriodicLtvModel& model,
                           const TightenedConstraintSchedule& tightened,
                           const StageCostSchedule& costs, const std::vector<VectorXd>& w_corr,
                           int t0, int steps, bool final_stage, const VectorXd& z_init,
                           const VectorXd* z_terminal, double terminal_constant) {
    HorizonQp h;
    h.t0 = t0;
    h.steps = steps;
    h.final_stage = final_stage;
    h.n = model.state_dim();
    h.m = model.input_dim();
    h.input_count = steps + (final_stage ? 1 : 0);
    const int n = h.n, m = h.m;

    // auxiliary variables for L1 input terms
    int num_vars = (steps + 1) * n + h.input_count * m;
    std::vector<std::vector<int>> aux(h.input_count, std::vector<int>(m, -1));
    for (int k = 0; k < h.input_count; ++k) {
        const auto& stage = costs.stages[t0 + k];
        for (int c = 0; c < m; ++c)
            if (stage.l1_price[c] > 0.0) aux[k][c] = num_vars++;
    }

    QpProblem& qp = h.problem;
    qp.num_vars = num_vars;
    qp.q = VectorXd::Zero(num_vars);
    qp.constant = terminal_constant;

    std::vector<Eigen::Triplet<double>> pt;
    for (int k = 0; k < h.input_count; ++k) {
        const auto& stage = costs.stages[t0 + k];
        for (int i = 0; i < n; ++i) {
            if (stage.state_weight[i] == 0.0) continue;
            pt.emplace_back(h.z_var(k) + i, h.z_var(k) + i, 2.0 * stage.state_weight[i]);
            qp.q[h.z_var(k) + i] += -2.0 * stage.state_weight[i] * stage.state_ref[i];
            qp.constant += stage.state_weight[i] * stage.state_ref[i] * stage.state_ref[i];
        }
        for (int c = 0; c < m; ++c) {
            if (stage.input_weight[c] > 0.0)
                pt.emplace_back(h.v_var(k) + c, h.v_var(k) + c, 2.0 * stage.input_weight[c]);
            if (aux[k][c] >= 0) qp.q[aux[k][c]] += 1.0;
        }
    }
    qp.P = SparseMat(num_vars, num_vars);
    qp.P.setFromTriplets(pt.begin(), pt.end());

    // equalities: initial state, dynamics, optional terminal pin
    const int eq_rows = n + steps * n + (z_terminal ? n : 0);
    std::vector<Eigen::Triplet<double>> et;
    qp.d = VectorXd::Zero(eq_rows);
    for (int i = 0; i < n; ++i) {
        et.emplace_back(i, h.z_var(0) + i, 1.0);
        qp.d[i] = z_init[i];
    }
    for (int k = 0; k < steps; ++k) {
        const int row0 = n + k * n;
        const int t = t0 + k;
        for (int i = 0; i < n; ++i) {
            et.emplace_back(row0 + i, h.z_var(k + 1) + i, 1.0);
            for (int jj = 0; jj < n; ++jj)
                if (model.A[t](i, jj) != 0.0)
                    et.emplace_back(row0 + i, h.z_var(k) + jj, -model.A[t](i, jj));
            for (int c = 0; c < m; ++c)
                if (model.B[t](i, c) != 0.0)
                    et.emplace_back(row0 + i, h.v_var(k) + c, -model.B[t](i, c));
        }
        qp.d.segment(row0, n) = model.C[t] * w_corr[t];
    }
    if (z_terminal) {
        const int row0 = n + steps * n;
        for (int i = 0; i < n; ++i) {
            et.emplace_back(row0 + i, h.z_var(steps) + i, 1.0);
            qp.d[row0 + i] = (*z_terminal)[i];
        }
    }
    qp.E = SparseMat(eq_rows, num_vars);
    qp.E.setFromTriplets(et.begin(), et.end());

    // inequalities: stage polytopes plus L1 epigraph rows
    int ineq_rows = 0;
    for (int k = 0; k < h.input_count; ++k) {
        ineq_rows += static_cast<int>(tightened.schedule.f[t0 + k].size());
        for (int c = 0; c < m; ++c)
            if (aux[k][c] >= 0) ineq_rows += 2;
    }
    std::vector<Eigen::Triplet<double>> at;
    qp.b = VectorXd::Zero(ineq_rows);
    int row = 0;
    for (int k = 0; k < h.input_count; ++k) {
        const int t = t0 + k;
        const auto& F = tightened.schedule.F[t];
        const auto& G = tightened.schedule.G[t];
        for (int i = 0; i < F.rows(); ++i) {
            for (int jj = 0; jj < n; ++jj)
                if (F(i, jj) != 0.0) at.emplace_back(row, h.z_var(k) + jj, F(i, jj));
            for (int c = 0; c < m; ++c)
                if (G(i, c) != 0.0) at.emplace_back(row, h.v_var(k) + c, G(i, c));
            qp.b[row] = tightened.schedule.f[t][i];
            ++row;
        }
        const auto& stage = costs.stages[t];
        for (int c = 0; c < m; ++c) {
            if (aux[k][c] < 0) continue;
            at.emplace_back(row, h.v_var(k) + c, stage.l1_price[c]);
            at.emplace_back(row, aux[k][c], -1.0);
            ++row;
            at.emplace_back(row, h.v_var(k) + c, -stage.l1_price[c]);
            at.emplace_back(row, aux[k][c], -1.0);
            ++row;
        }
    }
    qp.A = SparseMat(ineq_rows, num_vars);
    qp.A.setFromTriplets(at.begin(), at.end());
    return h;
}

std::vector<VectorXd> extract_inputs(const HorizonQp& h, const VectorXd& x) {
    std::vector<VectorXd> inputs(h.input_count);
    for (int k = 0; k < h.input_count; ++k) inputs[k] = x.segment(h.v_var(k), h.m);
    return inputs;
}

/// Propagates nominal dynamics from z0 under the given inputs, so plan states
/// satisfy the dynamics exactly rather than up to QP tolerance.
std::vector<VectorXd> propagate(const PeriodicLtvModel& model, const std::vector<VectorXd>& w_corr,
                                int t0, const VectorXd& z0, const std::vector<VectorXd>& inputs,
                                int steps) {
    std::vector<VectorXd> states(steps + 1);
    states[0] = z0;
    for (int k = 0; k < steps; ++k)
        states[k + 1] = step(model, t0 + k, states[k], inputs[k], w_corr[t0 + k]);
    return states;
}

double plan_cost(const StageCostSchedule& costs, int t0, const std::vector<VectorXd>& states,
                 const std::vector<VectorXd>& inputs, int count) {
    double total = 0.0;
    for (int k = 0; k < count; ++k) total += stage_cost(costs, t0 + k, states[k], inputs[k]);
    return total;
}

/// Shifts the previous step's plan one step forward and appends the stored
/// safe-set continuation (the explicit feasible candidate from the recursive
/// feasibility argument). Returns false if the pieces are missing or the
/// resulting plan fails the tightened constraints.
bool make_successor_plan(const PlanRecord& prev, const VectorXd& z_t, const SafeSet& safe_set,
                         const PeriodicLtvModel& model,
                         const TightenedConstraintSchedule& tightened,
                         const StageCostSchedule& costs, const std::vector<VectorXd>& w_corr,
                         const LmpcConfig& config, PlanRecord& out) {
    const int N = config.horizon;
    const int t = prev.t + 1;

    std::vector<VectorXd> inputs(N);
    for (int k = 0; k + 1 < N; ++k) inputs[k] = prev.inputs[k + 1];
    inputs[N - 1] = prev.terminal.input;

    std::vector<VectorXd> states = propagate(model, w_corr, t, z_t, inputs, N);

    // continuation entry: provenance link first; deduplication may have
    // replaced it with an equal-state entry, so fall back to a state match
    const SafeSetEntry* succ = safe_set.successor(prev.t + N, prev.terminal);
    if (!succ || (states[N] - succ->state).cwiseAbs().maxCoeff() > 1e-7) {
        const QueryResult q = query_Q(safe_set, t + N, states[N], 1e-7);
        if (!q.found) return false;
        succ = q.entry;
    }
    // safe-set entries may ride the constraint boundary up to the membership
    // margin; allow that plus propagation noise
    const double margin = 2.0 * config.feasibility_margin;
    for (int k = 0; k < N; ++k) {
        const auto check = check_constraints(tightened.schedule, t + k, states[k], inputs[k],
                                             margin);
        if (!check.satisfied) return false;
    }
    out.t = t;
    out.states = std::move(states);
    out.inputs = std::move(inputs);
    out.terminal = *succ;
    out.objective = plan_cost(costs, t, out.states, out.inputs, N) + succ->cost_to_go;
    return true;
}

}  // namespace

LmpcStepResult lmpc_step(const VectorXd& z_t, int t, const std::vector<VectorXd>& w_corr,
                         const SafeSet& safe_set, const PeriodicLtvModel& model,
                         const TightenedConstraintSchedule& tightened,
                         const StageCostSchedule& costs, const LmpcConfig& config,
                         const PlanRecord* warm_plan) {
    const int T = model.period;
    const int N = config.horizon;
    if (N < 1 || N > T) throw std::invalid_argument("lmpc_step: horizon must satisfy 1 <= N <= T");
    if (t < 0 || t > T - N)
        throw std::invalid_argument("lmpc_step: t must lie in [0, T-N]; beyond that the stored "
                                    "plan is replayed");
    const int level = t + N;
    const auto& entries = safe_set.levels[level];
    if (entries.empty())
        throw std::runtime_error("lmpc_step: safe set level " + std::to_string(level) +
                                 " is empty at t=" + std::to_string(t));

    LmpcStepResult out;
    double incumbent = std::numeric_limits<double>::infinity();
    bool have_best = false;
    int numeric_failures = 0;

    if (warm_plan) {
        incumbent = warm_plan->objective;
        out.plan = *warm_plan;
        out.used_warm_plan = true;
        have_best = true;
    }

    int considered = 0;
    for (std::size_t idx = 0; idx < entries.size(); ++idx) {
        const auto& entry = entries[idx];
        if (config.terminal_candidate_cap > 0 && considered >= config.terminal_candidate_cap) {
            out.candidates_pruned += static_cast<int>(entries.size() - idx);
            break;
        }
        // entries are cost-sorted and stage costs are nonnegative, so once
        // the terminal value alone reaches the incumbent nothing better can
        // follow
        if (entry.cost_to_go >= incumbent) {
            out.candidates_pruned += static_cast<int>(entries.size() - idx);
            break;
        }
        ++considered;
        HorizonQp h = build_horizon_qp(model, tightened, costs, w_corr, t, N, false, z_t,
                                       &entry.state, entry.cost_to_go);
        const QpResult res = solve_qp(h.problem, config.qp);
        ++out.qps_solved;
        if (res.status == QpStatus::Infeasible) {
            ++out.qps_infeasible;
            continue;
        }
        if (res.status == QpStatus::NumericFailure) {
            ++numeric_failures;
            continue;
        }
        std::vector<VectorXd> inputs = extract_inputs(h, res.x);
        std::vector<VectorXd> states = propagate(model, w_corr, t, z_t, inputs, N);
        const double objective = plan_cost(costs, t, states, inputs, N) + entry.cost_to_go;
        if (objective < incumbent) {
            incumbent = objective;
            out.plan.t = t;
            out.plan.states = std::move(states);
            out.plan.inputs = std::move(inputs);
            out.plan.terminal = entry;
            out.plan.objective = objective;
            out.used_warm_plan = false;
            have_best = true;
        }
    }

    if (!have_best) {
        throw std::runtime_error(
            "lmpc_step: recursive feasibility violated at t=" + std::to_string(t) + ": all " +
            std::to_string(out.qps_solved) + " terminal candidates infeasible (" +
            std::to_string(numeric_failures) + " numeric failures) and no fallback plan");
    }
    out.objective = incumbent;
    return out;
}

namespace {

/// Input for the last time step: the stored plan carries no v_T, so the stage
/// cost at T is minimized over the tightened stage polytope directly.
VectorXd final_stage_input(const PeriodicLtvModel& model,
                           const TightenedConstraintSchedule& tightened,
                           const StageCostSchedule& costs, const VectorXd& z_T,
                           const VectorXd& fallback, const QpSettings& settings) {
    const int T = model.period;
    const int m = model.input_dim();
    const auto& stage = costs.stages[T];

    int num_vars = m;
    std::vector<int> aux(m, -1);
    for (int c = 0; c < m; ++c)
        if (stage.l1_price[c] > 0.0) aux[c] = num_vars++;

    QpProblem qp;
    qp.num_vars = num_vars;
    qp.q = VectorXd::Zero(num_vars);
    std::vector<Eigen::Triplet<double>> pt;
    for (int c = 0; c < m; ++c) {
        if (stage.input_weight[c] > 0.0) pt.emplace_back(c, c, 2.0 * stage.input_weight[c]);
        if (aux[c] >= 0) qp.q[aux[c]] = 1.0;
    }
    qp.P = SparseMat(num_vars, num_vars);
    qp.P.setFromTriplets(pt.begin(), pt.end());
    qp.E = SparseMat(0, num_vars);
    qp.d = VectorXd();

    const auto& G = tightened.schedule.G[T];
    const VectorXd rhs = tightened.schedule.f[T] - tightened.schedule.F[T] * z_T;
    int rows = static_cast<int>(rhs.size());
    for (int c = 0; c < m; ++c)
        if (aux[c] >= 0) rows += 2;
    std::vector<Eigen::Triplet<double>> at;
    qp.b = VectorXd::Zero(rows);
    int row = 0;
    for (int i = 0; i < rhs.size(); ++i) {
        for (int c = 0; c < m; ++c)
            if (G(i, c) != 0.0) at.emplace_back(row, c, G(i, c));
        qp.b[row] = rhs[i];
        ++row;
    }
    for (int c = 0; c < m; ++c) {
        if (aux[c] < 0) continue;
        at.emplace_back(row, c, stage.l1_price[c]);
        at.emplace_back(row, aux[c], -1.0);
        ++row;
        at.emplace_back(row, c, -stage.l1_price[c]);
        at.emplace_back(row, aux[c], -1.0);
        ++row;
    }
    qp.A = SparseMat(rows, num_vars);
    qp.A.setFromTriplets(at.begin(), at.end());

    const QpResult res = solve_qp(qp, settings);
    if (res.status != QpStatus::Optimal) return fallback;
    return res.x.head(m);
}

}  // namespace

IterationResult closed_loop_iteration(const PeriodicLtvModel& model,
                                      const PolytopicConstraintSchedule& raw_schedule,
                                      const TightenedConstraintSchedule& tightened,
                                      const StageCostSchedule& costs,
                                      const FeedbackGainSchedule& gains,
                                      const DisturbanceBasis& basis, const ThetaSample& theta,
                                      const std::vector<VectorXd>& w_full,
                                      const SafeSet& safe_set, const LmpcConfig& config,
                                      int iteration_index, const VectorXd* initial_state) {
    const int T = model.period;
    const int N = config.horizon;
    if (static_cast<int>(w_full.size()) != T + 1)
        throw std::invalid_argument("closed_loop_iteration: w_full must have T+1 entries");

    std::vector<VectorXd> w_corr(T + 1);
    for (int t = 0; t <= T; ++t) w_corr[t] = evaluate_correlated(basis, theta, t);

    IterationResult out;
    out.nominal.theta = theta.coefficients;
    out.nominal.iteration_index = iteration_index;
    out.true_run.theta = theta.coefficients;
    out.true_run.iteration_index = iteration_index;
    out.nominal.disturbances = w_corr;
    out.true_run.disturbances = w_full;
    out.nominal.states.resize(T + 1);
    out.nominal.inputs.resize(T + 1);
    out.nominal.stage_costs.resize(T + 1);
    out.true_run.states.resize(T + 1);
    out.true_run.inputs.resize(T + 1);
    out.true_run.stage_costs.resize(T + 1);

    VectorXd z = initial_state ? *initial_state : model.x_s;
    VectorXd x = z;
    PlanRecord prev_plan;
    bool have_prev = false;

    for (int t = 0; t <= T; ++t) {
        VectorXd v;
        if (t <= T - N) {
            PlanRecord warm;
            const PlanRecord* warm_ptr = nullptr;
            if (have_prev &&
                make_successor_plan(prev_plan, z, safe_set, model, tightened, costs, w_corr, config,
                                    warm)) {
                warm_ptr = &warm;
            }
            LmpcStepResult step_result;
            try {
                step_result = lmpc_step(z, t, w_corr, safe_set, model, tightened, costs, config,
                                        warm_ptr);
            } catch (const std::exception& e) {
                throw std::runtime_error("iteration " + std::to_string(iteration_index) + ": " +
                                         e.what());
            }
            out.qp_solves += step_result.qps_solved;
            out.qp_infeasible_candidates += step_result.qps_infeasible;
            if (step_result.used_warm_plan) ++out.warm_plan_steps;
            out.lmpc_values.push_back(step_result.objective);
            out.plans.push_back(step_result.plan);
            prev_plan = out.plans.back();
            have_prev = true;
            v = prev_plan.inputs[0];
        } else if (t < T) {
            v = prev_plan.inputs[t - (T - N)];
        } else {
            v = final_stage_input(model, tightened, costs, z, prev_plan.terminal.input, config.qp);
        }

        const VectorXd u = v + gains.K[t] * (x - z);
        const auto true_check = check_constraints(raw_schedule, t, x, u, config.true_state_margin);
        if (!true_check.satisfied)
            throw std::runtime_error("iteration " + std::to_string(iteration_index) +
                                     ": true state violates constraints at t=" + std::to_string(t) +
                                     " by " + std::to_string(true_check.worst_violation));

        out.nominal.states[t] = z;
        out.nominal.inputs[t] = v;
        out.nominal.stage_costs[t] = stage_cost(costs, t, z, v);
        out.true_run.states[t] = x;
        out.true_run.inputs[t] = u;
        out.true_run.stage_costs[t] = stage_cost(costs, t, x, u);

        if (t < T) {
            z = step(model, t, z, v, w_corr[t]);
            x = step(model, t, x, u, w_full[t]);
        }
    }

    for (int t = 0; t <= T; ++t) {
        out.nominal.cumulative_cost += out.nominal.stage_costs[t];
        out.true_run.cumulative_cost += out.true_run.stage_costs[t];
    }
    out.nominal_cost = out.nominal.cumulative_cost;
    out.true_cost = out.true_run.cumulative_cost;
    return out;
}

FullHorizonResult solve_full_horizon(const PeriodicLtvModel& model,
                                     const TightenedConstraintSchedule& tightened,
                                     const StageCostSchedule& costs,
                                     const std::vector<VectorXd>& w_corr,
                                     const QpSettings& settings, const VectorXd* initial_state) {
    const int T = model.period;
    const VectorXd z0 = initial_state ? *initial_state : model.x_s;
    HorizonQp h = build_horizon_qp(model, tightened, costs, w_corr, 0, T, true, z0, nullptr, 0.0);
    const QpResult res = solve_qp(h.problem, settings);
    if (res.status == QpStatus::Infeasible)
        throw std::runtime_error("solve_full_horizon: tightened problem infeasible; "
                                 "the scenario configuration is inconsistent");
    if (res.status == QpStatus::NumericFailure)
        throw std::runtime_error("solve_full_horizon: QP solver failed: " + res.message);

    FullHorizonResult out;
    std::vector<VectorXd> inputs = extract_inputs(h, res.x);
    std::vector<VectorXd> states = propagate(model, w_corr, 0, z0, inputs, T);
    out.trajectory.states = std::move(states);
    out.trajectory.inputs = std::move(inputs);
    out.trajectory.disturbances = w_corr;
    out.trajectory.stage_costs.resize(T + 1);
    for (int t = 0; t <= T; ++t) {
        out.trajectory.stage_costs[t] =
            stage_cost(costs, t, out.trajectory.states[t], out.trajectory.inputs[t]);
        out.trajectory.cumulative_cost += out.trajectory.stage_costs[t];
    }
    out.objective = out.trajectory.cumulative_cost;
    return out;
}

SeedResult build_seed_trajectory(const PeriodicLtvModel& model,
                                 const TightenedConstraintSchedule& tightened,
                                 const StageCostSchedule& costs, const DisturbanceBasis& basis,
                                 const ThetaDomain& domain, const FeedbackGainSchedule& gains,
                                 const QpSettings& settings,
                                 const std::vector<double>& scale_ladder) {
    const int T = model.period;
    const int n = model.state_dim();
    domain.validate();

    SeedResult out;
    out.theta0.coefficients = domain.center();
    std::vector<VectorXd> w0(T + 1);
    for (int t = 0; t <= T; ++t) w0[t] = evaluate_correlated(basis, out.theta0, t);

    std::string failures;
    for (double scale : scale_ladder) {
        const ThetaDomain dom_c = domain.scaled(scale);
        const VectorXd hw = 0.5 * (dom_c.hi - dom_c.lo);

        // Worst-case range of the shift error over theta in dom_c, as a
        // zonotope propagated through the closed loop from t = 0 (shifts
        // starting later see a subset of this range).
        std::vector<VectorXd> extra(T + 1);
        std::vector<VectorXd> cols;
        for (int t = 0; t <= T; ++t) {
            const MatrixXd rows = tightened.schedule.F[t] + tightened.schedule.G[t] * gains.K[t];
            VectorXd margin = VectorXd::Zero(tightened.schedule.f[t].size());
            for (const auto& g : cols) margin += (rows * g).cwiseAbs();
            extra[t] = margin;
            if (t == T) break;
            const MatrixXd phi = model.A[t] + model.B[t] * gains.K[t];
            for (auto& g : cols) g = phi * g;
            const MatrixXd psi = correlated_coefficient_matrix(basis, t);
            for (int j = 0; j < psi.cols(); ++j) {
                const VectorXd col = model.C[t] * psi.col(j) * hw[j];
                if (col.cwiseAbs().maxCoeff() > 0.0) cols.push_back(col);
            }
        }

        TightenedConstraintSchedule seed_schedule = tightened;
        constexpr double kPad = 1e-7;
        for (int t = 0; t <= T; ++t)
            seed_schedule.schedule.f[t] -= extra[t].array().max(0.0).matrix() +
                                           kPad * VectorXd::Ones(extra[t].size());

        FullHorizonResult seed;
        try {
            seed = solve_full_horizon(model, seed_schedule, costs, w0, settings);
        } catch (const std::exception& e) {
            failures += "\n  scale " + std::to_string(scale) + ": " + e.what();
            continue;
        }

        HistoryRecord record;
        record.trajectory = seed.trajectory;
        record.trajectory.theta = out.theta0.coefficients;
        record.trajectory.iteration_index = 0;

        // certification: every box vertex must keep every shift start feasible
        bool certified = true;
        for (const auto& vertex : dom_c.vertices()) {
            ShiftTarget target;
            target.theta.coefficients = vertex;
            for (int t_start = 0; t_start <= T && certified; ++t_start) {
                const ShiftResult shift = shift_trajectory(record, basis, target, t_start, gains,
                                                           model, tightened, costs);
                if (!shift.feasible) {
                    failures += "\n  scale " + std::to_string(scale) +
                                ": vertex shift infeasible from t=" + std::to_string(t_start) +
                                " (violation " + std::to_string(shift.worst_violation) + ")";
                    certified = false;
                }
            }
            if (!certified) break;
        }
        if (!certified) continue;

        out.record = std::move(record);
        out.certified_scale = scale;
        out.certified_domain = dom_c;
        out.extra_margins = std::move(extra);
        return out;
    }
    throw std::runtime_error("build_seed_trajectory: no ladder scale produced a certified seed:" +
                             failures);
}

}  // namespace plmpc
