#pragma once

#include <optional>
#include <vector>

#include "plmpc/disturbance.hpp"
#include "plmpc/learning.hpp"
#include "plmpc/model.hpp"
#include "plmpc/qp.hpp"
#include "plmpc/tube.hpp"

namespace plmpc {

struct LmpcConfig {
    int horizon = 4;  // N
    QpSettings qp;
    int terminal_candidate_cap = 0;  // 0 = enumerate every safe-set entry
    double state_match_tol = 1e-9;
    double feasibility_margin = 1e-8;
    double true_state_margin = 1e-6;  // abort threshold for the closed-loop check
};

/// A concrete horizon plan: states z_{t..t+N}, inputs v_{t..t+N-1} and the
/// safe-set terminal entry that continues it.
struct PlanRecord {
    int t = 0;
    std::vector<VectorXd> states;
    std::vector<VectorXd> inputs;
    SafeSetEntry terminal;
    double objective = 0.0;
};

struct LmpcStepResult {
    PlanRecord plan;
    double objective = 0.0;  // J_LMPC^{j,*}(z_t)
    int candidates_pruned = 0;
    int qps_solved = 0;
    int qps_infeasible = 0;
    bool used_warm_plan = false;  // no candidate QP beat the shifted previous plan
};

struct IterationResult {
    Trajectory nominal;   // (z, v) under w_theta
    Trajectory true_run;  // (x, u) under the full disturbance realization
    std::vector<double> lmpc_values;  // J_LMPC^{j,*}(z_t), t = 0..T-N
    std::vector<PlanRecord> plans;    // per solved step
    double nominal_cost = 0.0;        // J^j
    double true_cost = 0.0;
    int qp_solves = 0;
    int qp_infeasible_candidates = 0;
    int warm_plan_steps = 0;
};

struct FullHorizonResult {
    Trajectory trajectory;
    double objective = 0.0;  // J*
};

/// Solves the robust LMPC problem at (t, z_t): for each safe-set entry at
/// level t+N (ascending cost order, pruned against the incumbent total), a
/// horizon-N QP with the entry state as terminal equality and the entry cost
/// as terminal constant. The optional warm plan (shifted previous solution)
/// initializes the incumbent and serves as the fallback plan.
LmpcStepResult lmpc_step(const VectorXd& z_t, int t, const std::vector<VectorXd>& w_corr,
                         const SafeSet& safe_set, const PeriodicLtvModel& model,
                         const TightenedConstraintSchedule& tightened,
                         const StageCostSchedule& costs, const LmpcConfig& config,
                         const PlanRecord* warm_plan = nullptr);

/// Runs one closed-loop iteration over t = 0..T: LMPC inputs while t <= T-N,
/// stored-plan replay afterwards, tube correction u = v + K(x - z) on the
/// true state throughout. Throws on QP infeasibility at any step or a
/// true-state constraint violation (both falsify the robustness guarantees).
IterationResult closed_loop_iteration(const PeriodicLtvModel& model,
                                      const PolytopicConstraintSchedule& raw_schedule,
                                      const TightenedConstraintSchedule& tightened,
                                      const StageCostSchedule& costs,
                                      const FeedbackGainSchedule& gains,
                                      const DisturbanceBasis& basis, const ThetaSample& theta,
                                      const std::vector<VectorXd>& w_full,
                                      const SafeSet& safe_set, const LmpcConfig& config,
                                      int iteration_index, const VectorXd* initial_state = nullptr);

/// Nominal-optimal oracle: one monolithic QP over all (z_t, v_t), t = 0..T.
FullHorizonResult solve_full_horizon(const PeriodicLtvModel& model,
                                     const TightenedConstraintSchedule& tightened,
                                     const StageCostSchedule& costs,
                                     const std::vector<VectorXd>& w_corr,
                                     const QpSettings& settings = {},
                                     const VectorXd* initial_state = nullptr);

struct SeedResult {
    HistoryRecord record;            // iteration 0
    ThetaSample theta0;              // box center
    double certified_scale = 1.0;    // sub-box scale the certification passed at
    ThetaDomain certified_domain;
    std::vector<VectorXd> extra_margins;  // per t, added on top of the tube margins
};

/// Iteration-0 seed: solves the full-horizon problem under the box-center
/// parameters with constraints additionally tightened by the worst-case
/// shift-error range over the (possibly scaled) parameter box, then verifies
/// shift feasibility from every start time at all box vertices. Scales the
/// certified box down a fixed ladder until construction succeeds.
SeedResult build_seed_trajectory(const PeriodicLtvModel& model,
                                 const TightenedConstraintSchedule& tightened,
                                 const StageCostSchedule& costs, const DisturbanceBasis& basis,
                                 const ThetaDomain& domain, const FeedbackGainSchedule& gains,
                                 const QpSettings& settings = {},
                                 const std::vector<double>& scale_ladder = {1.0, 0.75, 0.5, 0.4,
                                                                            0.3, 0.25, 0.2, 0.15,
                                                                            0.1, 0.05});

}  // namespace plmpc
