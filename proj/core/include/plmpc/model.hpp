#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace plmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Discrete-time periodic linear time-varying plant
///   x_{t+1} = A_t x_t + B_t u_t + C_t w_t
/// with explicit matrix schedules for t in [0, T]. Dynamics are evaluated for
/// t = 0..T-1; costs and constraints for t = 0..T.
struct PeriodicLtvModel {
    int period = 0;  // T
    std::vector<MatrixXd> A;  // T+1 matrices, n x n
    std::vector<MatrixXd> B;  // T+1 matrices, n x m
    std::vector<MatrixXd> C;  // T+1 matrices, n x d
    VectorXd x_s;             // initial state, length n

    int state_dim() const { return A.empty() ? 0 : static_cast<int>(A[0].rows()); }
    int input_dim() const { return B.empty() ? 0 : static_cast<int>(B[0].cols()); }
    int disturbance_dim() const { return C.empty() ? 0 : static_cast<int>(C[0].cols()); }

    /// Throws std::invalid_argument if schedule lengths or dimensions disagree.
    void validate() const;
};

/// Periodic polytopic constraints F_t x + G_t u <= f_t, t in [0, T].
struct PolytopicConstraintSchedule {
    std::vector<MatrixXd> F;  // T+1 matrices, p x n
    std::vector<MatrixXd> G;  // T+1 matrices, p x m
    std::vector<VectorXd> f;  // T+1 vectors, length p

    int rows(int t) const { return static_cast<int>(f[t].size()); }
    void validate(const PeriodicLtvModel& model) const;
};

/// Stage cost at time t:
///   sum_i state_weight[i] * (x[i] - state_ref[i])^2
/// + sum_k input_weight[k] * u[k]^2
/// + sum_k |l1_price[k] * u[k]|
/// All weights nonnegative, so the cost is convex and >= 0.
struct StageCost {
    VectorXd state_weight;
    VectorXd state_ref;
    VectorXd input_weight;
    VectorXd l1_price;
};

struct StageCostSchedule {
    std::vector<StageCost> stages;  // T+1 entries

    void validate(const PeriodicLtvModel& model) const;
};

/// One executed (or planned) run over t in [0, T].
struct Trajectory {
    std::vector<VectorXd> states;        // T+1
    std::vector<VectorXd> inputs;        // T+1
    std::vector<VectorXd> disturbances;  // T+1 realized w_t
    std::vector<double> stage_costs;     // T+1
    double cumulative_cost = 0.0;
    VectorXd theta;            // disturbance parameters active for the iteration
    int iteration_index = -1;  // j
};

struct ConstraintCheck {
    bool satisfied = false;
    double worst_violation = 0.0;  // max row of F x + G u - f
};

struct RolloutResult {
    Trajectory trajectory;
    bool constraints_ok = true;
    int first_violation_t = -1;
};

/// One dynamics step A_t x + B_t u + C_t w. Throws std::invalid_argument on a
/// dimension mismatch, naming the offending operand.
VectorXd step(const PeriodicLtvModel& model, int t, const VectorXd& x, const VectorXd& u,
              const VectorXd& w);

/// satisfied iff max row of (F_t x + G_t u - f_t) <= margin.
ConstraintCheck check_constraints(const PolytopicConstraintSchedule& schedule, int t,
                                  const VectorXd& x, const VectorXd& u, double margin = 1e-8);

double stage_cost(const StageCostSchedule& costs, int t, const VectorXd& x, const VectorXd& u);

using Policy = std::function<VectorXd(int t, const VectorXd& x)>;

/// Applies `step` for t = 0..T-1 from x0, evaluating the policy at every step
/// (including t = T) and recording states, inputs, disturbances and costs.
RolloutResult rollout(const PeriodicLtvModel& model, const PolytopicConstraintSchedule& schedule,
                      const StageCostSchedule& costs, const Policy& policy,
                      const std::vector<VectorXd>& w_traj, const VectorXd& x0);

/// CSV text, one row per t: t, x components, u components, w components, stage cost.
std::string trajectory_csv(const Trajectory& traj);

/// JSON document carrying theta, the iteration index and the cost summary.
std::string trajectory_json(const Trajectory& traj);

}  // namespace plmpc
