#include "plmpc/model.hpp"

#include <cmath>
#include <stdexcept>

#include "plmpc/csv.hpp"
#include <json.hpp>

namespace plmpc {

namespace {

void require(bool cond, const std::string& message) {
    if (!cond) throw std::invalid_argument(message);
}

}  // namespace

void PeriodicLtvModel::validate() const {
    require(period >= 1, "model: period must be >= 1");
    const auto len = static_cast<std::size_t>(period) + 1;
    require(A.size() == len, "model: A schedule must have T+1 entries");
    require(B.size() == len, "model: B schedule must have T+1 entries");
    require(C.size() == len, "model: C schedule must have T+1 entries");
    const int n = state_dim(), m = input_dim(), d = disturbance_dim();
    require(n >= 1 && m >= 1 && d >= 1, "model: state, input and disturbance dims must be >= 1");
    for (std::size_t t = 0; t < len; ++t) {
        require(A[t].rows() == n && A[t].cols() == n, "model: A[" + std::to_string(t) + "] shape");
        require(B[t].rows() == n && B[t].cols() == m, "model: B[" + std::to_string(t) + "] shape");
        require(C[t].rows() == n && C[t].cols() == d, "model: C[" + std::to_string(t) + "] shape");
    }
    require(x_s.size() == n, "model: x_s length");
}

void PolytopicConstraintSchedule::validate(const PeriodicLtvModel& model) const {
    const auto len = static_cast<std::size_t>(model.period) + 1;
    require(F.size() == len && G.size() == len && f.size() == len,
            "constraints: schedules must have T+1 entries");
    for (std::size_t t = 0; t < len; ++t) {
        require(F[t].rows() == G[t].rows() && F[t].rows() == f[t].size(),
                "constraints: row counts disagree at t=" + std::to_string(t));
        require(F[t].cols() == model.state_dim(), "constraints: F columns at t=" + std::to_string(t));
        require(G[t].cols() == model.input_dim(), "constraints: G columns at t=" + std::to_string(t));
    }
}

void StageCostSchedule::validate(const PeriodicLtvModel& model) const {
    require(stages.size() == static_cast<std::size_t>(model.period) + 1,
            "costs: schedule must have T+1 entries");
    for (std::size_t t = 0; t < stages.size(); ++t) {
        const auto& s = stages[t];
        require(s.state_weight.size() == model.state_dim() && s.state_ref.size() == model.state_dim(),
                "costs: state terms at t=" + std::to_string(t));
        require(s.input_weight.size() == model.input_dim() && s.l1_price.size() == model.input_dim(),
                "costs: input terms at t=" + std::to_string(t));
        require(s.state_weight.minCoeff() >= 0.0 && s.input_weight.minCoeff() >= 0.0 &&
                    s.l1_price.minCoeff() >= 0.0,
                "costs: weights must be nonnegative at t=" + std::to_string(t));
    }
}

VectorXd step(const PeriodicLtvModel& model, int t, const VectorXd& x, const VectorXd& u,
              const VectorXd& w) {
    require(t >= 0 && t <= model.period, "step: time index out of range");
    require(x.size() == model.state_dim(), "step: state x has length " + std::to_string(x.size()) +
                                               ", expected " + std::to_string(model.state_dim()));
    require(u.size() == model.input_dim(), "step: input u has length " + std::to_string(u.size()) +
                                               ", expected " + std::to_string(model.input_dim()));
    require(w.size() == model.disturbance_dim(),
            "step: disturbance w has length " + std::to_string(w.size()) + ", expected " +
                std::to_string(model.disturbance_dim()));
    return model.A[t] * x + model.B[t] * u + model.C[t] * w;
}

ConstraintCheck check_constraints(const PolytopicConstraintSchedule& schedule, int t,
                                  const VectorXd& x, const VectorXd& u, double margin) {
    require(t >= 0 && t < static_cast<int>(schedule.f.size()),
            "check_constraints: time index out of range");
    require(schedule.F[t].cols() == x.size(), "check_constraints: state x has length " +
                                                  std::to_string(x.size()) + ", expected " +
                                                  std::to_string(schedule.F[t].cols()));
    require(schedule.G[t].cols() == u.size(), "check_constraints: input u has length " +
                                                  std::to_string(u.size()) + ", expected " +
                                                  std::to_string(schedule.G[t].cols()));
    const VectorXd residual = schedule.F[t] * x + schedule.G[t] * u - schedule.f[t];
    ConstraintCheck out;
    out.worst_violation = residual.size() == 0 ? 0.0 : residual.maxCoeff();
    out.satisfied = out.worst_violation <= margin;
    return out;
}

double stage_cost(const StageCostSchedule& costs, int t, const VectorXd& x, const VectorXd& u) {
    require(t >= 0 && t < static_cast<int>(costs.stages.size()), "stage_cost: time index out of range");
    const auto& s = costs.stages[t];
    require(x.size() == s.state_weight.size(), "stage_cost: state x has length " +
                                                   std::to_string(x.size()) + ", expected " +
                                                   std::to_string(s.state_weight.size()));
    require(u.size() == s.input_weight.size(), "stage_cost: input u has length " +
                                                   std::to_string(u.size()) + ", expected " +
                                                   std::to_string(s.input_weight.size()));
    double value = 0.0;
    for (int i = 0; i < x.size(); ++i) {
        const double r = x[i] - s.state_ref[i];
        value += s.state_weight[i] * r * r;
    }
    for (int k = 0; k < u.size(); ++k) {
        value += s.input_weight[k] * u[k] * u[k];
        value += std::abs(s.l1_price[k] * u[k]);
    }
    return value;
}

RolloutResult rollout(const PeriodicLtvModel& model, const PolytopicConstraintSchedule& schedule,
                      const StageCostSchedule& costs, const Policy& policy,
                      const std::vector<VectorXd>& w_traj, const VectorXd& x0) {
    const int T = model.period;
    require(static_cast<int>(w_traj.size()) == T + 1, "rollout: w_traj must have T+1 entries");

    RolloutResult out;
    Trajectory& traj = out.trajectory;
    traj.states.resize(T + 1);
    traj.inputs.resize(T + 1);
    traj.disturbances = w_traj;
    traj.stage_costs.resize(T + 1);

    VectorXd x = x0;
    for (int t = 0; t <= T; ++t) {
        traj.states[t] = x;
        VectorXd u;
        try {
            u = policy(t, x);
        } catch (const std::exception& e) {
            throw std::runtime_error("rollout: policy failed at t=" + std::to_string(t) + ": " +
                                     e.what());
        }
        traj.inputs[t] = u;
        traj.stage_costs[t] = stage_cost(costs, t, x, u);
        traj.cumulative_cost += traj.stage_costs[t];
        const auto check = check_constraints(schedule, t, x, u);
        if (!check.satisfied && out.constraints_ok) {
            out.constraints_ok = false;
            out.first_violation_t = t;
        }
        if (t < T) x = step(model, t, x, u, w_traj[t]);
    }
    return out;
}

std::string trajectory_csv(const Trajectory& traj) {
    CsvWriter csv;
    std::vector<std::string> header{"t"};
    const int n = traj.states.empty() ? 0 : static_cast<int>(traj.states[0].size());
    const int m = traj.inputs.empty() ? 0 : static_cast<int>(traj.inputs[0].size());
    const int d = traj.disturbances.empty() ? 0 : static_cast<int>(traj.disturbances[0].size());
    for (int i = 0; i < n; ++i) header.push_back("x" + std::to_string(i + 1));
    for (int k = 0; k < m; ++k) header.push_back("u" + std::to_string(k + 1));
    for (int c = 0; c < d; ++c) header.push_back("w" + std::to_string(c + 1));
    header.push_back("stage_cost");
    csv.row(header);
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
        csv.begin_row();
        csv.cell(static_cast<long long>(t));
        for (int i = 0; i < n; ++i) csv.cell(traj.states[t][i]);
        for (int k = 0; k < m; ++k) csv.cell(traj.inputs[t][k]);
        for (int c = 0; c < d; ++c) csv.cell(traj.disturbances[t][c]);
        csv.cell(traj.stage_costs[t]);
        csv.end_row();
    }
    return csv.str();
}

std::string trajectory_json(const Trajectory& traj) {
    nlohmann::json doc;
    doc["iteration"] = traj.iteration_index;
    doc["theta"] = std::vector<double>(traj.theta.data(), traj.theta.data() + traj.theta.size());
    doc["cumulative_cost"] = traj.cumulative_cost;
    doc["length"] = traj.states.size();
    return doc.dump(2);
}

}  // namespace plmpc
