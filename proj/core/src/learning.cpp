#include "plmpc/learning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace plmpc {

namespace {

bool states_match(const VectorXd& a, const VectorXd& b, double tol) {
    return (a - b).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace

void HistoryStore::append(HistoryRecord record, const TightenedConstraintSchedule& tightened) {
    const int expected = static_cast<int>(records.size());
    if (record.trajectory.iteration_index != expected)
        throw std::invalid_argument("history: expected iteration " + std::to_string(expected) +
                                    ", got " + std::to_string(record.trajectory.iteration_index));
    const auto& traj = record.trajectory;
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
        const auto check = check_constraints(tightened.schedule, static_cast<int>(t), traj.states[t],
                                             traj.inputs[t], 1e-8);
        if (!check.satisfied)
            throw std::invalid_argument("history: trajectory of iteration " +
                                        std::to_string(expected) +
                                        " violates tightened constraints at t=" + std::to_string(t) +
                                        " by " + std::to_string(check.worst_violation));
    }
    records.push_back(std::move(record));
}

ShiftResult shift_trajectory(const HistoryRecord& record, const DisturbanceBasis& basis,
                             const ShiftTarget& target, int t_start,
                             const FeedbackGainSchedule& gains, const PeriodicLtvModel& model,
                             const TightenedConstraintSchedule& tightened,
                             const StageCostSchedule& costs, double feasibility_margin) {
    const int T = model.period;
    if (t_start < 0 || t_start > T)
        throw std::invalid_argument("shift_trajectory: t_start out of range");
    const auto& traj = record.trajectory;
    const int n = model.state_dim();

    const bool has_dev = !target.dyn_dev_A.empty() || !record.dyn_dev_A.empty() ||
                         !target.dyn_dev_B.empty() || !record.dyn_dev_B.empty();

    auto dev = [&](const std::vector<MatrixXd>& seq, int t, int rows, int cols) -> MatrixXd {
        if (seq.empty()) return MatrixXd::Zero(rows, cols);
        return seq[t];
    };

    ShiftResult out;
    out.t_start = t_start;
    const int len = T - t_start + 1;
    out.states.resize(len);
    out.inputs.resize(len);
    out.tail_costs.resize(len);

    ThetaSample theta_old{traj.theta};

    VectorXd e = VectorXd::Zero(n);
    if (t_start == 0 && (target.initial_offset.size() > 0 || record.initial_offset.size() > 0)) {
        const VectorXd ws_new =
            target.initial_offset.size() > 0 ? target.initial_offset : VectorXd::Zero(n);
        const VectorXd ws_old =
            record.initial_offset.size() > 0 ? record.initial_offset : VectorXd::Zero(n);
        e = ws_new - ws_old;
    }

    out.feasible = true;
    for (int k = t_start; k <= T; ++k) {
        const int idx = k - t_start;
        out.states[idx] = traj.states[k] + e;
        out.inputs[idx] = traj.inputs[k] + gains.K[k] * e;
        const auto check = check_constraints(tightened.schedule, k, out.states[idx], out.inputs[idx],
                                             feasibility_margin);
        out.worst_violation = std::max(out.worst_violation, check.worst_violation);
        if (!check.satisfied) out.feasible = false;
        if (k == T) break;

        const VectorXd dw = evaluate_correlated(basis, target.theta, k) -
                            evaluate_correlated(basis, theta_old, k);
        if (has_dev) {
            const int m = model.input_dim();
            const MatrixXd dA_new = dev(target.dyn_dev_A, k, n, n);
            const MatrixXd dB_new = dev(target.dyn_dev_B, k, n, m);
            const MatrixXd dA_old = dev(record.dyn_dev_A, k, n, n);
            const MatrixXd dB_old = dev(record.dyn_dev_B, k, n, m);
            const MatrixXd phi = (model.A[k] + dA_new) + (model.B[k] + dB_new) * gains.K[k];
            e = phi * e + model.C[k] * dw + (dA_new - dA_old) * traj.states[k] +
                (dB_new - dB_old) * traj.inputs[k];
        } else {
            const MatrixXd phi = model.A[k] + model.B[k] * gains.K[k];
            e = phi * e + model.C[k] * dw;
        }
    }

    // suffix sums of the shifted stage costs
    double tail = 0.0;
    for (int k = T; k >= t_start; --k) {
        const int idx = k - t_start;
        tail += stage_cost(costs, k, out.states[idx], out.inputs[idx]);
        out.tail_costs[idx] = tail;
    }
    return out;
}

const SafeSetEntry* SafeSet::successor(int level, const SafeSetEntry& entry) const {
    if (level + 1 >= static_cast<int>(levels.size())) return nullptr;
    for (const auto& candidate : levels[level + 1])
        if (candidate.source_iteration == entry.source_iteration &&
            candidate.shift_start == entry.shift_start)
            return &candidate;
    return nullptr;
}

SafeSet build_safe_set(const HistoryStore& history, const DisturbanceBasis& basis,
                       const ShiftTarget& target, const FeedbackGainSchedule& gains,
                       const PeriodicLtvModel& model, const TightenedConstraintSchedule& tightened,
                       const StageCostSchedule& costs, const SafeSetOptions& options) {
    if (history.records.empty())
        throw std::invalid_argument("build_safe_set: history is empty (no iteration-0 seed)");
    const int T = model.period;

    SafeSet out;
    out.match_tolerance = options.match_tolerance;
    out.levels.assign(T + 1, {});

    for (const auto& record : history.records) {
        for (int t_start = 0; t_start <= T; ++t_start) {
            const ShiftResult shift = shift_trajectory(record, basis, target, t_start, gains, model,
                                                       tightened, costs,
                                                       options.feasibility_margin);
            if (!shift.feasible) continue;
            for (int k = t_start; k <= T; ++k) {
                const int idx = k - t_start;
                out.levels[k].push_back({shift.states[idx], shift.inputs[idx],
                                         shift.tail_costs[idx],
                                         record.trajectory.iteration_index, t_start});
            }
        }
    }

    // Deduplicate near-identical states keeping the smaller cost; duplicates
    // come from the same floating-point pipeline, so a lexicographic sort
    // places them adjacently.
    for (auto& level : out.levels) {
        std::sort(level.begin(), level.end(), [](const SafeSetEntry& a, const SafeSetEntry& b) {
            for (int i = 0; i < a.state.size(); ++i)
                if (a.state[i] != b.state[i]) return a.state[i] < b.state[i];
            if (a.cost_to_go != b.cost_to_go) return a.cost_to_go < b.cost_to_go;
            if (a.source_iteration != b.source_iteration)
                return a.source_iteration < b.source_iteration;
            return a.shift_start < b.shift_start;
        });
        std::vector<SafeSetEntry> kept;
        kept.reserve(level.size());
        for (auto& entry : level) {
            if (!kept.empty() && states_match(kept.back().state, entry.state, options.match_tolerance)) {
                auto& prev = kept.back();
                const bool better = entry.cost_to_go < prev.cost_to_go ||
                                    (entry.cost_to_go == prev.cost_to_go &&
                                     (entry.source_iteration < prev.source_iteration ||
                                      (entry.source_iteration == prev.source_iteration &&
                                       entry.shift_start < prev.shift_start)));
                if (better) prev = entry;
                continue;
            }
            kept.push_back(std::move(entry));
        }
        level = std::move(kept);
        std::sort(level.begin(), level.end(), [](const SafeSetEntry& a, const SafeSetEntry& b) {
            if (a.cost_to_go != b.cost_to_go) return a.cost_to_go < b.cost_to_go;
            if (a.source_iteration != b.source_iteration)
                return a.source_iteration < b.source_iteration;
            return a.shift_start < b.shift_start;
        });
    }

    for (int k = options.required_level_from; k <= T; ++k)
        if (out.levels[k].empty())
            throw std::runtime_error("build_safe_set: level " + std::to_string(k) +
                                     " is empty; no feasible shift reaches it "
                                     "(iteration-0 seed assumption violated)");
    return out;
}

QueryResult query_Q(const SafeSet& safe_set, int level, const VectorXd& state,
                    std::optional<double> tolerance) {
    if (level < 0 || level >= static_cast<int>(safe_set.levels.size()))
        throw std::invalid_argument("query_Q: level out of range");
    const double tol = tolerance.value_or(safe_set.match_tolerance);
    QueryResult out;
    for (const auto& entry : safe_set.levels[level]) {
        if (!states_match(entry.state, state, tol)) continue;
        // levels are sorted by (J, i, t); the first match is the minimizer
        out.found = true;
        out.value = entry.cost_to_go;
        out.entry = &entry;
        break;
    }
    return out;
}

void verify_deviation_stability(const PeriodicLtvModel& model, const FeedbackGainSchedule& gains,
                                const std::vector<MatrixXd>& dyn_dev_A,
                                const std::vector<MatrixXd>& dyn_dev_B) {
    const int T = model.period;
    std::vector<MatrixXd> phi(T);
    for (int t = 0; t < T; ++t) {
        MatrixXd A = model.A[t];
        MatrixXd B = model.B[t];
        if (!dyn_dev_A.empty()) A += dyn_dev_A[t];
        if (!dyn_dev_B.empty()) B += dyn_dev_B[t];
        phi[t] = A + B * gains.K[t];
    }
    const double rho = monodromy_spectral_radius(phi);
    if (rho >= 1.0)
        throw std::runtime_error("deviated closed loop unstable (monodromy radius " +
                                 std::to_string(rho) + "); provide stabilizing gains");
}

}  // namespace plmpc
