#pragma once

#include <optional>
#include <vector>

#include "plmpc/disturbance.hpp"
#include "plmpc/model.hpp"
#include "plmpc/tube.hpp"

namespace plmpc {

/// One completed iteration: the nominal closed-loop trajectory plus the
/// iteration-varying quantities the shifting procedure needs.
struct HistoryRecord {
    Trajectory trajectory;  // nominal (z, v), theta and iteration index inside
    VectorXd initial_offset;            // w_s^i; empty means zero
    std::vector<MatrixXd> dyn_dev_A;    // dA_t^i; empty means zero
    std::vector<MatrixXd> dyn_dev_B;    // dB_t^i; empty means zero
};

struct HistoryStore {
    std::vector<HistoryRecord> records;

    /// Enforces contiguous iteration indices from 0 and tightened-constraint
    /// feasibility of the stored trajectory (margin 1e-8).
    void append(HistoryRecord record, const TightenedConstraintSchedule& tightened);
};

/// Iteration-j side of the shifting extensions: initial-state offset and
/// dynamics deviation of the upcoming iteration.
struct ShiftTarget {
    ThetaSample theta;
    VectorXd initial_offset;          // w_s^j; empty means zero
    std::vector<MatrixXd> dyn_dev_A;  // dA_t^j; empty means zero
    std::vector<MatrixXd> dyn_dev_B;  // dB_t^j; empty means zero
};

struct ShiftResult {
    int t_start = 0;
    std::vector<VectorXd> states;   // z_{k|t}, k = t_start..T
    std::vector<VectorXd> inputs;   // v_{k|t}
    std::vector<double> tail_costs; // J_{k|t} = sum_{r=k}^{T} l_r, k = t_start..T
    bool feasible = false;          // the Definition-1 membership verdict
    double worst_violation = 0.0;
};

struct SafeSetEntry {
    VectorXd state;
    VectorXd input;
    double cost_to_go = 0.0;
    int source_iteration = 0;  // i
    int shift_start = 0;       // t
};

struct SafeSet {
    std::vector<std::vector<SafeSetEntry>> levels;  // k = 0..T, sorted by (J, i, t)
    double match_tolerance = 1e-9;

    /// Entry at level k+1 produced by the same shift as `entry`; the suffix
    /// closure of the construction guarantees it exists while k+1 <= T.
    const SafeSetEntry* successor(int level, const SafeSetEntry& entry) const;
};

struct QueryResult {
    bool found = false;  // false encodes Q = +infinity
    double value = 0.0;
    const SafeSetEntry* entry = nullptr;
};

struct SafeSetOptions {
    double feasibility_margin = 1e-8;
    double match_tolerance = 1e-9;
    /// Levels >= this index must be nonempty or the build throws. The LMPC
    /// only queries levels N..T, so a runner operating outside the certified
    /// disturbance box relaxes the low levels.
    int required_level_from = 0;
};

/// Error-recursion shift of a recorded trajectory onto new disturbance
/// parameters, starting with zero error at t_start (or the initial-state
/// offset difference when t_start = 0). Infeasibility is reported in the
/// result, never thrown.
ShiftResult shift_trajectory(const HistoryRecord& record, const DisturbanceBasis& basis,
                             const ShiftTarget& target, int t_start,
                             const FeedbackGainSchedule& gains, const PeriodicLtvModel& model,
                             const TightenedConstraintSchedule& tightened,
                             const StageCostSchedule& costs, double feasibility_margin = 1e-8);

/// Runs every (record, shift start) pair and collects feasible shifted
/// states with their costs-to-go into per-level lists, deduplicated within
/// the match tolerance keeping the smaller cost.
SafeSet build_safe_set(const HistoryStore& history, const DisturbanceBasis& basis,
                       const ShiftTarget& target, const FeedbackGainSchedule& gains,
                       const PeriodicLtvModel& model, const TightenedConstraintSchedule& tightened,
                       const StageCostSchedule& costs, const SafeSetOptions& options = {});

/// Q_k(z): minimum cost-to-go over entries matching z within the tolerance;
/// not-found encodes +infinity. Ties break toward the smaller iteration
/// index, then the smaller shift start.
QueryResult query_Q(const SafeSet& safe_set, int level, const VectorXd& state,
                    std::optional<double> tolerance = std::nullopt);

/// Monodromy stability of the deviated closed loop A_t^j + B_t^j K_t;
/// throws when the provided gains fail to stabilize the deviation.
void verify_deviation_stability(const PeriodicLtvModel& model, const FeedbackGainSchedule& gains,
                                const std::vector<MatrixXd>& dyn_dev_A,
                                const std::vector<MatrixXd>& dyn_dev_B);

}  // namespace plmpc
