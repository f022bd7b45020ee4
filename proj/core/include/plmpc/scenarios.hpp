#pragma once

#include <string>

#include "plmpc/controller.hpp"
#include "plmpc/disturbance.hpp"
#include "plmpc/model.hpp"

namespace plmpc {

/// Complete description of one benchmark system: plant, constraints, costs,
/// disturbance model and controller defaults.
struct ScenarioSpec {
    std::string name;
    PeriodicLtvModel model;
    PolytopicConstraintSchedule constraints;
    StageCostSchedule costs;
    DisturbanceBasis basis;
    ThetaDomain theta_domain;
    MatrixXd Q_lqr;
    MatrixXd R_lqr;
    LmpcConfig lmpc;
    double rpi_alpha_target = 0.05;
    int rpi_horizon_cap = 200;

    void validate() const;
};

/// Two-mass spring cart with time-varying stiffness, switching state boxes
/// and a switching set-point; purely correlated disturbance (no white
/// residual). T=50, N=4.
ScenarioSpec spring_mass_scenario();

/// Single-zone building with sinusoidal/triangular/square disturbance
/// channels, an electricity-price L1 input cost and a scheduled comfort
/// band. T=144, N=16.
ScenarioSpec building_scenario();

/// One-dimensional plant small enough for grid dynamic programming and
/// exhaustive shift enumeration oracles. T=6, N=2.
ScenarioSpec tiny_scenario();

ScenarioSpec scenario_by_name(const std::string& name);

/// Inline scenario description parsed from JSON text. Matrix-valued fields
/// accept either a single value (held constant over the period) or an array
/// of T+1 per-step values; see the README for the schema.
ScenarioSpec scenario_from_json_text(const std::string& text);

}  // namespace plmpc
