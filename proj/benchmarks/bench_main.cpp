#include <benchmark/benchmark.h>

#include "plmpc/runner.hpp"

namespace {

using namespace plmpc;

const RunArtifacts& spring_artifacts() {
    static const RunArtifacts art = build_artifacts(spring_mass_scenario());
    return art;
}

const RunArtifacts& tiny_artifacts() {
    static const RunArtifacts art = build_artifacts(tiny_scenario());
    return art;
}

void BM_LqrGainsSpring(benchmark::State& state) {
    const ScenarioSpec s = spring_mass_scenario();
    for (auto _ : state) benchmark::DoNotOptimize(lqr_gains(s.model, s.Q_lqr, s.R_lqr));
}
BENCHMARK(BM_LqrGainsSpring);

void BM_RpiOuterApproxBuilding(benchmark::State& state) {
    const ScenarioSpec s = building_scenario();
    const auto gains = lqr_gains(s.model, s.Q_lqr, s.R_lqr);
    const std::vector<MatrixXd> phi{s.model.A[0] + s.model.B[0] * gains.K[0]};
    for (auto _ : state)
        benchmark::DoNotOptimize(rpi_outer_approx(phi, s.model.C[0], s.basis.residual_lo,
                                                  s.basis.residual_hi, s.rpi_alpha_target,
                                                  s.rpi_horizon_cap));
}
BENCHMARK(BM_RpiOuterApproxBuilding);

void BM_RpiSupportBuilding(benchmark::State& state) {
    const ScenarioSpec s = building_scenario();
    const auto gains = lqr_gains(s.model, s.Q_lqr, s.R_lqr);
    const std::vector<MatrixXd> phi{s.model.A[0] + s.model.B[0] * gains.K[0]};
    const RpiSet rpi = rpi_outer_approx(phi, s.model.C[0], s.basis.residual_lo,
                                        s.basis.residual_hi, s.rpi_alpha_target,
                                        s.rpi_horizon_cap);
    VectorXd dir(3);
    dir << 1.0, -0.5, 0.25;
    for (auto _ : state) benchmark::DoNotOptimize(rpi.support(0, dir));
}
BENCHMARK(BM_RpiSupportBuilding);

void BM_ShiftTrajectorySpring(benchmark::State& state) {
    const auto& art = spring_artifacts();
    ShiftTarget target;
    target.theta = sample_theta(art.seed.certified_domain, 3);
    for (auto _ : state)
        benchmark::DoNotOptimize(shift_trajectory(art.seed.record, art.scenario.basis, target, 0,
                                                  art.gains, art.scenario.model, art.tightened,
                                                  art.scenario.costs));
}
BENCHMARK(BM_ShiftTrajectorySpring);

void BM_SafeSetBuildSpring(benchmark::State& state) {
    const auto& art = spring_artifacts();
    HistoryStore history;
    history.append(art.seed.record, art.tightened);
    ShiftTarget target;
    target.theta = sample_theta(art.seed.certified_domain, 4);
    for (auto _ : state)
        benchmark::DoNotOptimize(build_safe_set(history, art.scenario.basis, target, art.gains,
                                                art.scenario.model, art.tightened,
                                                art.scenario.costs));
}
BENCHMARK(BM_SafeSetBuildSpring);

void BM_LmpcStepSpring(benchmark::State& state) {
    const auto& art = spring_artifacts();
    HistoryStore history;
    history.append(art.seed.record, art.tightened);
    ShiftTarget target;
    target.theta = sample_theta(art.seed.certified_domain, 5);
    const SafeSet ss = build_safe_set(history, art.scenario.basis, target, art.gains,
                                      art.scenario.model, art.tightened, art.scenario.costs);
    std::vector<VectorXd> w_corr(51);
    for (int t = 0; t <= 50; ++t)
        w_corr[t] = evaluate_correlated(art.scenario.basis, target.theta, t);
    for (auto _ : state)
        benchmark::DoNotOptimize(lmpc_step(art.scenario.model.x_s, 0, w_corr, ss,
                                           art.scenario.model, art.tightened, art.scenario.costs,
                                           art.scenario.lmpc));
}
BENCHMARK(BM_LmpcStepSpring);

void BM_FullHorizonTiny(benchmark::State& state) {
    const auto& art = tiny_artifacts();
    std::vector<VectorXd> w_corr(7);
    const ThetaSample theta = sample_theta(art.scenario.theta_domain, 6);
    for (int t = 0; t <= 6; ++t) w_corr[t] = evaluate_correlated(art.scenario.basis, theta, t);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            solve_full_horizon(art.scenario.model, art.tightened, art.scenario.costs, w_corr));
}
BENCHMARK(BM_FullHorizonTiny);

void BM_FullHorizonSpring(benchmark::State& state) {
    const auto& art = spring_artifacts();
    std::vector<VectorXd> w_corr(51);
    const ThetaSample theta = sample_theta(art.seed.certified_domain, 6);
    for (int t = 0; t <= 50; ++t) w_corr[t] = evaluate_correlated(art.scenario.basis, theta, t);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            solve_full_horizon(art.scenario.model, art.tightened, art.scenario.costs, w_corr));
}
BENCHMARK(BM_FullHorizonSpring);

}  // namespace

BENCHMARK_MAIN();
