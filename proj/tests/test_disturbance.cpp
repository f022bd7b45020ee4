#include "plmpc/disturbance.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "plmpc/rng.hpp"
#include "plmpc/scenarios.hpp"

namespace plmpc {
namespace {

DisturbanceBasis simple_basis(int T) {
    DisturbanceBasis b;
    b.period = T;
    b.truncation_order = 1;
    b.channels = {{WaveformAtom::constant(), WaveformAtom::sine(1)}};
    b.residual_lo = VectorXd::Zero(1);
    b.residual_hi = VectorXd::Zero(1);
    return b;
}

TEST(EvaluateCorrelated, ConstantAtomOnly) {
    DisturbanceBasis b = simple_basis(50);
    ThetaSample theta{VectorXd(2)};
    theta.coefficients << 7.5, 0.0;
    for (int t = 0; t <= 50; ++t) EXPECT_DOUBLE_EQ(evaluate_correlated(b, theta, t)[0], 7.5);
}

TEST(EvaluateCorrelated, SineQuarterPeriodPeak) {
    DisturbanceBasis b = simple_basis(52);  // T/4 integral
    ThetaSample theta{VectorXd(2)};
    theta.coefficients << 0.04, -0.08;
    EXPECT_NEAR(evaluate_correlated(b, theta, 13)[0], 0.04 - 0.08, 1e-15);
}

TEST(EvaluateCorrelated, BuildingTriangleApex) {
    const ScenarioSpec s = building_scenario();
    ThetaSample theta{VectorXd::Zero(5)};
    theta.coefficients[2] = 16.0;  // a3
    const VectorXd w = evaluate_correlated(s.basis, theta, 72);
    EXPECT_DOUBLE_EQ(w[1], 16.0);
    EXPECT_DOUBLE_EQ(w[0], 0.0);
    EXPECT_DOUBLE_EQ(w[2], 0.0);
}

TEST(EvaluateCorrelated, BuildingSquareWindow) {
    const ScenarioSpec s = building_scenario();
    ThetaSample theta{VectorXd::Zero(5)};
    theta.coefficients[3] = 1.0;  // a4
    theta.coefficients[4] = 6.0;  // a5
    EXPECT_DOUBLE_EQ(evaluate_correlated(s.basis, theta, 50)[2], 7.0);  // 50 >= T/3
    EXPECT_DOUBLE_EQ(evaluate_correlated(s.basis, theta, 47)[2], 1.0);  // before the window
    EXPECT_DOUBLE_EQ(evaluate_correlated(s.basis, theta, 108)[2], 1.0);  // window is [T/3, 3T/4)
}

TEST(EvaluateCorrelated, LinearInTheta) {
    const ScenarioSpec s = building_scenario();
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        VectorXd t1(5), t2(5);
        for (int i = 0; i < 5; ++i) {
            t1[i] = rng.uniform(-5, 5);
            t2[i] = rng.uniform(-5, 5);
        }
        const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
        const int t = static_cast<int>(rng.next_u64() % 145);
        const VectorXd lhs =
            evaluate_correlated(s.basis, {a * t1 + b * t2}, t);
        const VectorXd rhs = a * evaluate_correlated(s.basis, {t1}, t) +
                             b * evaluate_correlated(s.basis, {t2}, t);
        EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + rhs.cwiseAbs().maxCoeff()));
    }
}

TEST(FitCoefficients, ConstantSignal) {
    DisturbanceBasis b = simple_basis(50);
    std::vector<VectorXd> w(51, VectorXd::Constant(1, 7.0));
    const FitResult fit = fit_coefficients(b, w);
    EXPECT_NEAR(fit.theta.coefficients[0], 7.0, 1e-12);
    EXPECT_NEAR(fit.theta.coefficients[1], 0.0, 1e-12);
    EXPECT_LE(fit.residual_max_abs, 1e-12);
}

TEST(FitCoefficients, DiscreteOrthogonalityRecoversSine) {
    DisturbanceBasis b = simple_basis(50);
    std::vector<VectorXd> w(51);
    for (int t = 0; t <= 50; ++t)
        w[t] = VectorXd::Constant(1, 3.0 * std::sin(2.0 * std::numbers::pi * t / 50.0));
    const FitResult fit = fit_coefficients(b, w);
    EXPECT_NEAR(fit.theta.coefficients[1], 3.0, 1e-10);
    EXPECT_NEAR(fit.theta.coefficients[0], 0.0, 1e-10);
}

// Noisy recovery against an independent least-squares oracle run on the same
// frozen sample (theta_true = {0.03, -0.07}, uniform noise in [-0.1, 0.1]).
TEST(FitCoefficients, NoisyRecoveryMatchesFrozenOracle) {
    const double samples[51] = {
        0.09645196027904021,    0.08217954514985908,    -0.009912616295504953,
        -0.038103097901878644,  0.03277634360787503,    -0.08319447093861117,
        -0.07793665691998655,   -0.12246347304410415,   0.02828192071528661,
        -0.0003677223542149499, 0.004459119584606264,   0.017385698653385365,
        -0.04807871588231104,   -0.02611363179940028,   -0.11080070792547674,
        -0.11366794143346608,   0.00034269868547297244, -0.034883713556514546,
        -0.010888705698067484,  0.035081474068196894,   0.01579869633964503,
        0.00699312294447909,    0.01607271346115523,    -0.026618272489017433,
        -0.07260975943591344,   0.017343477846472465,   -0.018309739086592863,
        0.029114020846467054,   0.1264493333415607,     0.010510654360188235,
        -0.01719448400171371,   0.0341950758194075,     0.042654678547641975,
        0.12148625773052008,    0.10474432414087706,    0.15335359796194345,
        0.1316228156164857,     0.08113924327799313,    0.16266594792318595,
        0.03215469153254899,    0.0011163707674328588,  0.011347465827749745,
        0.1335748249044311,     0.07631137304458274,    0.010172653221728584,
        0.07135392268114585,    -0.005814822270246198,  0.09503279370347467,
        0.03663954721634602,    0.014977571568797823,   -0.009697582170424681};
    DisturbanceBasis b = simple_basis(50);
    std::vector<VectorXd> w(51);
    for (int t = 0; t <= 50; ++t) w[t] = VectorXd::Constant(1, samples[t]);
    const FitResult fit = fit_coefficients(b, w);
    EXPECT_NEAR(fit.theta.coefficients[0], 0.02033650808673926, 1e-10);
    EXPECT_NEAR(fit.theta.coefficients[1], -0.06275650209509691, 1e-10);
    EXPECT_NEAR(fit.residual_max_abs, 0.09444526519628468, 1e-10);
}

TEST(FitCoefficients, RankDeficientBasisThrows) {
    DisturbanceBasis b;
    b.period = 20;
    b.truncation_order = 1;
    b.channels = {{WaveformAtom::constant(), WaveformAtom::constant()}};
    b.residual_lo = VectorXd::Zero(1);
    b.residual_hi = VectorXd::Zero(1);
    std::vector<VectorXd> w(21, VectorXd::Zero(1));
    EXPECT_THROW(fit_coefficients(b, w), std::invalid_argument);
}

TEST(SampleTheta, DegenerateBox) {
    ThetaDomain dom;
    dom.lo = VectorXd::Constant(3, 0.25);
    dom.hi = VectorXd::Constant(3, 0.25);
    const ThetaSample s = sample_theta(dom, 99);
    for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(s.coefficients[i], 0.25);
}

TEST(SampleTheta, SpringMassBoxMembership) {
    const ScenarioSpec s = spring_mass_scenario();
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const ThetaSample theta = sample_theta(s.theta_domain, seed);
        EXPECT_TRUE(s.theta_domain.contains(theta.coefficients));
    }
}

TEST(SampleTheta, DeterministicAcrossCalls) {
    const ScenarioSpec s = building_scenario();
    const ThetaSample a = sample_theta(s.theta_domain, 0xDEADBEEF);
    const ThetaSample b = sample_theta(s.theta_domain, 0xDEADBEEF);
    EXPECT_EQ((a.coefficients - b.coefficients).cwiseAbs().maxCoeff(), 0.0);
}

TEST(GenerateRealization, ZeroResidualEqualsCorrelated) {
    const ScenarioSpec s = spring_mass_scenario();  // W_r = {0}
    const ThetaSample theta = sample_theta(s.theta_domain, 5);
    const auto w = generate_realization(s.basis, theta, 5);
    for (int t = 0; t <= 50; ++t)
        EXPECT_EQ((w[t] - evaluate_correlated(s.basis, theta, t)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(GenerateRealization, ResidualsWithinBounds) {
    const ScenarioSpec s = building_scenario();
    const ThetaSample theta = sample_theta(s.theta_domain, 11);
    int draws = 0;
    for (std::uint64_t seed = 0; draws < 100000; ++seed) {
        const auto w = generate_realization(s.basis, theta, seed);
        for (int t = 0; t <= 144 && draws < 100000; ++t, ++draws) {
            const VectorXd r = w[t] - evaluate_correlated(s.basis, theta, t);
            for (int c = 0; c < 3; ++c) {
                ASSERT_GE(r[c], s.basis.residual_lo[c]);
                ASSERT_LE(r[c], s.basis.residual_hi[c]);
            }
        }
    }
}

TEST(GenerateRealization, FitRoundTripWithinNoiseScale) {
    const ScenarioSpec s = building_scenario();
    const ThetaSample theta = sample_theta(s.theta_domain, 21);
    const auto w = generate_realization(s.basis, theta, 21);
    const FitResult fit = fit_coefficients(s.basis, w);
    // residual bounds are [-3,3]x[-5,5]x[-2,2]; the least-squares error of a
    // uniform residual over T=144 samples stays well inside that scale
    EXPECT_LE((fit.theta.coefficients - theta.coefficients).cwiseAbs().maxCoeff(), 2.0);
    // the deterministic part of the error: refit of a residual-free signal
    std::vector<VectorXd> clean(145);
    for (int t = 0; t <= 144; ++t) clean[t] = evaluate_correlated(s.basis, theta, t);
    const FitResult clean_fit = fit_coefficients(s.basis, clean);
    EXPECT_LE((clean_fit.theta.coefficients - theta.coefficients).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Properties, ResidualFreeRoundTrip) {
    const ScenarioSpec s = building_scenario();
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        VectorXd theta(5);
        for (int i = 0; i < 5; ++i)
            theta[i] = rng.uniform(s.theta_domain.lo[i], s.theta_domain.hi[i]);
        std::vector<VectorXd> w(145);
        for (int t = 0; t <= 144; ++t) w[t] = evaluate_correlated(s.basis, {theta}, t);
        const FitResult fit = fit_coefficients(s.basis, w);
        double max_err = 0.0;
        for (int t = 0; t <= 144; ++t)
            max_err = std::max(
                max_err,
                (evaluate_correlated(s.basis, fit.theta, t) - w[t]).cwiseAbs().maxCoeff());
        EXPECT_LE(max_err, 1e-9);
    }
}

// discrete Parseval identity on a sine/cosine-only basis
TEST(Properties, DiscreteParseval) {
    DisturbanceBasis b;
    const int T = 48;
    b.period = T;
    b.truncation_order = 3;
    b.channels = {{WaveformAtom::constant(), WaveformAtom::sine(1), WaveformAtom::cosine(1),
                   WaveformAtom::sine(3), WaveformAtom::cosine(2)}};
    b.residual_lo = VectorXd::Zero(1);
    b.residual_hi = VectorXd::Zero(1);
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        VectorXd theta(5);
        for (int i = 0; i < 5; ++i) theta[i] = rng.uniform(-2, 2);
        double mean_square = 0.0;
        for (int t = 0; t < T; ++t) {
            const double v = evaluate_correlated(b, {theta}, t)[0];
            mean_square += v * v;
        }
        mean_square /= T;
        const double expected = theta[0] * theta[0] +
                                0.5 * (theta[1] * theta[1] + theta[2] * theta[2] +
                                       theta[3] * theta[3] + theta[4] * theta[4]);
        EXPECT_NEAR(mean_square, expected, 1e-9 * (1.0 + expected));
    }
}

TEST(BasisValidate, WindowsAndResidualChecks) {
    DisturbanceBasis b = simple_basis(50);
    b.residual_lo[0] = 0.5;  // does not contain 0
    b.residual_hi[0] = 1.0;
    EXPECT_THROW(b.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace plmpc
