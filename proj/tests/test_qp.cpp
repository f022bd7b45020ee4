#include "plmpc/qp.hpp"

#include <gtest/gtest.h>

#include <vector>

#include "plmpc/rng.hpp"

namespace plmpc {
namespace {

SparseMat dense_to_sparse(const Eigen::MatrixXd& M) {
    SparseMat S(M.rows(), M.cols());
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < M.rows(); ++i)
        for (int j = 0; j < M.cols(); ++j)
            if (M(i, j) != 0.0) trip.emplace_back(i, j, M(i, j));
    S.setFromTriplets(trip.begin(), trip.end());
    return S;
}

QpProblem box_qp(const Eigen::MatrixXd& H, const VectorXd& g, const VectorXd& lo,
                 const VectorXd& hi) {
    const int n = static_cast<int>(g.size());
    QpProblem p;
    p.num_vars = n;
    p.P = dense_to_sparse(H);
    p.q = g;
    p.E = SparseMat(0, n);
    p.d = VectorXd();
    Eigen::MatrixXd A(2 * n, n);
    A << Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n);
    p.A = dense_to_sparse(A);
    p.b = VectorXd(2 * n);
    p.b << hi, -lo;
    return p;
}

TEST(SolveQp, ScalarBound) {
    // min x^2 s.t. x >= 1
    QpProblem p;
    p.num_vars = 1;
    p.P = dense_to_sparse(Eigen::MatrixXd::Constant(1, 1, 2.0));
    p.q = VectorXd::Zero(1);
    p.E = SparseMat(0, 1);
    p.d = VectorXd();
    p.A = dense_to_sparse(Eigen::MatrixXd::Constant(1, 1, -1.0));
    p.b = VectorXd::Constant(1, -1.0);
    const QpResult res = solve_qp(p);
    ASSERT_EQ(res.status, QpStatus::Optimal);
    EXPECT_NEAR(res.x[0], 1.0, 1e-8);
    EXPECT_NEAR(res.objective, 1.0, 1e-8);
}

TEST(SolveQp, L1SplitVariableEncoding) {
    // min p + q s.t. u = p - q, u = -2 (equality), p, q >= 0  ->  value 2
    QpProblem p;
    p.num_vars = 3;  // u, p, q
    p.P = SparseMat(3, 3);
    p.q = VectorXd::Zero(3);
    p.q[1] = 1.0;
    p.q[2] = 1.0;
    Eigen::MatrixXd E(2, 3);
    E << 1, -1, 1,   // u - p + q = 0
         1, 0, 0;    // u = -2
    p.E = dense_to_sparse(E);
    p.d = VectorXd(2);
    p.d << 0.0, -2.0;
    Eigen::MatrixXd A(2, 3);
    A << 0, -1, 0, 0, 0, -1;
    p.A = dense_to_sparse(A);
    p.b = VectorXd::Zero(2);
    const QpResult res = solve_qp(p);
    ASSERT_EQ(res.status, QpStatus::Optimal);
    EXPECT_NEAR(res.objective, 2.0, 1e-8);
}

// frozen 6-variable box QP solved beforehand by an independent
// projected-gradient iteration to machine accuracy
TEST(SolveQp, MatchesProjectedGradientOracle) {
    Eigen::MatrixXd H(6, 6);
    H << 14.124468198392037, -3.175670157172792, -1.0803779678185337, -2.6435835677387653,
        -0.3873717797441037, -2.7464794358764406, -3.175670157172792, 8.22261986016896,
        -0.044413232308748156, 1.6669674473196254, 0.43396409949370385, 2.5249015874858594,
        -1.0803779678185337, -0.044413232308748156, 9.287414296502092, 1.0994075941618857,
        -0.7512973359628168, -0.7123317512965294, -2.6435835677387653, 1.6669674473196254,
        1.0994075941618857, 8.790493351947687, -0.2679215775355038, 3.1290387191162825,
        -0.3873717797441037, 0.43396409949370385, -0.7512973359628168, -0.2679215775355038,
        7.080320139129406, -0.6036550419405884, -2.7464794358764406, 2.5249015874858594,
        -0.7123317512965294, 3.1290387191162825, -0.6036550419405884, 13.330455365351668;
    VectorXd g(6);
    g << -0.3418423729646252, -2.520469430887584, -2.4734436470737187, 1.9517783634741033,
        2.2297625136103267, 1.629462804915585;
    const VectorXd lo = VectorXd::Constant(6, -0.8);
    const VectorXd hi = VectorXd::Constant(6, 0.6);
    VectorXd x_expected(6);
    x_expected << 0.057333655433901676, 0.4452364329411298, 0.2725738024635188,
        -0.2880025777008991, -0.3319320846269652, -0.12761856324977727;

    const QpResult res = solve_qp(box_qp(H, g, lo, hi));
    ASSERT_EQ(res.status, QpStatus::Optimal);
    EXPECT_LE((res.x - x_expected).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(res.objective, -1.663098226405664, 1e-9);
}

TEST(SolveQp, InfeasibleBoxIsDetected) {
    // x >= 1 and x <= 0
    QpProblem p;
    p.num_vars = 1;
    p.P = dense_to_sparse(Eigen::MatrixXd::Constant(1, 1, 2.0));
    p.q = VectorXd::Zero(1);
    p.E = SparseMat(0, 1);
    p.d = VectorXd();
    Eigen::MatrixXd A(2, 1);
    A << -1, 1;
    p.A = dense_to_sparse(A);
    p.b = VectorXd(2);
    p.b << -1.0, 0.0;
    const QpResult res = solve_qp(p);
    EXPECT_EQ(res.status, QpStatus::Infeasible);
}

TEST(SolveQp, InfeasibleEqualityVsInequality) {
    // equality x = 5 with inequality x <= 1
    QpProblem p;
    p.num_vars = 1;
    p.P = dense_to_sparse(Eigen::MatrixXd::Constant(1, 1, 2.0));
    p.q = VectorXd::Zero(1);
    p.E = dense_to_sparse(Eigen::MatrixXd::Constant(1, 1, 1.0));
    p.d = VectorXd::Constant(1, 5.0);
    p.A = dense_to_sparse(Eigen::MatrixXd::Constant(1, 1, 1.0));
    p.b = VectorXd::Constant(1, 1.0);
    const QpResult res = solve_qp(p);
    EXPECT_EQ(res.status, QpStatus::Infeasible);
}

TEST(SolveQp, EqualityOnlyProblem) {
    // min (x-3)^2 + y^2 s.t. x + y = 1  ->  x = 2, y = -1
    QpProblem p;
    p.num_vars = 2;
    Eigen::MatrixXd H = 2.0 * Eigen::MatrixXd::Identity(2, 2);
    p.P = dense_to_sparse(H);
    p.q = VectorXd(2);
    p.q << -6.0, 0.0;
    p.constant = 9.0;
    Eigen::MatrixXd E(1, 2);
    E << 1, 1;
    p.E = dense_to_sparse(E);
    p.d = VectorXd::Constant(1, 1.0);
    p.A = SparseMat(0, 2);
    p.b = VectorXd();
    const QpResult res = solve_qp(p);
    ASSERT_EQ(res.status, QpStatus::Optimal);
    EXPECT_NEAR(res.x[0], 2.0, 1e-9);
    EXPECT_NEAR(res.x[1], -1.0, 1e-9);
    EXPECT_NEAR(res.objective, 2.0, 1e-9);
}

TEST(SolveQp, LinearProgram) {
    // min -x - 2y s.t. x + y <= 4, 0 <= x <= 3, 0 <= y <= 3 -> (1, 3), value -7
    QpProblem p;
    p.num_vars = 2;
    p.P = SparseMat(2, 2);
    p.q = VectorXd(2);
    p.q << -1.0, -2.0;
    p.E = SparseMat(0, 2);
    p.d = VectorXd();
    Eigen::MatrixXd A(5, 2);
    A << 1, 1, 1, 0, 0, 1, -1, 0, 0, -1;
    p.A = dense_to_sparse(A);
    p.b = VectorXd(5);
    p.b << 4, 3, 3, 0, 0;
    const QpResult res = solve_qp(p);
    ASSERT_EQ(res.status, QpStatus::Optimal);
    EXPECT_NEAR(res.objective, -7.0, 1e-8);
    EXPECT_NEAR(res.x[0], 1.0, 1e-7);
    EXPECT_NEAR(res.x[1], 3.0, 1e-7);
}

TEST(SolveQp, RandomBoxQpsAgainstProjectedGradient) {
    Rng rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 4 + static_cast<int>(rng.next_u64() % 5);
        Eigen::MatrixXd M(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) M(i, j) = rng.uniform(-1, 1);
        Eigen::MatrixXd H =
            M * M.transpose() + static_cast<double>(n) * Eigen::MatrixXd::Identity(n, n);
        VectorXd g(n), lo(n), hi(n);
        for (int i = 0; i < n; ++i) {
            g[i] = rng.uniform(-3, 3);
            lo[i] = rng.uniform(-1.0, -0.2);
            hi[i] = rng.uniform(0.2, 1.0);
        }
        // independent oracle: projected gradient to its fixed point
        const double L =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff();
        VectorXd x = VectorXd::Zero(n);
        for (int it = 0; it < 200000; ++it) {
            VectorXd xn = (x - (H * x + g) / L).cwiseMax(lo).cwiseMin(hi);
            if ((xn - x).cwiseAbs().maxCoeff() < 1e-15) {
                x = xn;
                break;
            }
            x = xn;
        }
        const QpResult res = solve_qp(box_qp(H, g, lo, hi));
        ASSERT_EQ(res.status, QpStatus::Optimal);
        EXPECT_LE((res.x - x).cwiseAbs().maxCoeff(), 1e-7)
            << "trial " << trial << " oracle mismatch";
    }
}

TEST(SolveFeasibility, ReportsViolationMagnitude) {
    // x <= 0 and x >= 2: the minimum worst violation is 1 at the midpoint
    Eigen::MatrixXd A(2, 1);
    A << 1, -1;
    VectorXd b(2);
    b << 0.0, -2.0;
    const auto res = solve_feasibility(SparseMat(0, 1), VectorXd(), dense_to_sparse(A), b, 1);
    EXPECT_FALSE(res.feasible);
    EXPECT_NEAR(res.min_slack_violation, 1.0, 1e-6);
}

TEST(QpProblemValidate, ShapeErrors) {
    QpProblem p;
    p.num_vars = 2;
    p.P = SparseMat(2, 2);
    p.q = VectorXd::Zero(3);  // wrong length
    p.E = SparseMat(0, 2);
    p.d = VectorXd();
    p.A = SparseMat(0, 2);
    p.b = VectorXd();
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace plmpc
