#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>

namespace plmpc {

using Eigen::VectorXd;
using SparseMat = Eigen::SparseMatrix<double>;

/// Convex quadratic program
///   min 0.5 x'Px + q'x + constant
///   s.t. E x = d,  A x <= b
/// P must be positive semidefinite; it is symmetrized on load.
struct QpProblem {
    int num_vars = 0;
    SparseMat P;
    VectorXd q;
    SparseMat E;
    VectorXd d;
    SparseMat A;
    VectorXd b;
    double constant = 0.0;

    void validate() const;
};

enum class QpStatus { Optimal, Infeasible, NumericFailure };

struct QpResult {
    QpStatus status = QpStatus::NumericFailure;
    VectorXd x;
    VectorXd eq_duals;
    VectorXd ineq_duals;
    double objective = 0.0;
    int iterations = 0;
    bool polished = false;
    std::string message;
};

struct QpSettings {
    double eps_primal = 1e-9;
    double eps_dual = 1e-9;
    double eps_gap = 1e-10;
    double infeasibility_tol = 1e-7;
    int max_iterations = 120;
    bool polish = true;
};

/// Primal-dual interior-point solve. Non-convergent problems are classified
/// by an explicit phase-1 feasibility program before a status is returned.
QpResult solve_qp(const QpProblem& problem, const QpSettings& settings = {});

struct FeasibilityResult {
    bool feasible = false;
    double min_slack_violation = 0.0;  // optimal value of the phase-1 program
    VectorXd x;                        // point achieving it
};

/// Phase-1 program: minimises the worst inequality violation plus the L1
/// equality residual. Always bounded and strictly feasible, so it gives a
/// reliable feasible/infeasible verdict for the constraint system.
FeasibilityResult solve_feasibility(const SparseMat& E, const VectorXd& d, const SparseMat& A,
                                    const VectorXd& b, int num_vars,
                                    double infeasibility_tol = 1e-7);

}  // namespace plmpc
