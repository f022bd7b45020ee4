#include "plmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace plmpc {

namespace {

constexpr double kReg = 1e-9;  // quasi-definite KKT regularization

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

SparseMat symmetrized(const SparseMat& P) {
    SparseMat Pt = SparseMat(P.transpose());
    return 0.5 * (P + Pt);
}

/// Assembles and factorizes the regularized augmented KKT system
///   [ P + dI   E'        A'      ]
///   [ E        -gI       0       ]
///   [ A        0         -(W+gI) ]
/// and solves it with iterative refinement against the unregularized operator.
class KktSolver {
public:
    KktSolver(const SparseMat& P, const SparseMat& E, const SparseMat& A)
        : P_(P), E_(E), A_(A), n_(static_cast<int>(P.rows())),
          me_(static_cast<int>(E.rows())), mi_(static_cast<int>(A.rows())) {}

    bool factorize(const VectorXd& w_diag, double reg) {
        w_diag_ = w_diag;
        const int dim = n_ + me_ + mi_;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(P_.nonZeros() + 2 * E_.nonZeros() + 2 * A_.nonZeros() + dim);
        for (int k = 0; k < P_.outerSize(); ++k)
            for (SparseMat::InnerIterator it(P_, k); it; ++it)
                trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        for (int i = 0; i < n_; ++i) trip.emplace_back(i, i, reg);
        for (int k = 0; k < E_.outerSize(); ++k)
            for (SparseMat::InnerIterator it(E_, k); it; ++it) {
                trip.emplace_back(n_ + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
                trip.emplace_back(static_cast<int>(it.col()), n_ + static_cast<int>(it.row()), it.value());
            }
        for (int i = 0; i < me_; ++i) trip.emplace_back(n_ + i, n_ + i, -reg);
        for (int k = 0; k < A_.outerSize(); ++k)
            for (SparseMat::InnerIterator it(A_, k); it; ++it) {
                trip.emplace_back(n_ + me_ + static_cast<int>(it.row()), static_cast<int>(it.col()),
                                  it.value());
                trip.emplace_back(static_cast<int>(it.col()), n_ + me_ + static_cast<int>(it.row()),
                                  it.value());
            }
        for (int i = 0; i < mi_; ++i)
            trip.emplace_back(n_ + me_ + i, n_ + me_ + i, -(w_diag[i] + reg));

        SparseMat K(dim, dim);
        K.setFromTriplets(trip.begin(), trip.end());
        if (!analyzed_) {
            ldlt_.analyzePattern(K);
            analyzed_ = true;
        }
        ldlt_.factorize(K);
        return ldlt_.info() == Eigen::Success;
    }

    /// Solves the *unregularized* system via refinement on the regularized factor.
    VectorXd solve(const VectorXd& rhs, int refine_rounds = 2) const {
        VectorXd sol = ldlt_.solve(rhs);
        for (int r = 0; r < refine_rounds; ++r) {
            const VectorXd residual = rhs - apply_unregularized(sol);
            sol += ldlt_.solve(residual);
        }
        return sol;
    }

private:
    VectorXd apply_unregularized(const VectorXd& v) const {
        const auto vx = v.head(n_);
        const auto vy = v.segment(n_, me_);
        const auto vz = v.tail(mi_);
        VectorXd out(n_ + me_ + mi_);
        out.head(n_) = P_ * vx + E_.transpose() * vy + A_.transpose() * vz;
        out.segment(n_, me_) = E_ * vx;
        out.tail(mi_) = A_ * vx - w_diag_.cwiseProduct(vz);
        return out;
    }

    SparseMat P_;
    SparseMat E_;
    SparseMat A_;
    int n_, me_, mi_;
    VectorXd w_diag_;
    Eigen::SimplicialLDLT<SparseMat> ldlt_;
    bool analyzed_ = false;
};

double step_to_boundary(const VectorXd& v, const VectorXd& dv) {
    double alpha = 1.0;
    for (int i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
    return alpha;
}

struct IpmOutcome {
    bool converged = false;
    bool factor_failed = false;
    VectorXd x, y, z, s;
    int iterations = 0;
};

IpmOutcome run_ipm(const SparseMat& P, const VectorXd& q, const SparseMat& E, const VectorXd& d,
                   const SparseMat& A, const VectorXd& b, const QpSettings& settings) {
    const int n = static_cast<int>(P.rows());
    const int me = static_cast<int>(E.rows());
    const int mi = static_cast<int>(A.rows());

    IpmOutcome out;
    KktSolver kkt(P, E, A);

    // Starting point from one solve with unit slack weights, then shifted
    // into the positive orthant.
    if (!kkt.factorize(VectorXd::Ones(mi), 1e-8)) {
        out.factor_failed = true;
        return out;
    }
    VectorXd rhs0(n + me + mi);
    rhs0.head(n) = -q;
    rhs0.segment(n, me) = d;
    rhs0.tail(mi) = b;
    VectorXd v0 = kkt.solve(rhs0, 1);
    VectorXd x = v0.head(n);
    VectorXd y = v0.segment(n, me);
    VectorXd z = -v0.tail(mi);
    VectorXd s = b - A * x;
    if (mi > 0) {
        const double ds = std::max(0.0, -1.5 * (s.size() ? s.minCoeff() : 0.0));
        const double dz = std::max(0.0, -1.5 * (z.size() ? z.minCoeff() : 0.0));
        s.array() += ds;
        z.array() += dz;
        const double dot = s.dot(z);
        const double sh_s = 0.5 * dot / std::max(z.sum(), 1e-12) + 1e-4;
        const double sh_z = 0.5 * dot / std::max(s.sum(), 1e-12) + 1e-4;
        s.array() += sh_s;
        z.array() += sh_z;
    }

    const double bd_scale = 1.0 + std::max(inf_norm(b), inf_norm(d));
    const double q_scale = 1.0 + inf_norm(q);

    double prev_prim = std::numeric_limits<double>::infinity();
    int stall_count = 0;

    for (int iter = 0; iter < settings.max_iterations; ++iter) {
        out.iterations = iter;
        const VectorXd rd = P * x + q + E.transpose() * y + A.transpose() * z;
        const VectorXd re = E * x - d;
        const VectorXd ri = A * x + s - b;
        const double mu = mi > 0 ? s.dot(z) / mi : 0.0;

        const double prim_res = std::max(inf_norm(re), inf_norm(ri));
        const double dual_scale = q_scale + inf_norm(P * x) + inf_norm(E.transpose() * y) +
                                  inf_norm(A.transpose() * z);
        const double dual_res = inf_norm(rd);
        const double obj = 0.5 * x.dot(P * x) + q.dot(x);
        const double gap = mi > 0 ? s.dot(z) : 0.0;

        if (prim_res <= settings.eps_primal * bd_scale && dual_res <= settings.eps_dual * dual_scale &&
            gap <= settings.eps_gap * (1.0 + std::abs(obj))) {
            out.converged = true;
            break;
        }

        // Stalled primal residual with tiny complementarity is the signature
        // of an infeasible problem; bail out early and let phase-1 decide.
        if (iter >= 40 && iter % 10 == 0) {
            if (prim_res > 1e-6 * bd_scale && prim_res > 0.25 * prev_prim) {
                if (++stall_count >= 2) break;
            } else {
                stall_count = 0;
            }
            prev_prim = prim_res;
        }

        VectorXd w = mi > 0 ? (s.array() / z.array()).matrix().eval() : VectorXd();
        double reg = kReg;
        bool ok = kkt.factorize(w, reg);
        while (!ok && reg < 1e-4) {
            reg *= 100.0;
            ok = kkt.factorize(w, reg);
        }
        if (!ok) {
            out.factor_failed = true;
            break;
        }

        // affine scaling direction
        VectorXd rhs(n + me + mi);
        rhs.head(n) = -rd;
        rhs.segment(n, me) = -re;
        rhs.tail(mi) = -ri + s;
        VectorXd v = kkt.solve(rhs);
        VectorXd dz_aff = v.tail(mi);
        VectorXd ds_aff = mi > 0 ? (-s - w.cwiseProduct(dz_aff)).eval() : VectorXd();

        double sigma = 0.0;
        if (mi > 0) {
            const double a_p = step_to_boundary(s, ds_aff);
            const double a_d = step_to_boundary(z, dz_aff);
            const double alpha_aff = std::min(a_p, a_d);
            const double mu_aff = (s + alpha_aff * ds_aff).dot(z + alpha_aff * dz_aff) / mi;
            sigma = std::pow(std::clamp(mu_aff / std::max(mu, 1e-300), 0.0, 1.0), 3);
        }

        // combined predictor-corrector direction
        if (mi > 0) {
            const VectorXd comp = (-s.array() * z.array() + sigma * mu -
                                   ds_aff.array() * dz_aff.array())
                                      .matrix();
            rhs.tail(mi) = -ri - comp.cwiseQuotient(z);
        }
        v = kkt.solve(rhs);
        const VectorXd dx = v.head(n);
        const VectorXd dy = v.segment(n, me);
        const VectorXd dz = v.tail(mi);
        VectorXd ds;
        if (mi > 0) {
            const VectorXd comp = (-s.array() * z.array() + sigma * mu -
                                   ds_aff.array() * dz_aff.array())
                                      .matrix();
            ds = comp.cwiseQuotient(z) - w.cwiseProduct(dz);
        }

        double alpha = 1.0;
        if (mi > 0) {
            const double tau = mu > 1e-8 ? 0.995 : 0.9995;
            alpha = tau * std::min({step_to_boundary(s, ds), step_to_boundary(z, dz), 1.0});
        }
        x += alpha * dx;
        y += alpha * dy;
        if (mi > 0) {
            z += alpha * dz;
            s += alpha * ds;
        }
    }

    out.x = std::move(x);
    out.y = std::move(y);
    out.z = std::move(z);
    out.s = std::move(s);
    return out;
}

/// Equality-constrained solve for problems without inequalities.
QpResult solve_equality_qp(const SparseMat& P, const VectorXd& q, const SparseMat& E,
                           const VectorXd& d, double constant) {
    const int n = static_cast<int>(P.rows());
    const int me = static_cast<int>(E.rows());
    KktSolver kkt(P, E, SparseMat(0, n));
    QpResult res;
    if (!kkt.factorize(VectorXd(), 1e-10)) {
        res.message = "KKT factorization failed";
        return res;
    }
    VectorXd rhs(n + me);
    rhs.head(n) = -q;
    rhs.tail(me) = d;
    const VectorXd v = kkt.solve(rhs, 3);
    res.x = v.head(n);
    res.eq_duals = v.segment(n, me);
    res.ineq_duals = VectorXd();
    const double eq_res = me > 0 ? inf_norm(E * res.x - d) : 0.0;
    const double scale = 1.0 + inf_norm(d);
    if (eq_res > 1e-6 * scale) {
        res.status = QpStatus::Infeasible;
        res.message = "inconsistent equality constraints";
        return res;
    }
    res.status = QpStatus::Optimal;
    res.objective = 0.5 * res.x.dot(P * res.x) + q.dot(res.x) + constant;
    return res;
}

bool try_polish(const SparseMat& P, const VectorXd& q, const SparseMat& E, const VectorXd& d,
                const SparseMat& A, const VectorXd& b, QpResult& res) {
    const int n = static_cast<int>(P.rows());
    const int me = static_cast<int>(E.rows());
    const int mi = static_cast<int>(A.rows());

    // active-set guess: dual dominates slack
    std::vector<int> active;
    const VectorXd slack = b - A * res.x;
    for (int i = 0; i < mi; ++i)
        if (res.ineq_duals[i] > slack[i]) active.push_back(i);

    const int na = static_cast<int>(active.size());
    SparseMat Aact(na, n);
    {
        std::vector<Eigen::Triplet<double>> trip;
        // A is column-major, gather active rows per column
        for (int col = 0; col < A.outerSize(); ++col)
            for (SparseMat::InnerIterator it(A, col); it; ++it) {
                const auto pos = std::lower_bound(active.begin(), active.end(),
                                                  static_cast<int>(it.row()));
                if (pos != active.end() && *pos == static_cast<int>(it.row()))
                    trip.emplace_back(static_cast<int>(pos - active.begin()),
                                      static_cast<int>(it.col()), it.value());
            }
        Aact.setFromTriplets(trip.begin(), trip.end());
    }
    VectorXd bact(na);
    for (int r = 0; r < na; ++r) bact[r] = b[active[r]];

    // stack equalities and active rows, solve as equality-constrained QP
    SparseMat Estack(me + na, n);
    {
        std::vector<Eigen::Triplet<double>> trip;
        for (int col = 0; col < E.outerSize(); ++col)
            for (SparseMat::InnerIterator it(E, col); it; ++it)
                trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        for (int col = 0; col < Aact.outerSize(); ++col)
            for (SparseMat::InnerIterator it(Aact, col); it; ++it)
                trip.emplace_back(me + static_cast<int>(it.row()), static_cast<int>(it.col()),
                                  it.value());
        Estack.setFromTriplets(trip.begin(), trip.end());
    }
    VectorXd dstack(me + na);
    dstack.head(me) = d;
    dstack.tail(na) = bact;

    KktSolver kkt(P, Estack, SparseMat(0, n));
    if (!kkt.factorize(VectorXd(), 1e-10)) return false;
    VectorXd rhs(n + me + na);
    rhs.head(n) = -q;
    rhs.tail(me + na) = dstack;
    const VectorXd v = kkt.solve(rhs, 3);
    const VectorXd xp = v.head(n);
    const VectorXd yp = v.segment(n, me);
    const VectorXd zact = v.tail(na);

    // verify optimality of the polished point
    const double scale = 1.0 + inf_norm(b) + inf_norm(d);
    if (me > 0 && inf_norm(E * xp - d) > 1e-8 * scale) return false;
    const VectorXd sl = b - A * xp;
    for (int i = 0; i < mi; ++i)
        if (sl[i] < -1e-8 * scale) return false;
    for (int r = 0; r < na; ++r)
        if (zact[r] < -1e-7) return false;
    VectorXd zfull = VectorXd::Zero(mi);
    for (int r = 0; r < na; ++r) zfull[active[r]] = std::max(zact[r], 0.0);
    const VectorXd rd = P * xp + q + E.transpose() * yp + A.transpose() * zfull;
    const double dscale = 1.0 + inf_norm(q) + inf_norm(P * xp);
    if (inf_norm(rd) > 1e-7 * dscale) return false;

    res.x = xp;
    res.eq_duals = yp;
    res.ineq_duals = zfull;
    res.polished = true;
    return true;
}

}  // namespace

void QpProblem::validate() const {
    if (num_vars <= 0) throw std::invalid_argument("qp: num_vars must be positive");
    auto check = [&](const SparseMat& M, const VectorXd& v, const std::string& which) {
        if (M.cols() != num_vars)
            throw std::invalid_argument("qp: " + which + " column count mismatch");
        if (M.rows() != v.size())
            throw std::invalid_argument("qp: " + which + " right-hand side length mismatch");
    };
    if (P.rows() != num_vars || P.cols() != num_vars)
        throw std::invalid_argument("qp: P must be num_vars x num_vars");
    if (q.size() != num_vars) throw std::invalid_argument("qp: q length mismatch");
    check(E, d, "E");
    check(A, b, "A");
}

QpResult solve_qp(const QpProblem& problem, const QpSettings& settings) {
    problem.validate();
    const SparseMat P = symmetrized(problem.P);
    const int mi = static_cast<int>(problem.A.rows());

    if (mi == 0)
        return solve_equality_qp(P, problem.q, problem.E, problem.d, problem.constant);

    IpmOutcome ipm = run_ipm(P, problem.q, problem.E, problem.d, problem.A, problem.b, settings);

    QpResult res;
    res.iterations = ipm.iterations;
    res.x = ipm.x;
    res.eq_duals = ipm.y;
    res.ineq_duals = ipm.z;

    if (ipm.converged) {
        res.status = QpStatus::Optimal;
        if (settings.polish)
            try_polish(P, problem.q, problem.E, problem.d, problem.A, problem.b, res);
        res.objective = 0.5 * res.x.dot(P * res.x) + problem.q.dot(res.x) + problem.constant;
        return res;
    }

    // Did not converge: classify with the phase-1 program.
    const FeasibilityResult feas = solve_feasibility(problem.E, problem.d, problem.A, problem.b,
                                                     problem.num_vars, settings.infeasibility_tol);
    if (!feas.feasible) {
        res.status = QpStatus::Infeasible;
        res.message = "phase-1 violation " + std::to_string(feas.min_slack_violation);
        return res;
    }

    // Feasible but the first pass failed: retry once with a longer budget.
    QpSettings retry = settings;
    retry.max_iterations = 4 * settings.max_iterations;
    ipm = run_ipm(P, problem.q, problem.E, problem.d, problem.A, problem.b, retry);
    res.iterations += ipm.iterations;
    if (ipm.converged) {
        res.x = ipm.x;
        res.eq_duals = ipm.y;
        res.ineq_duals = ipm.z;
        res.status = QpStatus::Optimal;
        if (settings.polish)
            try_polish(P, problem.q, problem.E, problem.d, problem.A, problem.b, res);
        res.objective = 0.5 * res.x.dot(P * res.x) + problem.q.dot(res.x) + problem.constant;
        return res;
    }
    res.status = QpStatus::NumericFailure;
    res.message = "interior-point iteration did not converge on a feasible problem";
    return res;
}

FeasibilityResult solve_feasibility(const SparseMat& E, const VectorXd& d, const SparseMat& A,
                                    const VectorXd& b, int num_vars, double infeasibility_tol) {
    const int n = num_vars;
    const int me = static_cast<int>(E.rows());
    const int mi = static_cast<int>(A.rows());
    // variables: [x, t, rp, rm];  min t + sum(rp) + sum(rm)
    // s.t. E x - rp + rm = d;  A x - t <= b;  t >= 0, rp >= 0, rm >= 0
    const int nv = n + 1 + 2 * me;

    QpProblem p1;
    p1.num_vars = nv;
    p1.P = SparseMat(nv, nv);
    p1.q = VectorXd::Zero(nv);
    p1.q[n] = 1.0;
    for (int i = 0; i < 2 * me; ++i) p1.q[n + 1 + i] = 1.0;

    {
        std::vector<Eigen::Triplet<double>> trip;
        for (int col = 0; col < E.outerSize(); ++col)
            for (SparseMat::InnerIterator it(E, col); it; ++it)
                trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        for (int i = 0; i < me; ++i) {
            trip.emplace_back(i, n + 1 + i, -1.0);
            trip.emplace_back(i, n + 1 + me + i, 1.0);
        }
        p1.E = SparseMat(me, nv);
        p1.E.setFromTriplets(trip.begin(), trip.end());
        p1.d = d;
    }
    {
        std::vector<Eigen::Triplet<double>> trip;
        for (int col = 0; col < A.outerSize(); ++col)
            for (SparseMat::InnerIterator it(A, col); it; ++it)
                trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        for (int i = 0; i < mi; ++i) trip.emplace_back(i, n, -1.0);
        const int extra = 1 + 2 * me;
        for (int i = 0; i < extra; ++i) trip.emplace_back(mi + i, n + i, -1.0);
        p1.A = SparseMat(mi + extra, nv);
        p1.A.setFromTriplets(trip.begin(), trip.end());
        p1.b = VectorXd::Zero(mi + extra);
        p1.b.head(mi) = b;
    }

    QpSettings s1;
    s1.polish = false;
    s1.max_iterations = 200;
    s1.eps_primal = 1e-10;
    s1.eps_dual = 1e-10;
    s1.eps_gap = 1e-11;
    const IpmOutcome out = run_ipm(p1.P, p1.q, p1.E, p1.d, p1.A, p1.b, s1);

    FeasibilityResult fr;
    fr.x = out.x.head(n);
    fr.min_slack_violation = out.x[n];
    for (int i = 0; i < 2 * me; ++i) fr.min_slack_violation += std::max(out.x[n + 1 + i], 0.0);
    fr.feasible = out.converged && fr.min_slack_violation <= infeasibility_tol;
    return fr;
}

}  // namespace plmpc
