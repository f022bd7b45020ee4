#include "plmpc/tube.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "plmpc/qp.hpp"

namespace plmpc {

namespace {

double box_support(const MatrixXd& M, const VectorXd& lo, const VectorXd& hi,
                   const VectorXd& direction) {
    // support of M * Box(lo, hi) along `direction`
    const VectorXd mid = 0.5 * (lo + hi);
    const VectorXd hw = 0.5 * (hi - lo);
    const VectorXd proj = M.transpose() * direction;
    return proj.dot(mid) + proj.cwiseAbs().dot(hw);
}

}  // namespace

double monodromy_spectral_radius(const std::vector<MatrixXd>& phi) {
    MatrixXd prod = MatrixXd::Identity(phi[0].rows(), phi[0].cols());
    for (const auto& p : phi) prod = p * prod;
    return prod.eigenvalues().cwiseAbs().maxCoeff();
}

FeedbackGainSchedule lqr_gains(const PeriodicLtvModel& model, const MatrixXd& Q, const MatrixXd& R) {
    model.validate();
    const int T = model.period;
    const int n = model.state_dim();
    if (Q.rows() != n || Q.cols() != n) throw std::invalid_argument("lqr_gains: Q must be n x n");
    if (R.rows() != model.input_dim() || R.cols() != model.input_dim())
        throw std::invalid_argument("lqr_gains: R must be m x m");

    // Backward recursion over repeated periods. P[t] is the value matrix at
    // phase t; P wraps around the period end.
    std::vector<MatrixXd> P(T + 1, Q);
    std::vector<MatrixXd> K(T + 1);
    constexpr int kMaxPeriods = 500;
    constexpr double kTol = 1e-9;

    for (int period = 0; period < kMaxPeriods; ++period) {
        const std::vector<MatrixXd> P_prev = P;
        P[T] = P[0];  // periodic wrap
        for (int t = T - 1; t >= 0; --t) {
            const MatrixXd& At = model.A[t];
            const MatrixXd& Bt = model.B[t];
            const MatrixXd S = R + Bt.transpose() * P[t + 1] * Bt;
            K[t] = -S.ldlt().solve(Bt.transpose() * P[t + 1] * At);
            P[t] = Q + At.transpose() * P[t + 1] * (At + Bt * K[t]);
            P[t] = 0.5 * (P[t] + P[t].transpose());
        }
        double change = 0.0;
        for (int t = 0; t <= T; ++t) change = std::max(change, (P[t] - P_prev[t]).cwiseAbs().maxCoeff());
        if (period > 0 && change < kTol) {
            FeedbackGainSchedule out;
            out.K = K;
            out.K[T] = K[0];  // phase T is phase 0
            out.Q_lqr = Q;
            out.R_lqr = R;
            std::vector<MatrixXd> phi(T);
            for (int t = 0; t < T; ++t) phi[t] = model.A[t] + model.B[t] * out.K[t];
            out.monodromy_spectral_radius = monodromy_spectral_radius(phi);
            if (out.monodromy_spectral_radius >= 1.0)
                throw std::runtime_error("lqr_gains: closed loop not stable (monodromy radius " +
                                         std::to_string(out.monodromy_spectral_radius) + ")");
            return out;
        }
    }
    throw std::runtime_error("lqr_gains: Riccati recursion did not converge within 500 periods; "
                             "the pair (A_t, B_t) may not be stabilizable");
}

bool RpiSet::is_zero() const {
    for (const auto& phase : generators)
        if (!phase.empty()) return false;
    return true;
}

double RpiSet::support(int phase, const VectorXd& direction) const {
    if (generators.empty()) return 0.0;
    double h = 0.0;
    for (const auto& M : generators[phase]) h += box_support(M, residual_lo, residual_hi, direction);
    return scale * h;
}

VectorXd RpiSet::center(int phase) const {
    const int n = static_cast<int>(residual_lo.size());
    if (generators.empty()) return VectorXd::Zero(n);
    const VectorXd mid = 0.5 * (residual_lo + residual_hi);
    VectorXd c = VectorXd::Zero(generators[phase].empty() ? n : generators[phase][0].rows());
    for (const auto& M : generators[phase]) c += M * mid;
    return scale * c;
}

bool RpiSet::contains(int phase, const VectorXd& point, double inflate) const {
    if (generators.empty() || generators[phase].empty())
        return point.cwiseAbs().maxCoeff() <= 1e-12;
    const int n = static_cast<int>(generators[phase][0].rows());
    const VectorXd c = center(phase);
    const VectorXd y = point / (1.0 + inflate) - c;
    const VectorXd hw = 0.5 * (residual_hi - residual_lo);

    // stacked scaled symmetric generator columns G (n x g)
    std::vector<VectorXd> cols;
    for (const auto& M : generators[phase])
        for (int j = 0; j < M.cols(); ++j)
            if (hw[j] > 0.0) cols.push_back(scale * hw[j] * M.col(j));
    const int g = static_cast<int>(cols.size());
    MatrixXd G(n, g);
    for (int j = 0; j < g; ++j) G.col(j) = cols[j];

    auto sym_support = [&](const VectorXd& a) { return (G.transpose() * a).cwiseAbs().sum(); };

    const double tol = 1e-9 * (1.0 + y.cwiseAbs().maxCoeff());

    // membership <=> min over |lambda|<=1 of ||G lambda - y|| reaches ~0;
    // accelerated projected gradient, with a support-function certificate to
    // prove exclusion early (a' y > h(a) along the residual direction)
    VectorXd lambda = VectorXd::Zero(g);
    VectorXd momentum = lambda;
    // Lipschitz constant of the gradient: lambda_max(G G') via the small
    // n x n Gram matrix
    const MatrixXd gram = G * G.transpose();
    const double L =
        std::max(Eigen::SelfAdjointEigenSolver<MatrixXd>(gram).eigenvalues().maxCoeff(), 1e-300);
    double t_acc = 1.0;
    for (int iter = 0; iter < 20000; ++iter) {
        const VectorXd residual = G * momentum - y;
        const VectorXd grad = G.transpose() * residual;
        VectorXd next = (momentum - grad / L).cwiseMax(-1.0).cwiseMin(1.0);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
        momentum = next + ((t_acc - 1.0) / t_next) * (next - lambda);
        lambda = std::move(next);
        t_acc = t_next;

        if (iter % 25 == 0) {
            const VectorXd r = y - G * lambda;
            const double dist = r.cwiseAbs().maxCoeff();
            if (dist <= tol) return true;
            if (r.dot(y) > sym_support(r) + tol * (1.0 + r.cwiseAbs().maxCoeff())) return false;
        }
    }
    return (y - G * lambda).cwiseAbs().maxCoeff() <= 10.0 * tol;
}

VectorXd RpiSet::sample_extreme(int phase, Rng& rng) const {
    const int n = static_cast<int>(residual_lo.size());
    if (generators.empty() || generators[phase].empty()) {
        return VectorXd::Zero(generators.empty() || generators[0].empty()
                                  ? n
                                  : generators[phase][0].rows());
    }
    VectorXd point = VectorXd::Zero(generators[phase][0].rows());
    for (const auto& M : generators[phase]) {
        VectorXd w(M.cols());
        for (int j = 0; j < M.cols(); ++j)
            w[j] = rng.uniform01() < 0.5 ? residual_lo[j] : residual_hi[j];
        point += M * w;
    }
    return scale * point;
}

RpiSet rpi_outer_approx(const std::vector<MatrixXd>& phi, const MatrixXd& C,
                        const VectorXd& residual_lo, const VectorXd& residual_hi,
                        double alpha_target, int horizon_cap) {
    if (phi.empty()) throw std::invalid_argument("rpi_outer_approx: empty Phi sequence");
    if (alpha_target <= 0.0 || alpha_target >= 1.0)
        throw std::invalid_argument("rpi_outer_approx: alpha_target must lie in (0,1)");
    const int n = static_cast<int>(phi[0].rows());
    const int d = static_cast<int>(C.cols());
    if (residual_lo.size() != d || residual_hi.size() != d)
        throw std::invalid_argument("rpi_outer_approx: residual bounds must match C columns");
    for (int j = 0; j < d; ++j)
        if (residual_lo[j] > 0.0 || residual_hi[j] < 0.0)
            throw std::invalid_argument("rpi_outer_approx: residual box must contain 0");

    RpiSet out;
    out.residual_lo = residual_lo;
    out.residual_hi = residual_hi;

    const VectorXd hw = 0.5 * (residual_hi - residual_lo);
    if (hw.cwiseAbs().maxCoeff() == 0.0 && residual_lo.cwiseAbs().maxCoeff() == 0.0) {
        out.generators.assign(phi.size() == 1 ? 1 : phi.size(), {});
        out.alpha = 0.0;
        out.horizon_s = 0;
        out.scale = 1.0;
        return out;
    }
    if (hw.minCoeff() == 0.0)
        throw std::runtime_error("rpi_outer_approx: mixed zero and nonzero residual channels "
                                 "are not supported (disturbance set is degenerate)");
    if (C.rows() != C.cols())
        throw std::runtime_error("rpi_outer_approx: exact containment test needs square C");
    Eigen::FullPivLU<MatrixXd> lu(C);
    if (!lu.isInvertible())
        throw std::runtime_error("rpi_outer_approx: exact containment test needs invertible C");
    const MatrixXd Cinv = lu.inverse();

    // alpha(M) = smallest alpha with M * D <= alpha * D over the facets of
    // the parallelotope D = C * Box. A zero bound pins that facet of alpha*D
    // at the origin, so any outward support makes containment impossible.
    auto containment_alpha = [&](const MatrixXd& M) {
        double alpha = 0.0;
        for (int i = 0; i < n; ++i) {
            const VectorXd a = Cinv.row(i).transpose();
            const double up = box_support(M * C, residual_lo, residual_hi, a);
            const double dn = box_support(M * C, residual_lo, residual_hi, -a);
            // alpha * hi_i must cover `up`; -alpha * lo_i must cover `dn`
            if (residual_hi[i] > 0.0) alpha = std::max(alpha, up / residual_hi[i]);
            else if (up > 0.0) return std::numeric_limits<double>::infinity();
            if (residual_lo[i] < 0.0) alpha = std::max(alpha, dn / (-residual_lo[i]));
            else if (dn > 0.0) return std::numeric_limits<double>::infinity();
        }
        return alpha;
    };

    if (phi.size() == 1) {
        // time-invariant closed loop: classical (s, alpha) search
        const MatrixXd& Phi = phi[0];
        MatrixXd Ms = Phi;  // Phi^s
        int s = 1;
        double alpha = containment_alpha(Ms);
        while (alpha > alpha_target) {
            if (++s > horizon_cap)
                throw std::runtime_error(
                    "rpi_outer_approx: horizon cap " + std::to_string(horizon_cap) +
                    " reached at alpha " + std::to_string(alpha) +
                    "; raise alpha_target or the cap");
            Ms = Phi * Ms;
            alpha = containment_alpha(Ms);
        }
        out.alpha = alpha;
        out.horizon_s = s;
        out.scale = 1.0 / (1.0 - alpha);
        out.generators.resize(1);
        MatrixXd Mk = MatrixXd::Identity(n, n);
        for (int k = 0; k < s; ++k) {
            out.generators[0].push_back(Mk * C);
            Mk = Phi * Mk;
        }
        return out;
    }

    // Periodic closed loop: accumulate ordered products per phase over whole
    // periods; contraction tested on the per-phase monodromy product.
    const int T = static_cast<int>(phi.size());
    std::vector<MatrixXd> monodromy(T);
    for (int t = 0; t < T; ++t) {
        MatrixXd prod = MatrixXd::Identity(n, n);
        for (int k = 1; k <= T; ++k) prod = prod * phi[((t - k) % T + T) % T];
        monodromy[t] = prod;
    }
    int periods = 1;
    double alpha = 0.0;
    std::vector<MatrixXd> mono_pow = monodromy;
    while (true) {
        alpha = 0.0;
        for (int t = 0; t < T; ++t) alpha = std::max(alpha, containment_alpha(mono_pow[t]));
        if (alpha <= alpha_target) break;
        if (++periods * T > horizon_cap)
            throw std::runtime_error("rpi_outer_approx: horizon cap reached in periodic mode; "
                                     "raise alpha_target or the cap");
        for (int t = 0; t < T; ++t) mono_pow[t] = mono_pow[t] * monodromy[t];
    }
    out.alpha = alpha;
    out.horizon_s = periods * T;
    out.scale = 1.0 / (1.0 - alpha);
    out.generators.resize(T);
    for (int t = 0; t < T; ++t) {
        MatrixXd prod = MatrixXd::Identity(n, n);
        for (int k = 1; k <= periods * T; ++k) {
            out.generators[t].push_back(prod * C);
            prod = prod * phi[((t - k) % T + T) % T];
        }
    }

    // The periodic inflation argument is heuristic for non-commuting
    // products; verify invariance on sampled extreme points before
    // returning.
    Rng rng(0x52504956ULL);
    for (int trial = 0; trial < 2000; ++trial) {
        const int t = trial % T;
        const VectorXd e = out.sample_extreme(t, rng);
        VectorXd w(d);
        for (int j = 0; j < d; ++j)
            w[j] = rng.uniform01() < 0.5 ? residual_lo[j] : residual_hi[j];
        const VectorXd next = phi[t] * e + C * w;
        if (!out.contains((t + 1) % T, next, 1e-8))
            throw std::runtime_error("rpi_outer_approx: periodic invariance verification failed; "
                                     "lower alpha_target");
    }
    return out;
}

TightenedConstraintSchedule tighten_constraints(const PolytopicConstraintSchedule& schedule,
                                                const FeedbackGainSchedule& gains,
                                                const RpiSet& rpi) {
    TightenedConstraintSchedule out;
    out.schedule = schedule;
    out.margins.resize(schedule.f.size());
    std::vector<int> empty_steps;
    for (std::size_t t = 0; t < schedule.f.size(); ++t) {
        const MatrixXd rows = schedule.F[t] + schedule.G[t] * gains.K[t];
        VectorXd margin(schedule.f[t].size());
        for (int i = 0; i < margin.size(); ++i)
            margin[i] = rpi.support(rpi.phase_of(static_cast<int>(t)), rows.row(i).transpose());
        out.margins[t] = margin;
        out.schedule.f[t] = schedule.f[t] - margin;

        if (margin.cwiseAbs().maxCoeff() > 0.0) {
            const int n = static_cast<int>(schedule.F[t].cols());
            const int m = static_cast<int>(schedule.G[t].cols());
            SparseMat A(static_cast<int>(margin.size()), n + m);
            std::vector<Eigen::Triplet<double>> trip;
            for (int i = 0; i < margin.size(); ++i) {
                for (int j = 0; j < n; ++j)
                    if (schedule.F[t](i, j) != 0.0) trip.emplace_back(i, j, schedule.F[t](i, j));
                for (int j = 0; j < m; ++j)
                    if (schedule.G[t](i, j) != 0.0) trip.emplace_back(i, n + j, schedule.G[t](i, j));
            }
            A.setFromTriplets(trip.begin(), trip.end());
            const auto feas = solve_feasibility(SparseMat(0, n + m), VectorXd(), A,
                                                out.schedule.f[t], n + m);
            if (!feas.feasible) empty_steps.push_back(static_cast<int>(t));
        }
    }
    if (!empty_steps.empty()) {
        std::string msg = "tighten_constraints: tightened set empty at t =";
        for (int t : empty_steps) msg += " " + std::to_string(t);
        throw std::runtime_error(msg);
    }
    return out;
}

}  // namespace plmpc
