#pragma once

#include <Eigen/Dense>
#include <vector>

#include "plmpc/model.hpp"
#include "plmpc/rng.hpp"

namespace plmpc {

/// Periodic stabilizing feedback u = K_t e for the error dynamics
/// Phi_t = A_t + B_t K_t.
struct FeedbackGainSchedule {
    std::vector<MatrixXd> K;  // T+1 gains, m x n
    MatrixXd Q_lqr;
    MatrixXd R_lqr;
    double monodromy_spectral_radius = 0.0;
};

/// Robust positive invariant outer approximation of the white-residual error
/// set, stored as Minkowski generators: per phase,
///   eps = scale * sum_k M_k * Box(residual_lo, residual_hi).
/// scale = 1/(1-alpha) from the contraction test. Zero generators means
/// eps = {0}.
struct RpiSet {
    std::vector<std::vector<MatrixXd>> generators;  // [phase][k], each n x d
    VectorXd residual_lo;
    VectorXd residual_hi;
    double alpha = 0.0;
    int horizon_s = 0;
    double scale = 1.0;

    int phase_count() const { return static_cast<int>(generators.size()); }
    int phase_of(int t) const { return phase_count() <= 1 ? 0 : t % phase_count(); }
    bool is_zero() const;

    /// Support function h_eps(direction) for the given phase.
    double support(int phase, const VectorXd& direction) const;

    /// Center of symmetry (offset caused by an asymmetric residual box).
    VectorXd center(int phase) const;

    /// Exact membership for n <= 3 via zonotope facet normals; `inflate`
    /// tests membership in (1+inflate)*eps.
    bool contains(int phase, const VectorXd& point, double inflate = 0.0) const;

    /// A random extreme-ish point: every residual generator at a random box
    /// vertex. Convex combinations of such points cover eps.
    VectorXd sample_extreme(int phase, Rng& rng) const;
};

/// Same shapes as the raw schedule; only the right-hand side shrinks.
struct TightenedConstraintSchedule {
    PolytopicConstraintSchedule schedule;
    std::vector<VectorXd> margins;  // per t, amount removed from each row of f
};

/// Backward periodic Riccati recursion repeated over periods until the value
/// schedule is stationary to 1e-9 per entry. For time-invariant models every
/// K_t equals the algebraic-Riccati gain. Throws if no convergence within 500
/// periods.
FeedbackGainSchedule lqr_gains(const PeriodicLtvModel& model, const MatrixXd& Q, const MatrixXd& R);

/// Rakovic-style (s, alpha) outer approximation: smallest s with
/// Phi^s D <= alpha D (support test over the facets of D = C W_r, C square
/// invertible), then eps = 1/(1-alpha) * sum_{k<s} Phi^k D. For periodic
/// closed loops the ordered products are accumulated per phase over whole
/// periods and the contraction is tested on the monodromy product; the built
/// family is then verified on sampled points.
RpiSet rpi_outer_approx(const std::vector<MatrixXd>& phi, const MatrixXd& C,
                        const VectorXd& residual_lo, const VectorXd& residual_hi,
                        double alpha_target = 0.05, int horizon_cap = 200);

/// f_bar_t[i] = f_t[i] - h_eps((F_t + G_t K_t) row i). Throws if any
/// tightened stage set becomes empty, listing the offending time steps.
TightenedConstraintSchedule tighten_constraints(const PolytopicConstraintSchedule& schedule,
                                                const FeedbackGainSchedule& gains,
                                                const RpiSet& rpi);

/// Spectral radius of the ordered product Phi_{T-1} ... Phi_0.
double monodromy_spectral_radius(const std::vector<MatrixXd>& phi);

}  // namespace plmpc
