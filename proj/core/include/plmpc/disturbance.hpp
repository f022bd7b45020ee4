#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "plmpc/model.hpp"

namespace plmpc {

/// One periodic waveform the correlated disturbance is expanded over.
/// Triangle ramps 0 -> 1 -> 0 over [t1, t2, t3); square is the indicator of
/// [t1, t2). Window bounds are absolute times (fractions of the period may be
/// non-integer; comparisons are t >= bound).
struct WaveformAtom {
    enum class Kind { Constant, Sine, Cosine, Triangle, Square };
    Kind kind = Kind::Constant;
    int harmonic = 0;     // q, for Sine/Cosine
    double t1 = 0.0, t2 = 0.0, t3 = 0.0;

    double value(int t, int period) const;

    static WaveformAtom constant() { return {}; }
    static WaveformAtom sine(int q) { return {Kind::Sine, q, 0, 0, 0}; }
    static WaveformAtom cosine(int q) { return {Kind::Cosine, q, 0, 0, 0}; }
    static WaveformAtom triangle(double rise_at, double apex_at, double zero_at) {
        return {Kind::Triangle, 0, rise_at, apex_at, zero_at};
    }
    static WaveformAtom square(double start, double end) { return {Kind::Square, 0, start, end, 0}; }
};

/// Per-channel basis expansion of the correlated disturbance part plus the
/// bounded white residual intervals. theta stacks channel coefficient blocks
/// in channel order.
struct DisturbanceBasis {
    int period = 0;
    int truncation_order = 0;  // M, the largest harmonic index used
    std::vector<std::vector<WaveformAtom>> channels;
    VectorXd residual_lo;  // one interval per channel, must contain 0
    VectorXd residual_hi;

    int channel_count() const { return static_cast<int>(channels.size()); }
    int coefficient_count() const;
    int channel_offset(int channel) const;

    /// Checks window sanity, residual intervals and numeric linear
    /// independence of each channel's atoms over t = 0..T-1.
    void validate() const;
};

struct ThetaSample {
    VectorXd coefficients;
};

struct ThetaDomain {
    VectorXd lo;
    VectorXd hi;

    void validate() const;
    VectorXd center() const { return 0.5 * (lo + hi); }
    bool contains(const VectorXd& theta, double tol = 0.0) const;
    /// Box scaled about its center by factor c in [0, 1].
    ThetaDomain scaled(double c) const;
    /// All 2^k corner points (k = coefficient count).
    std::vector<VectorXd> vertices() const;
};

struct FitResult {
    ThetaSample theta;
    std::vector<VectorXd> residuals;  // length T+1
    double residual_max_abs = 0.0;
};

/// Deterministic correlated part w_{theta,t}; linear in theta.
VectorXd evaluate_correlated(const DisturbanceBasis& basis, const ThetaSample& theta, int t);

/// Matrix Psi_t with w_{theta,t} = Psi_t * theta (atom values arranged per
/// channel block). Useful for range/support computations.
MatrixXd correlated_coefficient_matrix(const DisturbanceBasis& basis, int t);

/// Least-squares projection of a length-(T+1) realization onto the atom span
/// over t = 0..T-1. Throws on a rank-deficient atom Gram matrix.
FitResult fit_coefficients(const DisturbanceBasis& basis, const std::vector<VectorXd>& realization);

/// Componentwise uniform sample from the domain box; reproducible by seed.
ThetaSample sample_theta(const ThetaDomain& domain, std::uint64_t seed);

/// Correlated part plus per-step uniform residual within the basis residual
/// bounds. Residual streams are drawn per channel so channel order never
/// affects the draws.
std::vector<VectorXd> generate_realization(const DisturbanceBasis& basis, const ThetaSample& theta,
                                           std::uint64_t seed);

}  // namespace plmpc
