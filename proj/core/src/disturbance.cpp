#include "plmpc/disturbance.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "plmpc/rng.hpp"

namespace plmpc {

namespace {

void require(bool cond, const std::string& message) {
    if (!cond) throw std::invalid_argument(message);
}

}  // namespace

double WaveformAtom::value(int t, int period) const {
    const double tau = static_cast<double>(t);
    const double T = static_cast<double>(period);
    switch (kind) {
        case Kind::Constant:
            return 1.0;
        case Kind::Sine:
            return std::sin(2.0 * std::numbers::pi * harmonic * tau / T);
        case Kind::Cosine:
            return std::cos(2.0 * std::numbers::pi * harmonic * tau / T);
        case Kind::Triangle:
            if (tau >= t1 && tau < t2) return (tau - t1) / (t2 - t1);
            if (tau >= t2 && tau < t3) return (t3 - tau) / (t3 - t2);
            return 0.0;
        case Kind::Square:
            return (tau >= t1 && tau < t2) ? 1.0 : 0.0;
    }
    return 0.0;
}

int DisturbanceBasis::coefficient_count() const {
    int n = 0;
    for (const auto& ch : channels) n += static_cast<int>(ch.size());
    return n;
}

int DisturbanceBasis::channel_offset(int channel) const {
    int n = 0;
    for (int c = 0; c < channel; ++c) n += static_cast<int>(channels[c].size());
    return n;
}

void DisturbanceBasis::validate() const {
    require(period >= 2, "basis: period must be >= 2");
    require(!channels.empty(), "basis: at least one channel");
    require(truncation_order >= 0, "basis: truncation order M must be >= 0");
    require(residual_lo.size() == channel_count() && residual_hi.size() == channel_count(),
            "basis: residual bounds must have one interval per channel");
    for (int c = 0; c < channel_count(); ++c) {
        require(residual_lo[c] <= 0.0 && residual_hi[c] >= 0.0 &&
                    std::isfinite(residual_lo[c]) && std::isfinite(residual_hi[c]),
                "basis: residual interval of channel " + std::to_string(c) + " must contain 0");
        for (const auto& atom : channels[c]) {
            if (atom.kind == WaveformAtom::Kind::Sine || atom.kind == WaveformAtom::Kind::Cosine)
                require(atom.harmonic >= 1 && atom.harmonic <= truncation_order,
                        "basis: harmonic index exceeds truncation order");
            if (atom.kind == WaveformAtom::Kind::Triangle)
                require(atom.t1 < atom.t2 && atom.t2 < atom.t3,
                        "basis: triangle windows must be increasing");
            if (atom.kind == WaveformAtom::Kind::Square)
                require(atom.t1 < atom.t2, "basis: square window must be nonempty");
        }
        // numeric linear independence of this channel's atoms over one period
        const int na = static_cast<int>(channels[c].size());
        if (na == 0) continue;
        MatrixXd atom_values(period, na);
        for (int t = 0; t < period; ++t)
            for (int a = 0; a < na; ++a) atom_values(t, a) = channels[c][a].value(t, period);
        Eigen::JacobiSVD<MatrixXd> svd(atom_values);
        const double cutoff = 1e-10 * svd.singularValues()[0];
        require(svd.singularValues().minCoeff() > cutoff,
                "basis: atoms of channel " + std::to_string(c) + " are linearly dependent");
    }
}

void ThetaDomain::validate() const {
    require(lo.size() == hi.size() && lo.size() > 0, "theta domain: bound lengths");
    for (int i = 0; i < lo.size(); ++i) {
        require(lo[i] <= hi[i], "theta domain: lower bound exceeds upper at index " +
                                    std::to_string(i));
        require(std::isfinite(lo[i]) && std::isfinite(hi[i]), "theta domain: box must be bounded");
    }
}

bool ThetaDomain::contains(const VectorXd& theta, double tol) const {
    if (theta.size() != lo.size()) return false;
    for (int i = 0; i < lo.size(); ++i)
        if (theta[i] < lo[i] - tol || theta[i] > hi[i] + tol) return false;
    return true;
}

ThetaDomain ThetaDomain::scaled(double c) const {
    const VectorXd mid = center();
    ThetaDomain out;
    out.lo = mid + c * (lo - mid);
    out.hi = mid + c * (hi - mid);
    return out;
}

std::vector<VectorXd> ThetaDomain::vertices() const {
    const int k = static_cast<int>(lo.size());
    require(k <= 20, "theta domain: vertex enumeration limited to 20 coefficients");
    std::vector<VectorXd> out;
    out.reserve(std::size_t{1} << k);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
        VectorXd v(k);
        for (int i = 0; i < k; ++i) v[i] = (mask >> i) & 1 ? hi[i] : lo[i];
        out.push_back(std::move(v));
    }
    return out;
}

VectorXd evaluate_correlated(const DisturbanceBasis& basis, const ThetaSample& theta, int t) {
    require(theta.coefficients.size() == basis.coefficient_count(),
            "evaluate_correlated: theta has " + std::to_string(theta.coefficients.size()) +
                " coefficients, basis expects " + std::to_string(basis.coefficient_count()));
    VectorXd w(basis.channel_count());
    int offset = 0;
    for (int c = 0; c < basis.channel_count(); ++c) {
        double v = 0.0;
        for (const auto& atom : basis.channels[c]) v += theta.coefficients[offset++] * atom.value(t, basis.period);
        w[c] = v;
    }
    return w;
}

MatrixXd correlated_coefficient_matrix(const DisturbanceBasis& basis, int t) {
    MatrixXd psi = MatrixXd::Zero(basis.channel_count(), basis.coefficient_count());
    int offset = 0;
    for (int c = 0; c < basis.channel_count(); ++c)
        for (const auto& atom : basis.channels[c]) psi(c, offset++) = atom.value(t, basis.period);
    return psi;
}

FitResult fit_coefficients(const DisturbanceBasis& basis, const std::vector<VectorXd>& realization) {
    const int T = basis.period;
    require(static_cast<int>(realization.size()) == T + 1,
            "fit_coefficients: realization must have T+1 samples");

    FitResult out;
    out.theta.coefficients = VectorXd::Zero(basis.coefficient_count());
    int offset = 0;
    for (int c = 0; c < basis.channel_count(); ++c) {
        const int na = static_cast<int>(basis.channels[c].size());
        if (na == 0) continue;
        MatrixXd atom_values(T, na);
        VectorXd samples(T);
        for (int t = 0; t < T; ++t) {
            samples[t] = realization[t][c];
            for (int a = 0; a < na; ++a) atom_values(t, a) = basis.channels[c][a].value(t, T);
        }
        Eigen::ColPivHouseholderQR<MatrixXd> qr(atom_values);
        if (qr.rank() < na)
            throw std::invalid_argument("fit_coefficients: rank-deficient atom matrix in channel " +
                                        std::to_string(c));
        out.theta.coefficients.segment(offset, na) = qr.solve(samples);
        offset += na;
    }
    out.residuals.resize(T + 1);
    for (int t = 0; t <= T; ++t) {
        out.residuals[t] = realization[t] - evaluate_correlated(basis, out.theta, t);
        out.residual_max_abs = std::max(out.residual_max_abs, out.residuals[t].cwiseAbs().maxCoeff());
    }
    return out;
}

ThetaSample sample_theta(const ThetaDomain& domain, std::uint64_t seed) {
    domain.validate();
    Rng rng(derive_seed(seed, {0x7468657461ULL}));  // "theta"
    ThetaSample out;
    out.coefficients.resize(domain.lo.size());
    for (int i = 0; i < domain.lo.size(); ++i)
        out.coefficients[i] = rng.uniform(domain.lo[i], domain.hi[i]);
    return out;
}

std::vector<VectorXd> generate_realization(const DisturbanceBasis& basis, const ThetaSample& theta,
                                           std::uint64_t seed) {
    const int T = basis.period;
    std::vector<VectorXd> w(T + 1);
    for (int t = 0; t <= T; ++t) w[t] = evaluate_correlated(basis, theta, t);
    for (int c = 0; c < basis.channel_count(); ++c) {
        if (basis.residual_lo[c] == 0.0 && basis.residual_hi[c] == 0.0) continue;
        Rng rng(derive_seed(seed, {0x726573696475ULL, static_cast<std::uint64_t>(c)}));  // "residu", c
        for (int t = 0; t <= T; ++t) w[t][c] += rng.uniform(basis.residual_lo[c], basis.residual_hi[c]);
    }
    return w;
}

}  // namespace plmpc
