#pragma once

// Direction-of-arrival tracking model on a uniform linear array: a single
// source whose angle performs a Gaussian random walk wrapped to the circle,
// observed through complex array snapshots. Provides steering vectors, the
// closed-form complex-Gaussian emission density and its parameter
// derivatives, the wrapped-Gaussian transition density and its derivatives,
// and a simulator.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "regimeml/common.hpp"
#include "regimeml/random.hpp"

namespace regimeml {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Parameters of the angle-tracking model: random-walk variance of the
/// angle (rad^2), source power, and per-sensor noise power.
struct DoaParams {
    double sigma_eta_sq = 0.0;
    double sigma_s_sq = 0.0;
    double sigma_eps_sq = 0.0;
};

inline void validate_doa_params(const DoaParams& p) {
    auto bad = [](double v) { return !(v > 0.0) || !std::isfinite(v); };
    if (bad(p.sigma_eta_sq)) throw std::invalid_argument("sigma_eta_sq must be positive and finite");
    if (bad(p.sigma_s_sq)) throw std::invalid_argument("sigma_s_sq must be positive and finite");
    if (bad(p.sigma_eps_sq)) throw std::invalid_argument("sigma_eps_sq must be positive and finite");
}

/// Complex snapshots from a d-sensor array, one vector per time step.
struct ArraySnapshots {
    int sensors = 0;
    std::vector<ComplexVector> y;

    int size() const { return static_cast<int>(y.size()); }
};

/// Array response to a source at angle w: component j is e^{i j w}. The
/// angle is reduced mod 2pi first, so the response is periodic in w by
/// construction.
inline ComplexVector steering_vector(double w, int d) {
    if (d < 1) throw std::invalid_argument("steering_vector: d must be >= 1");
    const double wr = wrap_angle(w);
    ComplexVector a(d);
    for (int j = 0; j < d; ++j) a(j) = std::polar(1.0, j * wr);
    return a;
}

/// Inner product a(w)^H y, computed in O(d) without building a(w).
inline Complex steering_inner(double w, const ComplexVector& y) {
    Complex acc(0.0, 0.0);
    const double wr = wrap_angle(w);
    const int d = static_cast<int>(y.size());
    for (int j = 0; j < d; ++j) acc += std::polar(1.0, -j * wr) * y(j);
    return acc;
}

/// |a(w)^H y|^2, the statistic through which the emission density depends
/// on the angle.
inline double steering_power(double w, const ComplexVector& y) {
    return std::norm(steering_inner(w, y));
}

/// Sum over snapshots of y^H y (a data constant used by the estimators).
inline double total_power(const ArraySnapshots& data) {
    double s = 0.0;
    for (const auto& y : data.y) s += y.squaredNorm();
    return s;
}

/// Emission log density expressed through the two scalar statistics
/// u = y^H y and m = |a(w)^H y|^2. With S = sigma_s_sq, A = sigma_eps_sq,
/// B = dS + A the closed form is
///   log g = -d log pi - (d-1) log A - log B - u/A + S m / (A B).
inline double emission_log_density_from_stats(const DoaParams& p, int d, double u, double m) {
    const double S = p.sigma_s_sq;
    const double A = p.sigma_eps_sq;
    const double B = d * S + A;
    return -d * std::log(kPi) - (d - 1) * std::log(A) - std::log(B) - u / A + S * m / (A * B);
}

/// Closed-form emission log density of a snapshot given the source angle.
inline double emission_log_density(const DoaParams& p, const ComplexVector& y, double w) {
    return emission_log_density_from_stats(p, static_cast<int>(y.size()), y.squaredNorm(),
                                           steering_power(w, y));
}

/// First and second partial derivatives of the emission log density with
/// respect to (sigma_s_sq, sigma_eps_sq), written S and A below.
struct EmissionDerivs {
    double d_s = 0.0;
    double d_a = 0.0;
    double d_ss = 0.0;
    double d_sa = 0.0;
    double d_aa = 0.0;
};

inline EmissionDerivs emission_derivs_from_stats(const DoaParams& p, int d, double u, double m) {
    const double S = p.sigma_s_sq;
    const double A = p.sigma_eps_sq;
    const double B = d * S + A;
    const double B2 = B * B;
    const double A2 = A * A;
    EmissionDerivs out;
    out.d_s = -d / B + m / B2;
    out.d_a = -(d - 1) / A - 1.0 / B + u / A2 - S * m * (A + B) / (A2 * B2);
    out.d_ss = d * static_cast<double>(d) / B2 - 2.0 * m * d / (B2 * B);
    out.d_sa = d / B2 - 2.0 * m / (B2 * B);
    out.d_aa = (d - 1) / A2 + 1.0 / B2 - 2.0 * u / (A2 * A) - S * m * (2.0 / (A2 * B2) - 2.0 * (A + B) * (A + B) / (A2 * A * B2 * B));
    return out;
}

inline EmissionDerivs emission_derivs(const DoaParams& p, const ComplexVector& y, double w) {
    return emission_derivs_from_stats(p, static_cast<int>(y.size()), y.squaredNorm(),
                                      steering_power(w, y));
}

/// Snapshot covariance Sigma(w) = S a(w) a(w)^H + A I.
inline ComplexMatrix snapshot_covariance(const DoaParams& p, double w, int d) {
    ComplexVector a = steering_vector(w, d);
    ComplexMatrix sigma = p.sigma_s_sq * (a * a.adjoint());
    sigma += p.sigma_eps_sq * ComplexMatrix::Identity(d, d);
    return sigma;
}

/// Closed-form inverse via rank-one downdate:
///   Sigma^{-1} = (1/A) (I - (S / (dS + A)) a a^H).
inline ComplexMatrix snapshot_covariance_inverse(const DoaParams& p, double w, int d) {
    ComplexVector a = steering_vector(w, d);
    const double B = d * p.sigma_s_sq + p.sigma_eps_sq;
    ComplexMatrix inv = -(p.sigma_s_sq / B) * (a * a.adjoint());
    inv += ComplexMatrix::Identity(d, d);
    inv /= p.sigma_eps_sq;
    return inv;
}

/// Number of images retained on each side when summing the wrapped density:
/// the smallest L with 2 pi L >= 8 sqrt(v), floored at 3. The first omitted
/// image then sits more than eight standard deviations from the increment
/// mean, so the discarded tail is below 1e-12 of the retained mass for every
/// positive v.
inline int wrapped_truncation_terms(double sigma_eta_sq) {
    int l = static_cast<int>(std::ceil(8.0 * std::sqrt(sigma_eta_sq) / kTwoPi));
    return l < 3 ? 3 : l;
}

/// Log density at x' of a Gaussian step of variance v from x, wrapped to
/// [0, 2pi): log sum_{l=-L..L} N(x' - x + 2 pi l; 0, v). The increment is
/// folded with IEEE remainder (exact) and the images are summed in +-l
/// pairs, which makes the density exactly symmetric in (x, x').
inline double wrapped_transition_log_density(double sigma_eta_sq, double x, double x_next) {
    const double v = sigma_eta_sq;
    const int L = wrapped_truncation_terms(v);
    const double delta = std::remainder(x_next - x, kTwoPi);
    const double base = -0.5 * std::log(kTwoPi * v);
    auto term = [&](int l) {
        double dl = delta + kTwoPi * l;
        return base - dl * dl / (2.0 * v);
    };
    double best = term(0);
    for (int l = 1; l <= L; ++l) {
        best = std::max(best, term(l));
        best = std::max(best, term(-l));
    }
    double s = std::exp(term(0) - best);
    for (int l = 1; l <= L; ++l) s += std::exp(term(l) - best) + std::exp(term(-l) - best);
    return best + std::log(s);
}

/// Wrapped transition log density together with its first and second
/// derivatives in the variance v. Each image term h_l = log N(delta_l; 0, v)
/// has h_l' = -1/(2v) + delta_l^2/(2v^2) and h_l'' = 1/(2v^2) - delta_l^2/v^3;
/// the mixture derivatives follow from the softmax weights.
struct WrappedDensity {
    double log_density = 0.0;
    double d_v = 0.0;
    double d_vv = 0.0;
};

inline WrappedDensity wrapped_transition_derivs(double sigma_eta_sq, double x, double x_next) {
    const double v = sigma_eta_sq;
    const int L = wrapped_truncation_terms(v);
    const double delta = std::remainder(x_next - x, kTwoPi);
    const double base = -0.5 * std::log(kTwoPi * v);

    std::vector<double> logs(2 * L + 1), d1(2 * L + 1), d2(2 * L + 1);
    double best = kNegInf;
    for (int l = -L; l <= L; ++l) {
        double dl = delta + kTwoPi * l;
        double dl2 = dl * dl;
        int i = l + L;
        logs[i] = base - dl2 / (2.0 * v);
        d1[i] = -0.5 / v + dl2 / (2.0 * v * v);
        d2[i] = 0.5 / (v * v) - dl2 / (v * v * v);
        if (logs[i] > best) best = logs[i];
    }
    double mass = 0.0, first = 0.0, second = 0.0;
    for (int i = 0; i < 2 * L + 1; ++i) {
        double w = std::exp(logs[i] - best);
        mass += w;
        first += w * d1[i];
        second += w * (d2[i] + d1[i] * d1[i]);
    }
    first /= mass;
    second /= mass;
    WrappedDensity out;
    out.log_density = best + std::log(mass);
    out.d_v = first;
    out.d_vv = second - first * first;
    return out;
}

/// One latent/observed draw from the model.
struct DoaSimulation {
    std::vector<double> unwrapped;  ///< W_k, the raw random walk (diagnostics)
    std::vector<double> angles;     ///< X_k = W_k mod 2pi, in [0, 2pi)
    ArraySnapshots snapshots;
};

/// Simulate n steps: W_k = W_{k-1} + eta_k from w0, snapshots
/// Y_k = S_k a(X_k) + eps_k with circular complex Gaussian S_k
/// (E|S_k|^2 = sigma_s_sq) and noise (E eps eps^H = sigma_eps_sq I).
inline DoaSimulation simulate_doa(const DoaParams& p, int n, int d, double w0, Rng& rng) {
    validate_doa_params(p);
    if (n < 1) throw std::invalid_argument("simulate_doa: n must be >= 1");
    if (d < 2) throw std::invalid_argument("simulate_doa: d must be >= 2");
    DoaSimulation out;
    out.unwrapped.resize(n);
    out.angles.resize(n);
    out.snapshots.sensors = d;
    out.snapshots.y.resize(n);
    const double step_sd = std::sqrt(p.sigma_eta_sq);
    const double s_scale = std::sqrt(p.sigma_s_sq / 2.0);
    const double e_scale = std::sqrt(p.sigma_eps_sq / 2.0);
    double w = w0;
    for (int k = 0; k < n; ++k) {
        w += step_sd * rng.normal();
        out.unwrapped[k] = w;
        double x = wrap_angle(w);
        out.angles[k] = x;
        Complex s(s_scale * rng.normal(), s_scale * rng.normal());
        ComplexVector yk(d);
        for (int j = 0; j < d; ++j) {
            Complex noise(e_scale * rng.normal(), e_scale * rng.normal());
            yk(j) = s * std::polar(1.0, j * x) + noise;
        }
        out.snapshots.y[k] = std::move(yk);
    }
    return out;
}

}  // namespace regimeml
