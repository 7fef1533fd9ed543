#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "regimeml/common.hpp"
#include "regimeml/random.hpp"

namespace regimeml {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Autoregression of order `order` whose coefficients and noise scale switch
/// with a finite latent regime chain.
///
/// Regimes live in {0, ..., num_regimes-1} and move by the row-stochastic
/// `kernel`. Given regime x and the lag window (y_{k-1}, ..., y_{k-order}),
/// the next observation is Gaussian with mean
///     ar(x,0) + sum_i ar(x,i) * y_{k-i}
/// and standard deviation sigma(x). Regime densities are taken with respect
/// to the uniform reference measure normalized to total mass one, so the
/// transition density of entry q_ij is q_ij * num_regimes.
struct SwitchingArModel {
    int num_regimes = 1;
    int order = 0;
    Matrix kernel;  // num_regimes x num_regimes, rows sum to 1
    Matrix ar;      // num_regimes x (order+1); column 0 is the intercept
    Vector sigma;   // num_regimes, noise standard deviations, > 0

    int theta_dim() const {
        return num_regimes * (num_regimes - 1) + num_regimes * (order + 1) + num_regimes;
    }
};

/// Observations y_{-order+1}, ..., y_n stored oldest first. The leading
/// `order` values form the initial lag window; length() is n.
struct ObservationSeries {
    int order = 0;
    std::vector<double> values;

    int length() const { return static_cast<int>(values.size()) - order; }
    /// y_k for k in [-order+1, n].
    double y(int k) const { return values[static_cast<std::size_t>(k + order - 1)]; }
};

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> failures;
    double sigma_minus = 0.0;  // num_regimes * min kernel entry
    double sigma_plus = 0.0;   // num_regimes * max kernel entry
    double rho = 1.0;          // 1 - sigma_minus / sigma_plus
    double max_row_sum_error = 0.0;

    void fail(std::string msg) {
        ok = false;
        failures.push_back(std::move(msg));
    }
};

/// Non-aborting structural checks: kernel shape/stochasticity, strictly
/// positive entries, positive noise scales. Also reports the mixing
/// coefficients sigma_minus, sigma_plus and the forgetting rate rho.
inline ValidationReport validate_model(const SwitchingArModel& m) {
    ValidationReport r;
    int d = m.num_regimes;
    if (d < 1) r.fail("num_regimes must be >= 1");
    if (m.order < 0) r.fail("order must be >= 0");
    if (m.kernel.rows() != d || m.kernel.cols() != d) r.fail("kernel shape mismatch");
    if (m.ar.rows() != d || m.ar.cols() != m.order + 1) r.fail("ar shape mismatch");
    if (m.sigma.size() != d) r.fail("sigma length mismatch");
    if (!r.ok) return r;

    double qmin = m.kernel.minCoeff();
    double qmax = m.kernel.maxCoeff();
    r.sigma_minus = d * qmin;
    r.sigma_plus = d * qmax;
    r.rho = (r.sigma_plus > 0.0) ? 1.0 - r.sigma_minus / r.sigma_plus : 1.0;
    for (int i = 0; i < d; ++i) {
        double err = std::abs(m.kernel.row(i).sum() - 1.0);
        r.max_row_sum_error = std::max(r.max_row_sum_error, err);
        if (err > 1e-12) r.fail("kernel row " + std::to_string(i) + " does not sum to 1");
    }
    if (!(qmin > 0.0)) r.fail("kernel entries must be strictly positive");
    for (int x = 0; x < d; ++x)
        if (!(m.sigma(x) > 0.0)) r.fail("sigma(" + std::to_string(x) + ") must be positive");
    for (int x = 0; x < d; ++x)
        for (int j = 0; j <= m.order; ++j)
            if (!std::isfinite(m.ar(x, j))) r.fail("ar coefficients must be finite");
    return r;
}

/// Forgetting rate rho = 1 - sigma_minus / sigma_plus of the kernel.
inline double forgetting_rate(const Matrix& kernel) {
    double qmin = kernel.minCoeff();
    double qmax = kernel.maxCoeff();
    if (!(qmax > 0.0)) throw std::domain_error("forgetting_rate: kernel has no positive entry");
    return 1.0 - qmin / qmax;
}

/// Log transition density with respect to the normalized uniform reference
/// measure: log(kernel(from, to) * num_regimes).
inline double transition_log_density(const SwitchingArModel& m, int from, int to) {
    return std::log(m.kernel(from, to) * static_cast<double>(m.num_regimes));
}

/// Conditional mean of y_k given regime x and the lag window in `obs`.
inline double emission_mean(const SwitchingArModel& m, const ObservationSeries& obs, int k,
                            int x) {
    double mu = m.ar(x, 0);
    for (int i = 1; i <= m.order; ++i) mu += m.ar(x, i) * obs.y(k - i);
    return mu;
}

/// log N(y_k; emission_mean, sigma(x)^2).
inline double emission_log_density(const SwitchingArModel& m, const ObservationSeries& obs,
                                   int k, int x) {
    double r = obs.y(k) - emission_mean(m, obs, k, x);
    double s = m.sigma(x);
    return -0.5 * std::log(kTwoPi) - std::log(s) - r * r / (2.0 * s * s);
}

/// n x num_regimes matrix of emission log densities, row k-1 = step k.
inline Matrix emission_log_matrix(const SwitchingArModel& m, const ObservationSeries& obs) {
    int n = obs.length();
    Matrix out(n, m.num_regimes);
    for (int k = 1; k <= n; ++k)
        for (int x = 0; x < m.num_regimes; ++x) out(k - 1, x) = emission_log_density(m, obs, k, x);
    return out;
}

/// Unconstrained parameter vector. Layout: per-row kernel logits
/// (num_regimes * (num_regimes-1), last column is the reference), AR
/// coefficients row-major (identity map), then log noise scales. The map is
/// a bijection onto valid models; kernel entries must be strictly positive.
inline Vector model_to_theta(const SwitchingArModel& m) {
    int d = m.num_regimes;
    Vector theta(m.theta_dim());
    int at = 0;
    for (int i = 0; i < d; ++i) {
        double ref = m.kernel(i, d - 1);
        if (!(ref > 0.0)) throw std::domain_error("model_to_theta: kernel entry not positive");
        for (int j = 0; j + 1 < d; ++j) {
            if (!(m.kernel(i, j) > 0.0))
                throw std::domain_error("model_to_theta: kernel entry not positive");
            theta(at++) = std::log(m.kernel(i, j) / ref);
        }
    }
    for (int x = 0; x < d; ++x)
        for (int j = 0; j <= m.order; ++j) theta(at++) = m.ar(x, j);
    for (int x = 0; x < d; ++x) {
        if (!(m.sigma(x) > 0.0)) throw std::domain_error("model_to_theta: sigma not positive");
        theta(at++) = std::log(m.sigma(x));
    }
    return theta;
}

/// Inverse of model_to_theta; `shape` supplies num_regimes and order.
inline SwitchingArModel theta_to_model(const Vector& theta, const SwitchingArModel& shape) {
    SwitchingArModel m;
    m.num_regimes = shape.num_regimes;
    m.order = shape.order;
    int d = m.num_regimes;
    if (theta.size() != shape.theta_dim())
        throw std::domain_error("theta_to_model: dimension mismatch");
    m.kernel.resize(d, d);
    m.ar.resize(d, m.order + 1);
    m.sigma.resize(d);
    int at = 0;
    for (int i = 0; i < d; ++i) {
        // Softmax with the last column pinned to logit 0.
        double mx = 0.0;
        for (int j = 0; j + 1 < d; ++j) mx = std::max(mx, theta(at + j));
        double z = std::exp(0.0 - mx);
        for (int j = 0; j + 1 < d; ++j) z += std::exp(theta(at + j) - mx);
        for (int j = 0; j + 1 < d; ++j) m.kernel(i, j) = std::exp(theta(at + j) - mx) / z;
        m.kernel(i, d - 1) = std::exp(0.0 - mx) / z;
        at += d - 1;
    }
    for (int x = 0; x < d; ++x)
        for (int j = 0; j <= m.order; ++j) m.ar(x, j) = theta(at++);
    for (int x = 0; x < d; ++x) m.sigma(x) = std::exp(theta(at++));
    return m;
}

/// Stationary law of the regime chain: pi' kernel = pi', sum pi = 1.
/// Throws if the linear solve leaves a residual above 1e-12.
inline Vector stationary_regime_dist(const Matrix& kernel) {
    int d = static_cast<int>(kernel.rows());
    Matrix A(d + 1, d);
    A.topRows(d) = kernel.transpose() - Matrix::Identity(d, d);
    A.bottomRows(1).setOnes();
    Vector b = Vector::Zero(d + 1);
    b(d) = 1.0;
    Vector pi = A.colPivHouseholderQr().solve(b);
    double resid = (pi.transpose() * kernel - pi.transpose()).cwiseAbs().maxCoeff();
    resid = std::max(resid, std::abs(pi.sum() - 1.0));
    if (!(resid < 1e-12))
        throw std::runtime_error("stationary_regime_dist: solve residual " + std::to_string(resid));
    return pi;
}

struct SimulatedPath {
    ObservationSeries observations;
    std::vector<int> regimes;  // X_1..X_n
};

/// Draw (X_1..X_n, Y_1..Y_n) given X_0 = x0 and the initial lag window
/// (y_0, ..., y_{-order+1}), most recent first. n = 0 yields empty outputs.
inline SimulatedPath simulate(const SwitchingArModel& m, int n, int x0,
                              const std::vector<double>& lag_window, Rng& rng) {
    if (x0 < 0 || x0 >= m.num_regimes) throw std::domain_error("simulate: x0 out of range");
    if (static_cast<int>(lag_window.size()) != m.order)
        throw std::domain_error("simulate: lag window must have `order` entries");
    SimulatedPath out;
    out.observations.order = m.order;
    out.observations.values.resize(static_cast<std::size_t>(m.order + n));
    for (int i = 0; i < m.order; ++i)
        out.observations.values[static_cast<std::size_t>(i)] = lag_window[static_cast<std::size_t>(m.order - 1 - i)];
    out.regimes.reserve(static_cast<std::size_t>(n));
    int x = x0;
    for (int k = 1; k <= n; ++k) {
        double u = rng.uniform();
        double acc = 0.0;
        int next = m.num_regimes - 1;
        for (int j = 0; j < m.num_regimes; ++j) {
            acc += m.kernel(x, j);
            if (u < acc) {
                next = j;
                break;
            }
        }
        x = next;
        out.regimes.push_back(x);
        double mu = emission_mean(m, out.observations, k, x);
        out.observations.values[static_cast<std::size_t>(m.order + k - 1)] =
            mu + m.sigma(x) * rng.normal();
    }
    return out;
}

}  // namespace regimeml
