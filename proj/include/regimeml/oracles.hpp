#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "regimeml/common.hpp"
#include "regimeml/doa.hpp"
#include "regimeml/filtering.hpp"
#include "regimeml/model.hpp"

// Independent reference implementations used only to cross-check the fast
// paths: exhaustive path enumeration, finite differences, and quadrature.
// Nothing here may call the implementation it is meant to verify.
namespace regimeml::oracle {

/// Likelihood by exhaustive enumeration of all num_regimes^n latent paths:
/// log sum over paths of prod_k kernel(x_{k-1},x_k) * g(y_k | x_k).
/// Only feasible for tiny n; guarded at num_regimes^n <= 2^24.
inline double brute_force_log_likelihood(const SwitchingArModel& m, const ObservationSeries& obs,
                                         int x0) {
    int n = obs.length();
    int d = m.num_regimes;
    double total_paths = std::pow(static_cast<double>(d), n);
    if (total_paths > double(1 << 24))
        throw std::domain_error("brute_force_log_likelihood: path count too large");
    if (n == 0) return 0.0;
    std::vector<double> path_logs;
    path_logs.reserve(static_cast<std::size_t>(total_paths));
    std::vector<int> x(static_cast<std::size_t>(n), 0);
    while (true) {
        double lp = 0.0;
        int prev = x0;
        for (int k = 1; k <= n; ++k) {
            int cur = x[static_cast<std::size_t>(k - 1)];
            lp += std::log(m.kernel(prev, cur)) + emission_log_density(m, obs, k, cur);
            prev = cur;
        }
        path_logs.push_back(lp);
        int pos = n - 1;
        while (pos >= 0 && ++x[static_cast<std::size_t>(pos)] == d) x[static_cast<std::size_t>(pos--)] = 0;
        if (pos < 0) break;
    }
    return log_sum_exp(path_logs);
}

/// Central-difference gradient of f at x with step h per coordinate.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h) {
    Vector g(x.size());
    Vector xp = x;
    for (int j = 0; j < x.size(); ++j) {
        double old = xp(j);
        xp(j) = old + h;
        double fp = f(xp);
        xp(j) = old - h;
        double fm = f(xp);
        xp(j) = old;
        g(j) = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// Central-difference Hessian of f at x with step h.
inline Matrix fd_hessian(const std::function<double(const Vector&)>& f, const Vector& x,
                         double h) {
    int p = static_cast<int>(x.size());
    Matrix H(p, p);
    double f0 = f(x);
    Vector xp = x;
    for (int i = 0; i < p; ++i) {
        double oi = xp(i);
        xp(i) = oi + h;
        double fp = f(xp);
        xp(i) = oi - h;
        double fm = f(xp);
        xp(i) = oi;
        H(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    }
    for (int i = 0; i < p; ++i) {
        for (int j = i + 1; j < p; ++j) {
            double oi = xp(i), oj = xp(j);
            xp(i) = oi + h; xp(j) = oj + h;
            double fpp = f(xp);
            xp(j) = oj - h;
            double fpm = f(xp);
            xp(i) = oi - h; xp(j) = oj + h;
            double fmp = f(xp);
            xp(j) = oj - h;
            double fmm = f(xp);
            xp(i) = oi; xp(j) = oj;
            H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
        }
    }
    return H;
}

/// Trapezoid rule for a periodic integrand over one full period [0, P).
/// Spectrally accurate for smooth periodic functions.
inline double trapezoid_periodic(const std::function<double(double)>& f, double period, int n) {
    double h = period / n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += f(i * h);
    return s * h;
}

namespace detail {
inline double simpson_rule(const std::function<double(double)>& f, double a, double fa, double b,
                           double fb, double m, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double fa,
                                   double b, double fb, double m, double fm, double whole,
                                   double eps, int depth) {
    double lm = (a + m) / 2.0, rm = (m + b) / 2.0;
    double flm = f(lm), frm = f(rm);
    double left = simpson_rule(f, a, fa, m, fm, lm, flm);
    double right = simpson_rule(f, m, fm, b, fb, rm, frm);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, eps / 2.0, depth - 1) +
           adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, eps / 2.0, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson quadrature on [a, b] to absolute tolerance eps.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double eps) {
    double m = (a + b) / 2.0;
    double fa = f(a), fb = f(b), fm = f(m);
    double whole = detail::simpson_rule(f, a, fa, b, fb, m, fm);
    return detail::adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, eps, 48);
}

/// Snapshot emission log density -log(pi^d det Sigma) - y^H Sigma^{-1} y
/// computed with dense complex linear algebra (explicit covariance,
/// LU determinant and solve). Reference route for the closed form.
inline double dense_emission_log_density(const DoaParams& p, const ComplexVector& y, double w) {
    const int d = static_cast<int>(y.size());
    ComplexMatrix sigma = snapshot_covariance(p, w, d);
    Eigen::PartialPivLU<ComplexMatrix> lu(sigma);
    Complex det = lu.determinant();
    ComplexVector solved = lu.solve(y);
    double quad = y.dot(solved).real();
    return -d * std::log(kPi) - std::log(std::abs(det)) - quad;
}

/// Exact log ratio of the latent-path joint density after replacing site i
/// (1-based) of `path` by `proposal`, times the proposal correction, i.e.
/// the textbook Metropolis-Hastings log acceptance ratio computed from full
/// products of transition and emission densities. Reference route for the
/// cancelled single-site ratio.
inline double full_joint_mh_log_ratio(const DoaParams& p, const ArraySnapshots& data, double x0,
                                      const std::vector<double>& path, int i, double proposal) {
    const int n = static_cast<int>(path.size());
    auto joint = [&](const std::vector<double>& x) {
        double lp = 0.0;
        double prev = x0;
        for (int k = 1; k <= n; ++k) {
            double cur = x[static_cast<std::size_t>(k - 1)];
            lp += wrapped_transition_log_density(p.sigma_eta_sq, prev, cur);
            lp += emission_log_density(p, data.y[static_cast<std::size_t>(k - 1)], cur);
            prev = cur;
        }
        return lp;
    };
    std::vector<double> moved = path;
    moved[static_cast<std::size_t>(i - 1)] = proposal;
    double prev = i >= 2 ? path[static_cast<std::size_t>(i - 2)] : x0;
    double forward = wrapped_transition_log_density(p.sigma_eta_sq, prev, proposal);
    double backward = wrapped_transition_log_density(p.sigma_eta_sq, prev,
                                                     path[static_cast<std::size_t>(i - 1)]);
    return joint(moved) - joint(path) + backward - forward;
}

}  // namespace regimeml::oracle
