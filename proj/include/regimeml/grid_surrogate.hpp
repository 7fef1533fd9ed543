#pragma once

// Finite-state surrogate of the angle-tracking model: the circle is cut into
// uniform bins, the wrapped transition density is evaluated at bin centers
// (times the bin width), and the snapshot emissions are evaluated at bin
// centers. The result is an ordinary finite HMM, so filtering, smoothing,
// exact EM, exact observed information, and exact posterior path sampling
// are all available through the generic finite-state machinery. Used as the
// deterministic counterpart of the Monte Carlo estimator.
//
// Time convention: the latent angle at step 1 is drawn from the transition
// out of the fixed continuous x0, so the surrogate chain starts at step 1
// with prior weights q_v(x0, c_j) * delta; the first emission is absorbed
// into that initial law before the generic recursions run.

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "regimeml/common.hpp"
#include "regimeml/doa.hpp"
#include "regimeml/filtering.hpp"
#include "regimeml/inference.hpp"
#include "regimeml/model.hpp"
#include "regimeml/random.hpp"
#include "regimeml/special.hpp"

namespace regimeml {

struct GridModel {
    int bins = 0;
    int sensors = 0;
    double x0 = 0.0;
    DoaParams params;
    Vector centers;      ///< bin centers c_j = (j + 1/2) * delta
    Matrix transition;   ///< q_v(c_i, c_j) * delta; circulant, rows sum to ~1
    Vector init_prior;   ///< q_v(x0, c_j) * delta, before the first emission
    Matrix emission_log; ///< n x bins, log g(y_k | c_j)
    Matrix power;        ///< n x bins, |a(c_j)^H y_k|^2
    Vector snap_power;   ///< n, y_k^H y_k
};

inline Vector grid_centers(int bins) {
    Vector c(bins);
    double delta = kTwoPi / bins;
    for (int j = 0; j < bins; ++j) c(j) = (j + 0.5) * delta;
    return c;
}

inline GridModel build_grid_model(const DoaParams& p, const ArraySnapshots& data, double x0,
                                  int bins) {
    validate_doa_params(p);
    if (bins < 8) throw std::invalid_argument("build_grid_model: bins must be >= 8");
    const int n = data.size();
    if (n < 1) throw std::invalid_argument("build_grid_model: empty data");
    GridModel gm;
    gm.bins = bins;
    gm.sensors = data.sensors;
    gm.x0 = x0;
    gm.params = p;
    gm.centers = grid_centers(bins);
    const double delta = kTwoPi / bins;

    Vector row0(bins);
    for (int j = 0; j < bins; ++j)
        row0(j) = std::exp(wrapped_transition_log_density(p.sigma_eta_sq, gm.centers(0),
                                                          gm.centers(j))) * delta;
    gm.transition.resize(bins, bins);
    for (int i = 0; i < bins; ++i)
        for (int j = 0; j < bins; ++j) gm.transition(i, j) = row0((j - i + bins) % bins);

    gm.init_prior.resize(bins);
    for (int j = 0; j < bins; ++j)
        gm.init_prior(j) = std::exp(wrapped_transition_log_density(p.sigma_eta_sq, x0,
                                                                   gm.centers(j))) * delta;

    gm.emission_log.resize(n, bins);
    gm.power.resize(n, bins);
    gm.snap_power.resize(n);
    for (int k = 0; k < n; ++k) {
        const ComplexVector& y = data.y[static_cast<std::size_t>(k)];
        double u = y.squaredNorm();
        gm.snap_power(k) = u;
        for (int j = 0; j < bins; ++j) {
            double m = steering_power(gm.centers(j), y);
            gm.power(k, j) = m;
            gm.emission_log(k, j) = emission_log_density_from_stats(p, gm.sensors, u, m);
        }
    }
    return gm;
}

namespace detail {
/// Initial law with the first emission absorbed, plus its log mass, so the
/// generic recursions see a proper probability vector over step-1 states.
struct GridStart {
    Vector init;
    double log_mass = 0.0;
};

inline GridStart grid_start(const GridModel& gm) {
    double c = gm.emission_log.row(0).maxCoeff();
    Vector post = gm.init_prior.cwiseProduct(
        (gm.emission_log.row(0).transpose().array() - c).exp().matrix());
    double mass = post.sum();
    if (!(mass > 0.0) || !std::isfinite(mass))
        throw std::runtime_error("grid surrogate: zero mass at step 1");
    GridStart out;
    out.init = post / mass;
    out.log_mass = std::log(mass) + c;
    return out;
}

inline Matrix grid_rest_emissions(const GridModel& gm) {
    int n = static_cast<int>(gm.emission_log.rows());
    return gm.emission_log.bottomRows(n - 1);
}
}  // namespace detail

inline double grid_log_likelihood(const GridModel& gm) {
    detail::GridStart start = detail::grid_start(gm);
    int n = static_cast<int>(gm.emission_log.rows());
    if (n == 1) return start.log_mass;
    FilterResult f = core::forward_filter(gm.transition, detail::grid_rest_emissions(gm),
                                          start.init);
    return start.log_mass + f.log_likelihood;
}

/// Filtered laws of the step-1..n states given observations up to the same
/// step (row k-1 is step k), plus the total log likelihood.
struct GridFilter {
    Matrix weights;
    double log_likelihood = 0.0;
};

inline GridFilter grid_filter(const GridModel& gm) {
    detail::GridStart start = detail::grid_start(gm);
    int n = static_cast<int>(gm.emission_log.rows());
    GridFilter out;
    if (n == 1) {
        out.weights = start.init.transpose();
        out.log_likelihood = start.log_mass;
        return out;
    }
    FilterResult f = core::forward_filter(gm.transition, detail::grid_rest_emissions(gm),
                                          start.init);
    out.weights = f.weights;
    out.log_likelihood = start.log_mass + f.log_likelihood;
    return out;
}

/// Smoothed marginals (row k-1 is step k) and pair marginals for the
/// transitions between steps k and k+1, k = 1..n-1.
struct GridSmooth {
    Matrix marginals;
    std::vector<Matrix> pairs;
    double log_likelihood = 0.0;
};

inline GridSmooth grid_smooth(const GridModel& gm) {
    detail::GridStart start = detail::grid_start(gm);
    int n = static_cast<int>(gm.emission_log.rows());
    GridSmooth out;
    if (n == 1) {
        out.marginals = start.init.transpose();
        out.log_likelihood = start.log_mass;
        return out;
    }
    SmoothResult s = core::smooth(gm.transition, detail::grid_rest_emissions(gm), start.init);
    out.marginals = s.marginals;
    out.pairs = std::move(s.pair_marginals);
    out.log_likelihood = start.log_mass + s.log_likelihood;
    return out;
}

/// Posterior expectation of sum_k |a(X_k)^H y_k|^2 under the surrogate.
inline double grid_beta(const GridModel& gm, const GridSmooth& sm) {
    int n = static_cast<int>(gm.emission_log.rows());
    double beta = 0.0;
    for (int k = 0; k < n; ++k) beta += sm.marginals.row(k).dot(gm.power.row(k));
    return beta;
}

namespace detail {
/// Expected complete-data emission term as a function of (S, A) for fixed
/// posterior: n (-d log pi - (d-1) log A - log B) - U/A + S beta / (A B).
inline double emission_q_value(double S, double A, double beta, double total_u, int n, int d) {
    double B = d * S + A;
    return n * (-d * std::log(kPi) - (d - 1) * std::log(A) - std::log(B)) - total_u / A +
           S * beta / (A * B);
}

/// Expected complete-data transition term at variance v, given the offset
/// profile (pair mass by circular bin offset) and the smoothed step-1 law.
inline double transition_q_value(const GridModel& gm, const Vector& offset_profile,
                                 const Vector& first_marginal, double v) {
    int bins = gm.bins;
    double delta = kTwoPi / bins;
    double q = 0.0;
    for (int m = 0; m < bins; ++m) {
        if (offset_profile(m) == 0.0) continue;
        q += offset_profile(m) * wrapped_transition_log_density(v, 0.0, m * delta);
    }
    for (int j = 0; j < bins; ++j) {
        if (first_marginal(j) == 0.0) continue;
        q += first_marginal(j) * wrapped_transition_log_density(v, gm.x0, gm.centers(j));
    }
    return q;
}
}  // namespace detail

struct GridEmStep {
    DoaParams params;
    double log_likelihood = 0.0;  ///< at the updated parameters
    double beta = 0.0;
    bool clamped = false;
};

/// One exact EM iteration on the surrogate. The variance update is kept only
/// if it does not lower the expected complete-data objective, and likewise
/// for the power pair, so each iteration is monotone in the surrogate
/// likelihood by the usual EM inequality.
inline GridEmStep grid_em_step(const DoaParams& p, const ArraySnapshots& data, double x0,
                               int bins, double v_lo = 1e-4, double v_hi = 25.0) {
    GridModel gm = build_grid_model(p, data, x0, bins);
    GridSmooth sm = grid_smooth(gm);
    const int n = data.size();
    const int d = data.sensors;
    const double total_u = gm.snap_power.sum();
    const double beta = grid_beta(gm, sm);

    GridEmStep out;
    out.beta = beta;

    double s_hat = (beta - total_u) / (static_cast<double>(n) * d * (d - 1));
    double a_hat = (total_u - beta / d) / (static_cast<double>(n) * (d - 1));
    if (s_hat < 1e-10) { s_hat = 1e-10; out.clamped = true; }
    if (a_hat < 1e-10) { a_hat = 1e-10; out.clamped = true; }
    if (detail::emission_q_value(s_hat, a_hat, beta, total_u, n, d) <
        detail::emission_q_value(p.sigma_s_sq, p.sigma_eps_sq, beta, total_u, n, d)) {
        s_hat = p.sigma_s_sq;
        a_hat = p.sigma_eps_sq;
    }

    Vector offset_profile = Vector::Zero(bins);
    for (const Matrix& pair : sm.pairs)
        for (int i = 0; i < bins; ++i)
            for (int j = 0; j < bins; ++j) offset_profile((j - i + bins) % bins) += pair(i, j);
    Vector first_marginal = sm.marginals.row(0).transpose();
    auto objective = [&](double log_v) {
        return detail::transition_q_value(gm, offset_profile, first_marginal, std::exp(log_v));
    };
    double v_hat = std::exp(golden_section_maximize(objective, std::log(v_lo), std::log(v_hi),
                                                    1e-6));
    if (detail::transition_q_value(gm, offset_profile, first_marginal, v_hat) <
        detail::transition_q_value(gm, offset_profile, first_marginal, p.sigma_eta_sq))
        v_hat = p.sigma_eta_sq;

    out.params = DoaParams{v_hat, s_hat, a_hat};
    out.log_likelihood =
        grid_log_likelihood(build_grid_model(out.params, data, x0, bins));
    return out;
}

/// Exact observed information of the surrogate likelihood at p, in the
/// coordinates (sigma_eta_sq, sigma_s_sq, sigma_eps_sq): the conditional
/// expectation of the complete second derivative plus the conditional
/// variance of the complete score, both computed by a forward recursion on
/// per-state running sums, negated and symmetrized.
inline InformationEstimate grid_observed_information(const DoaParams& p,
                                                     const ArraySnapshots& data, double x0,
                                                     int bins) {
    GridModel gm = build_grid_model(p, data, x0, bins);
    GridFilter fl = grid_filter(gm);
    const int n = data.size();
    const int d = data.sensors;
    const double delta = kTwoPi / bins;
    const double v = p.sigma_eta_sq;

    Vector dv_off(bins), dvv_off(bins);
    for (int m = 0; m < bins; ++m) {
        WrappedDensity wd = wrapped_transition_derivs(v, 0.0, m * delta);
        dv_off(m) = wd.d_v;
        dvv_off(m) = wd.d_vv;
    }

    using Eigen::Matrix3d;
    using Eigen::Vector3d;
    std::vector<Vector3d> s(static_cast<std::size_t>(bins));
    std::vector<Matrix3d> q(static_cast<std::size_t>(bins));
    std::vector<Matrix3d> t(static_cast<std::size_t>(bins));

    auto emission_phi = [&](int k, int j, Vector3d& phi, Matrix3d& phi_dot) {
        EmissionDerivs e = emission_derivs_from_stats(p, d, gm.snap_power(k), gm.power(k, j));
        phi(1) = e.d_s;
        phi(2) = e.d_a;
        phi_dot.setZero();
        phi_dot(1, 1) = e.d_ss;
        phi_dot(1, 2) = phi_dot(2, 1) = e.d_sa;
        phi_dot(2, 2) = e.d_aa;
    };

    for (int j = 0; j < bins; ++j) {
        WrappedDensity wd = wrapped_transition_derivs(v, x0, gm.centers(j));
        Vector3d phi;
        Matrix3d phi_dot;
        emission_phi(0, j, phi, phi_dot);
        phi(0) = wd.d_v;
        phi_dot(0, 0) = wd.d_vv;
        s[static_cast<std::size_t>(j)] = phi;
        q[static_cast<std::size_t>(j)] = phi * phi.transpose();
        t[static_cast<std::size_t>(j)] = phi_dot;
    }

    std::vector<Vector3d> s_next(static_cast<std::size_t>(bins));
    std::vector<Matrix3d> q_next(static_cast<std::size_t>(bins));
    std::vector<Matrix3d> t_next(static_cast<std::size_t>(bins));
    for (int k = 2; k <= n; ++k) {
        Vector alpha = fl.weights.row(k - 2).transpose();
        Vector pred = gm.transition.transpose() * alpha;
        for (int j = 0; j < bins; ++j) {
            if (!(pred(j) > 0.0))
                throw std::runtime_error("grid surrogate: zero predictive mass in recursion");
            Vector3d phi_e;
            Matrix3d phi_dot_e;
            emission_phi(k - 1, j, phi_e, phi_dot_e);
            Vector3d s_acc = Vector3d::Zero();
            Matrix3d q_acc = Matrix3d::Zero();
            Matrix3d t_acc = Matrix3d::Zero();
            for (int i = 0; i < bins; ++i) {
                double w = alpha(i) * gm.transition(i, j);
                if (w == 0.0) continue;
                w /= pred(j);
                int off = (j - i + bins) % bins;
                Vector3d phi = phi_e;
                phi(0) = dv_off(off);
                Matrix3d phi_dot = phi_dot_e;
                phi_dot(0, 0) = dvv_off(off);
                const Vector3d& sp = s[static_cast<std::size_t>(i)];
                s_acc += w * (sp + phi);
                q_acc += w * (q[static_cast<std::size_t>(i)] + sp * phi.transpose() +
                              phi * sp.transpose() + phi * phi.transpose());
                t_acc += w * (t[static_cast<std::size_t>(i)] + phi_dot);
            }
            s_next[static_cast<std::size_t>(j)] = s_acc;
            q_next[static_cast<std::size_t>(j)] = q_acc;
            t_next[static_cast<std::size_t>(j)] = t_acc;
        }
        s.swap(s_next);
        q.swap(q_next);
        t.swap(t_next);
    }

    Vector alpha_n = fl.weights.row(n - 1).transpose();
    Vector3d mean_score = Vector3d::Zero();
    Matrix3d second = Matrix3d::Zero();
    Matrix3d mean_hess = Matrix3d::Zero();
    for (int j = 0; j < bins; ++j) {
        mean_score += alpha_n(j) * s[static_cast<std::size_t>(j)];
        second += alpha_n(j) * q[static_cast<std::size_t>(j)];
        mean_hess += alpha_n(j) * t[static_cast<std::size_t>(j)];
    }
    Matrix3d var = second - mean_score * mean_score.transpose();
    Matrix3d info3 = -(mean_hess + var);

    InformationEstimate out;
    out.info = Matrix(3, 3);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) out.info(a, b) = 0.5 * (info3(a, b) + info3(b, a));
    out.provenance = "louis-exact";
    out.finalize_eigen();
    return out;
}

/// Draw a latent path from the surrogate posterior: a backward pass over the
/// filtered laws picks the bin sequence, then each angle is placed uniformly
/// within its bin. Useful for initializing samplers at the posterior.
inline std::vector<double> grid_posterior_sample(const GridModel& gm, const GridFilter& fl,
                                                 Rng& rng) {
    const int n = static_cast<int>(gm.emission_log.rows());
    const int bins = gm.bins;
    const double delta = kTwoPi / bins;
    std::vector<int> idx(static_cast<std::size_t>(n));

    auto draw = [&](const Vector& w) {
        double total = w.sum();
        double u = rng.uniform() * total;
        double acc = 0.0;
        for (int j = 0; j < bins; ++j) {
            acc += w(j);
            if (u <= acc) return j;
        }
        return bins - 1;
    };

    idx[static_cast<std::size_t>(n - 1)] = draw(fl.weights.row(n - 1).transpose());
    for (int k = n - 1; k >= 1; --k) {
        int next = idx[static_cast<std::size_t>(k)];
        Vector w = fl.weights.row(k - 1).transpose().cwiseProduct(gm.transition.col(next));
        idx[static_cast<std::size_t>(k - 1)] = draw(w);
    }
    std::vector<double> path(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        path[static_cast<std::size_t>(k)] =
            wrap_angle(gm.centers(idx[static_cast<std::size_t>(k)]) +
                       (rng.uniform() - 0.5) * delta);
    return path;
}

}  // namespace regimeml
