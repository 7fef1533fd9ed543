#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "regimeml/model.hpp"

namespace regimeml {

/// Forward-filter output. weights row k is the law of X_k given Y_1..Y_k
/// (row 0 is the initial law); step_log_predictive[k-1] is
/// log p(Y_k | Y_1..Y_{k-1}); their sum is the conditional log likelihood.
struct FilterResult {
    Matrix weights;
    Vector step_log_predictive;
    double log_likelihood = 0.0;
};

/// Smoothing output. marginals row k is the law of X_k given all of Y;
/// pair_marginals[k-1] is the joint law of (X_{k-1}, X_k) given Y;
/// cond_transitions[k-1](i,j) = P(X_k = j | X_{k-1} = i, Y_k..Y_n), the
/// inhomogeneous Markov transition of the latent chain given the data.
struct SmoothResult {
    Matrix marginals;
    std::vector<Matrix> pair_marginals;
    std::vector<Matrix> cond_transitions;
    double log_likelihood = 0.0;
};

namespace core {

/// Filter recursion on a generic finite-state chain: row-stochastic Q,
/// per-step emission log densities logG (n x d), initial law `init`.
/// Each step renormalizes, so only per-step densities must be representable.
inline FilterResult forward_filter(const Matrix& Q, const Matrix& logG, const Vector& init) {
    int n = static_cast<int>(logG.rows());
    int d = static_cast<int>(Q.rows());
    FilterResult out;
    out.weights.resize(n + 1, d);
    out.weights.row(0) = init.transpose();
    out.step_log_predictive.resize(n);
    Vector w = init;
    for (int k = 1; k <= n; ++k) {
        Vector pred = Q.transpose() * w;
        double c = logG.row(k - 1).maxCoeff();
        if (!std::isfinite(c))
            throw std::runtime_error("forward_filter: degenerate emission at step " +
                                     std::to_string(k));
        Vector joint = pred.cwiseProduct((logG.row(k - 1).transpose().array() - c).exp().matrix());
        double mass = joint.sum();
        if (!(mass > 0.0) || !std::isfinite(mass))
            throw std::runtime_error("forward_filter: zero predictive mass at step " +
                                     std::to_string(k));
        w = joint / mass;
        out.weights.row(k) = w.transpose();
        out.step_log_predictive(k - 1) = std::log(mass) + c;
        out.log_likelihood += out.step_log_predictive(k - 1);
    }
    return out;
}

/// Likelihood as a renormalized product of per-step matrices Q * diag(G_k),
/// contracted against the initial law on the left and ones on the right.
/// Deliberately a separate code path from forward_filter.
inline double matrix_product_log_likelihood(const Matrix& Q, const Matrix& logG,
                                            const Vector& init) {
    int n = static_cast<int>(logG.rows());
    int d = static_cast<int>(Q.rows());
    Eigen::RowVectorXd v = init.transpose();
    double log_scale = 0.0;
    for (int k = 1; k <= n; ++k) {
        double c = logG.row(k - 1).maxCoeff();
        Matrix factor = Q * (logG.row(k - 1).transpose().array() - c).exp().matrix().asDiagonal();
        v = v * factor;
        double norm = v.cwiseAbs().maxCoeff();
        if (!(norm > 0.0) || !std::isfinite(norm))
            throw std::runtime_error("matrix_product_log_likelihood: zero mass at step " +
                                     std::to_string(k));
        v /= norm;
        log_scale += std::log(norm) + c;
    }
    (void)d;
    return log_scale + std::log(v.sum());
}

/// Forward-backward smoothing. Conditional transitions come from the
/// backward pass alone; pair marginals and smoothed marginals are built by
/// propagating the smoothed initial law through them, which makes the
/// marginalization identities exact by construction.
inline SmoothResult smooth(const Matrix& Q, const Matrix& logG, const Vector& init) {
    int n = static_cast<int>(logG.rows());
    int d = static_cast<int>(Q.rows());
    SmoothResult out;
    out.marginals.resize(n + 1, d);
    out.pair_marginals.resize(static_cast<std::size_t>(n));
    out.cond_transitions.resize(static_cast<std::size_t>(n));

    FilterResult fwd = forward_filter(Q, logG, init);
    out.log_likelihood = fwd.log_likelihood;

    // Backward variables B_k(j) proportional to p(Y_{k+1..n} | X_k = j),
    // renormalized each step by their maximum.
    Vector B = Vector::Ones(d);
    std::vector<Vector> gexp(static_cast<std::size_t>(n));
    for (int k = n; k >= 1; --k) {
        double c = logG.row(k - 1).maxCoeff();
        gexp[static_cast<std::size_t>(k - 1)] =
            (logG.row(k - 1).transpose().array() - c).exp().matrix();
        Vector gb = gexp[static_cast<std::size_t>(k - 1)].cwiseProduct(B);
        Matrix T = Q * gb.asDiagonal();
        Vector row_mass = T.rowwise().sum();
        for (int i = 0; i < d; ++i) {
            if (!(row_mass(i) > 0.0))
                throw std::runtime_error("smooth: zero backward mass at step " +
                                         std::to_string(k));
            T.row(i) /= row_mass(i);
        }
        out.cond_transitions[static_cast<std::size_t>(k - 1)] = T;
        B = row_mass / row_mass.maxCoeff();
    }

    // Smoothed initial law, then propagate through the conditional chain.
    Vector alpha = init.cwiseProduct(B);
    double z = alpha.sum();
    if (!(z > 0.0)) throw std::runtime_error("smooth: zero smoothed mass at step 0");
    alpha /= z;
    out.marginals.row(0) = alpha.transpose();
    for (int k = 1; k <= n; ++k) {
        const Matrix& T = out.cond_transitions[static_cast<std::size_t>(k - 1)];
        out.pair_marginals[static_cast<std::size_t>(k - 1)] = alpha.asDiagonal() * T;
        alpha = T.transpose() * alpha;
        out.marginals.row(k) = alpha.transpose();
    }
    return out;
}

/// Total-variation distance between the filter laws started from two
/// initial distributions, at every time 0..n.
inline Vector forgetting_gap(const Matrix& Q, const Matrix& logG, const Vector& init_a,
                             const Vector& init_b) {
    FilterResult fa = forward_filter(Q, logG, init_a);
    FilterResult fb = forward_filter(Q, logG, init_b);
    int n = static_cast<int>(logG.rows());
    Vector tv(n + 1);
    for (int k = 0; k <= n; ++k)
        tv(k) = 0.5 * (fa.weights.row(k) - fb.weights.row(k)).cwiseAbs().sum();
    return tv;
}

}  // namespace core

inline Vector point_mass(int d, int x0) {
    if (x0 < 0 || x0 >= d) throw std::domain_error("point_mass: index out of range");
    Vector v = Vector::Zero(d);
    v(x0) = 1.0;
    return v;
}

inline FilterResult forward_filter(const SwitchingArModel& m, const ObservationSeries& obs,
                                   const Vector& init) {
    return core::forward_filter(m.kernel, emission_log_matrix(m, obs), init);
}

inline FilterResult forward_filter(const SwitchingArModel& m, const ObservationSeries& obs,
                                   int x0) {
    return forward_filter(m, obs, point_mass(m.num_regimes, x0));
}

/// Conditional log likelihood of Y_1..Y_n given the lag window and X_0 = x0.
inline double log_likelihood(const SwitchingArModel& m, const ObservationSeries& obs, int x0) {
    return forward_filter(m, obs, x0).log_likelihood;
}

inline double matrix_product_log_likelihood(const SwitchingArModel& m,
                                            const ObservationSeries& obs, int x0) {
    return core::matrix_product_log_likelihood(m.kernel, emission_log_matrix(m, obs),
                                               point_mass(m.num_regimes, x0));
}

inline SmoothResult smooth(const SwitchingArModel& m, const ObservationSeries& obs,
                           const Vector& init) {
    return core::smooth(m.kernel, emission_log_matrix(m, obs), init);
}

inline SmoothResult smooth(const SwitchingArModel& m, const ObservationSeries& obs, int x0) {
    return smooth(m, obs, point_mass(m.num_regimes, x0));
}

inline Vector forgetting_gap(const SwitchingArModel& m, const ObservationSeries& obs,
                             const Vector& init_a, const Vector& init_b) {
    return core::forgetting_gap(m.kernel, emission_log_matrix(m, obs), init_a, init_b);
}

/// Log likelihood under the stationary regime law: the chain is started from
/// its stationary distribution instead of a fixed state. Only defined for
/// order 0 (no lag window enters the stationary law).
inline double stationary_log_likelihood(const SwitchingArModel& m, const ObservationSeries& obs) {
    if (m.order != 0)
        throw std::domain_error("stationary_log_likelihood: only defined for order 0");
    Vector pi = stationary_regime_dist(m.kernel);
    return forward_filter(m, obs, pi).log_likelihood;
}

}  // namespace regimeml
