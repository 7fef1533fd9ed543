#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "regimeml/common.hpp"
#include "regimeml/filtering.hpp"
#include "regimeml/model.hpp"
#include "regimeml/optimize.hpp"
#include "regimeml/random.hpp"
#include "regimeml/special.hpp"

namespace regimeml {

/// Gradient (phi) and Hessian (phi_dot) in the unconstrained parameter
/// vector of one complete-data term
///     log kernel_density(x_{k-1}, x_k) + log g(y_k | lag window, x_k).
/// Only the blocks of kernel row x_{k-1} and emission regime x_k are
/// nonzero. The constant log(num_regimes) from the reference measure has
/// zero derivative and does not appear.
struct CompleteScoreTerm {
    Vector phi;
    Matrix phi_dot;
};

namespace detail {

// Writes phi for the term at step k with x_{k-1} = i, x_k = j.
inline void fill_phi(const SwitchingArModel& m, const ObservationSeries& obs, int k, int i,
                     int j, Vector& phi) {
    int d = m.num_regimes;
    int s = m.order;
    phi.setZero();
    int row_off = i * (d - 1);
    for (int t = 0; t + 1 < d; ++t)
        phi(row_off + t) = (t == j ? 1.0 : 0.0) - m.kernel(i, t);
    int ar_off = d * (d - 1) + j * (s + 1);
    int sg_off = d * (d - 1) + d * (s + 1) + j;
    double sig = m.sigma(j);
    double r = obs.y(k) - emission_mean(m, obs, k, j);
    double inv2 = 1.0 / (sig * sig);
    phi(ar_off) = r * inv2;
    for (int t = 1; t <= s; ++t) phi(ar_off + t) = r * obs.y(k - t) * inv2;
    phi(sg_off) = -1.0 + r * r * inv2;
}

// Writes phi_dot (second derivatives) for the same term.
inline void fill_phi_dot(const SwitchingArModel& m, const ObservationSeries& obs, int k, int i,
                         int j, Matrix& pd) {
    int d = m.num_regimes;
    int s = m.order;
    pd.setZero();
    int row_off = i * (d - 1);
    for (int a = 0; a + 1 < d; ++a)
        for (int b = 0; b + 1 < d; ++b)
            pd(row_off + a, row_off + b) =
                -(m.kernel(i, a) * ((a == b ? 1.0 : 0.0) - m.kernel(i, b)));
    int ar_off = d * (d - 1) + j * (s + 1);
    int sg_off = d * (d - 1) + d * (s + 1) + j;
    double sig = m.sigma(j);
    double inv2 = 1.0 / (sig * sig);
    double r = obs.y(k) - emission_mean(m, obs, k, j);
    for (int a = 0; a <= s; ++a) {
        double za = (a == 0) ? 1.0 : obs.y(k - a);
        for (int b = 0; b <= s; ++b) {
            double zb = (b == 0) ? 1.0 : obs.y(k - b);
            pd(ar_off + a, ar_off + b) = -za * zb * inv2;
        }
        pd(ar_off + a, sg_off) = pd(sg_off, ar_off + a) = -2.0 * r * za * inv2;
    }
    pd(sg_off, sg_off) = -2.0 * r * r * inv2;
}

}  // namespace detail

inline CompleteScoreTerm complete_score(const SwitchingArModel& m, const ObservationSeries& obs,
                                        int k, int x_prev, int x_cur) {
    int p = m.theta_dim();
    CompleteScoreTerm t;
    t.phi.resize(p);
    t.phi_dot.resize(p, p);
    detail::fill_phi(m, obs, k, x_prev, x_cur, t.phi);
    detail::fill_phi_dot(m, obs, k, x_prev, x_cur, t.phi_dot);
    return t;
}

/// Score of the conditional log likelihood at theta(m): the smoothed
/// expectation of the summed complete-data score terms.
inline Vector fisher_score(const SwitchingArModel& m, const ObservationSeries& obs,
                           const Vector& init) {
    int n = obs.length();
    int d = m.num_regimes;
    int p = m.theta_dim();
    SmoothResult sm = smooth(m, obs, init);
    Vector score = Vector::Zero(p);
    Vector phi(p);
    for (int k = 1; k <= n; ++k) {
        const Matrix& pair = sm.pair_marginals[static_cast<std::size_t>(k - 1)];
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double w = pair(i, j);
                if (w == 0.0) continue;
                detail::fill_phi(m, obs, k, i, j, phi);
                score += w * phi;
            }
    }
    return score;
}

inline Vector fisher_score(const SwitchingArModel& m, const ObservationSeries& obs, int x0) {
    return fisher_score(m, obs, point_mass(m.num_regimes, x0));
}

struct InformationEstimate {
    Matrix info;             // observed information, -Hessian of the log likelihood
    std::string provenance;  // "louis-exact", "louis-monte-carlo", "finite-difference"
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    bool near_singular = false;  // lambda_min < 1e-8 * max(1, lambda_max)
    std::vector<std::string> warnings;

    void finalize_eigen() {
        Eigen::SelfAdjointEigenSolver<Matrix> es(info);
        lambda_min = es.eigenvalues().minCoeff();
        lambda_max = es.eigenvalues().maxCoeff();
        near_singular = lambda_min < 1e-8 * std::max(1.0, lambda_max);
    }
};

/// Observed information as the negative of
///     E[sum phi_dot | Y] + Var[sum phi | Y],
/// computed exactly. The variance term propagates the joint law of term
/// pairs through the conditional transitions of the latent chain given the
/// data, so cross covariances at every lag are exact.
inline InformationEstimate observed_information_louis(const SwitchingArModel& m,
                                                      const ObservationSeries& obs,
                                                      const Vector& init) {
    int n = obs.length();
    int d = m.num_regimes;
    int p = m.theta_dim();
    SmoothResult sm = smooth(m, obs, init);

    // Per step k: U_k(c,.) = E[phi_k | X_{k-1} = c] under the conditional
    // transition, M_k(b,.) = sum_a pair_k(a,b) phi_k(a,b), mu_k = E[phi_k].
    std::vector<Matrix> U(static_cast<std::size_t>(n), Matrix::Zero(d, p));
    std::vector<Matrix> M(static_cast<std::size_t>(n), Matrix::Zero(d, p));
    Vector mu = Vector::Zero(p);
    Matrix e_phidot = Matrix::Zero(p, p);
    Matrix second = Matrix::Zero(p, p);  // sum_k E[phi_k phi_k']
    Vector phi(p);
    Matrix pd(p, p);
    for (int k = 1; k <= n; ++k) {
        const Matrix& pair = sm.pair_marginals[static_cast<std::size_t>(k - 1)];
        const Matrix& T = sm.cond_transitions[static_cast<std::size_t>(k - 1)];
        Matrix& Uk = U[static_cast<std::size_t>(k - 1)];
        Matrix& Mk = M[static_cast<std::size_t>(k - 1)];
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                detail::fill_phi(m, obs, k, i, j, phi);
                Uk.row(i) += T(i, j) * phi.transpose();
                double w = pair(i, j);
                if (w != 0.0) {
                    Mk.row(j) += w * phi.transpose();
                    mu += w * phi;
                    second += w * (phi * phi.transpose());
                    detail::fill_phi_dot(m, obs, k, i, j, pd);
                    e_phidot += w * pd;
                }
            }
    }

    // Cross terms: for each i < j, E[phi_i phi_j'] = sum_b M_i(b,.)' R V with
    // R the law of X_{j-1} given X_i propagated through the conditional chain.
    Matrix cross = Matrix::Zero(p, p);
    for (int i = 1; i < n; ++i) {
        Matrix R = Matrix::Identity(d, d);
        const Matrix& Mi = M[static_cast<std::size_t>(i - 1)];
        for (int j = i + 1; j <= n; ++j) {
            Matrix V = R * U[static_cast<std::size_t>(j - 1)];  // d x p
            cross += Mi.transpose() * V;
            if (j < n) R = R * sm.cond_transitions[static_cast<std::size_t>(j - 1)];
        }
    }
    Matrix var = second - mu * mu.transpose() + cross + cross.transpose();
    Matrix hess = e_phidot + var;
    InformationEstimate est;
    est.info = -0.5 * (hess + hess.transpose());
    est.provenance = "louis-exact";
    est.finalize_eigen();
    return est;
}

inline InformationEstimate observed_information_louis(const SwitchingArModel& m,
                                                      const ObservationSeries& obs, int x0) {
    return observed_information_louis(m, obs, point_mass(m.num_regimes, x0));
}

struct FitOptions {
    OptimizeOptions optimize;
    // When >= 0, stop at the first iterate whose log likelihood is within
    // `slack` of `target_log_likelihood` (Theorem-7 style early stop).
    double early_stop_slack = -1.0;
    double target_log_likelihood = 0.0;
};

struct FitResult {
    SwitchingArModel model;
    Vector theta;
    double log_likelihood = 0.0;
    double grad_inf_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    bool used_nelder_mead = false;
    bool stopped_early = false;
    std::string message;
};

/// Maximize the conditional log likelihood over the unconstrained
/// parameterization by BFGS ascent with the smoothed-score gradient;
/// Nelder-Mead takes over after two line-search failures.
inline FitResult mle_fit(const SwitchingArModel& shape, const ObservationSeries& obs, int x0,
                         const Vector& theta0, const FitOptions& fit_opts = {}) {
    auto neg_loglik = [&](const Vector& th) -> double {
        try {
            SwitchingArModel m = theta_to_model(th, shape);
            return -log_likelihood(m, obs, x0);
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    auto neg_grad = [&](const Vector& th) -> Vector {
        SwitchingArModel m = theta_to_model(th, shape);
        return -fisher_score(m, obs, x0);
    };
    OptimizeOptions opts = fit_opts.optimize;
    if (fit_opts.early_stop_slack >= 0.0) {
        opts.has_stop_below = true;
        opts.stop_below = -(fit_opts.target_log_likelihood - fit_opts.early_stop_slack);
    }
    OptimizeResult r = bfgs_minimize(neg_loglik, neg_grad, theta0, opts);
    FitResult out;
    out.theta = r.x;
    out.model = theta_to_model(r.x, shape);
    out.log_likelihood = -r.f;
    out.grad_inf_norm = r.grad_inf_norm;
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.used_nelder_mead = r.used_nelder_mead;
    out.stopped_early = r.stopped_early;
    out.message = r.message;
    return out;
}

/// Multi-start wrapper: theta0 plus (num_starts - 1) Gaussian perturbations;
/// returns the best converged fit by log likelihood (best overall if none
/// converged).
inline FitResult multi_start_fit(const SwitchingArModel& shape, const ObservationSeries& obs,
                                 int x0, const Vector& theta0, int num_starts,
                                 double perturb_scale, Rng& rng, const FitOptions& opts = {}) {
    if (num_starts < 1) throw std::domain_error("multi_start_fit: need at least one start");
    std::vector<FitResult> fits;
    for (int s = 0; s < num_starts; ++s) {
        Vector start = theta0;
        if (s > 0)
            for (int i = 0; i < start.size(); ++i) start(i) += perturb_scale * rng.normal();
        try {
            fits.push_back(mle_fit(shape, obs, x0, start, opts));
        } catch (const std::exception&) {
            // Non-finite start: skipped, counted as a failed start.
        }
    }
    if (fits.empty()) throw std::runtime_error("multi_start_fit: every start failed");
    auto better = [](const FitResult& a, const FitResult& b) {
        if (a.converged != b.converged) return a.converged;
        return a.log_likelihood > b.log_likelihood;
    };
    FitResult best = fits.front();
    for (const auto& f : fits)
        if (better(f, best)) best = f;
    return best;
}

/// Permute regime labels of `fitted` to minimize the L2 distance of the
/// emission parameters (AR coefficients and noise scales) to `reference`.
inline SwitchingArModel align_labels(const SwitchingArModel& fitted,
                                     const SwitchingArModel& reference) {
    int d = fitted.num_regimes;
    std::vector<int> perm(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::vector<int> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double cost = 0.0;
        for (int x = 0; x < d; ++x) {
            int px = perm[static_cast<std::size_t>(x)];
            cost += (fitted.ar.row(px) - reference.ar.row(x)).squaredNorm();
            double ds = fitted.sigma(px) - reference.sigma(x);
            cost += ds * ds;
        }
        if (cost < best_cost) {
            best_cost = cost;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    SwitchingArModel out = fitted;
    for (int x = 0; x < d; ++x) {
        int px = best[static_cast<std::size_t>(x)];
        out.ar.row(x) = fitted.ar.row(px);
        out.sigma(x) = fitted.sigma(px);
        for (int y = 0; y < d; ++y) out.kernel(x, y) = fitted.kernel(px, best[static_cast<std::size_t>(y)]);
    }
    return out;
}

struct ChiSquareReport {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
};

/// Wald statistic (theta - theta_ref)' info (theta - theta_ref) with its
/// chi-square p-value on dim(theta) degrees of freedom.
inline ChiSquareReport chi_square_test(const Vector& theta, const Vector& theta_ref,
                                       const Matrix& info) {
    ChiSquareReport r;
    Vector dlt = theta - theta_ref;
    r.statistic = dlt.dot(info * dlt);
    r.df = static_cast<int>(theta.size());
    r.p_value = chi_square_survival(r.statistic, static_cast<double>(r.df));
    return r;
}

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Per-coordinate intervals theta_j -+ z * sqrt((info^{-1})_jj) at the given
/// level. Throws when `info` is not positive definite, naming the offending
/// eigenvalue.
inline std::vector<ConfidenceInterval> confidence_intervals(const Vector& theta,
                                                            const Matrix& info, double level) {
    if (!(level > 0.0 && level < 1.0))
        throw std::domain_error("confidence_intervals: level outside (0,1)");
    Eigen::SelfAdjointEigenSolver<Matrix> es(info);
    double lmin = es.eigenvalues().minCoeff();
    if (!(lmin > 0.0))
        throw std::runtime_error("confidence_intervals: information not positive definite "
                                 "(eigenvalue " + std::to_string(lmin) + ")");
    Matrix cov = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                 es.eigenvectors().transpose();
    double z = normal_quantile(0.5 + level / 2.0);
    std::vector<ConfidenceInterval> out(static_cast<std::size_t>(theta.size()));
    for (int j = 0; j < theta.size(); ++j) {
        double half = z * std::sqrt(cov(j, j));
        out[static_cast<std::size_t>(j)] = {theta(j) - half, theta(j) + half};
    }
    return out;
}

/// Jacobian of the constrained parameters (kernel entries row-major, AR
/// coefficients row-major, noise scales) with respect to the unconstrained
/// vector; used to carry information-based intervals into the constrained
/// scale by the delta method.
inline Matrix constrained_jacobian(const SwitchingArModel& m) {
    int d = m.num_regimes;
    int s = m.order;
    int p = m.theta_dim();
    int rows = d * d + d * (s + 1) + d;
    Matrix J = Matrix::Zero(rows, p);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int t = 0; t + 1 < d; ++t)
                J(i * d + j, i * (d - 1) + t) =
                    m.kernel(i, j) * ((t == j ? 1.0 : 0.0) - m.kernel(i, t));
    int ar_rows = d * d;
    int ar_cols = d * (d - 1);
    for (int t = 0; t < d * (s + 1); ++t) J(ar_rows + t, ar_cols + t) = 1.0;
    for (int x = 0; x < d; ++x)
        J(d * d + d * (s + 1) + x, d * (d - 1) + d * (s + 1) + x) = m.sigma(x);
    return J;
}

/// Constrained-scale intervals via the delta method: variance of constrained
/// coordinate c is (J info^{-1} J')_cc.
inline std::vector<ConfidenceInterval> confidence_intervals_constrained(
    const SwitchingArModel& m, const Matrix& info, double level) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(info);
    double lmin = es.eigenvalues().minCoeff();
    if (!(lmin > 0.0))
        throw std::runtime_error("confidence_intervals_constrained: information not positive "
                                 "definite (eigenvalue " + std::to_string(lmin) + ")");
    Matrix cov = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                 es.eigenvectors().transpose();
    Matrix J = constrained_jacobian(m);
    Matrix cvar = J * cov * J.transpose();
    int d = m.num_regimes, s = m.order;
    Vector c(d * d + d * (s + 1) + d);
    int at = 0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) c(at++) = m.kernel(i, j);
    for (int x = 0; x < d; ++x)
        for (int t = 0; t <= s; ++t) c(at++) = m.ar(x, t);
    for (int x = 0; x < d; ++x) c(at++) = m.sigma(x);
    double z = normal_quantile(0.5 + level / 2.0);
    std::vector<ConfidenceInterval> out(static_cast<std::size_t>(c.size()));
    for (int j = 0; j < c.size(); ++j) {
        double half = z * std::sqrt(std::max(cvar(j, j), 0.0));
        out[static_cast<std::size_t>(j)] = {c(j) - half, c(j) + half};
    }
    return out;
}

struct ApproxEstimatorReport {
    Vector theta_hat;
    Vector theta_tilde;
    double displacement = 0.0;       // euclidean distance
    double slack = 0.0;              // R_n
    double lambda_min = 0.0;         // smallest eigenvalue of the observed information
    double bound = 0.0;              // 1.1 * sqrt(2 R_n / lambda_min)
    bool within_bound = false;
    bool conclusive = true;          // false when the information is not PD
};

/// Theorem-7 style check: the estimator produced by stopping the ascent as
/// soon as it is within `slack` of the optimum must lie within
/// 1.1 * sqrt(2 slack / lambda_min(observed information)) of the optimum.
inline ApproxEstimatorReport approx_estimator_check(const SwitchingArModel& shape,
                                                    const ObservationSeries& obs, int x0,
                                                    const Vector& theta0, double slack,
                                                    const FitOptions& opts = {}) {
    if (slack < 0.0) throw std::domain_error("approx_estimator_check: slack must be >= 0");
    ApproxEstimatorReport rep;
    rep.slack = slack;
    FitResult full = mle_fit(shape, obs, x0, theta0, opts);
    rep.theta_hat = full.theta;
    if (slack == 0.0) {
        rep.theta_tilde = full.theta;
    } else {
        FitOptions stopped = opts;
        stopped.early_stop_slack = slack;
        stopped.target_log_likelihood = full.log_likelihood;
        FitResult part = mle_fit(shape, obs, x0, theta0, stopped);
        rep.theta_tilde = part.theta;
    }
    rep.displacement = (rep.theta_tilde - rep.theta_hat).norm();
    InformationEstimate info = observed_information_louis(full.model, obs, x0);
    rep.lambda_min = info.lambda_min;
    if (!(info.lambda_min > 0.0)) {
        rep.conclusive = false;
        return rep;
    }
    rep.bound = 1.1 * std::sqrt(2.0 * slack / info.lambda_min);
    rep.within_bound = slack == 0.0 ? rep.displacement == 0.0 : rep.displacement <= rep.bound;
    return rep;
}

struct NormalityHarnessConfig {
    int n = 1000;
    int replications = 200;
    double level = 0.95;
    int x0 = 0;
    std::uint64_t seed = 1;
};

struct NormalityHarnessResult {
    int completed = 0;
    int failed = 0;
    double coverage = 0.0;            // pooled over coordinates
    Vector coordinate_coverage;       // per unconstrained coordinate
    Vector standardized_mean;
    Vector standardized_variance;
    double max_abs_standardized_mean = 0.0;
};

/// Monte Carlo check of asymptotic normality: simulate `replications`
/// datasets at the true model, refit each, standardize sqrt-n errors by the
/// observed information, and report coverage of information-based intervals.
/// Replications run on worker threads with independent child RNG streams;
/// aggregation is by replication index, so results do not depend on
/// scheduling.
inline NormalityHarnessResult asymptotic_normality_harness(const SwitchingArModel& truth,
                                                           const NormalityHarnessConfig& cfg) {
    Vector theta_star = model_to_theta(truth);
    int p = truth.theta_dim();
    Rng root(cfg.seed);
    std::vector<double> lag0(static_cast<std::size_t>(truth.order), 0.0);

    struct Row {
        bool ok = false;
        Vector standardized;
        std::vector<int> covered;
    };
    std::vector<Row> rows(static_cast<std::size_t>(cfg.replications));
    parallel_for(cfg.replications, [&](std::int64_t rep) {
        Rng rng = root.child(static_cast<std::uint64_t>(rep));
        Row& row = rows[static_cast<std::size_t>(rep)];
        try {
            SimulatedPath path = simulate(truth, cfg.n, cfg.x0, lag0, rng);
            FitResult fit = mle_fit(truth, path.observations, cfg.x0, theta_star);
            if (!fit.converged || !std::isfinite(fit.log_likelihood)) return;
            SwitchingArModel aligned = align_labels(fit.model, truth);
            Vector theta_hat = model_to_theta(aligned);
            InformationEstimate info =
                observed_information_louis(aligned, path.observations, cfg.x0);
            Eigen::SelfAdjointEigenSolver<Matrix> es(info.info);
            if (!(es.eigenvalues().minCoeff() > 0.0)) return;
            Matrix half = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
                          es.eigenvectors().transpose();
            row.standardized = half * (theta_hat - theta_star);
            Matrix cov = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                         es.eigenvectors().transpose();
            double z = normal_quantile(0.5 + cfg.level / 2.0);
            row.covered.resize(static_cast<std::size_t>(p));
            for (int j = 0; j < p; ++j) {
                double half_w = z * std::sqrt(cov(j, j));
                row.covered[static_cast<std::size_t>(j)] =
                    std::abs(theta_hat(j) - theta_star(j)) <= half_w ? 1 : 0;
            }
            row.ok = true;
        } catch (const std::exception&) {
            row.ok = false;
        }
    });

    NormalityHarnessResult out;
    out.coordinate_coverage = Vector::Zero(p);
    std::vector<RunningStat> stats(static_cast<std::size_t>(p));
    for (const Row& row : rows) {
        if (!row.ok) {
            ++out.failed;
            continue;
        }
        ++out.completed;
        for (int j = 0; j < p; ++j) {
            stats[static_cast<std::size_t>(j)].add(row.standardized(j));
            out.coordinate_coverage(j) += row.covered[static_cast<std::size_t>(j)];
        }
    }
    if (out.completed == 0) throw std::runtime_error("asymptotic_normality_harness: no replication completed");
    out.standardized_mean.resize(p);
    out.standardized_variance.resize(p);
    for (int j = 0; j < p; ++j) {
        out.standardized_mean(j) = stats[static_cast<std::size_t>(j)].mean();
        out.standardized_variance(j) = stats[static_cast<std::size_t>(j)].variance();
    }
    out.max_abs_standardized_mean = out.standardized_mean.cwiseAbs().maxCoeff();
    out.coverage = out.coordinate_coverage.sum() / static_cast<double>(out.completed * p);
    out.coordinate_coverage /= static_cast<double>(out.completed);
    return out;
}

}  // namespace regimeml
