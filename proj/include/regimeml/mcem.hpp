#pragma once

// Monte Carlo EM for the angle-tracking model: a random-scan single-site
// Metropolis-Hastings sampler over the latent angle path (targeting the
// posterior given the snapshots and the fixed initial angle), a Monte Carlo
// E-step, closed-form power updates plus a one-dimensional search for the
// walk variance in the M-step, the outer iteration loop, and a Monte Carlo
// estimate of the observed information from the same sampler.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regimeml/common.hpp"
#include "regimeml/doa.hpp"
#include "regimeml/inference.hpp"
#include "regimeml/random.hpp"
#include "regimeml/special.hpp"

namespace regimeml {

struct McemConfig {
    int iterations = 50;
    int mh_samples = 40000;       ///< post-burn-in proposals per E-step
    int burn_in = 20000;
    int eta_thin = 400;           ///< keep every eta_thin-th path for the variance search
    double v_search_lo = 1e-4;    ///< walk-variance search interval (variance scale)
    double v_search_hi = 25.0;
    double mh_growth = 1.0;       ///< optional per-iteration sample growth factor
    bool warm_start = true;       ///< continue the chain across iterations
    bool init_path_constant = false;  ///< start from the all-x0 path instead of a prior draw
    int final_mean_window = 25;   ///< trailing iterates averaged into the final estimate
};

inline void validate_mcem_config(const McemConfig& cfg) {
    if (cfg.iterations < 0) throw std::invalid_argument("iterations must be >= 0");
    if (cfg.mh_samples < 1) throw std::invalid_argument("mh_samples must be >= 1");
    if (cfg.burn_in < 0 || cfg.burn_in >= cfg.mh_samples)
        throw std::invalid_argument("burn_in must satisfy 0 <= burn_in < mh_samples");
    if (cfg.eta_thin < 1) throw std::invalid_argument("eta_thin must be >= 1");
    if (!(cfg.v_search_lo > 0.0) || !(cfg.v_search_hi > cfg.v_search_lo))
        throw std::invalid_argument("invalid walk-variance search interval");
    if (!(cfg.mh_growth >= 1.0)) throw std::invalid_argument("mh_growth must be >= 1");
    if (cfg.final_mean_window < 1) throw std::invalid_argument("final_mean_window must be >= 1");
}

/// Sampler state: the current latent path with the per-site steering power
/// |a(path_k)^H y_k|^2 cached, plus lifetime proposal counters.
struct MhChain {
    double x0 = 0.0;
    std::vector<double> path;
    std::vector<double> power;
    long long proposed = 0;
    long long accepted = 0;
};

inline void refresh_chain_cache(MhChain& chain, const ArraySnapshots& data) {
    const int n = static_cast<int>(chain.path.size());
    chain.power.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        chain.power[static_cast<std::size_t>(k)] =
            steering_power(chain.path[static_cast<std::size_t>(k)],
                           data.y[static_cast<std::size_t>(k)]);
}

inline MhChain make_chain_from_path(const ArraySnapshots& data, double x0,
                                    std::vector<double> path) {
    if (static_cast<int>(path.size()) != data.size())
        throw std::invalid_argument("chain path length must match the data length");
    MhChain chain;
    chain.x0 = x0;
    chain.path = std::move(path);
    for (double& x : chain.path) x = wrap_angle(x);
    refresh_chain_cache(chain, data);
    return chain;
}

/// Initial path drawn from the latent prior: the wrapped random walk out of x0.
inline MhChain make_chain_from_prior(const DoaParams& p, const ArraySnapshots& data, double x0,
                                     Rng& rng) {
    const int n = data.size();
    std::vector<double> path(static_cast<std::size_t>(n));
    double sd = std::sqrt(p.sigma_eta_sq);
    double w = x0;
    for (int k = 0; k < n; ++k) {
        w += sd * rng.normal();
        path[static_cast<std::size_t>(k)] = wrap_angle(w);
    }
    return make_chain_from_path(data, x0, std::move(path));
}

inline MhChain make_chain_constant(const ArraySnapshots& data, double x0) {
    return make_chain_from_path(
        data, x0, std::vector<double>(static_cast<std::size_t>(data.size()), wrap_angle(x0)));
}

/// Draw from the wrapped-Gaussian transition out of `center`.
inline double sample_wrapped_proposal(double sigma_eta_sq, double center, Rng& rng) {
    if (!(sigma_eta_sq > 0.0)) throw std::invalid_argument("sigma_eta_sq must be positive");
    return wrap_angle(center + std::sqrt(sigma_eta_sq) * rng.normal());
}

/// Outcome of one proposal, exposed so callers can maintain derived caches.
struct MhStep {
    int site = 0;  ///< 1-based index of the proposed site
    bool accepted = false;
    double old_angle = 0.0;
    double old_power = 0.0;
};

/// Log acceptance ratio for replacing site `site` (1-based) by `proposal`
/// when the proposal is drawn from the transition out of the previous angle.
/// That choice cancels the proposal density against the transition into the
/// site and every untouched factor, leaving the emission ratio at the site
/// times (except at the last site) the transition ratio into the next angle.
inline double mh_log_ratio(const MhChain& chain, const DoaParams& p, const ArraySnapshots& data,
                           int site, double proposal) {
    const int n = static_cast<int>(chain.path.size());
    const double v = p.sigma_eta_sq;
    const double S = p.sigma_s_sq;
    const double A = p.sigma_eps_sq;
    const double B = data.sensors * S + A;
    const double cur = chain.path[static_cast<std::size_t>(site - 1)];
    const double m_cur = chain.power[static_cast<std::size_t>(site - 1)];
    const double m_prop = steering_power(proposal, data.y[static_cast<std::size_t>(site - 1)]);
    double log_ratio = (S / (A * B)) * (m_prop - m_cur);
    if (site < n) {
        const double next = chain.path[static_cast<std::size_t>(site)];
        log_ratio += wrapped_transition_log_density(v, proposal, next) -
                     wrapped_transition_log_density(v, cur, next);
    }
    return log_ratio;
}

/// One random-scan proposal: pick a site uniformly, propose from the
/// transition out of the previous angle, accept with the single-site ratio.
inline MhStep mh_sweep(MhChain& chain, const DoaParams& p, const ArraySnapshots& data,
                       Rng& rng) {
    const int n = static_cast<int>(chain.path.size());
    if (n < 1) throw std::invalid_argument("mh_sweep: empty chain");

    MhStep step;
    step.site = 1 + rng.uniform_int(n);
    const int i = step.site;
    const double prev = i >= 2 ? chain.path[static_cast<std::size_t>(i - 2)] : chain.x0;
    const double prop = sample_wrapped_proposal(p.sigma_eta_sq, prev, rng);
    const double log_ratio = mh_log_ratio(chain, p, data, i, prop);

    ++chain.proposed;
    step.old_angle = chain.path[static_cast<std::size_t>(i - 1)];
    step.old_power = chain.power[static_cast<std::size_t>(i - 1)];
    if (log_ratio >= 0.0 || std::log(rng.uniform_pos()) < log_ratio) {
        chain.path[static_cast<std::size_t>(i - 1)] = prop;
        chain.power[static_cast<std::size_t>(i - 1)] =
            steering_power(prop, data.y[static_cast<std::size_t>(i - 1)]);
        ++chain.accepted;
        step.accepted = true;
    }
    return step;
}

struct EStepResult {
    double beta_hat = 0.0;  ///< MC mean of sum_k |a(x_k)^H y_k|^2
    double accept_rate = 0.0;
    std::vector<std::vector<double>> eta_paths;  ///< thinned paths for the variance search
    double sum_abs_y_sq = 0.0;
    int n = 0;
    int d = 0;
    long long proposed = 0;
    long long accepted = 0;
};

/// Run burn_in + mh_samples proposals; average the total steering power over
/// every post-burn-in state and retain every eta_thin-th path.
inline EStepResult e_step(MhChain& chain, const DoaParams& p, const ArraySnapshots& data,
                          const McemConfig& cfg, Rng& rng, int mh_samples_override = -1) {
    validate_doa_params(p);
    const int samples = mh_samples_override > 0 ? mh_samples_override : cfg.mh_samples;
    if (samples < 1) throw std::invalid_argument("e_step: mh_samples must be >= 1");
    if (cfg.burn_in < 0) throw std::invalid_argument("e_step: burn_in must be >= 0");
    if (cfg.eta_thin < 1) throw std::invalid_argument("e_step: eta_thin must be >= 1");

    const long long proposed0 = chain.proposed;
    const long long accepted0 = chain.accepted;
    for (int t = 0; t < cfg.burn_in; ++t) mh_sweep(chain, p, data, rng);

    const int n = static_cast<int>(chain.path.size());
    double running_total = 0.0;
    for (int k = 0; k < n; ++k) running_total += chain.power[static_cast<std::size_t>(k)];

    EStepResult out;
    out.n = n;
    out.d = data.sensors;
    out.sum_abs_y_sq = total_power(data);
    double beta_acc = 0.0;
    for (int t = 0; t < samples; ++t) {
        MhStep step = mh_sweep(chain, p, data, rng);
        if (step.accepted)
            running_total += chain.power[static_cast<std::size_t>(step.site - 1)] -
                             step.old_power;
        beta_acc += running_total;
        if ((t + 1) % cfg.eta_thin == 0) out.eta_paths.push_back(chain.path);
    }
    out.beta_hat = beta_acc / samples;
    out.proposed = chain.proposed - proposed0;
    out.accepted = chain.accepted - accepted0;
    out.accept_rate = static_cast<double>(out.accepted) / static_cast<double>(out.proposed);
    return out;
}

struct MStepResult {
    DoaParams params;
    bool clamped_s = false;
    bool clamped_eps = false;
    std::vector<std::string> warnings;
};

/// Closed-form power updates from beta_hat, plus a golden-section search on
/// the log walk variance maximizing the retained-path average of the
/// complete-data transition log likelihood. Negative moment estimates
/// (possible through Monte Carlo noise) are clamped at 1e-10 with a warning.
inline MStepResult m_step(const EStepResult& est, double x0, double v_lo, double v_hi) {
    if (est.eta_paths.empty())
        throw std::invalid_argument("m_step: no retained paths for the variance search");
    if (est.n < 1 || est.d < 2) throw std::invalid_argument("m_step: bad dimensions");
    const double n = est.n;
    const int d = est.d;

    MStepResult out;
    if (est.beta_hat < 0.0 || est.beta_hat > d * est.sum_abs_y_sq)
        out.warnings.push_back("beta_hat outside its feasible moment range");

    double s_hat = (est.beta_hat - est.sum_abs_y_sq) / (n * d * (d - 1));
    double a_hat = (est.sum_abs_y_sq - est.beta_hat / d) / (n * (d - 1));
    if (s_hat < 1e-10) {
        s_hat = 1e-10;
        out.clamped_s = true;
        out.warnings.push_back("sigma_s_sq estimate clamped at 1e-10");
    }
    if (a_hat < 1e-10) {
        a_hat = 1e-10;
        out.clamped_eps = true;
        out.warnings.push_back("sigma_eps_sq estimate clamped at 1e-10");
    }

    auto objective = [&](double log_v) {
        const double v = std::exp(log_v);
        double acc = 0.0;
        for (const auto& path : est.eta_paths) {
            double prev = x0;
            for (double x : path) {
                acc += wrapped_transition_log_density(v, prev, x);
                prev = x;
            }
        }
        return acc / static_cast<double>(est.eta_paths.size());
    };
    double v_hat =
        std::exp(golden_section_maximize(objective, std::log(v_lo), std::log(v_hi), 1e-6));

    out.params = DoaParams{v_hat, s_hat, a_hat};
    return out;
}

struct McemIterate {
    DoaParams params;
    double beta_hat = std::numeric_limits<double>::quiet_NaN();
    double accept_rate = std::numeric_limits<double>::quiet_NaN();
};

struct McemFit {
    std::vector<McemIterate> trajectory;  ///< entry 0 is the initial value
    DoaParams theta_tilde;                ///< mean of the trailing iterates
    MhChain chain;                        ///< final sampler state
    std::vector<std::string> warnings;
};

/// Alternate E- and M-steps for cfg.iterations rounds. The chain carries
/// over between iterations by default (warm start); with warm_start off a
/// fresh prior path is drawn at each round's current parameters.
inline McemFit mcem_fit(const ArraySnapshots& data, double x0, const DoaParams& init,
                        const McemConfig& cfg, Rng& rng) {
    validate_doa_params(init);
    validate_mcem_config(cfg);

    McemFit out;
    out.trajectory.push_back(McemIterate{init, std::numeric_limits<double>::quiet_NaN(),
                                         std::numeric_limits<double>::quiet_NaN()});
    DoaParams cur = init;
    MhChain chain = cfg.init_path_constant ? make_chain_constant(data, x0)
                                           : make_chain_from_prior(init, data, x0, rng);
    double samples_scale = cfg.mh_samples;
    for (int p = 1; p <= cfg.iterations; ++p) {
        if (!cfg.warm_start && p > 1) chain = make_chain_from_prior(cur, data, x0, rng);
        int samples = static_cast<int>(std::ceil(samples_scale));
        EStepResult est = e_step(chain, cur, data, cfg, rng, samples);
        MStepResult m = m_step(est, x0, cfg.v_search_lo, cfg.v_search_hi);
        cur = m.params;
        for (const auto& w : m.warnings)
            out.warnings.push_back("iteration " + std::to_string(p) + ": " + w);
        out.trajectory.push_back(McemIterate{cur, est.beta_hat, est.accept_rate});
        samples_scale *= cfg.mh_growth;
    }

    const std::size_t window =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.final_mean_window),
                              out.trajectory.size());
    DoaParams mean{0.0, 0.0, 0.0};
    for (std::size_t t = out.trajectory.size() - window; t < out.trajectory.size(); ++t) {
        mean.sigma_eta_sq += out.trajectory[t].params.sigma_eta_sq;
        mean.sigma_s_sq += out.trajectory[t].params.sigma_s_sq;
        mean.sigma_eps_sq += out.trajectory[t].params.sigma_eps_sq;
    }
    mean.sigma_eta_sq /= static_cast<double>(window);
    mean.sigma_s_sq /= static_cast<double>(window);
    mean.sigma_eps_sq /= static_cast<double>(window);
    out.theta_tilde = mean;
    out.chain = std::move(chain);
    return out;
}

struct McInfoConfig {
    long long burn_in = 100000;
    long long samples = 200000;
    long long refresh_every = 5000;  ///< full cache rebuild cadence (drift control)
};

/// Monte Carlo observed information at p in the coordinates
/// (sigma_eta_sq, sigma_s_sq, sigma_eps_sq): minus the sample mean of the
/// complete second derivative plus the sample covariance of the complete
/// score, over post-burn-in sampler states. The emission part of the score
/// is affine in the total steering power, so per-state work reduces to the
/// transition derivative caches touched by the accepted move.
inline InformationEstimate mc_observed_information(const DoaParams& p,
                                                   const ArraySnapshots& data, double x0,
                                                   const McInfoConfig& cfg, Rng& rng,
                                                   MhChain* chain_io = nullptr) {
    validate_doa_params(p);
    if (cfg.samples < 2) throw std::invalid_argument("mc_observed_information: samples < 2");
    const int n = data.size();
    const int d = data.sensors;
    const double v = p.sigma_eta_sq;
    const double S = p.sigma_s_sq;
    const double A = p.sigma_eps_sq;
    const double B = d * S + A;
    const double total_u = total_power(data);

    MhChain local;
    MhChain& chain = chain_io != nullptr ? *chain_io : local;
    if (chain.path.empty()) chain = make_chain_from_prior(p, data, x0, rng);
    for (long long t = 0; t < cfg.burn_in; ++t) mh_sweep(chain, p, data, rng);

    std::vector<double> phi_v(static_cast<std::size_t>(n));
    std::vector<double> dvv(static_cast<std::size_t>(n));
    double sum_phi_v = 0.0, sum_dvv = 0.0, total_m = 0.0;
    auto rebuild = [&]() {
        sum_phi_v = 0.0;
        sum_dvv = 0.0;
        total_m = 0.0;
        double prev = chain.x0;
        for (int k = 0; k < n; ++k) {
            double cur = chain.path[static_cast<std::size_t>(k)];
            WrappedDensity wd = wrapped_transition_derivs(v, prev, cur);
            phi_v[static_cast<std::size_t>(k)] = wd.d_v;
            dvv[static_cast<std::size_t>(k)] = wd.d_vv;
            sum_phi_v += wd.d_v;
            sum_dvv += wd.d_vv;
            total_m += chain.power[static_cast<std::size_t>(k)];
            prev = cur;
        }
    };
    rebuild();

    auto update_site = [&](int k) {
        // transition into site k (1-based), i.e. cache slot k-1
        double prev = k >= 2 ? chain.path[static_cast<std::size_t>(k - 2)] : chain.x0;
        WrappedDensity wd = wrapped_transition_derivs(v, prev,
                                                      chain.path[static_cast<std::size_t>(k - 1)]);
        sum_phi_v += wd.d_v - phi_v[static_cast<std::size_t>(k - 1)];
        sum_dvv += wd.d_vv - dvv[static_cast<std::size_t>(k - 1)];
        phi_v[static_cast<std::size_t>(k - 1)] = wd.d_v;
        dvv[static_cast<std::size_t>(k - 1)] = wd.d_vv;
    };

    using Eigen::Matrix3d;
    using Eigen::Vector3d;
    Vector3d mean = Vector3d::Zero();
    Matrix3d m2 = Matrix3d::Zero();
    double mean_dvv = 0.0, mean_m = 0.0;
    long long count = 0;

    for (long long t = 0; t < cfg.samples; ++t) {
        MhStep step = mh_sweep(chain, p, data, rng);
        if (step.accepted) {
            total_m += chain.power[static_cast<std::size_t>(step.site - 1)] - step.old_power;
            update_site(step.site);
            if (step.site < n) update_site(step.site + 1);
        }
        if ((t + 1) % cfg.refresh_every == 0) rebuild();

        Vector3d x;
        x(0) = sum_phi_v;
        x(1) = -n * static_cast<double>(d) / B + total_m / (B * B);
        x(2) = n * (-(d - 1) / A - 1.0 / B) + total_u / (A * A) -
               S * (A + B) / (A * A * B * B) * total_m;
        ++count;
        Vector3d delta = x - mean;
        mean += delta / static_cast<double>(count);
        m2 += delta * (x - mean).transpose();
        mean_dvv += (sum_dvv - mean_dvv) / static_cast<double>(count);
        mean_m += (total_m - mean_m) / static_cast<double>(count);
    }

    Matrix3d mean_hess = Matrix3d::Zero();
    mean_hess(0, 0) = mean_dvv;
    mean_hess(1, 1) = n * static_cast<double>(d) * d / (B * B) - 2.0 * d * mean_m / (B * B * B);
    mean_hess(1, 2) = mean_hess(2, 1) = n * static_cast<double>(d) / (B * B) -
                                         2.0 * mean_m / (B * B * B);
    mean_hess(2, 2) = n * ((d - 1) / (A * A) + 1.0 / (B * B)) - 2.0 * total_u / (A * A * A) -
                      S * (2.0 / (A * A * B * B) -
                           2.0 * (A + B) * (A + B) / (A * A * A * B * B * B)) * mean_m;

    Matrix3d cov = m2 / static_cast<double>(count - 1);
    Matrix3d info3 = -(mean_hess + cov);

    InformationEstimate out;
    double asym = 0.0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) asym = std::max(asym, std::abs(info3(a, b) - info3(b, a)));
    if (asym > 1e-6)
        out.warnings.push_back("information estimate asymmetric before symmetrization");
    out.info = Matrix(3, 3);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) out.info(a, b) = 0.5 * (info3(a, b) + info3(b, a));
    out.provenance = "louis-monte-carlo";
    out.finalize_eigen();
    return out;
}

}  // namespace regimeml
