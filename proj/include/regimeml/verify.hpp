#pragma once

// Named self-contained correctness checks with measured margins: the release
// gate behind the `verify` subcommand. Every check is deterministic given its
// seed and regenerates its own random instances, comparing independent
// computation routes (closed forms vs dense linear algebra, recursions vs
// exhaustive enumeration, analytic derivatives vs finite differences, MCMC
// vs filter algebra).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "regimeml/common.hpp"
#include "regimeml/doa.hpp"
#include "regimeml/filtering.hpp"
#include "regimeml/grid_surrogate.hpp"
#include "regimeml/inference.hpp"
#include "regimeml/mcem.hpp"
#include "regimeml/model.hpp"
#include "regimeml/oracles.hpp"
#include "regimeml/random.hpp"

namespace regimeml {

struct CheckResult {
    std::string name;
    bool pass = false;
    double margin = 0.0;     ///< measured worst-case value
    double threshold = 0.0;  ///< margin must stay at or below this
    double seconds = 0.0;
    std::string details;
};

namespace checks {

inline SwitchingArModel random_finite_model(Rng& rng, int d, int s, double floor = 0.05) {
    SwitchingArModel m;
    m.num_regimes = d;
    m.order = s;
    m.kernel.resize(d, d);
    for (int i = 0; i < d; ++i) {
        double row = 0.0;
        for (int j = 0; j < d; ++j) {
            m.kernel(i, j) = floor + rng.uniform();
            row += m.kernel(i, j);
        }
        m.kernel.row(i) /= row;
    }
    m.ar.resize(d, s + 1);
    for (int x = 0; x < d; ++x) {
        m.ar(x, 0) = rng.normal();
        for (int j = 1; j <= s; ++j) m.ar(x, j) = 0.8 * (rng.uniform() - 0.5);
    }
    m.sigma.resize(d);
    for (int x = 0; x < d; ++x) m.sigma(x) = 0.4 + 1.5 * rng.uniform();
    return m;
}

inline ObservationSeries random_series(const SwitchingArModel& m, int n, int x0, Rng& rng) {
    std::vector<double> lag(static_cast<std::size_t>(m.order));
    for (double& v : lag) v = rng.normal();
    return simulate(m, n, x0, lag, rng).observations;
}

/// Three likelihood routes (matrix product, forward filter, exhaustive path
/// enumeration) agree on 100 random finite-state models.
inline CheckResult likelihood_routes(unsigned seed) {
    Rng rng(seed);
    CheckResult r;
    r.name = "routes";
    r.threshold = 1e-12;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        int d = 2 + trial % 2;
        int s = (trial / 2) % 2;
        int n = 1 + rng.uniform_int(8);
        SwitchingArModel m = random_finite_model(rng, d, s);
        ObservationSeries obs = random_series(m, n, 0, rng);
        int x0 = rng.uniform_int(d);
        double l_filter = log_likelihood(m, obs, x0);
        double l_matrix = matrix_product_log_likelihood(m, obs, x0);
        double l_paths = oracle::brute_force_log_likelihood(m, obs, x0);
        double scale = std::max(1.0, std::abs(l_paths));
        worst = std::max(worst, std::abs(l_filter - l_paths) / scale);
        worst = std::max(worst, std::abs(l_matrix - l_paths) / scale);
    }
    r.margin = worst;
    r.pass = worst <= r.threshold;
    r.details = "100 models, d in {2,3}, s in {0,1}, n <= 8, relative";
    return r;
}

/// Filter forgetting: total-variation gap of two point-mass initializations
/// decays at least geometrically with rate rho = 1 - sigma_minus/sigma_plus.
inline CheckResult corollary1_forgetting(unsigned seed) {
    Rng rng(seed);
    CheckResult r;
    r.name = "corollary1";
    r.threshold = 1e-12;
    const int n = 50;
    double worst = -1e300;
    for (int trial = 0; trial < 1000; ++trial) {
        int d = 2 + trial % 3;
        int s = (trial / 3) % 2;
        SwitchingArModel m = random_finite_model(rng, d, s);
        ObservationSeries obs = random_series(m, n, 0, rng);
        double rho = forgetting_rate(m.kernel);
        int a = rng.uniform_int(d);
        int b = (a + 1 + rng.uniform_int(d - 1)) % d;
        Vector gap = forgetting_gap(m, obs, point_mass(d, a), point_mass(d, b));
        double bound = 1.0;  // gap(k) is the TV at time k, so the bound is rho^k from k = 0
        for (int k = 0; k < gap.size(); ++k) {
            worst = std::max(worst, gap(k) - bound);
            bound *= rho;
        }
    }
    r.margin = worst;
    r.pass = worst <= r.threshold;
    r.details = "1000 instances, n = 50, gap(k) - rho^k over all k";
    return r;
}

/// Initial-condition bias of the conditional log likelihood against the
/// stationary-start version stays below 1/(1-rho)^2 for every start state.
inline CheckResult lemma2_stationary_gap(unsigned seed) {
    Rng rng(seed);
    CheckResult r;
    r.name = "lemma2";
    r.threshold = 1.0;
    const int n = 50;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        int d = 2 + trial % 3;
        SwitchingArModel m = random_finite_model(rng, d, 0);
        ObservationSeries obs = random_series(m, n, 0, rng);
        double rho = forgetting_rate(m.kernel);
        double bound = 1.0 / ((1.0 - rho) * (1.0 - rho));
        double l_bar = stationary_log_likelihood(m, obs);
        for (int x0 = 0; x0 < d; ++x0) {
            double ratio = std::abs(log_likelihood(m, obs, x0) - l_bar) / bound;
            worst = std::max(worst, ratio);
        }
    }
    r.margin = worst;
    r.pass = worst <= r.threshold;
    r.details = "200 order-0 instances, |l_n(x0) - l_bar| / (1-rho)^-2, all x0";
    return r;
}

/// Smoothing-based score against central finite differences of the
/// log likelihood in the unconstrained coordinates.
inline CheckResult fisher_identity(unsigned seed) {
    Rng rng(seed);
    CheckResult r;
    r.name = "fisher";
    r.threshold = 1e-6;
    const int n = 50;
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        int d = 2 + trial % 2;
        int s = (trial / 2) % 2;
        SwitchingArModel m = random_finite_model(rng, d, s);
        ObservationSeries obs = random_series(m, n, 0, rng);
        int x0 = rng.uniform_int(d);
        Vector theta = model_to_theta(m);
        Vector analytic = fisher_score(m, obs, x0);
        auto ll = [&](const Vector& t) {
            return log_likelihood(theta_to_model(t, m), obs, x0);
        };
        Vector fd = oracle::fd_gradient(ll, theta, 1e-5);
        double rel = (analytic - fd).cwiseAbs().maxCoeff() /
                     std::max(1.0, fd.cwiseAbs().maxCoeff());
        worst = std::max(worst, rel);
    }
    r.margin = worst;
    r.pass = worst <= r.threshold;
    r.details = "50 instances, n = 50, max-norm relative to FD gradient";
    return r;
}

/// Louis-principle observed information against the negated FD Hessian.
inline CheckResult louis_identity(unsigned seed) {
    Rng rng(seed);
    CheckResult r;
    r.name = "louis";
    r.threshold = 1e-4;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        int d = 2 + trial % 2;
        int s = trial % 2;
        int n = 20 + rng.uniform_int(31);
        SwitchingArModel m = random_finite_model(rng, d, s);
        ObservationSeries obs = random_series(m, n, 0, rng);
        int x0 = rng.uniform_int(d);
        Vector theta = model_to_theta(m);
        InformationEstimate est = observed_information_louis(m, obs, x0);
        auto ll = [&](const Vector& t) {
            return log_likelihood(theta_to_model(t, m), obs, x0);
        };
        Matrix fd = -oracle::fd_hessian(ll, theta, 1e-4);
        double rel = (est.info - fd).norm() / std::max(1.0, fd.norm());
        worst = std::max(worst, rel);
    }
    r.margin = worst;
    r.pass = worst <= r.threshold;
    r.details = "20 instances, n <= 50, relative Frobenius vs -FD Hessian";
    return r;
}

/// Closed-form sensor-array emission density vs dense complex linear algebra,
/// the rank-one inverse identity, and wrapped-density normalization.
inline CheckResult doa_density_identities(unsigned seed) {
    Rng rng(seed);
    CheckResult r;
    r.name = "doa-density";
    r.threshold = 1.0;  // componentwise ratios to their own tolerances
    double worst = 0.0;
    std::string note;

    double worst_density = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        int d = 2 + trial % 7;
        DoaParams p{std::exp(rng.uniform() * 4.0 - 2.0), std::exp(rng.uniform() * 3.0 - 1.5),
                    std::exp(rng.uniform() * 3.0 - 1.5)};
        double w = rng.uniform() * kTwoPi;
        ComplexVector y(d);
        for (int j = 0; j < d; ++j) y(j) = Complex(2.0 * rng.normal(), 2.0 * rng.normal());
        double closed = emission_log_density(p, y, w);
        double dense = oracle::dense_emission_log_density(p, y, w);
        worst_density =
            std::max(worst_density, std::abs(closed - dense) / std::max(1.0, std::abs(dense)));
    }
    worst = std::max(worst, worst_density / 1e-10);

    double worst_inverse = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        int d = 2 + trial % 7;
        DoaParams p{0.25, std::exp(rng.uniform() * 3.0 - 1.5),
                    std::exp(rng.uniform() * 3.0 - 1.5)};
        double w = rng.uniform() * kTwoPi;
        ComplexMatrix sigma = snapshot_covariance(p, w, d);
        ComplexMatrix inv = snapshot_covariance_inverse(p, w, d);
        double err = (sigma * inv - ComplexMatrix::Identity(d, d)).norm();
        worst_inverse = std::max(worst_inverse, err);
    }
    worst = std::max(worst, worst_inverse / 1e-10);

    double worst_norm = 0.0;
    for (double v : {1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0}) {
        for (double x : {0.0, 1.3, kPi}) {
            auto f = [&](double t) { return std::exp(wrapped_transition_log_density(v, x, t)); };
            double mass = oracle::trapezoid_periodic(f, kTwoPi, 4096);
            worst_norm = std::max(worst_norm, std::abs(mass - 1.0));
        }
    }
    worst = std::max(worst, worst_norm / 1e-8);

    r.margin = worst;
    r.pass = worst <= r.threshold;
    r.details = "density rel " + std::to_string(worst_density) + " (tol 1e-10), inverse " +
                std::to_string(worst_inverse) + " (tol 1e-10), normalization " +
                std::to_string(worst_norm) + " (tol 1e-8); margin is worst ratio";
    return r;
}

/// Simplified single-site acceptance probability vs the full-joint ratio.
inline CheckResult mh_ratio_oracle(unsigned seed) {
    Rng rng(seed);
    CheckResult r;
    r.name = "mh-ratio";
    r.threshold = 1e-12;
    double worst = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        int n = 1 + rng.uniform_int(6);
        int d = 2 + rng.uniform_int(3);
        DoaParams truth{0.25, 0.64, 0.36};
        DoaParams p{std::exp(rng.uniform() * 3.0 - 2.0), std::exp(rng.uniform() * 2.0 - 1.0),
                    std::exp(rng.uniform() * 2.0 - 1.0)};
        Rng data_rng(seed + 7919u * static_cast<unsigned>(trial) + 1u);
        ArraySnapshots data = simulate_doa(truth, n, d, kPi, data_rng).snapshots;
        double x0 = rng.uniform() * kTwoPi;
        std::vector<double> path(static_cast<std::size_t>(n));
        for (double& x : path) x = rng.uniform() * kTwoPi;
        MhChain chain = make_chain_from_path(data, x0, path);
        int site = 1 + rng.uniform_int(n);
        double proposal = rng.uniform() * kTwoPi;
        double p_simple =
            std::exp(std::min(0.0, mh_log_ratio(chain, p, data, site, proposal)));
        double p_full = std::exp(std::min(
            0.0, oracle::full_joint_mh_log_ratio(p, data, x0, chain.path, site, proposal)));
        worst = std::max(worst, std::abs(p_simple - p_full));
    }
    r.margin = worst;
    r.pass = worst <= r.threshold;
    r.details = "10000 random configurations, acceptance-probability scale";
    return r;
}

/// Chains started from the grid-surrogate posterior and advanced by the
/// sampler keep the posterior law: pooled per-site KS against the grid
/// smoothed marginals.
inline CheckResult sampler_invariance(unsigned seed, int chains = 6000, int proposals = 10000,
                                      double threshold = 0.03) {
    CheckResult r;
    r.name = "invariance";
    r.threshold = threshold;
    const int n = 8, d = 3, bins = 256;
    DoaParams p{0.25, 0.64, 0.36};
    Rng rng(seed);
    ArraySnapshots data = simulate_doa(p, n, d, kPi, rng).snapshots;
    GridModel gm = build_grid_model(p, data, kPi, bins);
    GridFilter fl = grid_filter(gm);
    GridSmooth sm = grid_smooth(gm);

    Matrix finals(chains, n);
    for (int c = 0; c < chains; ++c) {
        MhChain chain = make_chain_from_path(data, kPi, grid_posterior_sample(gm, fl, rng));
        for (int t = 0; t < proposals; ++t) mh_sweep(chain, p, data, rng);
        for (int k = 0; k < n; ++k) finals(c, k) = chain.path[static_cast<std::size_t>(k)];
    }
    const double delta = kTwoPi / bins;
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
        std::vector<double> site(static_cast<std::size_t>(chains));
        for (int c = 0; c < chains; ++c) site[static_cast<std::size_t>(c)] = finals(c, k);
        std::sort(site.begin(), site.end());
        double cum = 0.0;
        for (int j = 0; j < bins; ++j) {
            cum += sm.marginals(k, j);
            double edge = (j + 1) * delta;
            double emp = static_cast<double>(std::lower_bound(site.begin(), site.end(), edge) -
                                             site.begin()) /
                         chains;
            worst = std::max(worst, std::abs(emp - cum));
        }
    }
    r.margin = worst;
    r.pass = worst <= r.threshold;
    r.details = std::to_string(chains) + " posterior-initialized chains, " +
                std::to_string(proposals) + " proposals each, per-site KS vs grid marginals";
    return r;
}

}  // namespace checks

inline std::vector<std::string> all_check_names() {
    return {"routes", "corollary1", "lemma2",   "fisher",
            "louis",  "doa-density", "mh-ratio", "invariance"};
}

/// Run the named checks (all when `only` is empty). Unknown names throw.
inline std::vector<CheckResult> run_checks(const std::vector<std::string>& only, unsigned seed) {
    std::vector<std::string> names = only.empty() ? all_check_names() : only;
    std::vector<CheckResult> out;
    for (const std::string& name : names) {
        auto t0 = std::chrono::steady_clock::now();
        CheckResult r;
        if (name == "routes")
            r = checks::likelihood_routes(seed);
        else if (name == "corollary1")
            r = checks::corollary1_forgetting(seed);
        else if (name == "lemma2")
            r = checks::lemma2_stationary_gap(seed);
        else if (name == "fisher")
            r = checks::fisher_identity(seed);
        else if (name == "louis")
            r = checks::louis_identity(seed);
        else if (name == "doa-density")
            r = checks::doa_density_identities(seed);
        else if (name == "mh-ratio")
            r = checks::mh_ratio_oracle(seed);
        else if (name == "invariance")
            r = checks::sampler_invariance(seed);
        else
            throw std::invalid_argument("unknown check '" + name + "'");
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace regimeml
