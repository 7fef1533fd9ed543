#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "regimeml/filtering.hpp"
#include "regimeml/model.hpp"
#include "regimeml/oracles.hpp"
#include "regimeml/random.hpp"

using namespace regimeml;

namespace {

SwitchingArModel random_model(Rng& rng, int d, int s, double floor = 0.05) {
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

ObservationSeries simulate_series(const SwitchingArModel& m, int n, int x0, Rng& rng) {
    std::vector<double> lag(static_cast<std::size_t>(m.order));
    for (double& v : lag) v = rng.normal();
    return simulate(m, n, x0, lag, rng).observations;
}

// Exhaustive-path posterior pair marginals; independent of the smoother.
std::vector<Matrix> brute_force_pairs(const SwitchingArModel& m, const ObservationSeries& obs,
                                      int x0) {
    int n = obs.length();
    int d = m.num_regimes;
    std::vector<Matrix> pairs(static_cast<std::size_t>(n), Matrix::Zero(d, d));
    std::vector<int> x(static_cast<std::size_t>(n), 0);
    double total = 0.0;
    while (true) {
        double w = 1.0;
        int prev = x0;
        for (int k = 1; k <= n; ++k) {
            int cur = x[static_cast<std::size_t>(k - 1)];
            w *= m.kernel(prev, cur) * std::exp(emission_log_density(m, obs, k, cur));
            prev = cur;
        }
        total += w;
        prev = x0;
        for (int k = 1; k <= n; ++k) {
            int cur = x[static_cast<std::size_t>(k - 1)];
            pairs[static_cast<std::size_t>(k - 1)](prev, cur) += w;
            prev = cur;
        }
        int pos = n - 1;
        while (pos >= 0 && ++x[static_cast<std::size_t>(pos)] == d) x[static_cast<std::size_t>(pos--)] = 0;
        if (pos < 0) break;
    }
    for (auto& p : pairs) p /= total;
    return pairs;
}

}  // namespace

TEST_CASE("three likelihood routes agree on random small models") {
    Rng rng(314);
    for (int trial = 0; trial < 25; ++trial) {
        int d = 2 + static_cast<int>(rng.uniform_int(2));
        int s = static_cast<int>(rng.uniform_int(2));
        int n = 1 + static_cast<int>(rng.uniform_int(8));
        SwitchingArModel m = random_model(rng, d, s);
        ObservationSeries obs = simulate_series(m, n, 0, rng);
        double lf = log_likelihood(m, obs, 0);
        double lm = matrix_product_log_likelihood(m, obs, 0);
        double lb = oracle::brute_force_log_likelihood(m, obs, 0);
        double scale = std::max(1.0, std::abs(lb));
        CHECK(std::abs(lf - lb) / scale < 1e-12);
        CHECK(std::abs(lm - lb) / scale < 1e-12);
    }
}

TEST_CASE("single-step likelihood matches the direct sum") {
    Rng rng(99);
    SwitchingArModel m = random_model(rng, 3, 0);
    ObservationSeries obs = simulate_series(m, 1, 1, rng);
    double direct = 0.0;
    for (int j = 0; j < 3; ++j)
        direct += m.kernel(1, j) * std::exp(emission_log_density(m, obs, 1, j));
    CHECK(log_likelihood(m, obs, 1) == Catch::Approx(std::log(direct)).epsilon(1e-13));
}

TEST_CASE("empty series gives zero log likelihood and empty outputs") {
    Rng rng(4);
    SwitchingArModel m = random_model(rng, 2, 1);
    ObservationSeries obs;
    obs.order = 1;
    obs.values = {0.5};
    FilterResult f = forward_filter(m, obs, 0);
    CHECK(f.log_likelihood == 0.0);
    CHECK(f.step_log_predictive.size() == 0);
    CHECK(f.weights.rows() == 1);
    CHECK(matrix_product_log_likelihood(m, obs, 0) == 0.0);
}

TEST_CASE("degenerate emissions raise an error naming the step") {
    Matrix Q(2, 2);
    Q << 0.5, 0.5, 0.5, 0.5;
    Matrix logG(2, 2);
    logG << -1.0, -1.0, kNegInf, kNegInf;
    Vector init(2);
    init << 1.0, 0.0;
    try {
        core::forward_filter(Q, logG, init);
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("step 2") != std::string::npos);
    }
}

TEST_CASE("filter weights are probability vectors") {
    Rng rng(21);
    SwitchingArModel m = random_model(rng, 3, 1);
    ObservationSeries obs = simulate_series(m, 60, 0, rng);
    FilterResult f = forward_filter(m, obs, 0);
    for (int k = 0; k <= 60; ++k) {
        CHECK(f.weights.row(k).minCoeff() >= 0.0);
        CHECK(f.weights.row(k).sum() == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("smoothing marginals and pairs obey their identities") {
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        int d = 2 + static_cast<int>(rng.uniform_int(2));
        SwitchingArModel m = random_model(rng, d, 1);
        int n = 30;
        ObservationSeries obs = simulate_series(m, n, 0, rng);
        SmoothResult sm = smooth(m, obs, 0);
        FilterResult f = forward_filter(m, obs, 0);
        CHECK(sm.log_likelihood == Catch::Approx(f.log_likelihood).epsilon(1e-12));
        // Last smoothed marginal equals the last filter law.
        CHECK((sm.marginals.row(n) - f.weights.row(n)).cwiseAbs().maxCoeff() < 1e-10);
        double rho = validate_model(m).rho;
        for (int k = 1; k <= n; ++k) {
            const Matrix& pair = sm.pair_marginals[static_cast<std::size_t>(k - 1)];
            CHECK(pair.minCoeff() >= 0.0);
            CHECK(pair.sum() == Catch::Approx(1.0).margin(1e-12));
            // Row sums reproduce the previous marginal, column sums the next.
            CHECK((pair.rowwise().sum().transpose() - sm.marginals.row(k - 1)).cwiseAbs().maxCoeff() <
                  1e-12);
            CHECK((pair.colwise().sum() - sm.marginals.row(k)).cwiseAbs().maxCoeff() < 1e-12);
            // Conditional transition rows: probability vectors within rho in
            // total variation of each other (one-step forgetting).
            const Matrix& T = sm.cond_transitions[static_cast<std::size_t>(k - 1)];
            for (int i = 0; i < d; ++i) {
                CHECK(T.row(i).sum() == Catch::Approx(1.0).margin(1e-12));
                for (int i2 = i + 1; i2 < d; ++i2) {
                    double tv = 0.5 * (T.row(i) - T.row(i2)).cwiseAbs().sum();
                    CHECK(tv <= rho + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("smoothed pair marginals match exhaustive enumeration") {
    Rng rng(2718);
    for (int trial = 0; trial < 8; ++trial) {
        int d = 2 + static_cast<int>(rng.uniform_int(2));
        int n = 2 + static_cast<int>(rng.uniform_int(5));
        SwitchingArModel m = random_model(rng, d, 0);
        ObservationSeries obs = simulate_series(m, n, 0, rng);
        SmoothResult sm = smooth(m, obs, 0);
        std::vector<Matrix> ref = brute_force_pairs(m, obs, 0);
        for (int k = 1; k <= n; ++k) {
            double err = (sm.pair_marginals[static_cast<std::size_t>(k - 1)] -
                          ref[static_cast<std::size_t>(k - 1)])
                             .cwiseAbs()
                             .maxCoeff();
            CHECK(err < 1e-11);
        }
    }
}

TEST_CASE("filter forgetting gap is bounded by rho^k") {
    Rng rng(555);
    for (int trial = 0; trial < 40; ++trial) {
        int d = 2 + static_cast<int>(rng.uniform_int(3));
        SwitchingArModel m = random_model(rng, d, 0);
        int n = 50;
        ObservationSeries obs = simulate_series(m, n, 0, rng);
        double rho = validate_model(m).rho;
        int a = 0;
        int b = d - 1;
        Vector tv = forgetting_gap(m, obs, point_mass(d, a), point_mass(d, b));
        for (int k = 0; k <= n; ++k) CHECK(tv(k) <= std::pow(rho, k) + 1e-12);
    }
}

TEST_CASE("fixed-start and stationary-start likelihoods stay uniformly close") {
    Rng rng(808);
    for (int trial = 0; trial < 30; ++trial) {
        int d = 2 + static_cast<int>(rng.uniform_int(3));
        SwitchingArModel m = random_model(rng, d, 0);
        ObservationSeries obs = simulate_series(m, 100, 0, rng);
        ValidationReport v = validate_model(m);
        double bound = 1.0 / ((1.0 - v.rho) * (1.0 - v.rho));
        double lbar = stationary_log_likelihood(m, obs);
        for (int x0 = 0; x0 < d; ++x0) {
            double l = log_likelihood(m, obs, x0);
            CHECK(std::abs(l - lbar) <= bound + 1e-10);
        }
    }
}

TEST_CASE("stationary likelihood requires order zero") {
    Rng rng(6);
    SwitchingArModel m = random_model(rng, 2, 1);
    ObservationSeries obs = simulate_series(m, 5, 0, rng);
    CHECK_THROWS_AS(stationary_log_likelihood(m, obs), std::domain_error);
}
