#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "regimeml/model.hpp"
#include "regimeml/random.hpp"

using namespace regimeml;

namespace {

SwitchingArModel two_state_example() {
    SwitchingArModel m;
    m.num_regimes = 2;
    m.order = 1;
    m.kernel.resize(2, 2);
    m.kernel << 0.9, 0.1, 0.2, 0.8;
    m.ar.resize(2, 2);
    m.ar << 0.1, 0.5, -0.3, -0.7;
    m.sigma.resize(2);
    m.sigma << 1.0, 2.0;
    return m;
}

SwitchingArModel random_model(Rng& rng, int d, int s) {
    SwitchingArModel m;
    m.num_regimes = d;
    m.order = s;
    m.kernel.resize(d, d);
    for (int i = 0; i < d; ++i) {
        double row = 0.0;
        for (int j = 0; j < d; ++j) {
            m.kernel(i, j) = 0.05 + rng.uniform();
            row += m.kernel(i, j);
        }
        m.kernel.row(i) /= row;
    }
    m.ar.resize(d, s + 1);
    for (int x = 0; x < d; ++x) {
        m.ar(x, 0) = 2.0 * rng.normal();
        for (int j = 1; j <= s; ++j) m.ar(x, j) = 0.8 * (rng.uniform() - 0.5);
    }
    m.sigma.resize(d);
    for (int x = 0; x < d; ++x) m.sigma(x) = 0.3 + 2.0 * rng.uniform();
    return m;
}

}  // namespace

TEST_CASE("validation reports mixing coefficients") {
    SwitchingArModel m = two_state_example();
    ValidationReport r = validate_model(m);
    REQUIRE(r.ok);
    CHECK(r.sigma_minus == Catch::Approx(0.2).epsilon(1e-14));
    CHECK(r.sigma_plus == Catch::Approx(1.8).epsilon(1e-14));
    CHECK(r.rho == Catch::Approx(1.0 - 0.2 / 1.8).epsilon(1e-12));

    m.kernel(0, 1) = 0.0;
    m.kernel(0, 0) = 1.0;
    ValidationReport bad = validate_model(m);
    CHECK_FALSE(bad.ok);

    SwitchingArModel neg = two_state_example();
    neg.sigma(1) = -1.0;
    CHECK_FALSE(validate_model(neg).ok);
}

TEST_CASE("transition density is relative to the normalized uniform measure") {
    SwitchingArModel m = two_state_example();
    m.kernel << 0.5, 0.5, 0.5, 0.5;
    CHECK(transition_log_density(m, 0, 1) == Catch::Approx(0.0).margin(1e-15));
    m.kernel << 0.9, 0.1, 0.2, 0.8;
    CHECK(transition_log_density(m, 0, 0) == Catch::Approx(std::log(1.8)).epsilon(1e-14));
}

TEST_CASE("emission density matches the Gaussian formula") {
    SwitchingArModel m = two_state_example();
    ObservationSeries obs;
    obs.order = 1;
    obs.values = {0.4, 1.3};  // y_0 = 0.4, y_1 = 1.3
    double mu = 0.1 + 0.5 * 0.4;
    double expected = -0.5 * std::log(kTwoPi) - 0.0 - (1.3 - mu) * (1.3 - mu) / 2.0;
    CHECK(emission_log_density(m, obs, 1, 0) == Catch::Approx(expected).epsilon(1e-14));
}

TEST_CASE("unconstrained parameterization round-trips") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        int d = 2 + static_cast<int>(rng.uniform_int(3));
        int s = static_cast<int>(rng.uniform_int(3));
        SwitchingArModel m = random_model(rng, d, s);
        Vector theta = model_to_theta(m);
        SwitchingArModel back = theta_to_model(theta, m);
        REQUIRE((back.kernel - m.kernel).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE((back.ar - m.ar).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE((back.sigma - m.sigma).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("parameter map rejects boundary models") {
    SwitchingArModel m = two_state_example();
    m.kernel(0, 0) = 1.0;
    m.kernel(0, 1) = 0.0;
    CHECK_THROWS_AS(model_to_theta(m), std::domain_error);
}

TEST_CASE("stationary law solves pi Q = pi") {
    SwitchingArModel m = two_state_example();
    Vector pi = stationary_regime_dist(m.kernel);
    CHECK(pi(0) == Catch::Approx(0.2 / 0.3).epsilon(1e-12));
    CHECK(pi(1) == Catch::Approx(0.1 / 0.3).epsilon(1e-12));
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        SwitchingArModel r = random_model(rng, 3, 0);
        Vector p = stationary_regime_dist(r.kernel);
        CHECK((p.transpose() * r.kernel - p.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(p.minCoeff() > 0.0);
    }
}

TEST_CASE("simulation shapes, determinism, and empty case") {
    SwitchingArModel m = two_state_example();
    Rng rng(11);
    SimulatedPath p = simulate(m, 50, 0, {0.3}, rng);
    REQUIRE(p.regimes.size() == 50);
    REQUIRE(p.observations.length() == 50);
    CHECK(p.observations.y(0) == 0.3);

    Rng r1(77), r2(77);
    SimulatedPath a = simulate(m, 20, 1, {0.0}, r1);
    SimulatedPath b = simulate(m, 20, 1, {0.0}, r2);
    CHECK(a.observations.values == b.observations.values);
    CHECK(a.regimes == b.regimes);

    Rng r3(1);
    SimulatedPath empty = simulate(m, 0, 0, {0.1}, r3);
    CHECK(empty.regimes.empty());
    CHECK(empty.observations.length() == 0);

    CHECK_THROWS_AS(simulate(m, 5, 7, {0.0}, r3), std::domain_error);
    CHECK_THROWS_AS(simulate(m, 5, 0, {}, r3), std::domain_error);
}

TEST_CASE("simulated regime frequencies approach the stationary law") {
    SwitchingArModel m = two_state_example();
    m.order = 0;
    m.ar.resize(2, 1);
    m.ar << 0.0, 3.0;
    Rng rng(123);
    SimulatedPath p = simulate(m, 200000, 0, {}, rng);
    double freq0 = 0.0;
    for (int x : p.regimes) freq0 += (x == 0);
    freq0 /= static_cast<double>(p.regimes.size());
    CHECK(freq0 == Catch::Approx(2.0 / 3.0).margin(0.01));
}
