#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "regimeml/filtering.hpp"
#include "regimeml/inference.hpp"
#include "regimeml/model.hpp"
#include "regimeml/oracles.hpp"
#include "regimeml/random.hpp"

using namespace regimeml;

namespace {

SwitchingArModel random_model(Rng& rng, int d, int s) {
    SwitchingArModel m;
    m.num_regimes = d;
    m.order = s;
    m.kernel.resize(d, d);
    for (int i = 0; i < d; ++i) {
        double row = 0.0;
        for (int j = 0; j < d; ++j) {
            m.kernel(i, j) = 0.1 + rng.uniform();
            row += m.kernel(i, j);
        }
        m.kernel.row(i) /= row;
    }
    m.ar.resize(d, s + 1);
    for (int x = 0; x < d; ++x) {
        m.ar(x, 0) = rng.normal();
        for (int j = 1; j <= s; ++j) m.ar(x, j) = 0.7 * (rng.uniform() - 0.5);
    }
    m.sigma.resize(d);
    for (int x = 0; x < d; ++x) m.sigma(x) = 0.5 + rng.uniform();
    return m;
}

ObservationSeries simulate_series(const SwitchingArModel& m, int n, int x0, Rng& rng) {
    std::vector<double> lag(static_cast<std::size_t>(m.order));
    for (double& v : lag) v = rng.normal();
    return simulate(m, n, x0, lag, rng).observations;
}

SwitchingArModel well_separated_truth() {
    SwitchingArModel m;
    m.num_regimes = 2;
    m.order = 1;
    m.kernel.resize(2, 2);
    m.kernel << 0.85, 0.15, 0.1, 0.9;
    m.ar.resize(2, 2);
    m.ar << 1.5, 0.4, -1.5, -0.4;
    m.sigma.resize(2);
    m.sigma << 0.6, 1.2;
    return m;
}

}  // namespace

TEST_CASE("complete-data score terms match finite differences") {
    Rng rng(161);
    for (int trial = 0; trial < 12; ++trial) {
        int d = 2 + static_cast<int>(rng.uniform_int(2));
        int s = static_cast<int>(rng.uniform_int(2));
        SwitchingArModel m = random_model(rng, d, s);
        ObservationSeries obs = simulate_series(m, 3, 0, rng);
        Vector theta = model_to_theta(m);
        int k = 1 + static_cast<int>(rng.uniform_int(3));
        int i = static_cast<int>(rng.uniform_int(d));
        int j = static_cast<int>(rng.uniform_int(d));
        auto term = [&](const Vector& th) {
            SwitchingArModel mt = theta_to_model(th, m);
            return transition_log_density(mt, i, j) + emission_log_density(mt, obs, k, j);
        };
        CompleteScoreTerm t = complete_score(m, obs, k, i, j);
        Vector g = oracle::fd_gradient(term, theta, 1e-5);
        Matrix H = oracle::fd_hessian(term, theta, 1e-4);
        CHECK((t.phi - g).cwiseAbs().maxCoeff() < 1e-7 * std::max(1.0, g.cwiseAbs().maxCoeff()));
        CHECK((t.phi_dot - H).cwiseAbs().maxCoeff() <
              1e-5 * std::max(1.0, H.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("zero-residual Gaussian term has log-scale derivative -1") {
    SwitchingArModel m = well_separated_truth();
    ObservationSeries obs;
    obs.order = 1;
    // y_1 chosen to hit the regime-0 conditional mean exactly.
    obs.values = {1.0, 1.5 + 0.4 * 1.0};
    CompleteScoreTerm t = complete_score(m, obs, 1, 0, 0);
    int sg_off = 2 * 1 + 2 * 2 + 0;
    CHECK(t.phi(sg_off) == Catch::Approx(-1.0).margin(1e-14));
}

TEST_CASE("smoothed score matches finite differences of the log likelihood") {
    Rng rng(2020);
    for (int trial = 0; trial < 10; ++trial) {
        int d = 2 + static_cast<int>(rng.uniform_int(2));
        int s = static_cast<int>(rng.uniform_int(2));
        SwitchingArModel m = random_model(rng, d, s);
        ObservationSeries obs = simulate_series(m, 50, 0, rng);
        Vector theta = model_to_theta(m);
        auto ll = [&](const Vector& th) {
            return log_likelihood(theta_to_model(th, m), obs, 0);
        };
        Vector analytic = fisher_score(m, obs, 0);
        Vector fd = oracle::fd_gradient(ll, theta, 1e-5);
        double rel = (analytic - fd).cwiseAbs().maxCoeff() /
                     std::max(1.0, fd.cwiseAbs().maxCoeff());
        CHECK(rel < 1e-6);
    }
}

TEST_CASE("observed information matches the finite-difference Hessian") {
    Rng rng(31337);
    for (int trial = 0; trial < 5; ++trial) {
        int d = 2;
        int s = static_cast<int>(rng.uniform_int(2));
        SwitchingArModel m = random_model(rng, d, s);
        ObservationSeries obs = simulate_series(m, 40, 0, rng);
        Vector theta = model_to_theta(m);
        auto ll = [&](const Vector& th) {
            return log_likelihood(theta_to_model(th, m), obs, 0);
        };
        InformationEstimate est = observed_information_louis(m, obs, 0);
        CHECK(est.provenance == "louis-exact");
        Matrix fd = -oracle::fd_hessian(ll, theta, 1e-4);
        double rel = (est.info - fd).norm() / std::max(1.0, fd.norm());
        CHECK(rel < 1e-4);
    }
}

TEST_CASE("chi-square report reproduces the frozen reference") {
    Vector theta(3), ref(3);
    theta << 1.0, 0.0, 0.0;
    ref << 0.0, 0.0, 0.0;
    Matrix info = Matrix::Identity(3, 3) * 3.065;
    ChiSquareReport r = chi_square_test(theta, ref, info);
    CHECK(r.statistic == Catch::Approx(3.065).epsilon(1e-14));
    CHECK(r.df == 3);
    CHECK(r.p_value == Catch::Approx(0.38171162520814594).epsilon(1e-9));
}

TEST_CASE("confidence intervals use the inverse information") {
    Vector theta(2);
    theta << 1.0, -2.0;
    Matrix info(2, 2);
    info << 4.0, 0.0, 0.0, 25.0;
    auto ci = confidence_intervals(theta, info, 0.95);
    CHECK(ci[0].lo == Catch::Approx(1.0 - 1.959963984540054 * 0.5).margin(1e-9));
    CHECK(ci[0].hi == Catch::Approx(1.0 + 1.959963984540054 * 0.5).margin(1e-9));
    CHECK(ci[1].hi - ci[1].lo == Catch::Approx(2 * 1.959963984540054 * 0.2).margin(1e-9));

    Matrix bad(2, 2);
    bad << 1.0, 0.0, 0.0, -0.5;
    CHECK_THROWS_WITH(confidence_intervals(theta, bad, 0.95),
                      Catch::Matchers::ContainsSubstring("eigenvalue"));
}

TEST_CASE("delta-method Jacobian matches finite differences") {
    Rng rng(888);
    SwitchingArModel m = random_model(rng, 3, 1);
    Vector theta = model_to_theta(m);
    Matrix J = constrained_jacobian(m);
    int d = m.num_regimes, s = m.order;
    int rows = d * d + d * (s + 1) + d;
    for (int r = 0; r < rows; ++r) {
        auto coord = [&](const Vector& th) {
            SwitchingArModel mt = theta_to_model(th, m);
            if (r < d * d) return mt.kernel(r / d, r % d);
            int t = r - d * d;
            if (t < d * (s + 1)) return mt.ar(t / (s + 1), t % (s + 1));
            return mt.sigma(t - d * (s + 1));
        };
        Vector g = oracle::fd_gradient(coord, theta, 1e-6);
        CHECK((J.row(r).transpose() - g).cwiseAbs().maxCoeff() < 1e-7);
    }
}

TEST_CASE("MLE fit recovers a well-separated model") {
    SwitchingArModel truth = well_separated_truth();
    Rng rng(42);
    ObservationSeries obs = simulate_series(truth, 2000, 0, rng);
    FitResult fit = mle_fit(truth, obs, 0, model_to_theta(truth));
    REQUIRE(fit.converged);
    // Termination is grad tol or step tol, whichever first.
    CHECK(fit.grad_inf_norm < 1e-3);
    SwitchingArModel aligned = align_labels(fit.model, truth);
    CHECK((aligned.ar - truth.ar).cwiseAbs().maxCoeff() < 0.15);
    CHECK((aligned.sigma - truth.sigma).cwiseAbs().maxCoeff() < 0.15);
    CHECK((aligned.kernel - truth.kernel).cwiseAbs().maxCoeff() < 0.1);
    // The score vanishes at the optimum and the information is PD there.
    InformationEstimate info = observed_information_louis(fit.model, obs, 0);
    CHECK(info.lambda_min > 0.0);
}

TEST_CASE("fit reaches the same optimum from different starts") {
    SwitchingArModel truth = well_separated_truth();
    Rng rng(7);
    ObservationSeries obs = simulate_series(truth, 400, 0, rng);
    Vector base = model_to_theta(truth);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> lls;
    for (int s = 0; s < 3; ++s) {
        Vector start = base;
        for (int i = 0; i < start.size(); ++i) start(i) += 0.2 * rng.normal();
        FitResult fit = mle_fit(truth, obs, 0, start);
        lls.push_back(fit.log_likelihood);
        best = std::max(best, fit.log_likelihood);
    }
    for (double ll : lls) CHECK(best - ll < 1e-6);
}

TEST_CASE("non-finite starting point raises") {
    SwitchingArModel truth = well_separated_truth();
    Rng rng(3);
    ObservationSeries obs = simulate_series(truth, 50, 0, rng);
    Vector bad = model_to_theta(truth);
    bad(0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(mle_fit(truth, obs, 0, bad));
}

TEST_CASE("early-stopped estimator: zero slack reproduces the optimum exactly") {
    SwitchingArModel truth = well_separated_truth();
    Rng rng(19);
    ObservationSeries obs = simulate_series(truth, 300, 0, rng);
    ApproxEstimatorReport rep =
        approx_estimator_check(truth, obs, 0, model_to_theta(truth), 0.0);
    CHECK(rep.displacement == 0.0);
    CHECK((rep.theta_tilde - rep.theta_hat).cwiseAbs().maxCoeff() == 0.0);
    CHECK(rep.within_bound);

    ApproxEstimatorReport rep2 =
        approx_estimator_check(truth, obs, 0, model_to_theta(truth), 0.5);
    REQUIRE(rep2.conclusive);
    CHECK(rep2.within_bound);
    CHECK(rep2.bound == Catch::Approx(1.1 * std::sqrt(2.0 * 0.5 / rep2.lambda_min)).epsilon(1e-12));
}

TEST_CASE("normality harness smoke run") {
    SwitchingArModel truth = well_separated_truth();
    NormalityHarnessConfig cfg;
    cfg.n = 300;
    cfg.replications = 20;
    cfg.seed = 99;
    NormalityHarnessResult res = asymptotic_normality_harness(truth, cfg);
    CHECK(res.completed + res.failed == 20);
    CHECK(res.completed >= 15);
    CHECK(res.coverage > 0.6);
    CHECK(res.coverage <= 1.0);
}

TEST_CASE("label alignment undoes a regime swap") {
    SwitchingArModel truth = well_separated_truth();
    SwitchingArModel swapped = truth;
    swapped.ar.row(0) = truth.ar.row(1);
    swapped.ar.row(1) = truth.ar.row(0);
    swapped.sigma(0) = truth.sigma(1);
    swapped.sigma(1) = truth.sigma(0);
    swapped.kernel(0, 0) = truth.kernel(1, 1);
    swapped.kernel(0, 1) = truth.kernel(1, 0);
    swapped.kernel(1, 0) = truth.kernel(0, 1);
    swapped.kernel(1, 1) = truth.kernel(0, 0);
    SwitchingArModel aligned = align_labels(swapped, truth);
    CHECK((aligned.ar - truth.ar).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((aligned.kernel - truth.kernel).cwiseAbs().maxCoeff() < 1e-14);
}
