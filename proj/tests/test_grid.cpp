#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "regimeml/common.hpp"
#include "regimeml/doa.hpp"
#include "regimeml/grid_surrogate.hpp"
#include "regimeml/oracles.hpp"
#include "regimeml/random.hpp"

using namespace regimeml;

namespace {

ArraySnapshots small_data(int n, int d, unsigned seed) {
    Rng rng(seed);
    DoaParams truth{0.25, 0.64, 0.36};
    return simulate_doa(truth, n, d, kPi, rng).snapshots;
}

/// Surrogate likelihood by explicit summation over every bin path.
double enumerate_grid_log_likelihood(const GridModel& gm) {
    const int n = static_cast<int>(gm.emission_log.rows());
    const int bins = gm.bins;
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    std::vector<double> path_logs;
    while (true) {
        double lp = std::log(gm.init_prior(idx[0])) + gm.emission_log(0, idx[0]);
        for (int k = 1; k < n; ++k) {
            lp += std::log(gm.transition(idx[static_cast<std::size_t>(k - 1)],
                                         idx[static_cast<std::size_t>(k)]));
            lp += gm.emission_log(k, idx[static_cast<std::size_t>(k)]);
        }
        path_logs.push_back(lp);
        int pos = n - 1;
        while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == bins)
            idx[static_cast<std::size_t>(pos--)] = 0;
        if (pos < 0) break;
    }
    return log_sum_exp(path_logs);
}

}  // namespace

TEST_CASE("grid transition is circulant with unit row sums") {
    ArraySnapshots data = small_data(3, 4, 21);
    GridModel gm = build_grid_model(DoaParams{0.25, 0.64, 0.36}, data, kPi, 256);
    for (int i = 0; i < 256; i += 37) {
        CHECK(std::abs(gm.transition.row(i).sum() - 1.0) < 1e-10);
        for (int j = 0; j < 256; j += 11)
            CHECK(gm.transition(i, j) == gm.transition(0, (j - i + 256) % 256));
    }
    CHECK(std::abs(gm.init_prior.sum() - 1.0) < 1e-10);
}

TEST_CASE("grid likelihood matches exhaustive path enumeration") {
    ArraySnapshots data = small_data(4, 3, 22);
    GridModel gm = build_grid_model(DoaParams{0.4, 0.8, 0.5}, data, 1.0, 8);
    double direct = enumerate_grid_log_likelihood(gm);
    double fast = grid_log_likelihood(gm);
    CHECK(std::abs(fast - direct) < 1e-11 * std::max(1.0, std::abs(direct)));
}

TEST_CASE("grid smoothing marginals are consistent") {
    ArraySnapshots data = small_data(6, 4, 23);
    GridModel gm = build_grid_model(DoaParams{0.25, 0.64, 0.36}, data, kPi, 64);
    GridSmooth sm = grid_smooth(gm);
    REQUIRE(sm.marginals.rows() == 6);
    REQUIRE(sm.pairs.size() == 5);
    for (int k = 0; k < 6; ++k) CHECK(std::abs(sm.marginals.row(k).sum() - 1.0) < 1e-10);
    for (std::size_t t = 0; t < sm.pairs.size(); ++t) {
        Vector rows = sm.pairs[t].rowwise().sum();
        Vector cols = sm.pairs[t].colwise().sum().transpose();
        CHECK((rows - sm.marginals.row(static_cast<int>(t)).transpose()).cwiseAbs().maxCoeff() <
              1e-12);
        CHECK((cols - sm.marginals.row(static_cast<int>(t) + 1).transpose())
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    }
    GridFilter fl = grid_filter(gm);
    CHECK(std::abs(fl.log_likelihood - sm.log_likelihood) < 1e-10);
    CHECK((fl.weights.row(5) - sm.marginals.row(5)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single-snapshot surrogate reduces to one weighted sum") {
    ArraySnapshots data = small_data(1, 3, 24);
    GridModel gm = build_grid_model(DoaParams{0.3, 0.7, 0.4}, data, 2.0, 32);
    std::vector<double> terms;
    for (int j = 0; j < 32; ++j)
        terms.push_back(std::log(gm.init_prior(j)) + gm.emission_log(0, j));
    CHECK(grid_log_likelihood(gm) == Catch::Approx(log_sum_exp(terms)).epsilon(1e-12));
    GridSmooth sm = grid_smooth(gm);
    CHECK(sm.pairs.empty());
    CHECK(std::abs(sm.marginals.row(0).sum() - 1.0) < 1e-12);
}

TEST_CASE("grid EM is monotone in the surrogate likelihood") {
    ArraySnapshots data = small_data(60, 4, 25);
    DoaParams cur{0.9, 0.2, 1.1};  // deliberately far from the truth
    double prev = grid_log_likelihood(build_grid_model(cur, data, kPi, 128));
    for (int it = 0; it < 8; ++it) {
        GridEmStep step = grid_em_step(cur, data, kPi, 128);
        CHECK(step.log_likelihood >= prev - 1e-9);
        prev = step.log_likelihood;
        cur = step.params;
    }
    CHECK(cur.sigma_s_sq > 0.2);  // moved toward the data-generating power
}

TEST_CASE("grid observed information matches a finite-difference Hessian") {
    ArraySnapshots data = small_data(20, 4, 26);
    DoaParams p{0.25, 0.64, 0.36};
    InformationEstimate est = grid_observed_information(p, data, kPi, 64);

    auto f = [&](const Vector& t) {
        DoaParams q{t(0), t(1), t(2)};
        return grid_log_likelihood(build_grid_model(q, data, kPi, 64));
    };
    Vector at(3);
    at << p.sigma_eta_sq, p.sigma_s_sq, p.sigma_eps_sq;
    Matrix fd = -oracle::fd_hessian(f, at, 1e-4);
    double rel = (est.info - fd).norm() / fd.norm();
    CHECK(rel < 1e-4);
    CHECK(est.provenance == "louis-exact");
}

TEST_CASE("posterior path sampler reproduces the smoothed marginals") {
    ArraySnapshots data = small_data(10, 4, 27);
    DoaParams p{0.25, 0.64, 0.36};
    GridModel gm = build_grid_model(p, data, kPi, 64);
    GridFilter fl = grid_filter(gm);
    GridSmooth sm = grid_smooth(gm);

    const int reps = 20000;
    Matrix freq = Matrix::Zero(10, 64);
    Rng rng(99);
    const double delta = kTwoPi / 64;
    for (int r = 0; r < reps; ++r) {
        std::vector<double> path = grid_posterior_sample(gm, fl, rng);
        REQUIRE(path.size() == 10);
        for (int k = 0; k < 10; ++k) {
            int bin = static_cast<int>(path[static_cast<std::size_t>(k)] / delta);
            REQUIRE(bin >= 0);
            REQUIRE(bin < 64);
            freq(k, bin) += 1.0 / reps;
        }
    }
    CHECK((freq - sm.marginals).cwiseAbs().maxCoeff() < 0.02);
}
