#include <doctest.h>

#include <cmath>

#include "misspec/divergence.hpp"
#include "misspec/entropy.hpp"

using namespace misspec;

TEST_SUITE("entropy") {

TEST_CASE("covering number: degenerate and line instances") {
    auto zero = [](int, int) { return 0.0; };
    CHECK(covering_number(7, zero, 0.01).n_balls == 1);
    CHECK(covering_number(0, zero, 0.1).n_balls == 0);

    // 11 equispaced points on [0,1] at radius 0.05: optimum pairs them up
    auto line = [](int i, int j) { return 0.1 * std::fabs(i - j); };
    const CoverReport rep = covering_number(11, line, 0.05);
    CHECK(rep.n_balls == 6);
    CHECK(brute_force_cover(11, line, 0.05) == 6);
    CHECK(rep.radius_used <= 0.1 + 1e-15);
}

TEST_CASE("greedy within factor two of brute force on random instances") {
    CounterRng rng(9090);
    for (int k = 0; k < 25; ++k) {
        const int n = 4 + static_cast<int>(rng.uniform() * 9.0);
        std::vector<double> pts(n);
        for (double& p : pts) p = rng.uniform(0.0, 1.0);
        const double eps = rng.uniform(0.02, 0.3);
        auto d = [&](int i, int j) { return std::fabs(pts[i] - pts[j]); };
        const CoverReport rep = covering_number(n, d, eps);
        const int opt = brute_force_cover(n, d, eps);
        REQUIRE(opt >= 1);
        CHECK(rep.n_balls <= 2 * opt);
        for (int i = 0; i < n; ++i) {
            REQUIRE(rep.assignment[i] >= 0);
            CHECK(d(i, rep.centers[rep.assignment[i]]) <= rep.radius_used + 1e-12);
        }
        CHECK(rep.radius_used <= 2.0 * eps + 1e-12);
    }
}

TEST_CASE("euclidean annulus cover stays under the dimensional constant") {
    const double eps = 0.25, A = 0.125;
    std::vector<double> pts;
    for (int sgn : {-1, 1})
        for (int i = 0; i <= 150; ++i) pts.push_back(sgn * (eps + (i + 0.5) * eps / 152.0));
    auto d = [&](int i, int j) { return std::fabs(pts[i] - pts[j]); };
    const CoverReport rep = covering_number(static_cast<int>(pts.size()), d, A * eps);
    CHECK(rep.n_balls <= static_cast<int>(8.0 / A));
}

TEST_CASE("local cover: radius factor and the empty annulus") {
    CHECK(local_cover_radius_factor(6.0, 1.0) ==
          doctest::Approx(1.0 / (4.0 * std::sqrt(6.0))).epsilon(1e-14));
    CHECK(local_cover_radius_factor(1.0, 1.0) == doctest::Approx(0.125).epsilon(1e-14));

    LocalCoverInput in;
    const int G = 41;
    std::vector<double> thetas(G);
    for (int i = 0; i < G; ++i) thetas[i] = 1.0 + i / (G - 1.0);
    for (double th : thetas) in.members.push_back(gaussian(th, 1.0));
    in.d = [thetas](int i, int j) { return std::sqrt(std::fabs(thetas[i] - thetas[j])); };
    in.d_to_star = [thetas](int i) { return std::sqrt(thetas[i] - 1.0); };
    in.p0 = gaussian(0.0, 1.0);
    in.pstar = gaussian(1.0, 1.0);
    const CoverReport empty = local_cover_for_testing(in, 5.0, 5, 71, default_grid());
    CHECK(empty.n_balls == 0);
    CHECK(empty.certified);

    const CoverReport rep = local_cover_for_testing(in, 0.3, 15, 72, default_grid());
    CHECK(rep.certified);
    CHECK(rep.n_balls >= 1);
}

TEST_CASE("local cover certification failure names the cell") {
    LocalCoverInput in;
    const int G = 21;
    std::vector<double> thetas(G);
    for (int i = 0; i < G; ++i) thetas[i] = 1.0 + i / (G - 1.0);
    for (double th : thetas) in.members.push_back(gaussian(th, 1.0));
    in.d = [thetas](int i, int j) { return std::sqrt(std::fabs(thetas[i] - thetas[j])); };
    // A distance lying about the geometry drags near-projection members into
    // the annulus, where their true margin cannot clear eps^2/4.
    in.d_to_star = [](int) { return 1.5; };
    in.p0 = gaussian(0.0, 1.0);
    in.pstar = gaussian(1.0, 1.0);
    CHECK_THROWS_WITH_AS(local_cover_for_testing(in, 1.0, 5, 73, default_grid()),
                         doctest::Contains("failed certification"), std::runtime_error);
}

TEST_CASE("mixture entropy curve: monotone, fitted exponent near two") {
    const EntropyCurve c = mixture_entropy_curve(2.0, {0.2, 0.1, 0.05, 0.02}, 1500, 41, 99);
    for (std::size_t i = 1; i < c.log_cover.size(); ++i)
        CHECK(c.log_cover[i] >= c.log_cover[i - 1] - 1e-12);
    CHECK(c.points_in_fit >= 2);
    CHECK(c.gamma_fit >= 1.3);
    CHECK(c.gamma_fit <= 2.7);
    CHECK_THROWS_AS(mixture_entropy_curve(2.0, {0.5}, 100, 11, 1), std::invalid_argument);
}

} // TEST_SUITE
