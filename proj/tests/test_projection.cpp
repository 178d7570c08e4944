#include <doctest.h>

#include <cmath>

#include "misspec/divergence.hpp"
#include "misspec/normal.hpp"
#include "misspec/projection.hpp"

using namespace misspec;

TEST_SUITE("projection") {

TEST_CASE("parametric projection: interior, boundary, well-specified") {
    const auto& g = default_grid();
    {
        const auto pr =
            project_parametric(normal_location_family(-3.0, 3.0), gaussian(0.7, 1.0), 1e-7, g);
        CHECK(pr.theta_star == doctest::Approx(0.7).epsilon(1e-6));
        CHECK(pr.kl_min == doctest::Approx(0.0).epsilon(1e-10));
    }
    {
        const auto pr =
            project_parametric(normal_location_family(1.0, 2.0), gaussian(0.0, 1.0), 1e-7, g);
        CHECK(pr.theta_star == 1.0); // boundary minimum returned exactly at the edge
        CHECK(pr.kl_min == doctest::Approx(0.5).epsilon(1e-10));
    }
    {
        const auto pr = project_parametric(normal_location_family(-3.0, 3.0),
                                           gaussian(0.0, std::sqrt(2.0)), 1e-7, g);
        CHECK(std::fabs(pr.theta_star) < 1e-6);
    }
}

TEST_CASE("parametric projection rejects an all-infinite probe grid") {
    const auto& g = default_grid();
    ParametricFamily fam;
    fam.theta_lo = 0.0;
    fam.theta_hi = 1.0;
    fam.density_at = [](double theta) {
        DensityHandle h = gaussian(theta, 1.0);
        auto base = h.log_density;
        h.log_density = [base, theta](const Point& p) {
            return std::fabs(p.x - theta) <= 0.5 ? base(p)
                                                 : -std::numeric_limits<double>::infinity();
        };
        h.support = [theta](const Point& p) { return std::fabs(p.x - theta) <= 0.5; };
        return h;
    };
    fam.metric = [](double a, double b) { return std::fabs(a - b); };
    CHECK_THROWS_WITH_AS(project_parametric(fam, gaussian(0.0, 1.0), 1e-6, g),
                         doctest::Contains("infinite"), std::runtime_error);
}

TEST_CASE("mixture projection: well-specified truth on the grid") {
    const std::vector<double> grid5 = {-2.0, -1.0, 0.0, 1.0, 2.0};
    const MixingDistribution F0{{-1.0, 1.0}, {0.5, 0.5}, 2.0};
    const DensityHandle p0 = mixture_density(F0);
    const double tol = 1e-8;
    const MixingDistribution F = project_mixture(p0, grid5, tol, 2000000, mixture_grid());

    const double obj = mixture_objective(p0, F, mixture_grid());
    CHECK(obj <= 0.0 + tol);           // objective within tol of the attainable 0
    CHECK(obj >= -1e-12);              // KL of the truth to itself
    CHECK(mixture_dual_gap(p0, F, mixture_grid()) <= tol * 1.01);

    // Weight recovery is limited by the kernel curvature: gap tol controls
    // the objective linearly but the weights only through its square root.
    const double l1 = std::fabs(F.weights[1] - 0.5) + std::fabs(F.weights[3] - 0.5) +
                      F.weights[0] + F.weights[2] + F.weights[4];
    CHECK(l1 <= 10.0 * std::sqrt(tol));
}

TEST_CASE("mixture projection: first-order certificate for a misspecified truth") {
    const DensityHandle p0 = gaussian(0.0, 1.5);
    const std::vector<double> grid9 = mixing_grid(1.0, 9); // [-1, 1] support
    const double tol = 1e-6;
    const MixingDistribution F = project_mixture(p0, grid9, tol, 2000000, mixture_grid());
    CHECK(mixture_dual_gap(p0, F, mixture_grid()) <= tol * 1.01);
}

TEST_CASE("mixture projection: uniqueness stability across initializations") {
    const MixingDistribution F0{{-1.0, 1.0}, {0.5, 0.5}, 2.0};
    const DensityHandle p0 = mixture_density(F0);
    const std::vector<double> grid5 = {-2.0, -1.0, 0.0, 1.0, 2.0};
    const double tol = 1e-10;
    const MixingDistribution a = project_mixture(p0, grid5, tol, 5000000, mixture_grid());
    CounterRng rng(4711);
    std::vector<double> init(5);
    double s = 0.0;
    for (double& w : init) {
        w = 0.05 + rng.uniform();
        s += w;
    }
    for (double& w : init) w /= s;
    const MixingDistribution b = project_mixture(p0, grid5, tol, 5000000, mixture_grid(), init);
    CHECK(l1_weight_distance(a, b) <= 10.0 * tol);
}

TEST_CASE("mixture projection error paths") {
    const DensityHandle p0 = gaussian(0.0, 1.5);
    CHECK_THROWS_WITH_AS(project_mixture(p0, mixing_grid(2.0, 21), 1e-9, 5, mixture_grid()),
                         doctest::Contains("duality gap"), std::runtime_error);
    CHECK_THROWS_AS(project_mixture(p0, {}, 1e-6, 10, mixture_grid()), std::invalid_argument);
}

TEST_CASE("abs deviation gap: oracle value and quadratic bound") {
    const ErrorSpec e{ErrorSpec::Kind::gaussian, 0.0, 1.0};
    CHECK(abs_deviation_gap(0.0, e) == doctest::Approx(0.0).epsilon(1e-15));
    const double oracle =
        1.0 * (2.0 * norm_cdf(1.0) - 1.0) + 2.0 * norm_pdf(1.0) - std::sqrt(2.0 / M_PI);
    CHECK(abs_deviation_gap(1.0, e) == doctest::Approx(oracle).epsilon(1e-12));
    for (int i = 1; i <= 50; ++i) {
        const double nu = i / 50.0;
        CHECK(abs_deviation_gap(nu, e) >= 0.3 * nu * nu);
    }
    // quadrature path (laplace error) against its closed form
    const ErrorSpec le{ErrorSpec::Kind::laplace, 0.0, 1.0};
    for (double nu : {0.3, -0.9, 2.0}) {
        const double closed = std::exp(-std::fabs(nu)) + std::fabs(nu) - 1.0;
        CHECK(abs_deviation_gap(nu, le) == doctest::Approx(closed).epsilon(1e-9));
    }
}

TEST_CASE("regression projection: the three analytic cases") {
    RegressionSpec rs;
    rs.basis = RegressionBasis{3, -1.5, 1.5};
    const std::vector<double> c0 = {-0.4, -0.1, 0.2};
    rs.f0 = [c0, basis = rs.basis](double x) { return c0[basis.bin_of(x)]; };
    rs.f0_bound = 1.0;
    {
        rs.error = ErrorSpec{ErrorSpec::Kind::gaussian, 0.0, 1.0};
        const auto c = project_regression(rs, 100000, 21);
        for (int b = 0; b < 3; ++b) CHECK(c[b] == doctest::Approx(c0[b]).epsilon(1e-6));
    }
    {
        rs.error = ErrorSpec{ErrorSpec::Kind::gaussian, 0.5, 1.0};
        const auto c = project_regression(rs, 100000, 22);
        for (int b = 0; b < 3; ++b) CHECK(c[b] == doctest::Approx(c0[b] + 0.5).epsilon(1e-6));
    }
    {
        rs.likelihood = RegressionSpec::Likelihood::laplace;
        rs.error = ErrorSpec{ErrorSpec::Kind::gaussian, 0.0, 1.0}; // median zero
        const auto c = project_regression(rs, 100000, 23);
        for (int b = 0; b < 3; ++b) CHECK(c[b] == doctest::Approx(c0[b]).epsilon(1e-6));
    }
}

TEST_CASE("pythagoras check: interior zero, boundary breakage") {
    RegressionSpec rs;
    rs.basis = RegressionBasis{3, -1.5, 1.5};
    const std::vector<double> c0 = {-0.4, -0.1, 0.2};
    rs.f0 = [c0, basis = rs.basis](double x) { return c0[basis.bin_of(x)]; };
    rs.f0_bound = 1.0;
    rs.error = ErrorSpec{ErrorSpec::Kind::gaussian, 0.5, 1.0};
    const auto fstar = project_regression(rs, 100000, 31);
    const auto py = pythagoras_check(fstar, rs, 100000, 32);
    CHECK(py.max_abs_inner <= 3.0 * py.stderr_ + 1e-9);

    RegressionSpec rb;
    rb.basis = RegressionBasis{1, -1.0, 1.0};
    rb.f0 = [](double) { return 1.0; };
    rb.f0_bound = 1.5;
    rb.error = ErrorSpec{ErrorSpec::Kind::gaussian, 0.5, 1.0}; // target 1.5, box ends at 1
    const auto cb = project_regression(rb, 100000, 33);
    CHECK(cb[0] == doctest::Approx(1.0).epsilon(1e-9));
    const auto pb = pythagoras_check(cb, rb, 100000, 34);
    // E (f - 1)(1 - 1.5) = 1 at the vertex f = -1
    CHECK(pb.max_abs_inner == doctest::Approx(1.0).epsilon(0.02));
    CHECK(pb.max_abs_inner > 10.0 * pb.stderr_);
}

TEST_CASE("regression spec validation") {
    RegressionSpec rs;
    rs.basis = RegressionBasis{3, -1.5, 1.5};
    rs.f0 = [](double) { return 3.0; };
    rs.f0_bound = 1.0;
    CHECK_THROWS_AS(project_regression(rs, 1000, 1), std::invalid_argument);
}

} // TEST_SUITE
