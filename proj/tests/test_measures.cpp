#include <doctest.h>

#include <cmath>

#include "misspec/density.hpp"
#include "misspec/normal.hpp"
#include "misspec/quadrature.hpp"

using namespace misspec;

TEST_SUITE("measures") {

TEST_CASE("gauss-legendre rule matches the reference nodes") {
    std::vector<double> x, w;
    gauss_legendre_rule(2, x, w);
    CHECK(x[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
    CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-15));

    // 5-node rule integrates degree-9 polynomials exactly on [-1, 1]
    gauss_legendre_rule(5, x, w);
    double odd = 0.0, even = 0.0;
    for (int i = 0; i < 5; ++i) {
        odd += w[i] * std::pow(x[i], 9);
        even += w[i] * std::pow(x[i], 8);
    }
    CHECK(std::fabs(odd) < 1e-16);
    CHECK(even == doctest::Approx(2.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("integrate: constant, gaussian mass, second moment") {
    const auto unit = QuadratureGrid::trapezoid(0.0, 1.0, 501);
    unit.validate();
    CHECK(integrate([](double) { return 1.0; }, unit) == doctest::Approx(1.0).epsilon(1e-13));

    const auto g10 = QuadratureGrid::gauss_legendre(-10.0, 10.0);
    const DensityHandle phi = gaussian(0.0, 1.0);
    const double mass_oracle = norm_cdf(10.0) - norm_cdf(-10.0); // erf-based oracle
    CHECK(std::fabs(integrate([&](double x) { return phi.at(x); }, g10) - mass_oracle) < 1e-10);

    const auto g12 = QuadratureGrid::gauss_legendre(-12.0, 12.0);
    const DensityHandle p2 = gaussian(0.0, std::sqrt(2.0));
    CHECK(std::fabs(integrate([&](double x) { return x * x * p2.at(x); }, g12) - 2.0) < 1e-8);
}

TEST_CASE("integrate reports the offending node") {
    const auto g = QuadratureGrid::gauss_legendre(0.0, 2.0, 16, 1.0);
    CHECK_THROWS_WITH_AS(integrate([](double x) { return 1.0 / (x - x); }, g),
                         doctest::Contains("non-finite integrand at node"), std::runtime_error);
}

TEST_CASE("grid invariants") {
    const auto t = QuadratureGrid::trapezoid(-3.0, 5.0, 173);
    double s = 0.0;
    for (double w : t.weights) s += w;
    CHECK(std::fabs(s - 8.0) < 1e-12);
    QuadratureGrid bad = t;
    bad.nodes[5] = bad.nodes[4]; // not strictly increasing
    CHECK_THROWS_AS(bad.validate(), std::logic_error);
}

TEST_CASE("mc_expectation basics") {
    const Sampler s = normal_sampler(0.0, 1.0);
    const McEstimate sym = mc_expectation(s, [](const Point& p) { return p.x; }, 100000, 7);
    CHECK(std::fabs(sym.mean) <= 3.0 * sym.stderr_);

    const McEstimate c = mc_expectation(s, [](const Point&) { return 1.0; }, 100, 7);
    CHECK(c.mean == 1.0);
    CHECK(c.stderr_ == 0.0);

    CHECK_THROWS_WITH_AS(
        mc_expectation(s, [](const Point& p) { return p.x > 0 ? 1.0 : 1.0 / 0.0 * 0.0; }, 100, 3),
        doctest::Contains("draw index"), std::runtime_error);
    CHECK_THROWS_AS(mc_expectation(s, [](const Point&) { return 0.0; }, 1, 3),
                    std::invalid_argument);
}

TEST_CASE("mc_expectation hits the moment-generating oracle") {
    // f = (q/p0)^(1/2) for the first tilted-measure setting; the transform
    // formula exp(9 a^2/4 - 9 a/8) gives exactly 1 at a = 1/2.
    const Sampler s = normal_sampler(0.0, std::sqrt(2.0));
    const McEstimate e = mc_expectation(
        s, [](const Point& p) { return std::exp(0.75 * p.x - 9.0 / 16.0); }, 200000, 11);
    CHECK(std::fabs(e.mean - 1.0) <= 3.0 * e.stderr_);
}

TEST_CASE("samplers are bit-deterministic and prefix-stable") {
    const Sampler s = normal_sampler(1.0, 2.0);
    const auto a = s.draw(99, 500);
    const auto b = s.draw(99, 500);
    const auto c = s.draw(99, 200);
    for (int i = 0; i < 500; ++i) CHECK(a[i].x == b[i].x);
    for (int i = 0; i < 200; ++i) CHECK(a[i].x == c[i].x);
}

TEST_CASE("laplace and uniform sampler moments") {
    const std::size_t n = 400000;
    {
        const Sampler s = laplace_sampler(0.5, 0.8);
        const auto xs = s.draw(13, n);
        double m = 0.0;
        for (const auto& p : xs) m += p.x;
        m /= n;
        CHECK(std::fabs(m - 0.5) < 5.0 * std::sqrt(2.0 * 0.64 / n));
    }
    {
        const Sampler s = uniform_sampler(0.0, 1.0);
        const auto xs = s.draw(13, n);
        double m = 0.0;
        for (const auto& p : xs) m += p.x;
        m /= n;
        CHECK(std::fabs(m - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
    }
}

TEST_CASE("mixture_density: degenerate and two-atom values") {
    const MixingDistribution point = MixingDistribution::point_mass(0.0, 2.0);
    const DensityHandle pf = mixture_density(point);
    for (double x : {-3.0, -0.5, 0.0, 1.2, 4.0})
        CHECK(pf.at(x) == doctest::Approx(norm_pdf(x)).epsilon(1e-14));

    const MixingDistribution two{{-1.0, 1.0}, {0.5, 0.5}, 2.0};
    CHECK(mixture_density(two).at(0.0) == doctest::Approx(norm_pdf(1.0)).epsilon(1e-14));

    MixingDistribution off = two;
    off.weights = {0.5, 0.5 + 1e-8};
    CHECK_THROWS_AS(mixture_density(off), std::invalid_argument);
}

TEST_CASE("mixture envelopes dominate every mixture") {
    CounterRng rng(2024);
    const double M = 2.0;
    const std::vector<double> support = mixing_grid(M, 41);
    for (int k = 0; k < 10; ++k) {
        std::vector<double> w(support.size());
        double s = 0.0;
        for (double& x : w) {
            x = rng.exponential();
            s += x;
        }
        for (double& x : w) x /= s;
        const DensityHandle pf = mixture_density(MixingDistribution{support, w, M});
        for (int i = 0; i <= 1000; ++i) {
            const double x = -8.0 + 16.0 * i / 1000.0;
            const double v = pf.at(x);
            REQUIRE(v <= mixture_upper_envelope(M, x) * (1.0 + 1e-12));
            REQUIRE(v >= mixture_lower_envelope(M, x) * (1.0 - 1e-12));
        }
    }
}

TEST_CASE("q_of_p: masses and the identity case") {
    const auto& g = default_grid();
    const DensityHandle p0 = gaussian(0.0, std::sqrt(2.0));
    const DensityHandle q1 = q_of_p(gaussian(1.5, 1.0), p0, gaussian(0.0, 1.0), g);
    CHECK(q1.total_mass == doctest::Approx(std::exp(9.0 / 8.0)).epsilon(1e-10));
    const DensityHandle q2 = q_of_p(gaussian(1.5, 1.0), p0, gaussian(1.0, 1.0), g);
    CHECK(q2.total_mass == doctest::Approx(std::exp(-3.0 / 8.0)).epsilon(1e-10));

    const DensityHandle pstar = gaussian(0.3, 1.1);
    const DensityHandle qid = q_of_p(pstar, p0, pstar, g);
    CHECK(qid.total_mass == doctest::Approx(1.0).epsilon(1e-10));
    // density equals p0 pointwise
    for (double x : {-2.0, 0.0, 1.7}) CHECK(qid.at(x) == doctest::Approx(p0.at(x)).epsilon(1e-13));
}

TEST_CASE("q_of_p detects a support violation") {
    const auto& g = default_grid();
    DensityHandle pstar = gaussian(0.0, 1.0);
    pstar.support = [](const Point& p) { return std::fabs(p.x) <= 1.0; };
    auto base = gaussian(0.0, 1.0).log_density;
    pstar.log_density = [base](const Point& p) {
        return std::fabs(p.x) <= 1.0 ? base(p) : -std::numeric_limits<double>::infinity();
    };
    CHECK_THROWS_WITH_AS(q_of_p(gaussian(0.0, 1.0), gaussian(0.0, 2.0), pstar, g),
                         doctest::Contains("absolute continuity"), std::runtime_error);
}

TEST_CASE("quadrature and monte carlo agree on smooth integrands") {
    CounterRng rng(5150);
    for (int k = 0; k < 6; ++k) {
        const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
        const double c = rng.uniform(0.3, 2.0);
        auto f = [=](const Point& p) { return a + b * std::cos(c * p.x) + 0.05 * p.x * p.x; };
        const Sampler s = normal_sampler(0.2, 1.1);
        const McEstimate mc = mc_expectation(s, f, 150000, 100 + k);
        const double exact =
            integrate([&](double x) { return f(Point{x, 0.0}) * s.target.at(x); }, default_grid());
        CHECK(std::fabs(exact - mc.mean) <= 4.0 * mc.stderr_);
    }
}

} // TEST_SUITE
