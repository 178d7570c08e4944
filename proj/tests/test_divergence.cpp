#include <doctest.h>

#include <cmath>
#include <sstream>

#include "misspec/density.hpp"
#include "misspec/divergence.hpp"
#include "misspec/entropy.hpp"
#include "misspec/normal.hpp"

using namespace misspec;

TEST_SUITE("divergence") {

TEST_CASE("kl divergence closed forms") {
    const auto& g = default_grid();
    const DensityHandle n01 = gaussian(0.0, 1.0);
    CHECK(std::fabs(kl_divergence(n01, n01, g)) < 1e-12);

    const DensityHandle n02 = gaussian(0.0, std::sqrt(2.0));
    for (double theta : {0.0, 0.8, -1.5}) {
        const double kl = kl_divergence(n02, gaussian(theta, 1.0), g);
        CHECK(kl == doctest::Approx(theta * theta / 2.0 + 0.5 * (1.0 - std::log(2.0))).epsilon(1e-11));
    }

    // difference form: -P0 log(p_theta / p_thetastar) at theta = 2, thetastar = 1
    const double diff =
        kl_divergence(n01, gaussian(2.0, 1.0), g) - kl_divergence(n01, gaussian(1.0, 1.0), g);
    CHECK(diff == doctest::Approx(1.5).epsilon(1e-10));
}

TEST_CASE("kl is infinite off the support") {
    const auto& g = default_grid();
    DensityHandle narrow = gaussian(0.0, 1.0);
    auto base = narrow.log_density;
    narrow.log_density = [base](const Point& p) {
        return std::fabs(p.x) <= 2.0 ? base(p) : -std::numeric_limits<double>::infinity();
    };
    narrow.support = [](const Point& p) { return std::fabs(p.x) <= 2.0; };
    CHECK(std::isinf(kl_divergence(gaussian(0.0, 1.0), narrow, g)));
}

TEST_CASE("hellinger and l1") {
    const auto& g = default_grid();
    const DensityHandle p = gaussian(0.0, 1.0);
    const DensityHandle q = gaussian(1.0, 1.0);
    CHECK(hellinger(p, p, g) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(l1_distance(p, p, g) == doctest::Approx(0.0).epsilon(1e-12));
    const double h = hellinger(p, q, g);
    CHECK(h * h == doctest::Approx(1.0 - std::exp(-1.0 / 8.0)).epsilon(1e-11));

    CounterRng rng(31);
    const std::vector<double> support = mixing_grid(2.0, 21);
    for (int k = 0; k < 12; ++k) {
        const DensityHandle a = mixture_density(random_mixing(rng, support, 2.0));
        const DensityHandle b = mixture_density(random_mixing(rng, support, 2.0));
        CHECK(hellinger_sq(a, b, mixture_grid()) <= l1_distance(a, b, mixture_grid()) + 1e-12);
    }
}

TEST_CASE("weighted hellinger: trivial and well-specified reductions") {
    const auto& g = default_grid();
    const DensityHandle p1 = gaussian(0.2, 1.0);
    const DensityHandle p2 = gaussian(-0.4, 1.2);
    const DensityHandle p0 = gaussian(0.0, 1.3);
    CHECK(weighted_hellinger_sq(p1, p1, p0, p2, g) == doctest::Approx(0.0).epsilon(1e-14));
    // weight identically one when p0 = pstar, factor 1/2 gives h^2
    const double wh = weighted_hellinger_sq(p1, p2, p0, p0, g, 0.5);
    CHECK(wh == doctest::Approx(hellinger_sq(p1, p2, g)).epsilon(1e-11));
}

TEST_CASE("transform values against the two tilted-measure panels") {
    const auto& g = default_grid();
    const DensityHandle p0 = gaussian(0.0, std::sqrt(2.0));
    const DensityHandle q_l = q_of_p(gaussian(1.5, 1.0), p0, gaussian(0.0, 1.0), g);
    const DensityHandle q_r = q_of_p(gaussian(1.5, 1.0), p0, gaussian(1.0, 1.0), g);
    for (int i = 1; i <= 19; ++i) {
        const double beta = i / 20.0;
        CHECK(transform_value(p0, q_l, beta, g) ==
              doctest::Approx(std::exp(2.25 * beta * beta - 1.125 * beta)).epsilon(1e-9));
        CHECK(transform_value(p0, q_r, beta, g) ==
              doctest::Approx(std::exp(0.25 * beta * beta - 0.625 * beta)).epsilon(1e-9));
    }
    // hellinger_transform carries the exponent on p0
    CHECK(hellinger_transform(p0, q_l, 0.5, g) ==
          doctest::Approx(transform_value(p0, q_l, 0.5, g)).epsilon(1e-12));
    CHECK(hellinger_transform(p0, q_l, 0.3, g) ==
          doctest::Approx(transform_value(p0, q_l, 0.7, g)).epsilon(1e-12));
}

TEST_CASE("transform of the location family matches the quadratic form") {
    const auto& g = default_grid();
    const DensityHandle p0 = gaussian(0.0, 1.0);
    const DensityHandle pstar = gaussian(1.0, 1.0);
    const DensityHandle q = q_of_p(gaussian(2.0, 1.0), p0, pstar, g);
    // P0 (p_2/p_1)^(1/2) = exp(-0.625)
    CHECK(transform_value(p0, q, 0.5, g) == doctest::Approx(std::exp(-0.625)).epsilon(1e-10));
}

TEST_CASE("transform curve: flat case and panel endpoints") {
    const auto& g = default_grid();
    const DensityHandle p0 = gaussian(0.4, 0.9);
    const TransformCurve flat = transform_curve(p0, p0, 15, g);
    for (double v : flat.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-11));
    CHECK(std::fabs(flat.slope_at_zero) < 1e-10);

    const DensityHandle p02 = gaussian(0.0, std::sqrt(2.0));
    const DensityHandle q_l = q_of_p(gaussian(1.5, 1.0), p02, gaussian(0.0, 1.0), g);
    const TransformCurve c = transform_curve(p02, q_l, 33, g);
    CHECK(c.left_limit == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(c.right_limit == doctest::Approx(std::exp(9.0 / 8.0)).epsilon(1e-9));
    CHECK(c.slope_at_zero == doctest::Approx(-9.0 / 8.0).epsilon(1e-9));

    CHECK_THROWS_AS(transform_curve(p02, q_l, 7, g), std::invalid_argument);
}

TEST_CASE("transform curve limits for a half-supported alternative") {
    const auto& g = default_grid();
    const DensityHandle p0 = gaussian(0.0, 1.0);
    DensityHandle q = gaussian(0.0, 1.0);
    auto base = q.log_density;
    q.log_density = [base](const Point& p) {
        return p.x >= 0.0 ? base(p) : -std::numeric_limits<double>::infinity();
    };
    q.support = [](const Point& p) { return p.x >= 0.0; };
    q.total_mass = 0.5;
    const TransformCurve c = transform_curve(p0, q, 17, g);
    CHECK(c.left_limit == doctest::Approx(0.5).epsilon(1e-6));  // P0(q > 0)
    CHECK(c.right_limit == doctest::Approx(0.5).epsilon(1e-6)); // q mass on {p0 > 0}
    CHECK(std::isinf(c.slope_at_zero));
    CHECK(c.slope_at_zero < 0.0);
}

TEST_CASE("transform curve serializes as a two-column table") {
    const auto& g = default_grid();
    const DensityHandle p0 = gaussian(0.0, std::sqrt(2.0));
    const DensityHandle q = q_of_p(gaussian(1.5, 1.0), p0, gaussian(0.0, 1.0), g);
    const TransformCurve c = transform_curve(p0, q, 99, g);
    std::ostringstream os;
    c.write_table(os);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    CHECK(header == "alpha,rho");
    std::string line;
    bool saw_half = false;
    while (std::getline(is, line)) {
        const auto comma = line.find(',');
        const double a = std::stod(line.substr(0, comma));
        const double rho = std::stod(line.substr(comma + 1));
        if (std::fabs(a - 0.5) < 1e-12) {
            saw_half = true;
            CHECK(rho == doctest::Approx(1.0).epsilon(1e-6)); // exp(9/16 - 9/16)
        }
    }
    CHECK(saw_half);
}

TEST_CASE("misspec margin oracles") {
    const auto& g = default_grid();
    const DensityHandle p02 = gaussian(0.0, std::sqrt(2.0));
    CHECK(misspec_margin(p02, gaussian(0.7, 1.1), gaussian(0.7, 1.1), g) ==
          doctest::Approx(0.0).epsilon(1e-9));
    const double m = misspec_margin(p02, gaussian(1.5, 1.0), gaussian(0.0, 1.0), g);
    CHECK(m == doctest::Approx(9.0 / 64.0).epsilon(1e-7));
    // the maximizing exponent is 1/4
    const DensityHandle q = q_of_p(gaussian(1.5, 1.0), p02, gaussian(0.0, 1.0), g);
    CHECK(-std::log(transform_value(p02, q, 0.25, g)) == doctest::Approx(m).epsilon(1e-8));

    // supremum approached at the right endpoint
    const double mb = misspec_margin(gaussian(0.0, 1.0), gaussian(2.0, 1.0), gaussian(1.0, 1.0), g);
    CHECK(std::fabs(mb - 1.0) < 3e-6);
}

TEST_CASE("kl neighborhood membership") {
    const auto& g = default_grid();
    const DensityHandle p0 = gaussian(0.0, 1.0);
    const DensityHandle pstar = gaussian(1.0, 1.0);
    const KLNeighborhoodSpec spec(0.2, pstar, p0, g);
    CHECK(in_kl_neighborhood(spec, pstar, g));
    CHECK_FALSE(in_kl_neighborhood(spec, gaussian(1.1, 1.0), g));
    CHECK(in_kl_neighborhood(spec, gaussian(1.01, 1.0), g));

    const KlMoments m = kl_neighborhood_moments(p0, pstar, gaussian(1.1, 1.0), g);
    CHECK(m.mean_log == doctest::Approx(0.105).epsilon(1e-9));

    // construction fails when the divergence to pstar is infinite
    DensityHandle clipped = pstar;
    auto base = pstar.log_density;
    clipped.log_density = [base](const Point& p) {
        return p.x >= -1.0 ? base(p) : -std::numeric_limits<double>::infinity();
    };
    clipped.support = [](const Point& p) { return p.x >= -1.0; };
    CHECK_THROWS_AS(KLNeighborhoodSpec(0.2, clipped, p0, g), std::invalid_argument);
}

TEST_CASE("expansion residual and its envelopes") {
    const auto& g = default_grid();
    const DensityHandle p0 = gaussian(0.0, 1.2);
    const DensityHandle p = gaussian(0.0, 1.0);
    {
        const auto r = expansion_residual(p0, p, p, 0.3, g);
        CHECK(r.lhs < 1e-11);
        CHECK(r.envelope < 1e-11);
    }
    {
        const auto r = expansion_residual(p0, p, gaussian(0.5, 1.0), 0.1, g);
        CHECK(r.lhs <= 10.0 * r.envelope);
        CHECK(r.lhs <= kExpansionConstSqrtLog * r.envelope);
    }
    {
        // convex combination against the per-component envelope
        const std::vector<DensityHandle> qs = {gaussian(0.3, 1.0), gaussian(-0.3, 1.0)};
        const std::vector<double> lambdas = {0.5, 0.5};
        const DensityHandle qmix = convex_mix(qs, lambdas);
        const double lhs = expansion_lhs(p0, p, qmix, 0.2, g);
        const double env = mixture_envelope_sqrt_log(p0, p, qs, lambdas, 0.2, g);
        CHECK(lhs <= kMixtureConstSqrtLog * env);
        CHECK(lhs <= mixture_envelope_log_tilted(p0, p, qs, lambdas, 0.2, g) *
                         kMixtureConstLogTilted);
    }
}

TEST_CASE("log-moment bound: examples and regime guard") {
    const auto& g = default_grid();
    const DensityHandle p = gaussian(0.0, 1.0);
    {
        const DensityHandle q = scaled(gaussian(0.1, 1.0), 1.2);
        const LogMomentBound lm = log_moment_bound_check(p, q, 1.0, g);
        CHECK(lm.kl <= kLogMomentConst * lm.rhs1);
        CHECK(lm.sqlog <= kLogMomentConst * lm.rhs2);
    }
    {
        const DensityHandle q = gaussian(0.05, 1.0);
        const LogMomentBound lm = log_moment_bound_check(p, q, 0.5, g);
        CHECK(lm.sqlog <= kLogMomentConst * lm.rhs2);
        CHECK(lm.kl <= kLogMomentConst * lm.rhs1);
    }
    CHECK_THROWS_WITH_AS(log_moment_bound_check(p, p, 1.0, g), doctest::Contains("regime"),
                         std::runtime_error);
    // regime constant: 0.4^b for b >= 1, and b = 1/2 scans to the same form
    CHECK(log_moment_regime_bound(1.0) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(log_moment_regime_bound(2.0) == doctest::Approx(0.16).epsilon(1e-12));
    CHECK(log_moment_regime_bound(0.5) == doctest::Approx(std::sqrt(0.4)).epsilon(1e-6));
    // near zero the scan cutoff collapses
    CHECK(log_moment_regime_bound(0.1) < std::pow(0.4, 0.1) - 1e-3);
}

} // TEST_SUITE
