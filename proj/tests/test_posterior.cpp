#include <doctest.h>

#include <cmath>
#include <sstream>

#include "misspec/divergence.hpp"
#include "misspec/normal.hpp"
#include "misspec/posterior.hpp"
#include "misspec/scenarios.hpp"

using namespace misspec;

TEST_SUITE("posterior") {

TEST_CASE("grid posterior basics") {
    {
        const auto w = grid_posterior({0.3, 0.7}, {0.0, 0.0});
        CHECK(w[0] == doctest::Approx(0.3).epsilon(1e-14));
        CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-13));
    }
    {
        // two-point grid {0, 1}, flat prior, observation at 1/2
        const std::vector<double> loglik = {norm_log_pdf(0.5), norm_log_pdf(-0.5)};
        const auto w = grid_posterior({0.5, 0.5}, loglik);
        CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-13));
    }
    {
        // three zero observations: weight ratio exp(3/2)
        std::vector<double> loglik = {3.0 * norm_log_pdf(0.0), 3.0 * norm_log_pdf(-1.0)};
        const auto w = grid_posterior({0.5, 0.5}, loglik);
        CHECK(w[0] / w[1] == doctest::Approx(std::exp(1.5)).epsilon(1e-10));
    }
    const double ninf = -std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS(grid_posterior({0.5, 0.5}, {ninf, ninf}), doctest::Contains("degenerate"),
                         std::runtime_error);
}

TEST_CASE("weighted quantile and tail helpers break ties deterministically") {
    const std::vector<double> dist = {0.0, 1.0, 1.0, 2.0};
    const std::vector<double> w = {0.25, 0.25, 0.25, 0.25};
    CHECK(weighted_quantile_radius(dist, w, 0.5) == 1.0);
    CHECK(weighted_quantile_radius(dist, w, 0.9) == 2.0);
    CHECK(weighted_tail_mass(dist, w, 1.0) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("boundary posterior mass: closed form, grid agreement, stability") {
    CHECK(boundary_posterior_mass(50.0, 0.3, 1.0) == doctest::Approx(1.0).epsilon(1e-13));
    const double v = boundary_posterior_mass(100.0, 0.0, 1.05);
    CHECK(v == doctest::Approx(0.00566).epsilon(4e-3));

    CounterRng rng(7117);
    for (int k = 0; k < 10; ++k) {
        // keep the cutoff on a grid-cell boundary and n inside the range the
        // 1e4-point grid resolves, so the discrete route is itself accurate
        const int G0 = 10000;
        const double n = 1.0 + std::floor(rng.uniform(0.0, 400.0));
        const double zn = rng.uniform(-2.0, 2.0);
        const double span = std::min(1.0, 30.0 / n);
        const double c = 1.0 + std::floor(rng.uniform(0.0, span) * G0) / G0;
        const double direct = boundary_posterior_mass(n, zn, c);
        const int G = 10000;
        std::vector<double> prior(G, 1.0 / G), loglik(G), thetas(G);
        for (int j = 0; j < G; ++j) {
            thetas[j] = 1.0 + (j + 0.5) / G;
            loglik[j] = thetas[j] * std::sqrt(n) * zn - 0.5 * n * thetas[j] * thetas[j];
        }
        const auto w = grid_posterior(prior, loglik);
        double mass = 0.0;
        for (int j = 0; j < G; ++j)
            if (thetas[j] >= c) mass += w[j];
        CHECK(std::fabs(direct - mass) < 1e-4);
    }

    // mass at c = 1 + C/n is stable across n (bounded away from zero)
    double lo = 1.0, hi = 0.0;
    for (double n : {100.0, 400.0, 1600.0}) {
        const double m = boundary_posterior_mass(n, 0.0, 1.0 + 5.0 / n);
        lo = std::min(lo, m);
        hi = std::max(hi, m);
    }
    CHECK(hi <= 3.0 * lo);
    CHECK(lo > 0.0);
}

TEST_CASE("gamma and dirichlet draws match their moments") {
    CounterRng rng(808);
    const int n = 200000;
    double m = 0.0, v = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = gamma_draw(rng, 2.5);
        m += x;
    }
    m /= n;
    CounterRng rng2(808);
    for (int i = 0; i < n; ++i) {
        const double x = gamma_draw(rng2, 2.5);
        v += (x - m) * (x - m);
    }
    v /= (n - 1);
    CHECK(std::fabs(m - 2.5) < 5.0 * std::sqrt(2.5 / n));
    CHECK(std::fabs(v - 2.5) < 0.1);

    const std::vector<double> alpha = {0.3, 0.7, 2.0};
    std::vector<double> mean(3, 0.0);
    for (int i = 0; i < 50000; ++i) {
        const auto w = dirichlet_draw(rng, alpha);
        for (int j = 0; j < 3; ++j) mean[j] += w[j] / 50000.0;
    }
    for (int j = 0; j < 3; ++j) CHECK(std::fabs(mean[j] - alpha[j] / 3.0) < 0.01);
}

TEST_CASE("mixture posterior: prior recovery and the acceptance guard") {
    const std::vector<double> support = mixing_grid(2.0, 5);
    const std::vector<double> alpha(5, 0.8);
    {
        McmcConfig cfg{30000, 5000, 10, 0.8};
        const MixturePosterior post = mixture_posterior({}, support, alpha, cfg, 515);
        CHECK(post.acceptance > 0.1);
        CHECK(post.acceptance < 0.95);
        double m0 = 0.0;
        for (const auto& w : post.weight_draws) m0 += w[0] / post.n_draws();
        CHECK(std::fabs(m0 - 0.2) < 0.03); // Dirichlet mean with generous slack
    }
    {
        McmcConfig cfg{2000, 500, 10, 60.0}; // absurd step size stalls the chain
        CHECK_THROWS_WITH_AS(mixture_posterior({0.4, -0.2}, support, alpha, cfg, 99),
                             doctest::Contains("proposal_scale"), std::runtime_error);
    }
    CHECK_THROWS_AS(mixture_posterior({}, support, {0.8, 0.8}, McmcConfig{}, 1),
                    std::invalid_argument);
}

TEST_CASE("regression posterior: uniform at n=0 and laplace table correctness") {
    RegressionSpec rs;
    rs.basis = RegressionBasis{2, -1.0, 1.0};
    rs.f0 = [](double) { return 0.0; };
    {
        const RegressionPosterior post(rs, {}, 31);
        for (double w : post.weights())
            CHECK(w == doctest::Approx(1.0 / 961.0).epsilon(1e-12));
    }
    {
        rs.likelihood = RegressionSpec::Likelihood::laplace;
        CounterRng rng(246);
        std::vector<Point> data;
        for (int i = 0; i < 40; ++i) data.push_back(Point{rng.uniform(), rng.normal()});
        const RegressionPosterior post(rs, data, 11);
        // log-likelihood from the sorted prefix tables equals a direct sum
        for (const std::vector<double> c : {std::vector<double>{0.3, -0.7},
                                            std::vector<double>{-1.0, 1.0}}) {
            double direct = 0.0;
            for (const Point& p : data) direct -= std::fabs(p.y - c[rs.basis.bin_of(p.x)]);
            CHECK(post.log_lik(c) == doctest::Approx(direct).epsilon(1e-11));
        }
    }
}

TEST_CASE("regression posterior concentrates with strong data") {
    RegressionSpec rs;
    rs.basis = RegressionBasis{3, -1.5, 1.5};
    const std::vector<double> c0 = {-0.4, -0.1, 0.2};
    rs.f0 = [c0, basis = rs.basis](double x) { return c0[basis.bin_of(x)]; };
    CounterRng rng(777);
    std::vector<Point> data;
    for (int i = 0; i < 2000; ++i) {
        const double x = rng.uniform();
        data.push_back(Point{x, rs.f0(x) + rng.normal()});
    }
    const RegressionPosterior post(rs, data, 31);
    const auto mean = post.mean();
    const auto sd = post.sd();
    for (int b = 0; b < 3; ++b) CHECK(std::fabs(mean[b] - c0[b]) <= 4.0 * sd[b] + 0.05);
    CHECK(post.quantile_radius(c0, 0.9) < 0.25);
    CHECK(post.tail_mass(c0, 0.5) < 0.01);
    CHECK(post.evidence_vs(c0) > 0.0);
}

TEST_CASE("evidence bound check: large C trivial, tiny eps rejected") {
    const ParametricScenarioOracle oracle{0.0, 2.0};
    EvidenceCheckInput in;
    in.truth = normal_sampler(0.0, std::sqrt(2.0));
    in.prior_draw = [](CounterRng& rng) { return rng.uniform(-3.0, 3.0); };
    in.log_ratio_sum = [](double theta, std::span<const Point> xs) {
        double S = 0.0;
        for (const Point& p : xs) S += p.x;
        return theta * S - 0.5 * xs.size() * theta * theta;
    };
    in.eps = 0.15;
    in.in_neighborhood = [&](double theta) {
        const KlMoments m = oracle.moments(theta);
        return m.mean_log <= in.eps * in.eps && m.sq_log <= in.eps * in.eps;
    };
    in.n = 100;
    in.reps = 40;
    in.C = 50.0;
    in.prior_mass_draws = 20000;
    in.evidence_draws = 800;
    const EvidenceCheckResult r = evidence_bound_check(in, 9001);
    CHECK(r.violation_freq == 0.0);
    CHECK(r.bound < 1e-3);

    EvidenceCheckInput tiny = in;
    tiny.eps = 0.001;
    tiny.in_neighborhood = [&](double theta) {
        const KlMoments m = oracle.moments(theta);
        return m.mean_log <= tiny.eps * tiny.eps && m.sq_log <= tiny.eps * tiny.eps;
    };
    CHECK_THROWS_WITH_AS(evidence_bound_check(tiny, 9002), doctest::Contains("increase epsilon"),
                         std::runtime_error);
}

TEST_CASE("rate fit: synthetic exponents and error paths") {
    std::vector<PosteriorSummary> sums;
    for (int n : {100, 200, 400, 800})
        for (int rep = 0; rep < 4; ++rep)
            sums.push_back(PosteriorSummary{n, 0.0, 2.0 / std::sqrt((double)n), 1.0, 0});
    RateFit fit = rate_fit(sums);
    CHECK(fit.beta == doctest::Approx(-0.5).epsilon(1e-13));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-13));
    for (auto& s : sums) s.quantile_radius = 3.0 / s.n;
    CHECK(rate_fit(sums).beta == doctest::Approx(-1.0).epsilon(1e-13));

    std::vector<PosteriorSummary> few = {PosteriorSummary{100, 0, 1, 1, 0},
                                         PosteriorSummary{200, 0, 1, 1, 0}};
    CHECK_THROWS_AS(rate_fit(few), std::invalid_argument);
    for (auto& s : sums)
        if (s.n == 400) s.quantile_radius = 0.0;
    CHECK_THROWS_WITH_AS(rate_fit(sums), doctest::Contains("refine"), std::runtime_error);
}

TEST_CASE("scenario validation and deterministic replication") {
    ScenarioSpec bad = default_scenario(ScenarioModel::parametric_interior);
    bad.n_list = {100, 100};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.n_list = {100, 200};
    bad.reps = 4;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    ScenarioSpec spec = default_scenario(ScenarioModel::parametric_interior);
    spec.n_list = {100, 200, 400, 800};
    spec.reps = 8;
    const auto a = run_scenario(spec, 1);
    const auto b = run_scenario(spec, 2); // thread count must not matter
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].seed == b[i].seed);
        CHECK(a[i].quantile_radius == b[i].quantile_radius);
        CHECK(a[i].evidence == b[i].evidence);
        CHECK(a[i].tail_mass == b[i].tail_mass);
    }
    const RateFit fit = fit_scenario(a);
    CHECK(fit.beta < -0.3);
    CHECK(fit.beta > -0.7);

    std::ostringstream os;
    write_records_csv(os, a);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    CHECK(header == "scenario,n,rep,seed,tail_mass,quantile_radius,evidence,diagnostics");
}

TEST_CASE("mixture posterior contracts toward a grid-supported truth") {
    const std::vector<double> support = mixing_grid(2.0, 9);
    MixingDistribution F0{support, std::vector<double>(9, 0.0), 2.0};
    F0.weights[2] = 0.5; // atoms at -1 and +1
    F0.weights[6] = 0.5;
    const Sampler truth = mixture_sampler(F0);
    const DensityHandle p_truth = mixture_density(F0);
    const std::vector<double> alpha(9, 0.5);

    auto median_dist = [&](int n, std::uint64_t seed) {
        const auto xs = truth.draw(seed, n);
        std::vector<double> data(n);
        for (int i = 0; i < n; ++i) data[i] = xs[i].x;
        McmcConfig cfg{12000, 4000, 40, 0.9 * std::sqrt(100.0 / n)};
        const MixturePosterior post = mixture_posterior(data, support, alpha, cfg, seed + 1);
        std::vector<double> d(post.n_draws());
        for (std::size_t k = 0; k < post.n_draws(); ++k)
            d[k] = std::sqrt(weighted_hellinger_sq(mixture_density(post.draw(k)), p_truth,
                                                   p_truth, p_truth, mixture_grid(), 0.25));
        std::sort(d.begin(), d.end());
        return d[d.size() / 2];
    };
    const double d100 = median_dist(100, 424200);
    const double d800 = median_dist(800, 424201);
    CHECK(d800 < d100);
}

TEST_CASE("misspecified mixture posterior targets the projection, not the uniform") {
    // The uniform mixing distribution sits only ~0.027 from the projection
    // in the weighted Hellinger metric, so a factor-2 separation needs the
    // posterior radius below half of that; n = 3200 is the first level of
    // the doubling grid where that happens.
    const ScenarioSpec spec = default_scenario(ScenarioModel::mixture);
    const MixingDistribution& fstar = mixture_scenario_projection(spec);
    const std::vector<double>& support = fstar.support;
    const DensityHandle p0 = gaussian(0.0, 1.5);
    const DensityHandle pstar = mixture_density(fstar);
    const DensityHandle puni = mixture_density(MixingDistribution::uniform_on(support, 2.0));

    CounterRng rng(3141);
    const int n = 3200;
    std::vector<double> data(n);
    for (int i = 0; i < n; ++i) data[i] = 1.5 * rng.normal();
    const std::vector<double> alpha(support.size(), 4.0 / support.size());
    McmcConfig cfg{12000, 4000, 40, 0.7 * std::sqrt(100.0 / n)};
    const MixturePosterior post = mixture_posterior(data, support, alpha, cfg, 3142);

    std::vector<double> d_star(post.n_draws()), d_uni(post.n_draws());
    for (std::size_t k = 0; k < post.n_draws(); ++k) {
        const DensityHandle pf = mixture_density(post.draw(k));
        d_star[k] = std::sqrt(weighted_hellinger_sq(pf, pstar, p0, pstar, mixture_grid(), 0.25));
        d_uni[k] = std::sqrt(weighted_hellinger_sq(pf, puni, p0, pstar, mixture_grid(), 0.25));
    }
    std::sort(d_star.begin(), d_star.end());
    std::sort(d_uni.begin(), d_uni.end());
    CHECK(2.0 * d_star[d_star.size() / 2] <= d_uni[d_uni.size() / 2]);
}

TEST_CASE("normal-likelihood posterior recovers f0 under laplace noise") {
    RegressionSpec rs;
    rs.basis = RegressionBasis{3, -1.5, 1.5};
    const std::vector<double> c0 = {-0.4, -0.1, 0.2};
    rs.f0 = [c0, basis = rs.basis](double x) { return c0[basis.bin_of(x)]; };
    rs.error = ErrorSpec{ErrorSpec::Kind::laplace, 0.0, 1.0 / std::sqrt(2.0)};

    const int n = 1600;
    const auto xs = rs.covariate.draw(916, n);
    const auto es = rs.error.sampler().draw(917, n);
    std::vector<Point> data(n);
    for (int i = 0; i < n; ++i) data[i] = Point{xs[i].x, rs.f0(xs[i].x) + es[i].x};
    const RegressionPosterior post(rs, data, 31);
    const auto mean = post.mean();
    const auto sd = post.sd();
    for (int b = 0; b < 3; ++b) CHECK(std::fabs(mean[b] - c0[b]) <= 3.0 * sd[b]);
}

TEST_CASE("grid posterior through a parametric family") {
    const ParametricFamily fam = normal_location_family(-1.0, 2.0);
    const std::vector<double> thetas = {0.0, 1.0};
    const std::vector<double> prior = {0.5, 0.5};
    const std::vector<Point> data = {Point{0.5, 0.0}};
    const auto w = grid_posterior(fam, thetas, prior, data);
    CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-13));
    const std::vector<Point> three = {Point{0.0, 0.0}, Point{0.0, 0.0}, Point{0.0, 0.0}};
    const auto w3 = grid_posterior(fam, thetas, prior, three);
    CHECK(w3[0] / w3[1] == doctest::Approx(std::exp(1.5)).epsilon(1e-10));
}

TEST_CASE("thread cap honors the environment variable") {
    setenv("MISSPEC_THREADS", "3", 1);
    CHECK(env_thread_cap() == 3);
    setenv("MISSPEC_THREADS", "junk", 1);
    CHECK(env_thread_cap() >= 1); // falls back to hardware concurrency
    unsetenv("MISSPEC_THREADS");
    CHECK(env_thread_cap() >= 1);
}

TEST_CASE("parametric scenario oracle moments match quadrature") {
    const auto& g = default_grid();
    const ParametricScenarioOracle oracle{0.0, 2.0};
    const DensityHandle p0 = gaussian(0.0, std::sqrt(2.0));
    const DensityHandle pstar = gaussian(0.0, 1.0);
    for (double theta : {0.05, -0.4, 1.1}) {
        const KlMoments numeric = kl_neighborhood_moments(p0, pstar, gaussian(theta, 1.0), g);
        const KlMoments closed = oracle.moments(theta);
        CHECK(numeric.mean_log == doctest::Approx(closed.mean_log).epsilon(1e-9));
        CHECK(numeric.sq_log == doctest::Approx(closed.sq_log).epsilon(1e-9));
    }
}

} // TEST_SUITE
