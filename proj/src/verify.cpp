#include "misspec/verify.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "misspec/density.hpp"
#include "misspec/divergence.hpp"
#include "misspec/entropy.hpp"
#include "misspec/normal.hpp"
#include "misspec/posterior.hpp"
#include "misspec/projection.hpp"
#include "misspec/scenarios.hpp"
#include "misspec/testing.hpp"
#include "misspec/textio.hpp"

namespace misspec {

namespace {

struct Suite {
    std::uint64_t seed;
    std::vector<CheckResult> results;

    void check(const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
        CheckResult r;
        r.name = name;
        try {
            auto [pass, detail] = fn();
            r.pass = pass;
            r.detail = detail;
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        results.push_back(std::move(r));
    }
};

std::pair<bool, std::string> ok(const std::string& detail = "") { return {true, detail}; }
std::pair<bool, std::string> fail(const std::string& detail) { return {false, detail}; }

DensityHandle random_prob_gaussian(CounterRng& rng) {
    return gaussian(rng.uniform(-1.0, 1.0), rng.uniform(0.7, 1.5));
}

DensityHandle random_finite_gaussian(CounterRng& rng) {
    return scaled(random_prob_gaussian(rng), rng.uniform(0.5, 2.0));
}

// -------------------------------------------------------------------------

void add_measure_checks(Suite& s) {
    s.check("quadrature.oracles", [] {
        const auto unit = QuadratureGrid::trapezoid(0.0, 1.0, 1001);
        unit.validate();
        const double one = integrate([](double) { return 1.0; }, unit);
        if (std::fabs(one - 1.0) > 1e-12) return fail("constant integral " + fmt_g17(one));

        const auto g10 = QuadratureGrid::gauss_legendre(-10.0, 10.0);
        const DensityHandle phi = gaussian(0.0, 1.0);
        const double mass = integrate([&](double x) { return phi.at(x); }, g10);
        const double mass_oracle = norm_cdf(10.0) - norm_cdf(-10.0);
        if (std::fabs(mass - mass_oracle) > 1e-10) return fail("gaussian mass " + fmt_g17(mass));

        const auto g12 = QuadratureGrid::gauss_legendre(-12.0, 12.0);
        const DensityHandle p2 = gaussian(0.0, std::sqrt(2.0));
        const double m2 = integrate([&](double x) { return x * x * p2.at(x); }, g12);
        if (std::fabs(m2 - 2.0) > 1e-8) return fail("second moment " + fmt_g17(m2));
        return ok("three oracle integrals match");
    });

    s.check("quadrature.mc_agreement", [&] {
        CounterRng rng(derive_seed({s.seed, 0x0A}));
        for (int k = 0; k < 20; ++k) {
            const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
            const double c = rng.uniform(0.3, 2.0), d = rng.uniform(-2.0, 2.0);
            const double mu = rng.uniform(-0.5, 0.5), sd = rng.uniform(0.8, 1.4);
            auto f = [=](const Point& p) { return a + b * std::sin(c * p.x + d) + 0.1 * p.x * p.x; };
            const Sampler smp = normal_sampler(mu, sd);
            const McEstimate mc = mc_expectation(smp, f, 200000, derive_seed({s.seed, 0x0B, (std::uint64_t)k}));
            const double exact = integrate(
                [&](double x) { return f(Point{x, 0.0}) * smp.target.at(x); }, default_grid());
            if (std::fabs(exact - mc.mean) > 4.0 * mc.stderr_)
                return fail("integrand " + std::to_string(k) + ": |" + fmt_g17(exact) + " - " +
                            fmt_g17(mc.mean) + "| > 4se");
        }
        return ok("20 randomized integrands within 4 stderr");
    });

    s.check("sampler.moments", [&] {
        const std::size_t n = 1000000;
        {
            const Sampler smp = normal_sampler(0.3, 1.7);
            const auto xs = smp.draw(derive_seed({s.seed, 0x0C}), n);
            double m = 0.0;
            for (const Point& p : xs) m += p.x;
            m /= n;
            double v = 0.0;
            for (const Point& p : xs) v += (p.x - m) * (p.x - m);
            v /= (n - 1);
            const double se_m = 1.7 / std::sqrt((double)n);
            const double se_v = 1.7 * 1.7 * std::sqrt(2.0 / (n - 1.0));
            if (std::fabs(m - 0.3) > 5 * se_m) return fail("normal mean " + fmt_g17(m));
            if (std::fabs(v - 2.89) > 5 * se_v) return fail("normal var " + fmt_g17(v));
        }
        {
            MixingDistribution F{{-1.0, 0.5}, {0.25, 0.75}, 2.0};
            const Sampler smp = mixture_sampler(F);
            const auto xs = smp.draw(derive_seed({s.seed, 0x0D}), n);
            double m = 0.0;
            for (const Point& p : xs) m += p.x;
            m /= n;
            const double mean_oracle = F.mean();
            const double var_oracle = 1.0 + F.variance();
            const double se_m = std::sqrt(var_oracle / n);
            if (std::fabs(m - mean_oracle) > 5 * se_m) return fail("mixture mean " + fmt_g17(m));
        }
        // bit-exact determinism
        const Sampler smp = normal_sampler(0.0, 1.0);
        const auto a = smp.draw(42, 1000);
        const auto b = smp.draw(42, 1000);
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i].x != b[i].x) return fail("sampler not bit-deterministic");
        return ok("moments within 5 stderr; draws bit-identical");
    });

    s.check("measures.q_mass", [&] {
        const DensityHandle p0 = gaussian(0.0, std::sqrt(2.0));
        const DensityHandle pstar_l = gaussian(0.0, 1.0);
        const DensityHandle pstar_r = gaussian(1.0, 1.0);
        const DensityHandle p = gaussian(1.5, 1.0);
        const DensityHandle q_l = q_of_p(p, p0, pstar_l);
        const DensityHandle q_r = q_of_p(p, p0, pstar_r);
        if (std::fabs(q_l.total_mass - std::exp(9.0 / 8.0)) > 1e-8)
            return fail("left mass " + fmt_g17(q_l.total_mass));
        if (std::fabs(q_r.total_mass - std::exp(-3.0 / 8.0)) > 1e-8)
            return fail("right mass " + fmt_g17(q_r.total_mass));
        CounterRng rng(derive_seed({s.seed, 0x0E}));
        for (int k = 0; k < 5; ++k) {
            const DensityHandle ps = random_prob_gaussian(rng);
            const DensityHandle p0k = random_prob_gaussian(rng);
            const DensityHandle q = q_of_p(ps, p0k, ps);
            if (std::fabs(q.total_mass - 1.0) > 1e-9)
                return fail("Q(Pstar) mass " + fmt_g17(q.total_mass));
        }
        return ok("tilted masses match the closed forms");
    });

    s.check("measures.mixture_envelopes", [&] {
        CounterRng rng(derive_seed({s.seed, 0x0F}));
        const double M = 2.0;
        const std::vector<double> support = mixing_grid(M, 41);
        for (int k = 0; k < 20; ++k) {
            const MixingDistribution F = random_mixing(rng, support, M);
            const DensityHandle pf = mixture_density(F);
            for (int i = 0; i <= 1000; ++i) {
                const double x = -8.0 + 16.0 * i / 1000.0;
                const double v = pf.at(x);
                if (v > mixture_upper_envelope(M, x) * (1.0 + 1e-12) ||
                    v < mixture_lower_envelope(M, x) * (1.0 - 1e-12))
                    return fail("envelope violated at x=" + fmt_g17(x));
            }
        }
        return ok("L <= p_F <= U on a 1000-point grid for 20 mixtures");
    });
}

// -------------------------------------------------------------------------

void add_divergence_checks(Suite& s) {
    s.check("divergence.closed_forms", [] {
        const auto& g = default_grid();
        const DensityHandle n02 = gaussian(0.0, std::sqrt(2.0));
        const DensityHandle n01 = gaussian(0.0, 1.0);
        const DensityHandle n11 = gaussian(1.0, 1.0);
        const double kl_same = kl_divergence(n01, n01, g);
        if (std::fabs(kl_same) > 1e-12) return fail("KL(p,p) " + fmt_g17(kl_same));
        for (double theta : {0.7, -1.3}) {
            const double kl = kl_divergence(n02, gaussian(theta, 1.0), g);
            const double oracle = theta * theta / 2.0 + 0.5 * (1.0 - std::log(2.0));
            if (std::fabs(kl - oracle) > 1e-10) return fail("KL oracle at theta " + fmt_g17(theta));
        }
        const double kl_diff = kl_divergence(n01, gaussian(2.0, 1.0), g) -
                               kl_divergence(n01, gaussian(1.0, 1.0), g);
        if (std::fabs(kl_diff - 1.5) > 1e-10) return fail("KL gap " + fmt_g17(kl_diff));
        const double h = hellinger(n01, n11, g);
        const double h2_oracle = 1.0 - std::exp(-1.0 / 8.0);
        if (std::fabs(h * h - h2_oracle) > 1e-10) return fail("hellinger " + fmt_g17(h * h));
        const double wh = weighted_hellinger_sq(n01, n11, n02, n02, g, 0.5);
        if (std::fabs(wh - h2_oracle) > 1e-10) return fail("weight-1 reduction " + fmt_g17(wh));
        return ok("KL, Hellinger and weighted forms match the Gaussian oracles");
    });

    s.check("divergence.h2_vs_l1", [&] {
        CounterRng rng(derive_seed({s.seed, 0x10}));
        const std::vector<double> support = mixing_grid(2.0, 21);
        for (int k = 0; k < 50; ++k) {
            const DensityHandle a = mixture_density(random_mixing(rng, support, 2.0));
            const DensityHandle b = mixture_density(random_mixing(rng, support, 2.0));
            const double h2 = hellinger_sq(a, b, mixture_grid());
            const double l1 = l1_distance(a, b, mixture_grid());
            if (h2 > l1 + 1e-12) return fail("h^2 > L1 at pair " + std::to_string(k));
        }
        return ok("h^2 <= L1 on 50 random mixture pairs");
    });

    s.check("transform.panel_curves", [] {
        const auto& g = default_grid();
        const DensityHandle p0 = gaussian(0.0, std::sqrt(2.0));
        const DensityHandle q_l = q_of_p(gaussian(1.5, 1.0), p0, gaussian(0.0, 1.0));
        const DensityHandle q_r = q_of_p(gaussian(1.5, 1.0), p0, gaussian(1.0, 1.0));
        const TransformCurve cl = transform_curve(p0, q_l, 99, g);
        const TransformCurve cr = transform_curve(p0, q_r, 99, g);
        for (std::size_t i = 0; i < cl.alphas.size(); ++i) {
            const double a = cl.alphas[i];
            const double oracle_l = std::exp(2.25 * a * a - 1.125 * a);
            const double oracle_r = std::exp(0.25 * a * a - 0.625 * a);
            if (std::fabs(cl.values[i] - oracle_l) > 1e-6)
                return fail("left curve at alpha " + fmt_g17(a));
            if (std::fabs(cr.values[i] - oracle_r) > 1e-6)
                return fail("right curve at alpha " + fmt_g17(a));
        }
        if (std::fabs(cl.left_limit - 1.0) > 1e-6 ||
            std::fabs(cl.right_limit - std::exp(9.0 / 8.0)) > 1e-6)
            return fail("left-panel limits");
        if (std::fabs(cr.left_limit - 1.0) > 1e-6 ||
            std::fabs(cr.right_limit - std::exp(-3.0 / 8.0)) > 1e-6)
            return fail("right-panel limits");
        if (std::fabs(cl.slope_at_zero + 9.0 / 8.0) > 1e-6 ||
            std::fabs(cr.slope_at_zero + 5.0 / 8.0) > 1e-6)
            return fail("slopes " + fmt_g17(cl.slope_at_zero) + ", " + fmt_g17(cr.slope_at_zero));
        return ok("both panels match the Gaussian oracles to 1e-6");
    });

    s.check("transform.random_pairs", [&] {
        CounterRng rng(derive_seed({s.seed, 0x11}));
        const auto& g = default_grid();
        for (int k = 0; k < 50; ++k) {
            const DensityHandle p0 = random_prob_gaussian(rng);
            const DensityHandle q = random_finite_gaussian(rng);
            const TransformCurve c = transform_curve(p0, q, 33, g); // validates convexity
            if (std::fabs(c.left_limit - 1.0) > 1e-9) return fail("left limit off for full support");
            const double mass_q = integrate([&](double x) { return q.at(x); }, g);
            if (std::fabs(c.right_limit - mass_q) > 1e-9) return fail("right limit vs q mass");
            // slope identity
            const double rho_small = transform_value(p0, q, 1e-4, g);
            const double approx = (rho_small - 1.0) / 1e-4;
            const double tol = std::max(1e-3, 1e-2 * std::fabs(c.slope_at_zero));
            if (std::fabs(approx - c.slope_at_zero) > tol)
                return fail("slope identity: " + fmt_g17(approx) + " vs " +
                            fmt_g17(c.slope_at_zero));
            // single-observation risk under every alpha on the 17-grid
            const double risk = test_risk(lr_test(p0, q), p0, q, g);
            for (int t = 0; t < 17; ++t) {
                const double a = 0.02 + t * (0.96 / 16.0);
                if (risk > transform_value(p0, q, a, g) + 1e-10)
                    return fail("risk bound violated at alpha " + fmt_g17(a));
            }
        }
        return ok("convexity, limits, slope and risk bound on 50 random pairs");
    });

    s.check("transform.location_family_oracle", [] {
        const auto& g = default_grid();
        const DensityHandle p0 = gaussian(0.0, 1.0);
        const DensityHandle pstar = gaussian(1.0, 1.0);
        for (double theta : {1.2, 1.5, 2.0}) {
            const DensityHandle q = q_of_p(gaussian(theta, 1.0), p0, pstar);
            for (int i = 1; i <= 9; ++i) {
                const double a = 0.1 * i;
                const double val = transform_value(p0, q, a, g); // P0 (p_theta/p_star)^a
                const double oracle =
                    std::exp(-0.5 * a * (theta - 1.0) * (theta + 1.0 - a * (theta - 1.0)));
                if (std::fabs(val - oracle) > 1e-8)
                    return fail("theta=" + fmt_g17(theta) + " alpha=" + fmt_g17(a) + ": " +
                                fmt_g17(val) + " vs " + fmt_g17(oracle));
            }
        }
        return ok("27 transform values match the closed form to 1e-8");
    });

    s.check("margin.oracles", [] {
        const auto& g = default_grid();
        const DensityHandle p02 = gaussian(0.0, std::sqrt(2.0));
        const double m_left = misspec_margin(p02, gaussian(1.5, 1.0), gaussian(0.0, 1.0), g);
        if (std::fabs(m_left - 9.0 / 64.0) > 1e-6) return fail("left margin " + fmt_g17(m_left));
        const double m_right = misspec_margin(p02, gaussian(1.5, 1.0), gaussian(1.0, 1.0), g);
        if (std::fabs(m_right - 3.0 / 8.0) > 3e-6) return fail("right margin " + fmt_g17(m_right));
        const DensityHandle p01 = gaussian(0.0, 1.0);
        const double m_b = misspec_margin(p01, gaussian(2.0, 1.0), gaussian(1.0, 1.0), g);
        if (std::fabs(m_b - 1.0) > 3e-6) return fail("boundary margin " + fmt_g17(m_b));
        const double m_zero = misspec_margin(p01, gaussian(1.0, 1.0), gaussian(1.0, 1.0), g);
        if (std::fabs(m_zero) > 1e-9) return fail("margin at pstar " + fmt_g17(m_zero));
        return ok("margins hit 9/64, 3/8, 1 and 0");
    });

    s.check("kl_neighborhood.cases", [] {
        const auto& g = default_grid();
        const DensityHandle p0 = gaussian(0.0, 1.0);
        const DensityHandle pstar = gaussian(1.0, 1.0);
        const KLNeighborhoodSpec spec(0.2, pstar, p0, g);
        if (in_kl_neighborhood(spec, gaussian(1.1, 1.0), g)) return fail("1.1 should be outside");
        if (!in_kl_neighborhood(spec, gaussian(1.01, 1.0), g)) return fail("1.01 should be inside");
        if (!in_kl_neighborhood(spec, pstar, g)) return fail("pstar itself should be inside");
        const KlMoments m = kl_neighborhood_moments(p0, pstar, gaussian(1.1, 1.0), g);
        if (std::fabs(m.mean_log - 0.105) > 1e-9) return fail("moment " + fmt_g17(m.mean_log));
        return ok("neighborhood membership matches the closed forms");
    });

    s.check("kl.lower_semicontinuity", [] {
        const DensityHandle p0 = gaussian(0.0, 1.3);
        const MixingDistribution F{{-0.7, 0.9}, {0.5, 0.5}, 2.0};
        const double target = kl_divergence(p0, mixture_density(F), mixture_grid());
        // Weakly convergent sequence: each atom splits in two with a
        // geometrically shrinking offset.
        std::vector<double> vals;
        for (int k = 0; k <= 5; ++k) {
            const double delta = 0.04 * std::pow(8.0, -k);
            const MixingDistribution Fk{{-0.7, -0.7 + delta, 0.9, 0.9 - delta},
                                        {0.25, 0.25, 0.25, 0.25},
                                        2.0};
            vals.push_back(kl_divergence(p0, mixture_density(Fk), mixture_grid()));
        }
        const double liminf = std::min(vals[vals.size() - 1], vals[vals.size() - 2]);
        if (liminf < target - 1e-6)
            return fail("liminf " + fmt_g17(liminf) + " < limit " + fmt_g17(target));
        return ok("split-atom KL sequence stays above the limit minus 1e-6");
    });
}

// -------------------------------------------------------------------------

void add_harness_checks(Suite& s) {
    s.check("harness.expansion_families", [&] {
        const auto& g = default_grid();
        const std::uint64_t fresh = derive_seed({s.seed, 0xF4E54});
        struct Case {
            EnvelopeForm form;
            double constant;
            const char* label;
        };
        const Case cases[] = {
            {EnvelopeForm::sqrt_log, kExpansionConstSqrtLog, "sqrt_log"},
            {EnvelopeForm::log_tilted, kExpansionConstLogTilted, "log_tilted"},
            {EnvelopeForm::mixture_sqrt_log, kMixtureConstSqrtLog, "mixture_sqrt_log"},
            {EnvelopeForm::mixture_log_tilted, kMixtureConstLogTilted, "mixture_log_tilted"},
        };
        std::string detail;
        for (const Case& c : cases) {
            const CalibrationReport rep = calibrate_expansion_constant(c.form, fresh, 500, g);
            if (rep.max_ratio > c.constant)
                return fail(std::string(c.label) + ": fresh ratio " + fmt_g17(rep.max_ratio) +
                            " exceeds the frozen constant " + fmt_g17(c.constant));
            detail += std::string(c.label) + "=" + fmt_g17(rep.max_ratio) + " ";
        }
        return ok("fresh 500-tuple maxima under the frozen constants: " + detail);
    });

    s.check("harness.log_moment_family", [&] {
        const auto& g = default_grid();
        const CalibrationReport rep =
            calibrate_log_moment_constant(derive_seed({s.seed, 0xF4E55}), 500, g);
        if (rep.max_ratio > kLogMomentConst)
            return fail("fresh ratio " + fmt_g17(rep.max_ratio) + " exceeds " +
                        fmt_g17(kLogMomentConst));
        return ok("fresh max ratio " + fmt_g17(rep.max_ratio));
    });

    s.check("harness.expansion_examples", [] {
        const auto& g = default_grid();
        const DensityHandle p0 = gaussian(0.0, 1.2);
        const auto r = expansion_residual(p0, gaussian(0.0, 1.0), gaussian(0.5, 1.0), 0.1, g);
        if (!(r.lhs <= 10.0 * r.envelope))
            return fail("ratio " + fmt_g17(r.lhs / r.envelope) + " above 10");
        const auto z = expansion_residual(p0, gaussian(0.3, 1.0), gaussian(0.3, 1.0), 0.4, g);
        if (z.lhs > 1e-10 || z.envelope > 1e-10) return fail("q=p should vanish");
        return ok("single-pair residual bounded, identity case vanishes");
    });
}

// -------------------------------------------------------------------------

void add_testing_checks(Suite& s) {
    s.check("tests.lr_risk", [] {
        const auto& g = default_grid();
        const DensityHandle p = gaussian(0.0, 1.0);
        const DensityHandle q = gaussian(1.0, 1.0);
        const double risk = test_risk(lr_test(p, q), p, q, g);
        const double oracle = 2.0 * norm_ccdf(0.5);
        if (std::fabs(risk - oracle) > 1e-10) return fail("risk " + fmt_g17(risk));
        if (risk > std::exp(-1.0 / 8.0)) return fail("risk above rho_{1/2}");
        const double risk_same = test_risk(lr_test(p, p), p, p, g);
        if (std::fabs(risk_same - 1.0) > 1e-10) return fail("identical pair risk " + fmt_g17(risk_same));
        return ok("risk = 2(1 - Phi(1/2)) <= exp(-1/8)");
    });

    s.check("tests.power_decay", [&] {
        const auto& g = default_grid();
        const Sampler p0 = normal_sampler(0.0, 1.0);
        const DensityHandle q = gaussian(1.0, 1.0);
        double prev = 2.0;
        for (int n : {5, 10, 20, 40}) {
            const PowerBound pb =
                iid_power_bound(p0, q, n, 80000, derive_seed({s.seed, 0x20, (std::uint64_t)n}), g);
            const double risk = pb.type1_hat + pb.type2_hat;
            const double slack = 3.0 * (pb.type1_se + pb.type2_se);
            if (risk > pb.bound + slack)
                return fail("n=" + std::to_string(n) + ": risk " + fmt_g17(risk) + " > bound " +
                            fmt_g17(pb.bound));
            if (risk > prev + slack) return fail("risk not decaying at n=" + std::to_string(n));
            prev = risk;
        }
        return ok("risk decays and sits under (min rho)^n at every n");
    });

    s.check("tests.nonprobability_power", [&] {
        const auto& g = default_grid();
        const Sampler p0 = normal_sampler(0.0, std::sqrt(2.0));
        const DensityHandle q = q_of_p(gaussian(1.5, 1.0), p0.target, gaussian(0.0, 1.0));
        const PowerBound pb = iid_power_bound(p0, q, 10, 40000, derive_seed({s.seed, 0x21}), g);
        const double risk = pb.type1_hat + pb.type2_hat;
        if (std::fabs(pb.bound - std::exp(-10.0 * 9.0 / 64.0)) > 1e-5)
            return fail("bound " + fmt_g17(pb.bound));
        if (risk > pb.bound + 3.0 * (pb.type1_se + pb.type2_se))
            return fail("risk " + fmt_g17(risk) + " > bound " + fmt_g17(pb.bound));
        return ok("risk " + fmt_g17(risk) + " <= exp(-10 * 9/64) = " + fmt_g17(pb.bound));
    });

    s.check("tests.factorization", [&] {
        const auto g = QuadratureGrid::gauss_legendre(-14.0, 14.0);
        const DensityHandle p = gaussian(0.0, 1.0);
        const DensityHandle q = gaussian(1.0, 1.0);
        {
            const auto f = factorization_check(p, q, p, q, 0.5, g, g);
            if (std::fabs(f.lhs - f.rhs) > 1e-8 || std::fabs(f.lhs - std::exp(-0.25)) > 1e-8)
                return fail("gaussian equality " + fmt_g17(f.lhs) + " vs " + fmt_g17(f.rhs));
        }
        {
            const auto f = factorization_check(p, p, p, p, 0.3, g, g);
            if (std::fabs(f.lhs - 1.0) > 1e-10 || std::fabs(f.rhs - 1.0) > 1e-10)
                return fail("identity case");
        }
        // hull case: second factor scanned over the mixing weight
        double max_lhs = 0.0, max_rhs = 0.0;
        for (int t = 0; t <= 20; ++t) {
            const double w = t / 20.0;
            const DensityHandle qb =
                convex_mix({gaussian(1.0, 1.0), gaussian(-1.0, 1.0)}, {w, 1.0 - w});
            const auto f = factorization_check(p, q, p, qb, 0.5, g, g);
            max_lhs = std::max(max_lhs, f.lhs);
            max_rhs = std::max(max_rhs, f.rhs);
        }
        if (max_lhs > max_rhs * (1.0 + 1e-8))
            return fail("hull: " + fmt_g17(max_lhs) + " > " + fmt_g17(max_rhs));
        return ok("equality for singletons, inequality over the scanned hull");
    });

    s.check("tests.verify_cell", [&] {
        const auto& g = default_grid();
        const ParametricFamily fam = normal_location_family(1.0, 2.0);
        const DensityHandle p0 = gaussian(0.0, 1.0);
        const DensityHandle pstar = gaussian(1.0, 1.0);
        // margin at theta is theta - 1; eps chosen so eps^2/4 <= 0.5
        const double eps = 1.2;
        if (!verify_cell(1.5, 1.6, p0, pstar, fam, eps, 1, 20, derive_seed({s.seed, 0x22}), g))
            return fail("cell [1.5, 1.6] should certify");
        if (verify_cell(1.0, 1.6, p0, pstar, fam, eps, 1, 20, derive_seed({s.seed, 0x23}), g))
            return fail("cell [1.0, 1.6] contains near-projection points");
        if (verify_cell(1.0, 1.0, p0, pstar, fam, 0.1, 1, 2, derive_seed({s.seed, 0x24}), g))
            return fail("singleton at theta* has margin 0");
        return ok("certification matches the closed-form margins");
    });

    s.check("tests.shell_bounds", [&] {
        const auto& g = default_grid();
        const ParametricFamily fam = normal_location_family(1.0, 2.0);
        const DensityHandle p0 = gaussian(0.0, 1.0);
        const DensityHandle pstar = gaussian(1.0, 1.0);
        auto dstar = [](double th) { return std::sqrt(th - 1.0); };
        const double eps = 0.3;
        const ShellCover cover = build_shell_cover(fam, p0, pstar, 1.0, dstar, eps, 3, 0.125, 8,
                                                   derive_seed({s.seed, 0x25}), g);
        const int n = 800, J = 2;
        const ShellTest st = shell_test(cover, fam, p0, pstar, n, J);
        std::vector<double> probes;
        for (double th = 1.0 + J * eps * J * eps + 0.02; th <= 2.0; th += 0.12) probes.push_back(th);
        const ShellEmpirical emp = shell_test_empirical(
            st, cover, fam, normal_sampler(0.0, 1.0), pstar, probes, n, 4000,
            derive_seed({s.seed, 0x26}));
        if (emp.type1_hat > st.type1_bound + 3.0 * emp.type1_se)
            return fail("type I " + fmt_g17(emp.type1_hat) + " > " + fmt_g17(st.type1_bound));
        if (emp.worst_type2_hat > st.type2_bound + 3.0 * emp.type2_se)
            return fail("type II " + fmt_g17(emp.worst_type2_hat) + " > " +
                        fmt_g17(st.type2_bound));
        std::ostringstream os;
        os << "cells=" << st.cells_per_shell.size() << " shells, type1 " << fmt_g17(emp.type1_hat)
           << " <= " << fmt_g17(st.type1_bound) << ", worst type2 " << fmt_g17(emp.worst_type2_hat)
           << " <= " << fmt_g17(st.type2_bound);
        return ok(os.str());
    });
}

// -------------------------------------------------------------------------

void add_geometry_checks(Suite& s) {
    s.check("geometry.mixture_certificate", [&] {
        ScenarioSpec spec = default_scenario(ScenarioModel::mixture);
        const MixingDistribution& fstar = mixture_scenario_projection(spec);
        const DensityHandle p0 = gaussian(0.0, 1.5);
        const double gap = mixture_dual_gap(p0, fstar, mixture_grid());
        if (gap > 1e-6) return fail("dual gap " + fmt_g17(gap));

        // A minimal-margin point is a KL minimizer over probed members.
        const DensityHandle pstar = mixture_density(fstar);
        const double kl_star = kl_divergence(p0, pstar, mixture_grid());
        CounterRng rng(derive_seed({s.seed, 0x30}));
        for (int k = 0; k < 20; ++k) {
            const MixingDistribution F = random_mixing(rng, fstar.support, fstar.half_width);
            const double kl_f = kl_divergence(p0, mixture_density(F), mixture_grid());
            if (kl_star > kl_f + 1e-6)
                return fail("kl(p0, pstar) " + fmt_g17(kl_star) + " above kl(p0, pF) " +
                            fmt_g17(kl_f));
        }
        return ok("dual gap " + fmt_g17(gap) + "; projection KL is minimal over probes");
    });

    s.check("geometry.margin_dominates_distance", [&] {
        ScenarioSpec spec = default_scenario(ScenarioModel::mixture);
        const MixingDistribution& fstar = mixture_scenario_projection(spec);
        const DensityHandle p0 = gaussian(0.0, 1.5);
        const DensityHandle pstar = mixture_density(fstar);
        CounterRng rng(derive_seed({s.seed, 0x31}));
        for (int k = 0; k < 100; ++k) {
            const MixingDistribution F = random_mixing(rng, fstar.support, fstar.half_width);
            const DensityHandle pf = mixture_density(F);
            const double ratio_mass =
                integrate([&](double x) { return pf.at(x) * p0.at(x) / pstar.at(x); }, mixture_grid());
            if (ratio_mass > 1.0 + 1e-6) return fail("P0(p/pstar) = " + fmt_g17(ratio_mass));
            const double d2 = weighted_hellinger_sq(pf, pstar, p0, pstar, mixture_grid(), 0.25);
            const double margin = misspec_margin(p0, pf, pstar, mixture_grid());
            if (d2 > margin + 1e-9)
                return fail("pair " + std::to_string(k) + ": d^2 " + fmt_g17(d2) + " > margin " +
                            fmt_g17(margin));
        }
        return ok("P0(p/pstar) <= 1 and d^2 <= margin on 100 random mixtures");
    });

    s.check("geometry.combination_inequality", [&] {
        ScenarioSpec spec = default_scenario(ScenarioModel::mixture);
        spec.support_points = 21; // keep the probe loop quick
        const std::vector<double> support = mixing_grid(spec.half_width, spec.support_points);
        const DensityHandle p0 = gaussian(0.0, 1.5);
        const MixingDistribution fstar =
            project_mixture(p0, support, 1e-7, 2000000, mixture_grid());
        const DensityHandle pstar = mixture_density(fstar);
        CounterRng rng(derive_seed({s.seed, 0x32}));
        auto dist_sq = [&](const DensityHandle& a, const DensityHandle& b) {
            return weighted_hellinger_sq(a, b, p0, pstar, mixture_grid(), 1.0 / 16.0);
        };
        for (int k = 0; k < 100; ++k) {
            const MixingDistribution F = random_mixing(rng, support, spec.half_width);
            const DensityHandle pF = mixture_density(F);
            const double d_center = std::sqrt(dist_sq(pF, pstar));
            const int m = 2 + static_cast<int>(rng.uniform() * 2.0);
            std::vector<DensityHandle> parts;
            std::vector<double> lambdas(m);
            double lsum = 0.0;
            std::vector<double> d2_to_star(m), d2_to_f(m);
            for (int i = 0; i < m; ++i) {
                // Blend toward F so that d(F, F_i) <= d(F, F*).
                MixingDistribution Fi = random_mixing(rng, support, spec.half_width);
                DensityHandle pi = mixture_density(Fi);
                double t = 1.0;
                while (std::sqrt(dist_sq(pF, pi)) > d_center && t > 1e-3) {
                    t *= 0.5;
                    MixingDistribution blend = Fi;
                    for (std::size_t j = 0; j < blend.weights.size(); ++j)
                        blend.weights[j] = (1.0 - t) * F.weights[j] + t * Fi.weights[j];
                    pi = mixture_density(blend);
                }
                parts.push_back(pi);
                lambdas[i] = rng.uniform(0.05, 1.0);
                lsum += lambdas[i];
                d2_to_star[i] = dist_sq(pi, pstar);
                d2_to_f[i] = dist_sq(pi, pF);
            }
            for (double& l : lambdas) l /= lsum;
            double lhs = 0.0;
            for (int i = 0; i < m; ++i) lhs += lambdas[i] * (d2_to_star[i] - 6.0 * d2_to_f[i]);
            const double margin = misspec_margin(p0, convex_mix(parts, lambdas), pstar, mixture_grid());
            if (lhs > margin + 1e-9)
                return fail("tuple " + std::to_string(k) + ": lhs " + fmt_g17(lhs) + " > margin " +
                            fmt_g17(margin));
        }
        return ok("combination bound with C = 6 holds on 100 tuples");
    });
}

// -------------------------------------------------------------------------

void add_projection_checks(Suite& s) {
    s.check("projection.parametric", [] {
        const auto& g = default_grid();
        {
            const auto pr = project_parametric(normal_location_family(-3.0, 3.0), gaussian(0.7, 1.0),
                                               1e-7, g);
            if (std::fabs(pr.theta_star - 0.7) > 1e-6) return fail("well-specified theta");
        }
        {
            const auto pr = project_parametric(normal_location_family(1.0, 2.0), gaussian(0.0, 1.0),
                                               1e-7, g);
            if (std::fabs(pr.theta_star - 1.0) > 1e-6) return fail("boundary minimum");
            if (std::fabs(pr.kl_min - 0.5) > 1e-9) return fail("boundary KL " + fmt_g17(pr.kl_min));
        }
        {
            const auto pr = project_parametric(normal_location_family(-3.0, 3.0),
                                               gaussian(0.0, std::sqrt(2.0)), 1e-7, g);
            if (std::fabs(pr.theta_star) > 1e-6) return fail("misspecified interior theta");
        }
        return ok("interior, boundary and well-specified minima found");
    });

    s.check("projection.regression", [&] {
        RegressionSpec rs;
        rs.basis = RegressionBasis{3, -1.5, 1.5};
        rs.f0 = [](double x) { return x < 1.0 / 3 ? -0.4 : (x < 2.0 / 3 ? -0.1 : 0.2); };
        rs.f0_bound = 1.0;
        {
            rs.error = ErrorSpec{ErrorSpec::Kind::gaussian, 0.0, 1.0};
            const auto c = project_regression(rs, 200000, derive_seed({s.seed, 0x40}));
            for (int b = 0; b < 3; ++b)
                if (std::fabs(c[b] - (-0.4 + 0.3 * b)) > 1e-6) return fail("mu=0 projection");
        }
        {
            rs.error = ErrorSpec{ErrorSpec::Kind::gaussian, 0.5, 1.0};
            const auto c = project_regression(rs, 200000, derive_seed({s.seed, 0x41}));
            for (int b = 0; b < 3; ++b)
                if (std::fabs(c[b] - (0.1 + 0.3 * b)) > 1e-6) return fail("f0+mu projection");
            const auto py = pythagoras_check(c, rs, 200000, derive_seed({s.seed, 0x42}));
            if (py.max_abs_inner > 3.0 * py.stderr_ + 1e-9)
                return fail("interior pythagoras " + fmt_g17(py.max_abs_inner));
        }
        {
            rs.likelihood = RegressionSpec::Likelihood::laplace;
            rs.error = ErrorSpec{ErrorSpec::Kind::gaussian, 0.0, 1.0};
            const auto c = project_regression(rs, 100000, derive_seed({s.seed, 0x43}));
            for (int b = 0; b < 3; ++b)
                if (std::fabs(c[b] - (-0.4 + 0.3 * b)) > 2e-3)
                    return fail("laplace median-zero projection off by " +
                                fmt_g17(c[b] - (-0.4 + 0.3 * b)));
        }
        {
            // Projection target outside the box lands on the boundary and
            // breaks the orthogonality identity.
            RegressionSpec rb;
            rb.basis = RegressionBasis{1, -1.0, 1.0};
            rb.f0 = [](double) { return 1.0; };
            rb.f0_bound = 1.5;
            rb.error = ErrorSpec{ErrorSpec::Kind::gaussian, 0.5, 1.0};
            const auto c = project_regression(rb, 100000, derive_seed({s.seed, 0x44}));
            if (std::fabs(c[0] - 1.0) > 1e-9) return fail("boundary projection");
            const auto py = pythagoras_check(c, rb, 100000, derive_seed({s.seed, 0x45}));
            if (py.max_abs_inner < 10.0 * py.stderr_)
                return fail("boundary case should break orthogonality");
        }
        return ok("normal, shifted, laplace and boundary projections behave");
    });

    s.check("projection.abs_deviation_gap", [] {
        const ErrorSpec e{ErrorSpec::Kind::gaussian, 0.0, 1.0};
        const double v = abs_deviation_gap(1.0, e);
        const double oracle = (2.0 * norm_cdf(1.0) - 1.0) + 2.0 * norm_pdf(1.0) - std::sqrt(2.0 / M_PI);
        if (std::fabs(v - oracle) > 1e-12) return fail("gap(1) " + fmt_g17(v));
        if (std::fabs(abs_deviation_gap(0.0, e)) > 1e-15) return fail("gap(0) nonzero");
        // quadratic lower bound with constant 0.3 on |nu| <= 1
        for (int i = 1; i <= 100; ++i) {
            const double nu = i / 100.0;
            if (abs_deviation_gap(nu, e) < 0.3 * nu * nu) return fail("quadratic bound at " + fmt_g17(nu));
            if (abs_deviation_gap(-nu, e) < 0.3 * nu * nu) return fail("quadratic bound at " + fmt_g17(-nu));
        }
        // quadrature path for the laplace spec agrees with its closed form
        const ErrorSpec le{ErrorSpec::Kind::laplace, 0.2, 0.8};
        for (double nu : {-0.7, 0.4, 1.3}) {
            const double got = abs_deviation_gap(nu, le);
            const double d = std::fabs(nu - 0.2);
            const double closed = 0.8 * std::exp(-d / 0.8) + d -
                                  (0.8 * std::exp(-0.2 / 0.8) + 0.2);
            if (std::fabs(got - closed) > 1e-10)
                return fail("laplace gap at " + fmt_g17(nu) + ": " + fmt_g17(got) + " vs " +
                            fmt_g17(closed));
        }
        return ok("gap oracle, quadratic bound and quadrature path agree");
    });

    s.check("projection.regression_identities", [&] {
        // Normal-likelihood identity against Monte Carlo over (X, Y).
        RegressionSpec rs;
        rs.basis = RegressionBasis{3, -1.5, 1.5};
        const std::vector<double> c0 = {-0.4, -0.1, 0.2};
        rs.f0 = [c0, basis = rs.basis](double x) { return c0[basis.bin_of(x)]; };
        rs.f0_bound = 1.0;
        rs.error = ErrorSpec{ErrorSpec::Kind::laplace, 0.3, 0.8};
        CounterRng rng(derive_seed({s.seed, 0x46}));
        for (int k = 0; k < 3; ++k) {
            std::vector<double> cf(3);
            for (double& v : cf) v = rng.uniform(-1.0, 1.0);
            const double mu = rs.error.mean();
            double closed = 0.0;
            for (int b = 0; b < 3; ++b) {
                const double gap = cf[b] - c0[b] - mu;
                closed += gap * gap / 3.0;
            }
            closed = 0.5 * closed - 0.5 * mu * mu;

            const std::size_t n = 400000;
            const auto xs = rs.covariate.draw(derive_seed({s.seed, 0x47, (std::uint64_t)k}), n);
            const auto es = rs.error.sampler().draw(derive_seed({s.seed, 0x48, (std::uint64_t)k}), n);
            double mean = 0.0, m2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double fx = rs.basis.eval(cf, xs[i].x);
                const double f0x = rs.f0(xs[i].x);
                const double y = f0x + es[i].x;
                // -log (p_f / p_f0) under the unit normal model
                const double v = 0.5 * (y - fx) * (y - fx) - 0.5 * (y - f0x) * (y - f0x);
                const double d = v - mean;
                mean += d / (i + 1);
                m2 += d * (v - mean);
            }
            const double se = std::sqrt(m2 / (n - 1.0) / n);
            if (std::fabs(mean - closed) > 4.0 * se)
                return fail("normal identity: " + fmt_g17(mean) + " vs " + fmt_g17(closed));
        }
        // Laplace-likelihood identity: -P0 log(p_f/p_f0) = P0 Gap(f - f0).
        rs.error = ErrorSpec{ErrorSpec::Kind::gaussian, 0.25, 1.0};
        for (int k = 0; k < 3; ++k) {
            std::vector<double> cf(3);
            for (double& v : cf) v = rng.uniform(-1.0, 1.0);
            double closed = 0.0;
            for (int b = 0; b < 3; ++b) closed += abs_deviation_gap(cf[b] - c0[b], rs.error) / 3.0;
            const std::size_t n = 400000;
            const auto xs = rs.covariate.draw(derive_seed({s.seed, 0x49, (std::uint64_t)k}), n);
            const auto es = rs.error.sampler().draw(derive_seed({s.seed, 0x4A, (std::uint64_t)k}), n);
            double mean = 0.0, m2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double fx = rs.basis.eval(cf, xs[i].x);
                const double f0x = rs.f0(xs[i].x);
                const double e0 = es[i].x;
                const double v = std::fabs(e0 + f0x - fx) - std::fabs(e0);
                const double d = v - mean;
                mean += d / (i + 1);
                m2 += d * (v - mean);
            }
            const double se = std::sqrt(m2 / (n - 1.0) / n);
            if (std::fabs(mean - closed) > 4.0 * se)
                return fail("laplace identity: " + fmt_g17(mean) + " vs " + fmt_g17(closed));
        }
        return ok("normal and laplace divergence identities match Monte Carlo");
    });
}

// -------------------------------------------------------------------------

void add_posterior_checks(Suite& s) {
    s.check("posterior.grid_basics", [] {
        {
            const std::vector<double> prior = {0.3, 0.7};
            const std::vector<double> loglik = {0.0, 0.0};
            const auto w = grid_posterior(prior, loglik);
            if (std::fabs(w[0] - 0.3) > 1e-15 || std::fabs(w[0] + w[1] - 1.0) > 1e-12)
                return fail("n=0 must return the prior");
        }
        {
            // two-point grid, symmetric observation
            const std::vector<double> prior = {0.5, 0.5};
            const double x = 0.5;
            const std::vector<double> loglik = {norm_log_pdf(x - 0.0), norm_log_pdf(x - 1.0)};
            const auto w = grid_posterior(prior, loglik);
            if (std::fabs(w[0] - 0.5) > 1e-12) return fail("symmetric likelihood");
        }
        {
            const std::vector<double> prior = {0.5, 0.5};
            std::vector<double> loglik = {0.0, 0.0};
            for (int i = 0; i < 3; ++i) {
                loglik[0] += norm_log_pdf(0.0);
                loglik[1] += norm_log_pdf(-1.0);
            }
            const auto w = grid_posterior(prior, loglik);
            if (std::fabs(w[0] / w[1] - std::exp(1.5)) > 1e-9)
                return fail("weight ratio " + fmt_g17(w[0] / w[1]));
        }
        return ok("prior recovery, symmetry and likelihood ratios exact");
    });

    s.check("posterior.boundary_mass", [&] {
        if (std::fabs(boundary_posterior_mass(100.0, 0.0, 1.0) - 1.0) > 1e-12)
            return fail("c=1 should give the full interval");
        const double v = boundary_posterior_mass(100.0, 0.0, 1.05);
        const double oracle =
            (norm_ccdf(10.5) - norm_ccdf(20.0)) / (norm_ccdf(10.0) - norm_ccdf(20.0));
        if (std::fabs(v - oracle) > 1e-9 * oracle) return fail("Mills case " + fmt_g17(v));
        if (std::fabs(v - 0.00566) > 2e-5) return fail("Mills magnitude " + fmt_g17(v));

        // agreement with a 1e4-point grid posterior over 50 random triples
        CounterRng rng(derive_seed({s.seed, 0x50}));
        const int G = 10000;
        for (int k = 0; k < 50; ++k) {
            // cutoffs on cell boundaries, n inside the grid's resolving range
            const double n = 1.0 + std::floor(rng.uniform(0.0, 400.0));
            const double zn = rng.uniform(-2.0, 2.0);
            const double span = std::min(1.0, 30.0 / n);
            const double c = 1.0 + std::floor(rng.uniform(0.0, span) * G) / G;
            const double direct = boundary_posterior_mass(n, zn, c);
            std::vector<double> prior(G, 1.0 / G), loglik(G);
            std::vector<double> thetas(G);
            for (int j = 0; j < G; ++j) {
                thetas[j] = 1.0 + (j + 0.5) / G;
                loglik[j] = thetas[j] * std::sqrt(n) * zn - 0.5 * n * thetas[j] * thetas[j];
            }
            const auto w = grid_posterior(prior, loglik);
            double mass = 0.0;
            for (int j = 0; j < G; ++j)
                if (thetas[j] >= c) mass += w[j];
            if (std::fabs(direct - mass) > 1e-4)
                return fail("triple " + std::to_string(k) + ": " + fmt_g17(direct) + " vs grid " +
                            fmt_g17(mass));
        }
        // bounded-away-from-zero behavior at c = 1 + C/n
        const double cc = 5.0;
        double lo = 1.0, hi = 0.0;
        for (double n : {100.0, 400.0, 1600.0}) {
            const double m = boundary_posterior_mass(n, 0.0, 1.0 + cc / n);
            lo = std::min(lo, m);
            hi = std::max(hi, m);
        }
        if (hi > 3.0 * lo) return fail("mass varies by " + fmt_g17(hi / lo) + " > 3");
        return ok("closed form, grid agreement and fixed-C stability");
    });

    s.check("posterior.mixture_prior_recovery", [&] {
        const std::vector<double> support = mixing_grid(2.0, 9);
        const std::vector<double> alpha(9, 0.4);
        McmcConfig cfg{60000, 10000, 10, 1.3};
        const MixturePosterior post =
            mixture_posterior({}, support, alpha, cfg, derive_seed({s.seed, 0x51}));
        if (post.acceptance < 0.1 || post.acceptance > 0.6)
            return fail("acceptance " + fmt_g17(post.acceptance));
        // batch-means stderr against the Dirichlet mean
        const std::size_t D = post.n_draws();
        const int n_batches = 20;
        for (int j = 0; j < 9; ++j) {
            std::vector<double> batch(n_batches, 0.0);
            for (std::size_t d = 0; d < D; ++d)
                batch[d * n_batches / D] += post.weight_draws[d][j] / (D / n_batches);
            double bm = 0.0;
            for (double b : batch) bm += b / n_batches;
            double bv = 0.0;
            for (double b : batch) bv += (b - bm) * (b - bm) / (n_batches - 1);
            const double se = std::sqrt(bv / n_batches);
            if (std::fabs(bm - 1.0 / 9.0) > 3.0 * se + 5e-3)
                return fail("coordinate " + std::to_string(j) + ": " + fmt_g17(bm) + " vs 1/9");
        }
        return ok("n = 0 chain recovers the Dirichlet mean (batch means)");
    });

    s.check("posterior.regression_prior_recovery", [] {
        RegressionSpec rs;
        rs.basis = RegressionBasis{2, -1.0, 1.0};
        rs.f0 = [](double) { return 0.0; };
        const RegressionPosterior post(rs, {}, 31);
        for (double w : post.weights())
            if (std::fabs(w - 1.0 / (31.0 * 31.0)) > 1e-15) return fail("n=0 posterior not uniform");
        double total = 0.0;
        for (double w : post.weights()) total += w;
        if (std::fabs(total - 1.0) > 1e-12) return fail("normalization " + fmt_g17(total));
        return ok("tensor posterior uniform at n = 0 and normalized");
    });

    s.check("posterior.evidence_bound", [&] {
        // Misspecified location scenario: truth N(0,2), model N(theta,1).
        const ParametricScenarioOracle oracle{0.0, 2.0};
        EvidenceCheckInput in;
        in.truth = normal_sampler(0.0, std::sqrt(2.0));
        in.prior_draw = [](CounterRng& rng) { return rng.uniform(-3.0, 3.0); };
        in.log_ratio_sum = [](double theta, std::span<const Point> xs) {
            double S = 0.0;
            for (const Point& p : xs) S += p.x;
            return theta * S - 0.5 * xs.size() * theta * theta;
        };
        in.in_neighborhood = [&](double theta) {
            const KlMoments m = oracle.moments(theta);
            return m.mean_log <= in.eps * in.eps && m.sq_log <= in.eps * in.eps;
        };
        in.n = 200;
        in.reps = 150;
        in.eps = 0.15;
        in.C = 2.0;
        const EvidenceCheckResult r = evidence_bound_check(in, derive_seed({s.seed, 0x52}));
        if (r.violation_freq > r.bound + 3.0 * r.stderr_)
            return fail("violations " + fmt_g17(r.violation_freq) + " > bound " + fmt_g17(r.bound));
        return ok("violation freq " + fmt_g17(r.violation_freq) + " <= " + fmt_g17(r.bound) +
                  " (prior mass " + fmt_g17(r.prior_mass) + ")");
    });

    s.check("posterior.rate_fit_synthetic", [] {
        std::vector<PosteriorSummary> sums;
        for (int n : {100, 200, 400, 800}) {
            for (int rep = 0; rep < 8; ++rep)
                sums.push_back(PosteriorSummary{n, 0.0, 2.0 / std::sqrt((double)n), 1.0, 0});
        }
        RateFit fit = rate_fit(sums);
        if (std::fabs(fit.beta + 0.5) > 1e-12 || std::fabs(fit.r2 - 1.0) > 1e-12)
            return fail("beta " + fmt_g17(fit.beta));
        for (auto& sm : sums) sm.quantile_radius = 3.0 / sm.n;
        fit = rate_fit(sums);
        if (std::fabs(fit.beta + 1.0) > 1e-12) return fail("beta " + fmt_g17(fit.beta));
        return ok("synthetic 1/sqrt(n) and 1/n inputs recovered exactly");
    });
}

// -------------------------------------------------------------------------

void add_entropy_checks(Suite& s) {
    s.check("entropy.greedy_vs_bruteforce", [&] {
        {
            // 11 equispaced points on [0,1], radius 0.05
            auto d = [](int i, int j) { return std::fabs(i - j) * 0.1; };
            const CoverReport rep = covering_number(11, d, 0.05);
            const int opt = brute_force_cover(11, d, 0.05);
            if (opt != 6 || rep.n_balls != 6)
                return fail("11-point line: greedy " + std::to_string(rep.n_balls) + ", optimal " +
                            std::to_string(opt));
        }
        CounterRng rng(derive_seed({s.seed, 0x60}));
        for (int k = 0; k < 30; ++k) {
            const int n = 4 + static_cast<int>(rng.uniform() * 9.0);
            std::vector<double> pts(n);
            for (double& p : pts) p = rng.uniform(0.0, 1.0);
            const double eps = rng.uniform(0.02, 0.3);
            auto d = [&](int i, int j) { return std::fabs(pts[i] - pts[j]); };
            const CoverReport rep = covering_number(n, d, eps);
            const int opt = brute_force_cover(n, d, eps);
            if (rep.n_balls > 2 * opt)
                return fail("instance " + std::to_string(k) + ": greedy " +
                            std::to_string(rep.n_balls) + " > 2 x " + std::to_string(opt));
            if (rep.radius_used > 2.0 * eps + 1e-12) return fail("cover radius exceeded");
            // validity: every point within radius_used of its seed
            for (int i = 0; i < n; ++i)
                if (d(i, rep.centers[rep.assignment[i]]) > rep.radius_used + 1e-12)
                    return fail("assignment outside the stated radius");
        }
        {
            // identical points collapse to one ball
            auto d0 = [](int, int) { return 0.0; };
            if (covering_number(7, d0, 0.01).n_balls != 1) return fail("identical points");
        }
        return ok("greedy <= 2x optimal on 31 instances; assignments valid");
    });

    s.check("entropy.annulus_constant", [] {
        // 1-d annulus {eps < |theta| < 2 eps} covered at radius A eps
        const double eps = 0.25, A = 0.125;
        std::vector<double> pts;
        for (int sgn : {-1, 1})
            for (int i = 0; i <= 100; ++i)
                pts.push_back(sgn * (eps + (i + 0.5) * eps / 102.0));
        auto d = [&](int i, int j) { return std::fabs(pts[i] - pts[j]); };
        const CoverReport rep = covering_number(static_cast<int>(pts.size()), d, A * eps);
        if (rep.n_balls > static_cast<int>(8.0 / A))
            return fail("annulus cover used " + std::to_string(rep.n_balls) + " balls");
        return ok(std::to_string(rep.n_balls) + " balls <= 8/A");
    });

    s.check("entropy.local_cover_parametric", [&] {
        const auto& g = default_grid();
        const DensityHandle p0 = gaussian(0.0, 1.0);
        const DensityHandle pstar = gaussian(1.0, 1.0);
        LocalCoverInput in;
        const int G = 161;
        std::vector<double> thetas(G);
        for (int i = 0; i < G; ++i) thetas[i] = 1.0 + i / (G - 1.0);
        for (double th : thetas) in.members.push_back(gaussian(th, 1.0));
        in.d = [thetas](int i, int j) { return std::sqrt(std::fabs(thetas[i] - thetas[j])); };
        in.d_to_star = [thetas](int i) { return std::sqrt(thetas[i] - 1.0); };
        in.p0 = p0;
        in.pstar = pstar;
        const CoverReport rep =
            local_cover_for_testing(in, 0.3, 25, derive_seed({s.seed, 0x61}), g);
        if (!rep.certified || rep.n_balls < 1) return fail("annulus cover not certified");
        const CoverReport empty =
            local_cover_for_testing(in, 5.0, 10, derive_seed({s.seed, 0x62}), g);
        if (!empty.certified || empty.n_balls != 0) return fail("oversized eps should be empty");
        return ok(std::to_string(rep.n_balls) + " certified cells; empty annulus handled");
    });

    s.check("entropy.local_cover_mixture", [&] {
        const std::vector<double> support = mixing_grid(2.0, 9);
        const DensityHandle p0 = gaussian(0.0, 1.5);
        const MixingDistribution fstar = project_mixture(p0, support, 1e-7, 2000000, mixture_grid());
        const DensityHandle pstar = mixture_density(fstar);

        LocalCoverInput in;
        CounterRng rng(derive_seed({s.seed, 0x63}));
        for (int k = 0; k < 120; ++k)
            in.members.push_back(mixture_density(random_mixing(rng, support, 2.0)));
        auto dist = [&, p0, pstar](const DensityHandle& a, const DensityHandle& b) {
            return 0.5 * std::sqrt(weighted_hellinger_sq(a, b, p0, pstar, mixture_grid(), 0.25));
        };
        // Cache pairwise distances lazily through a dense matrix (120 x 120).
        const int n = static_cast<int>(in.members.size());
        std::vector<double> dm(static_cast<std::size_t>(n) * n, -1.0);
        in.d = [&, n](int i, int j) mutable {
            double& slot = dm[static_cast<std::size_t>(i) * n + j];
            if (slot < 0.0) slot = dist(in.members[i], in.members[j]);
            return slot;
        };
        std::vector<double> dstar(n);
        for (int i = 0; i < n; ++i) dstar[i] = dist(in.members[i], pstar);
        in.d_to_star = [dstar](int i) { return dstar[i]; };
        in.p0 = p0;
        in.pstar = pstar;
        std::vector<double> sorted = dstar;
        std::sort(sorted.begin(), sorted.end());
        const double eps = sorted[n / 2]; // median distance keeps the annulus busy
        const CoverReport rep =
            local_cover_for_testing(in, eps, 20, derive_seed({s.seed, 0x64}), mixture_grid());
        if (!rep.certified) return fail("mixture annulus cover not certified");
        return ok(std::to_string(rep.n_balls) + " certified cells at eps = " + fmt_g17(eps));
    });

    s.check("entropy.mixture_growth", [&] {
        const EntropyCurve curve =
            mixture_entropy_curve(2.0, {0.2, 0.1, 0.05, 0.02}, 3000, 41, derive_seed({s.seed, 0x65}));
        for (std::size_t i = 1; i < curve.log_cover.size(); ++i)
            if (curve.log_cover[i] + 1e-12 < curve.log_cover[i - 1])
                return fail("log cover not monotone in eps");
        if (curve.points_in_fit < 2) return fail("not enough informative points in the fit");
        if (curve.gamma_fit < 1.3 || curve.gamma_fit > 2.7)
            return fail("gamma " + fmt_g17(curve.gamma_fit));
        std::ostringstream os;
        os << "gamma = " << fmt_g17(curve.gamma_fit) << " from " << curve.points_in_fit << " points";
        return ok(os.str());
    });
}

} // namespace

std::vector<CheckResult> verify_suite(std::uint64_t seed) {
    Suite s{seed, {}};
    add_measure_checks(s);
    add_divergence_checks(s);
    add_harness_checks(s);
    add_testing_checks(s);
    add_projection_checks(s);
    add_geometry_checks(s);
    add_posterior_checks(s);
    add_entropy_checks(s);
    return std::move(s.results);
}

} // namespace misspec
