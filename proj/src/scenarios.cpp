#include "misspec/scenarios.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "misspec/normal.hpp"
#include "misspec/textio.hpp"

namespace misspec {

std::string to_string(ScenarioModel m) {
    switch (m) {
        case ScenarioModel::parametric_interior: return "parametric_interior";
        case ScenarioModel::parametric_boundary: return "parametric_boundary";
        case ScenarioModel::mixture: return "mixture";
        case ScenarioModel::regression_normal: return "regression_normal";
        case ScenarioModel::regression_laplace: return "regression_laplace";
    }
    return "unknown";
}

ScenarioModel scenario_model_from_string(const std::string& s) {
    if (s == "parametric_interior") return ScenarioModel::parametric_interior;
    if (s == "parametric_boundary") return ScenarioModel::parametric_boundary;
    if (s == "mixture") return ScenarioModel::mixture;
    if (s == "regression_normal") return ScenarioModel::regression_normal;
    if (s == "regression_laplace") return ScenarioModel::regression_laplace;
    throw std::invalid_argument("unknown scenario model '" + s +
                                "' (expected parametric_interior, parametric_boundary, mixture, "
                                "regression_normal, regression_laplace)");
}

void ScenarioSpec::validate() const {
    if (n_list.size() < 1) throw std::invalid_argument("ScenarioSpec: empty n_list");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1])
            throw std::invalid_argument("ScenarioSpec: n_list must be strictly increasing");
    if (reps < 8) throw std::invalid_argument("ScenarioSpec: reps must be at least 8");
}

ScenarioSpec default_scenario(ScenarioModel m) {
    ScenarioSpec s;
    s.model = m;
    switch (m) {
        case ScenarioModel::parametric_interior:
            s.n_list = {100, 200, 400, 800, 1600, 3200, 6400};
            s.tail_radius = 0.3;
            break;
        case ScenarioModel::parametric_boundary:
            s.n_list = {100, 200, 400, 800, 1600};
            s.tail_radius = 0.1;
            break;
        case ScenarioModel::mixture:
            s.n_list = {100, 200, 400, 800, 1600};
            s.tail_radius = 0.3;
            s.mcmc = McmcConfig{12000, 4000, 40, 0.7};
            break;
        case ScenarioModel::regression_normal:
        case ScenarioModel::regression_laplace:
            s.n_list = {50, 100, 200, 400, 800};
            s.tail_radius = 0.3;
            break;
    }
    return s;
}

KlMoments ParametricScenarioOracle::moments(double theta) const {
    const double a = theta - theta_star;
    const double b = 0.5 * (theta * theta - theta_star * theta_star);
    // truth N(0, sigma0_sq); log ratio is a*x - b
    return KlMoments{b, a * a * sigma0_sq + b * b};
}

int env_thread_cap() {
    if (const char* env = std::getenv("MISSPEC_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(int n_tasks, const std::function<void(int)>& fn, int max_threads) {
    const int workers = std::max(1, std::min(max_threads, n_tasks));
    if (workers == 1) {
        for (int i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n_tasks) return;
                try {
                    fn(i);
                } catch (...) {
                    std::scoped_lock lk(error_mu);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// -------------------------------------------------------------------------
// Per-model replication bodies
// -------------------------------------------------------------------------

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    return v;
}

std::string fmt_diag(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

ExperimentRecord location_rep(const ScenarioSpec& spec, int n, int rep) {
    const bool boundary = spec.model == ScenarioModel::parametric_boundary;
    const double theta_star = boundary ? 1.0 : 0.0;
    const double truth_sd = boundary ? 1.0 : std::sqrt(2.0);
    const std::vector<double> thetas =
        boundary ? linspace(1.0, 2.0, 8001) : linspace(-3.0, 3.0, 2401);

    const std::uint64_t seed =
        derive_seed({spec.master_seed, hash_string(spec.name()), static_cast<std::uint64_t>(n),
                     static_cast<std::uint64_t>(rep)});
    CounterRng rng(seed);
    double S = 0.0;
    for (int i = 0; i < n; ++i) S += truth_sd * rng.normal();

    // log(p_theta / p_star) summed over the sample depends on S only.
    std::vector<double> log_ratio(thetas.size());
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        const double th = thetas[j];
        log_ratio[j] = (th - theta_star) * S -
                       0.5 * n * (th * th - theta_star * theta_star);
    }
    const std::vector<double> prior(thetas.size(), 1.0 / thetas.size());
    const std::vector<double> w = grid_posterior(prior, log_ratio);

    std::vector<double> dist(thetas.size());
    for (std::size_t j = 0; j < thetas.size(); ++j) dist[j] = std::fabs(thetas[j] - theta_star);

    double log_evidence = -std::numeric_limits<double>::infinity();
    {
        double mx = *std::max_element(log_ratio.begin(), log_ratio.end());
        double acc = 0.0;
        for (double lr : log_ratio) acc += std::exp(lr - mx);
        log_evidence = mx + std::log(acc / thetas.size());
    }

    double mode_theta = thetas[std::max_element(w.begin(), w.end()) - w.begin()];
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < thetas.size(); ++j) mean += w[j] * thetas[j];
    for (std::size_t j = 0; j < thetas.size(); ++j)
        var += w[j] * (thetas[j] - mean) * (thetas[j] - mean);

    ExperimentRecord rec;
    rec.scenario = spec.name();
    rec.n = n;
    rec.rep = rep;
    rec.seed = seed;
    rec.quantile_radius = weighted_quantile_radius(dist, w, 0.9);
    rec.radius_alt = std::sqrt(rec.quantile_radius); // sqrt|theta - theta*| metric
    rec.tail_mass = weighted_tail_mass(dist, w, spec.tail_radius);
    rec.evidence = std::exp(log_evidence);
    rec.diagnostics = "alt=" + fmt_diag(rec.radius_alt) + ";mode=" + fmt_diag(mode_theta) +
                      ";sd=" + fmt_diag(std::sqrt(var));
    return rec;
}

struct MixtureContext {
    std::vector<double> support;
    std::vector<double> alpha;
    // quadrature-node arrays for fast weighted-Hellinger distances
    std::vector<double> node_w, p0_vals, pstar_vals;
    std::vector<double> kernel; // [node][support]
    std::size_t n_nodes = 0, K = 0;

    double distance_to_star(const std::vector<double>& weights) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < n_nodes; ++i) {
            const double* row = &kernel[i * K];
            double pd = 0.0;
            for (std::size_t j = 0; j < K; ++j) pd += weights[j] * row[j];
            const double d = std::sqrt(pd) - std::sqrt(pstar_vals[i]);
            acc += node_w[i] * d * d * p0_vals[i] / pstar_vals[i];
        }
        return std::sqrt(0.25 * acc);
    }
};

MixtureContext make_mixture_context(const ScenarioSpec& spec) {
    MixtureContext ctx;
    ctx.support = mixing_grid(spec.half_width, spec.support_points);
    ctx.K = ctx.support.size();
    ctx.alpha.assign(ctx.K, spec.dirichlet_total / static_cast<double>(ctx.K));

    const QuadratureGrid& grid = mixture_grid();
    const DensityHandle p0 = gaussian(0.0, 1.5);
    const MixingDistribution& fstar = mixture_scenario_projection(spec);
    const DensityHandle pstar = mixture_density(fstar);

    ctx.n_nodes = grid.size();
    ctx.node_w = grid.weights;
    ctx.p0_vals.resize(ctx.n_nodes);
    ctx.pstar_vals.resize(ctx.n_nodes);
    ctx.kernel.resize(ctx.n_nodes * ctx.K);
    for (std::size_t i = 0; i < ctx.n_nodes; ++i) {
        ctx.p0_vals[i] = p0.at(grid.nodes[i]);
        ctx.pstar_vals[i] = pstar.at(grid.nodes[i]);
        for (std::size_t j = 0; j < ctx.K; ++j)
            ctx.kernel[i * ctx.K + j] = norm_pdf(grid.nodes[i] - ctx.support[j]);
    }
    return ctx;
}

ExperimentRecord mixture_rep(const ScenarioSpec& spec, const MixtureContext& ctx, int n, int rep) {
    const std::uint64_t seed =
        derive_seed({spec.master_seed, hash_string(spec.name()), static_cast<std::uint64_t>(n),
                     static_cast<std::uint64_t>(rep)});
    CounterRng rng(derive_seed({seed, 0xDA7A}));
    std::vector<double> data(n);
    for (int i = 0; i < n; ++i) data[i] = 1.5 * rng.normal();

    McmcConfig cfg = spec.mcmc;
    cfg.proposal_scale = spec.mcmc.proposal_scale * std::sqrt(100.0 / std::max(1, n));
    const MixturePosterior post =
        mixture_posterior(data, ctx.support, ctx.alpha, cfg, derive_seed({seed, 0x3C3C}));

    std::vector<double> dists(post.n_draws());
    for (std::size_t d = 0; d < post.n_draws(); ++d)
        dists[d] = ctx.distance_to_star(post.weight_draws[d]);
    std::vector<double> uniform_w(dists.size(), 1.0 / dists.size());

    // Evidence by prior Monte Carlo over Dirichlet draws.
    CounterRng prior_rng(derive_seed({seed, 0x9121}));
    const int m_draws = 500;
    std::vector<double> kern(data.size() * ctx.K);
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t j = 0; j < ctx.K; ++j)
            kern[i * ctx.K + j] = norm_pdf(data[i] - ctx.support[j]);
    std::vector<double> log_star(data.size());
    {
        const MixingDistribution& fstar = mixture_scenario_projection(spec);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double* row = &kern[i * ctx.K];
            double ps = 0.0;
            for (std::size_t j = 0; j < ctx.K; ++j) ps += fstar.weights[j] * row[j];
            log_star[i] = std::log(ps);
        }
    }
    std::vector<double> terms(m_draws);
    for (int m = 0; m < m_draws; ++m) {
        const std::vector<double> wprior = dirichlet_draw(prior_rng, ctx.alpha);
        double acc = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double* row = &kern[i * ctx.K];
            double pf = 0.0;
            for (std::size_t j = 0; j < ctx.K; ++j) pf += wprior[j] * row[j];
            acc += std::log(pf) - log_star[i];
        }
        terms[m] = acc;
    }
    double mx = *std::max_element(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - mx);
    const double log_evidence = mx + std::log(acc / m_draws);

    ExperimentRecord rec;
    rec.scenario = spec.name();
    rec.n = n;
    rec.rep = rep;
    rec.seed = seed;
    rec.quantile_radius = weighted_quantile_radius(dists, uniform_w, 0.9);
    rec.radius_alt = rec.quantile_radius;
    rec.tail_mass = weighted_tail_mass(dists, uniform_w, spec.tail_radius);
    rec.evidence = std::exp(log_evidence);
    rec.diagnostics = "acc=" + fmt_diag(post.acceptance);
    return rec;
}

std::vector<double> regression_f0_coeffs(int bins) {
    std::vector<double> c(bins);
    for (int b = 0; b < bins; ++b) c[b] = -0.4 + 0.3 * b;
    return c;
}

ExperimentRecord regression_rep(const ScenarioSpec& spec, int n, int rep) {
    const bool laplace = spec.model == ScenarioModel::regression_laplace;
    RegressionSpec rs;
    rs.basis = RegressionBasis{spec.bins, -spec.box_half, spec.box_half};
    const std::vector<double> c0 = regression_f0_coeffs(spec.bins);
    rs.f0 = [c0, basis = rs.basis](double x) { return c0[basis.bin_of(x)]; };
    rs.f0_bound = spec.box_half;
    rs.likelihood = laplace ? RegressionSpec::Likelihood::laplace : RegressionSpec::Likelihood::normal;
    // Normal fit sees zero-mean non-Gaussian noise; Laplace fit sees a
    // location-shifted Gaussian.
    rs.error = laplace ? ErrorSpec{ErrorSpec::Kind::gaussian, 0.5, 1.0}
                       : ErrorSpec{ErrorSpec::Kind::laplace, 0.0, 1.0 / std::sqrt(2.0)};

    const std::uint64_t seed =
        derive_seed({spec.master_seed, hash_string(spec.name()), static_cast<std::uint64_t>(n),
                     static_cast<std::uint64_t>(rep)});
    const auto xs = rs.covariate.draw(derive_seed({seed, 1}), static_cast<std::size_t>(n));
    const auto es = rs.error.sampler().draw(derive_seed({seed, 2}), static_cast<std::size_t>(n));
    std::vector<Point> data(n);
    for (int i = 0; i < n; ++i) data[i] = Point{xs[i].x, rs.f0(xs[i].x) + es[i].x};

    const RegressionPosterior post(rs, data, spec.axis_points);
    std::vector<double> cstar = c0;
    if (laplace)
        for (double& v : cstar) v += 0.5; // f0 + median of the errors

    const auto pm = post.mean();
    auto l2 = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(acc / a.size());
    };

    ExperimentRecord rec;
    rec.scenario = spec.name();
    rec.n = n;
    rec.rep = rep;
    rec.seed = seed;
    rec.quantile_radius = post.quantile_radius(cstar, 0.9);
    rec.radius_alt = rec.quantile_radius;
    rec.tail_mass = post.tail_mass(cstar, spec.tail_radius);
    rec.evidence = post.evidence_vs(cstar);
    rec.diagnostics = "mdist=" + fmt_diag(l2(pm, cstar)) + ";mdist0=" + fmt_diag(l2(pm, c0));
    return rec;
}

} // namespace

const MixingDistribution& mixture_scenario_projection(const ScenarioSpec& spec) {
    static std::mutex mu;
    static std::map<std::pair<int, double>, MixingDistribution> cache;
    std::scoped_lock lk(mu);
    const auto key = std::make_pair(spec.support_points, spec.half_width);
    auto it = cache.find(key);
    if (it == cache.end()) {
        const DensityHandle p0 = gaussian(0.0, 1.5);
        MixingDistribution F =
            project_mixture(p0, mixing_grid(spec.half_width, spec.support_points), 1e-6, 2000000,
                            mixture_grid());
        it = cache.emplace(key, std::move(F)).first;
    }
    return it->second;
}

std::vector<ExperimentRecord> run_scenario(const ScenarioSpec& spec, int max_threads) {
    spec.validate();
    const int levels = static_cast<int>(spec.n_list.size());
    const int tasks = levels * spec.reps;
    std::vector<ExperimentRecord> records(tasks);

    // The mixture projection is shared by every replication; build it once
    // before fanning out.
    MixtureContext mixture_ctx;
    if (spec.model == ScenarioModel::mixture) mixture_ctx = make_mixture_context(spec);

    parallel_for(
        tasks,
        [&](int t) {
            const int n = spec.n_list[t / spec.reps];
            const int rep = t % spec.reps;
            switch (spec.model) {
                case ScenarioModel::parametric_interior:
                case ScenarioModel::parametric_boundary:
                    records[t] = location_rep(spec, n, rep);
                    break;
                case ScenarioModel::mixture:
                    records[t] = mixture_rep(spec, mixture_ctx, n, rep);
                    break;
                case ScenarioModel::regression_normal:
                case ScenarioModel::regression_laplace:
                    records[t] = regression_rep(spec, n, rep);
                    break;
            }
        },
        max_threads);
    return records;
}

RateFit fit_scenario(const std::vector<ExperimentRecord>& records) {
    std::vector<PosteriorSummary> summaries;
    summaries.reserve(records.size());
    for (const auto& r : records)
        summaries.push_back(PosteriorSummary{r.n, r.tail_mass, r.quantile_radius, r.evidence, r.seed});
    return rate_fit(summaries);
}

namespace {

double parse_diag(const std::string& diag, const std::string& key) {
    const std::string token = key + "=";
    std::size_t pos = 0;
    while (pos < diag.size()) {
        const std::size_t end = diag.find(';', pos);
        const std::string part = diag.substr(pos, end == std::string::npos ? end : end - pos);
        if (part.rfind(token, 0) == 0) return std::atof(part.c_str() + token.size());
        if (end == std::string::npos) break;
        pos = end + 1;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    return (m % 2 == 1) ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

} // namespace

std::vector<ContractResult> check_scenario_contracts(const ScenarioSpec& spec,
                                                     const std::vector<ExperimentRecord>& records) {
    std::vector<ContractResult> out;
    const RateFit fit = fit_scenario(records);
    const std::string name = spec.name();

    auto add = [&](const std::string& check, bool pass, const std::string& detail) {
        out.push_back(ContractResult{name + "." + check, pass, detail});
    };

    // Concentration monotonicity with one permitted inversion.
    int inversions = 0;
    for (std::size_t i = 1; i < fit.medians.size(); ++i)
        if (fit.medians[i].second > fit.medians[i - 1].second) ++inversions;
    add("monotone_radius", inversions <= 1,
        "inversions=" + std::to_string(inversions) + " among " +
            std::to_string(fit.medians.size()) + " levels");

    auto beta_window = [&](double lo, double hi) {
        add("rate_window", fit.beta >= lo && fit.beta <= hi,
            "beta=" + fmt_g17(fit.beta) + " target [" + fmt_g17(lo) + ", " + fmt_g17(hi) +
                "], r2=" + fmt_g17(fit.r2));
    };

    switch (spec.model) {
        case ScenarioModel::parametric_interior: {
            beta_window(-0.65, -0.35);
            // Posterior mode targets theta* = 0 once n >= 400. Checked on
            // medians across replications: under misspecification the
            // sampling spread of the mode exceeds the posterior sd by the
            // sandwich factor, so single replications stray past 3 sd at a
            // fixed rate even when the target is right.
            bool ok = true;
            std::string detail;
            for (int n : spec.n_list) {
                if (n < 400) continue;
                std::vector<double> modes, sds;
                for (const auto& r : records) {
                    if (r.n != n) continue;
                    modes.push_back(std::fabs(parse_diag(r.diagnostics, "mode")));
                    sds.push_back(parse_diag(r.diagnostics, "sd"));
                }
                const double med_mode = median_of(modes), med_sd = median_of(sds);
                detail += "n" + std::to_string(n) + "=" + fmt_g17(med_mode / (3.0 * med_sd)) + " ";
                if (med_mode > 3.0 * med_sd) ok = false;
            }
            add("mode_targets_projection", ok, "median |mode| / (3 median sd): " + detail);
            break;
        }
        case ScenarioModel::parametric_boundary:
            beta_window(-1.2, -0.8);
            break;
        case ScenarioModel::mixture: {
            // radius <= K log n / sqrt n with K pinned at the first level.
            const auto& med = fit.medians;
            const double k_const =
                med.front().second / (std::log(med.front().first) / std::sqrt(med.front().first));
            bool ok = true;
            std::string detail = "K=" + fmt_g17(k_const);
            for (const auto& [n, m] : med) {
                const double cap = k_const * std::log(n) / std::sqrt(n);
                detail += " n" + std::to_string(n) + "=" + fmt_g17(m / cap);
                if (m > cap * (1.0 + 1e-9)) ok = false;
            }
            add("log_rate_envelope", ok, detail);
            break;
        }
        case ScenarioModel::regression_normal: {
            beta_window(-0.7, -0.3);
            // Concentration at f0: the posterior-mean gap shrinks with n.
            std::vector<double> first, last;
            for (const auto& r : records) {
                if (r.n == spec.n_list.front()) first.push_back(parse_diag(r.diagnostics, "mdist"));
                if (r.n == spec.n_list.back()) last.push_back(parse_diag(r.diagnostics, "mdist"));
            }
            const double m0 = median_of(first), m1 = median_of(last);
            add("concentrates_at_f0", m1 <= 0.5 * m0,
                "median gap " + fmt_g17(m0) + " -> " + fmt_g17(m1));
            break;
        }
        case ScenarioModel::regression_laplace: {
            beta_window(-0.7, -0.3);
            // Target is f0 + median(e0); posterior mean must sit much closer
            // to it than the size of the shift, and closer than to f0.
            std::vector<double> gap_target, gap_f0;
            for (const auto& r : records) {
                if (r.n != spec.n_list.back()) continue;
                gap_target.push_back(parse_diag(r.diagnostics, "mdist"));
                gap_f0.push_back(parse_diag(r.diagnostics, "mdist0"));
            }
            const double mt = median_of(gap_target), mf = median_of(gap_f0);
            add("concentrates_at_shifted_f0", mt < mf && mt <= 0.5 / 3.0,
                "gap to f0+median=" + fmt_g17(mt) + ", gap to f0=" + fmt_g17(mf));
            break;
        }
    }
    return out;
}

void write_records_csv(std::ostream& os, const std::vector<ExperimentRecord>& records) {
    os << "scenario,n,rep,seed,tail_mass,quantile_radius,evidence,diagnostics\n";
    for (const auto& r : records) {
        os << r.scenario << ',' << r.n << ',' << r.rep << ',' << r.seed << ','
           << fmt_g17(r.tail_mass) << ',' << fmt_g17(r.quantile_radius) << ','
           << fmt_g17(r.evidence) << ',' << r.diagnostics << '\n';
    }
}

void write_rate_summary(std::ostream& os, const ScenarioSpec& spec,
                        const std::vector<ExperimentRecord>& records, const RateFit& fit,
                        const std::vector<ContractResult>& contracts) {
    write_kv(os, "scenario", spec.name());
    write_kv(os, "reps", static_cast<double>(spec.reps));
    write_kv(os, "master_seed", static_cast<double>(spec.master_seed));
    write_kv(os, "beta", fit.beta);
    write_kv(os, "intercept", fit.intercept);
    write_kv(os, "r2", fit.r2);
    for (const auto& [n, med] : fit.medians)
        write_kv(os, "median_radius_n" + std::to_string(n), med);
    if (spec.model == ScenarioModel::mixture) {
        for (const auto& [n, med] : fit.medians)
            write_kv(os, "radius_over_logn_sqrtn_n" + std::to_string(n),
                     med / (std::log(n) / std::sqrt(n)));
    }
    std::vector<double> tails;
    for (const auto& [n, med] : fit.medians) {
        tails.clear();
        for (const auto& r : records)
            if (r.n == n) tails.push_back(r.tail_mass);
        write_kv(os, "median_tail_mass_n" + std::to_string(n), median_of(tails));
    }
    for (const auto& c : contracts)
        write_kv(os, std::string("contract.") + c.name, std::string(c.pass ? "PASS " : "FAIL ") + c.detail);
    (void)records;
}

} // namespace misspec
