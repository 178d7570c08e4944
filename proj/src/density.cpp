#include "misspec/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "misspec/normal.hpp"

namespace misspec {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::function<bool(const Point&)> full_support() {
    return [](const Point&) { return true; };
}
} // namespace

void MixingDistribution::validate() const {
    if (support.size() != weights.size())
        throw std::invalid_argument("MixingDistribution: support/weight size mismatch");
    if (support.empty()) throw std::invalid_argument("MixingDistribution: empty support");
    double s = 0.0;
    for (std::size_t j = 0; j < support.size(); ++j) {
        if (std::fabs(support[j]) > half_width + 1e-12)
            throw std::invalid_argument("MixingDistribution: support point outside [-M, M]");
        if (weights[j] < 0.0) throw std::invalid_argument("MixingDistribution: negative weight");
        s += weights[j];
    }
    if (std::fabs(s - 1.0) > 1e-12)
        throw std::invalid_argument("MixingDistribution: weights sum to " + std::to_string(s));
}

MixingDistribution MixingDistribution::point_mass(double z, double half_width) {
    return MixingDistribution{{z}, {1.0}, half_width};
}

MixingDistribution MixingDistribution::uniform_on(std::vector<double> support, double half_width) {
    const double w = 1.0 / static_cast<double>(support.size());
    std::vector<double> weights(support.size(), w);
    return MixingDistribution{std::move(support), std::move(weights), half_width};
}

double MixingDistribution::mean() const {
    double m = 0.0;
    for (std::size_t j = 0; j < support.size(); ++j) m += weights[j] * support[j];
    return m;
}

double MixingDistribution::variance() const {
    const double m = mean();
    double v = 0.0;
    for (std::size_t j = 0; j < support.size(); ++j)
        v += weights[j] * (support[j] - m) * (support[j] - m);
    return v;
}

double l1_weight_distance(const MixingDistribution& a, const MixingDistribution& b) {
    if (a.support.size() != b.support.size())
        throw std::invalid_argument("l1_weight_distance: different support grids");
    double s = 0.0;
    for (std::size_t j = 0; j < a.support.size(); ++j) s += std::fabs(a.weights[j] - b.weights[j]);
    return s;
}

std::vector<double> mixing_grid(double half_width, int n_points) {
    if (n_points < 1) throw std::invalid_argument("mixing_grid: n_points < 1");
    std::vector<double> g(n_points);
    if (n_points == 1) {
        g[0] = 0.0;
        return g;
    }
    const double step = 2.0 * half_width / (n_points - 1);
    for (int j = 0; j < n_points; ++j) g[j] = -half_width + j * step;
    return g;
}

DensityHandle gaussian(double mean, double sd, std::string label) {
    if (!(sd > 0.0)) throw std::invalid_argument("gaussian: sd must be positive");
    DensityHandle h;
    h.dim = 1;
    h.log_density = [mean, sd](const Point& p) {
        const double z = (p.x - mean) / sd;
        return norm_log_pdf(z) - std::log(sd);
    };
    h.support = full_support();
    h.total_mass = 1.0;
    h.label = label.empty() ? "N(" + std::to_string(mean) + "," + std::to_string(sd * sd) + ")"
                            : std::move(label);
    return h;
}

DensityHandle laplace_density(double location, double scale, std::string label) {
    if (!(scale > 0.0)) throw std::invalid_argument("laplace_density: scale must be positive");
    DensityHandle h;
    h.dim = 1;
    h.log_density = [location, scale](const Point& p) {
        return -std::fabs(p.x - location) / scale - std::log(2.0 * scale);
    };
    h.support = full_support();
    h.total_mass = 1.0;
    h.label = label.empty() ? "Laplace(" + std::to_string(location) + "," + std::to_string(scale) + ")"
                            : std::move(label);
    return h;
}

DensityHandle scaled(const DensityHandle& p, double factor) {
    if (!(factor > 0.0)) throw std::invalid_argument("scaled: factor must be positive");
    DensityHandle h = p;
    const double log_factor = std::log(factor);
    auto base = p.log_density;
    h.log_density = [base, log_factor](const Point& pt) { return base(pt) + log_factor; };
    h.total_mass = p.total_mass * factor;
    h.label = std::to_string(factor) + "*" + p.label;
    return h;
}

DensityHandle convex_mix(const std::vector<DensityHandle>& parts, const std::vector<double>& lambdas) {
    if (parts.empty() || parts.size() != lambdas.size())
        throw std::invalid_argument("convex_mix: size mismatch");
    double s = 0.0;
    for (double l : lambdas) {
        if (l < 0.0) throw std::invalid_argument("convex_mix: negative lambda");
        s += l;
    }
    if (std::fabs(s - 1.0) > 1e-10) throw std::invalid_argument("convex_mix: lambdas do not sum to 1");

    std::vector<std::function<double(const Point&)>> logs;
    logs.reserve(parts.size());
    for (const auto& p : parts) logs.push_back(p.log_density);
    std::vector<double> log_l(lambdas.size());
    for (std::size_t i = 0; i < lambdas.size(); ++i)
        log_l[i] = lambdas[i] > 0.0 ? std::log(lambdas[i]) : kNegInf;

    DensityHandle h;
    h.dim = parts.front().dim;
    double mass = 0.0;
    for (std::size_t i = 0; i < parts.size(); ++i) mass += lambdas[i] * parts[i].total_mass;
    h.total_mass = mass;
    h.log_density = [logs, log_l](const Point& pt) {
        double mx = kNegInf;
        std::vector<double> terms(logs.size());
        for (std::size_t i = 0; i < logs.size(); ++i) {
            terms[i] = log_l[i] + logs[i](pt);
            mx = std::max(mx, terms[i]);
        }
        if (mx == kNegInf) return kNegInf;
        double acc = 0.0;
        for (double t : terms) acc += std::exp(t - mx);
        return mx + std::log(acc);
    };
    std::vector<std::function<bool(const Point&)>> sups;
    for (const auto& p : parts) sups.push_back(p.support);
    h.support = [sups](const Point& pt) {
        for (const auto& s : sups)
            if (s(pt)) return true;
        return false;
    };
    h.label = "mix";
    return h;
}

DensityHandle mixture_density(const MixingDistribution& F) {
    double s = 0.0;
    for (double w : F.weights) s += w;
    if (std::fabs(s - 1.0) > 1e-10)
        throw std::invalid_argument("mixture_density: weights sum to " + std::to_string(s) +
                                    ", expected 1 within 1e-10");
    F.validate();

    std::vector<double> support = F.support;
    std::vector<double> log_w(F.weights.size());
    for (std::size_t j = 0; j < F.weights.size(); ++j)
        log_w[j] = F.weights[j] > 0.0 ? std::log(F.weights[j]) : kNegInf;

    DensityHandle h;
    h.dim = 1;
    h.total_mass = 1.0;
    h.support = full_support();
    h.log_density = [support, log_w](const Point& pt) {
        double mx = kNegInf;
        for (std::size_t j = 0; j < support.size(); ++j) {
            const double d = pt.x - support[j];
            const double t = log_w[j] - 0.5 * d * d - kLogSqrt2Pi;
            if (t > mx) mx = t;
        }
        if (mx == kNegInf) return kNegInf;
        double acc = 0.0;
        for (std::size_t j = 0; j < support.size(); ++j) {
            const double d = pt.x - support[j];
            acc += std::exp(log_w[j] - 0.5 * d * d - kLogSqrt2Pi - mx);
        }
        return mx + std::log(acc);
    };
    h.label = "mixture";
    return h;
}

double mixture_upper_envelope(double half_width, double x) {
    if (x < -half_width) return norm_pdf(x + half_width);
    if (x > half_width) return norm_pdf(x - half_width);
    return norm_pdf(0.0);
}

double mixture_lower_envelope(double half_width, double x) {
    return x < 0.0 ? norm_pdf(x - half_width) : norm_pdf(x + half_width);
}

DensityHandle q_of_p(const DensityHandle& p, const DensityHandle& p0, const DensityHandle& pstar,
                     const QuadratureGrid& grid) {
    // Support containment is probed, not symbolic: the handles are black-box maps.
    for (double x : grid.nodes) {
        const Point pt{x, 0.0};
        if (p0.support(pt) && !pstar.support(pt))
            throw std::runtime_error("q_of_p: absolute continuity violated, p0 > 0 where pstar = 0 near x=" +
                                     std::to_string(x));
    }

    auto lp = p.log_density;
    auto lp0 = p0.log_density;
    auto lps = pstar.log_density;
    auto q_log = [lp, lp0, lps](const Point& pt) {
        const double a = lp0(pt);
        if (a == kNegInf) return kNegInf; // density is p * p0 / pstar, zero where p0 = 0
        const double b = lp(pt);
        if (b == kNegInf) return kNegInf;
        return b + a - lps(pt);
    };

    DensityHandle q;
    q.dim = p.dim;
    q.log_density = q_log;
    auto sup_p = p.support;
    auto sup_p0 = p0.support;
    q.support = [sup_p, sup_p0](const Point& pt) { return sup_p(pt) && sup_p0(pt); };
    q.total_mass = integrate([&](double x) { return std::exp(q_log(Point{x, 0.0})); }, grid);
    q.label = "Q(" + p.label + ")";
    return q;
}

Sampler normal_sampler(double mean, double sd) {
    Sampler s;
    s.target = gaussian(mean, sd);
    s.draw = [mean, sd](std::uint64_t seed, std::size_t count) {
        std::vector<Point> out(count);
        CounterRng rng(seed);
        for (std::size_t i = 0; i < count; ++i) out[i] = Point{mean + sd * rng.normal(), 0.0};
        return out;
    };
    return s;
}

Sampler uniform_sampler(double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("uniform_sampler: hi <= lo");
    Sampler s;
    DensityHandle h;
    h.dim = 1;
    const double log_d = -std::log(hi - lo);
    h.log_density = [lo, hi, log_d](const Point& pt) {
        return (pt.x >= lo && pt.x <= hi) ? log_d : kNegInf;
    };
    h.support = [lo, hi](const Point& pt) { return pt.x >= lo && pt.x <= hi; };
    h.total_mass = 1.0;
    h.label = "U(" + std::to_string(lo) + "," + std::to_string(hi) + ")";
    s.target = h;
    s.draw = [lo, hi](std::uint64_t seed, std::size_t count) {
        std::vector<Point> out(count);
        CounterRng rng(seed);
        for (std::size_t i = 0; i < count; ++i) out[i] = Point{rng.uniform(lo, hi), 0.0};
        return out;
    };
    return s;
}

Sampler laplace_sampler(double location, double scale) {
    Sampler s;
    s.target = laplace_density(location, scale);
    s.draw = [location, scale](std::uint64_t seed, std::size_t count) {
        std::vector<Point> out(count);
        CounterRng rng(seed);
        for (std::size_t i = 0; i < count; ++i) {
            const double u = rng.uniform() - 0.5;
            const double x = location - scale * std::copysign(std::log1p(-2.0 * std::fabs(u)), u);
            out[i] = Point{x, 0.0};
        }
        return out;
    };
    return s;
}

Sampler mixture_sampler(const MixingDistribution& F) {
    F.validate();
    Sampler s;
    s.target = mixture_density(F);
    std::vector<double> cdf(F.weights.size());
    std::partial_sum(F.weights.begin(), F.weights.end(), cdf.begin());
    std::vector<double> support = F.support;
    s.draw = [cdf, support](std::uint64_t seed, std::size_t count) {
        std::vector<Point> out(count);
        CounterRng rng(seed);
        for (std::size_t i = 0; i < count; ++i) {
            const double u = rng.uniform();
            const std::size_t j = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
            const double z = support[std::min(j, support.size() - 1)];
            out[i] = Point{z + rng.normal(), 0.0};
        }
        return out;
    };
    return s;
}

McEstimate mc_expectation(const Sampler& s, const std::function<double(const Point&)>& f,
                          std::size_t n, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("mc_expectation: n must be at least 2");
    const std::vector<Point> draws = s.draw(seed, n);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = f(draws[i]);
        if (!std::isfinite(v))
            throw std::runtime_error("mc_expectation: non-finite value at draw index " + std::to_string(i));
        const double delta = v - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (v - mean);
    }
    const double var = m2 / static_cast<double>(n - 1);
    return McEstimate{mean, std::sqrt(var / static_cast<double>(n))};
}

} // namespace misspec
