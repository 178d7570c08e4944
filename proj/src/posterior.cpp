#include "misspec/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "misspec/normal.hpp"

namespace misspec {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logsumexp(std::span<const double> v) {
    double mx = kNegInf;
    for (double x : v) mx = std::max(mx, x);
    if (mx == kNegInf) return kNegInf;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - mx);
    return mx + std::log(acc);
}
} // namespace

std::vector<double> grid_posterior(const std::vector<double>& prior,
                                   const std::vector<double>& log_lik) {
    if (prior.size() != log_lik.size() || prior.empty())
        throw std::invalid_argument("grid_posterior: size mismatch");
    std::vector<double> log_w(prior.size(), kNegInf);
    double mx = kNegInf;
    for (std::size_t j = 0; j < prior.size(); ++j) {
        if (prior[j] < 0.0) throw std::invalid_argument("grid_posterior: negative prior weight");
        if (prior[j] > 0.0 && log_lik[j] != kNegInf) {
            log_w[j] = std::log(prior[j]) + log_lik[j];
            mx = std::max(mx, log_w[j]);
        }
    }
    if (mx == kNegInf)
        throw std::runtime_error("grid_posterior: all posterior weights vanished (degenerate pairing)");
    std::vector<double> w(prior.size(), 0.0);
    double s = 0.0;
    for (std::size_t j = 0; j < prior.size(); ++j) {
        if (log_w[j] == kNegInf) continue;
        w[j] = std::exp(log_w[j] - mx);
        s += w[j];
    }
    for (double& x : w) x /= s;
    return w;
}

std::vector<double> grid_posterior(const ParametricFamily& family,
                                   const std::vector<double>& thetas,
                                   const std::vector<double>& prior, std::span<const Point> data) {
    std::vector<double> log_lik(thetas.size(), 0.0);
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        const DensityHandle p = family.density_at(thetas[j]);
        double acc = 0.0;
        for (const Point& x : data) {
            const double l = p.log_density(x);
            if (l == kNegInf) {
                acc = kNegInf;
                break;
            }
            acc += l;
        }
        log_lik[j] = acc;
    }
    return grid_posterior(prior, log_lik);
}

double weighted_quantile_radius(const std::vector<double>& dist, const std::vector<double>& w,
                                double mass) {
    if (dist.size() != w.size() || dist.empty())
        throw std::invalid_argument("weighted_quantile_radius: size mismatch");
    std::vector<std::size_t> idx(dist.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    double acc = 0.0;
    for (std::size_t k : idx) {
        acc += w[k];
        if (acc >= mass) return dist[k];
    }
    return dist[idx.back()];
}

double weighted_tail_mass(const std::vector<double>& dist, const std::vector<double>& w, double r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i)
        if (dist[i] >= r) acc += w[i];
    return acc;
}

double boundary_posterior_mass(double n, double zn, double c) {
    if (!(n >= 1.0)) throw std::invalid_argument("boundary_posterior_mass: n must be >= 1");
    if (!(c >= 1.0 && c <= 2.0))
        throw std::invalid_argument("boundary_posterior_mass: c must lie in [1, 2]");
    const double rn = std::sqrt(n);
    const double la = norm_log_ccdf(c * rn - zn);  // numerator left end
    const double lb = norm_log_ccdf(2.0 * rn - zn);
    const double l1 = norm_log_ccdf(rn - zn);      // denominator left end
    // (ccdf(a) - ccdf(b)) / (ccdf(1) - ccdf(b)) in log space.
    const double num = -std::expm1(lb - la);
    const double den = -std::expm1(lb - l1);
    return std::exp(la - l1) * num / den;
}

// -------------------------------------------------------------------------
// Mixture posterior
// -------------------------------------------------------------------------

double gamma_draw(CounterRng& rng, double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma_draw: shape must be positive");
    if (shape < 1.0) {
        const double u = rng.uniform();
        return gamma_draw(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    // Marsaglia-Tsang squeeze.
    const double d = shape - 1.0 / 3.0;
    const double cc = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        const double x = rng.normal();
        const double t = 1.0 + cc * x;
        if (t <= 0.0) continue;
        const double v = t * t * t;
        const double u = rng.uniform();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
}

std::vector<double> dirichlet_draw(CounterRng& rng, const std::vector<double>& alpha) {
    std::vector<double> w(alpha.size());
    double s = 0.0;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
        w[j] = gamma_draw(rng, alpha[j]);
        s += w[j];
    }
    if (s <= 0.0) throw std::runtime_error("dirichlet_draw: degenerate draw");
    for (double& x : w) x /= s;
    return w;
}

namespace {

// softmax of (y_1..y_{K-1}, 0)
void alr_to_simplex(const std::vector<double>& y, std::vector<double>& w) {
    const std::size_t K = y.size() + 1;
    w.resize(K);
    double mx = 0.0;
    for (double v : y) mx = std::max(mx, v);
    double s = std::exp(-mx);
    w[K - 1] = s;
    for (std::size_t j = 0; j + 1 < K; ++j) {
        w[j] = std::exp(y[j] - mx);
        s += w[j];
    }
    for (double& x : w) x /= s;
}

} // namespace

MixturePosterior mixture_posterior(const std::vector<double>& data,
                                   const std::vector<double>& support,
                                   const std::vector<double>& dirichlet_alpha,
                                   const McmcConfig& cfg, std::uint64_t seed) {
    const std::size_t K = support.size();
    if (K < 2) throw std::invalid_argument("mixture_posterior: need at least 2 support points");
    if (dirichlet_alpha.size() != K)
        throw std::invalid_argument("mixture_posterior: alpha size mismatch");
    for (double a : dirichlet_alpha)
        if (!(a > 0.0)) throw std::invalid_argument("mixture_posterior: alpha must be positive");
    if (cfg.steps <= cfg.burnin) throw std::invalid_argument("mixture_posterior: steps <= burnin");

    const std::size_t n = data.size();
    std::vector<double> kern(n * K);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < K; ++j) kern[i * K + j] = norm_pdf(data[i] - support[j]);

    // log target in ALR coordinates: loglik + sum_j alpha_j log w_j; the
    // Jacobian of the transform cancels the -1 in the Dirichlet exponents.
    auto log_target = [&](const std::vector<double>& w) {
        double acc = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            if (w[j] <= 0.0) return kNegInf;
            acc += dirichlet_alpha[j] * std::log(w[j]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = &kern[i * K];
            double pf = 0.0;
            for (std::size_t j = 0; j < K; ++j) pf += w[j] * row[j];
            if (pf <= 0.0) return kNegInf;
            acc += std::log(pf);
        }
        return acc;
    };

    MixturePosterior out;
    out.support = support;
    for (double z : support) out.half_width = std::max(out.half_width, std::fabs(z));

    CounterRng rng(seed);
    std::vector<double> y(K - 1, 0.0), y_prop(K - 1), w, w_prop;
    alr_to_simplex(y, w);
    double lt = log_target(w);
    int accepted = 0;
    for (int step = 0; step < cfg.steps; ++step) {
        for (std::size_t j = 0; j + 1 < K; ++j) y_prop[j] = y[j] + cfg.proposal_scale * rng.normal();
        alr_to_simplex(y_prop, w_prop);
        const double lt_prop = log_target(w_prop);
        const double u = rng.uniform();
        if (std::log(u) < lt_prop - lt) {
            y = y_prop;
            w = w_prop;
            lt = lt_prop;
            ++accepted;
        }
        if (step >= cfg.burnin && (step - cfg.burnin) % cfg.thin == 0) out.weight_draws.push_back(w);
    }
    out.acceptance = static_cast<double>(accepted) / cfg.steps;
    if (out.acceptance < 0.02 || out.acceptance > 0.95)
        throw std::runtime_error("mixture_posterior: acceptance rate " +
                                 std::to_string(out.acceptance) +
                                 " outside [0.02, 0.95]; adjust proposal_scale");
    return out;
}

// -------------------------------------------------------------------------
// Regression posterior
// -------------------------------------------------------------------------

RegressionPosterior::RegressionPosterior(const RegressionSpec& spec, std::span<const Point> data,
                                         int points_per_axis) {
    if (points_per_axis < 2) throw std::invalid_argument("RegressionPosterior: need >= 2 axis points");
    lik_ = spec.likelihood;
    n_axes_ = spec.basis.n_bins;
    if (n_axes_ < 1 || n_axes_ > 3)
        throw std::invalid_argument("RegressionPosterior: tensor grids support 1..3 coefficients");

    axis_.resize(points_per_axis);
    for (int a = 0; a < points_per_axis; ++a)
        axis_[a] = spec.basis.box_lo +
                   (spec.basis.box_hi - spec.basis.box_lo) * a / (points_per_axis - 1);

    bin_sorted_y_.assign(n_axes_, {});
    bin_sum_.assign(n_axes_, 0.0);
    bin_sumsq_.assign(n_axes_, 0.0);
    bin_count_.assign(n_axes_, 0);
    for (const Point& p : data) {
        const int b = spec.basis.bin_of(p.x);
        bin_sorted_y_[b].push_back(p.y);
        bin_sum_[b] += p.y;
        bin_sumsq_[b] += p.y * p.y;
        bin_count_[b] += 1;
    }
    bin_prefix_y_.assign(n_axes_, {});
    for (int b = 0; b < n_axes_; ++b) {
        std::sort(bin_sorted_y_[b].begin(), bin_sorted_y_[b].end());
        bin_prefix_y_[b].resize(bin_sorted_y_[b].size() + 1, 0.0);
        for (std::size_t i = 0; i < bin_sorted_y_[b].size(); ++i)
            bin_prefix_y_[b][i + 1] = bin_prefix_y_[b][i] + bin_sorted_y_[b][i];
    }

    // Per-axis tables; the flat tensor is their sum over axes.
    const int P = points_per_axis;
    std::vector<std::vector<double>> table(n_axes_, std::vector<double>(P));
    for (int b = 0; b < n_axes_; ++b)
        for (int a = 0; a < P; ++a) table[b][a] = bin_log_lik(b, axis_[a]);

    std::size_t total = 1;
    for (int b = 0; b < n_axes_; ++b) total *= static_cast<std::size_t>(P);
    std::vector<double> log_w(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        double acc = 0.0;
        for (int b = 0; b < n_axes_; ++b) {
            acc += table[b][rem % P];
            rem /= P;
        }
        log_w[flat] = acc;
    }
    log_norm_ = logsumexp(log_w);
    if (log_norm_ == kNegInf)
        throw std::runtime_error("RegressionPosterior: all tensor weights vanished");
    weights_.resize(total);
    for (std::size_t flat = 0; flat < total; ++flat) weights_[flat] = std::exp(log_w[flat] - log_norm_);
}

double RegressionPosterior::bin_log_lik(int b, double c) const {
    if (lik_ == RegressionSpec::Likelihood::normal) {
        // sum -(y - c)^2 / 2, constants dropped
        return -0.5 * (bin_sumsq_[b] - 2.0 * c * bin_sum_[b] + bin_count_[b] * c * c);
    }
    // sum -|y - c|: split at c through the sorted values.
    const auto& ys = bin_sorted_y_[b];
    const auto& pre = bin_prefix_y_[b];
    const std::size_t m = ys.size();
    const std::size_t k = std::lower_bound(ys.begin(), ys.end(), c) - ys.begin();
    const double below = static_cast<double>(k) * c - pre[k];
    const double above = (pre[m] - pre[k]) - static_cast<double>(m - k) * c;
    return -(below + above);
}

double RegressionPosterior::log_lik(const std::vector<double>& c) const {
    double acc = 0.0;
    for (int b = 0; b < n_axes_; ++b) acc += bin_log_lik(b, c[b]);
    return acc;
}

namespace {
double l2_gap(const std::vector<double>& a, std::span<const double> axis, std::size_t flat, int k,
              int P) {
    double acc = 0.0;
    std::size_t rem = flat;
    for (int b = 0; b < k; ++b) {
        const double d = axis[rem % P] - a[b];
        acc += d * d;
        rem /= P;
    }
    return std::sqrt(acc / k);
}
} // namespace

double RegressionPosterior::tail_mass(const std::vector<double>& cstar, double r) const {
    const int P = static_cast<int>(axis_.size());
    double acc = 0.0;
    for (std::size_t flat = 0; flat < weights_.size(); ++flat)
        if (l2_gap(cstar, axis_, flat, n_axes_, P) >= r) acc += weights_[flat];
    return acc;
}

double RegressionPosterior::quantile_radius(const std::vector<double>& cstar, double mass) const {
    const int P = static_cast<int>(axis_.size());
    std::vector<double> dist(weights_.size());
    for (std::size_t flat = 0; flat < weights_.size(); ++flat)
        dist[flat] = l2_gap(cstar, axis_, flat, n_axes_, P);
    return weighted_quantile_radius(dist, weights_, mass);
}

std::vector<double> RegressionPosterior::mean() const {
    const int P = static_cast<int>(axis_.size());
    std::vector<double> m(n_axes_, 0.0);
    for (std::size_t flat = 0; flat < weights_.size(); ++flat) {
        std::size_t rem = flat;
        for (int b = 0; b < n_axes_; ++b) {
            m[b] += weights_[flat] * axis_[rem % P];
            rem /= P;
        }
    }
    return m;
}

std::vector<double> RegressionPosterior::sd() const {
    const int P = static_cast<int>(axis_.size());
    const std::vector<double> m = mean();
    std::vector<double> v(n_axes_, 0.0);
    for (std::size_t flat = 0; flat < weights_.size(); ++flat) {
        std::size_t rem = flat;
        for (int b = 0; b < n_axes_; ++b) {
            const double d = axis_[rem % P] - m[b];
            v[b] += weights_[flat] * d * d;
            rem /= P;
        }
    }
    for (double& x : v) x = std::sqrt(x);
    return v;
}

double RegressionPosterior::evidence_vs(const std::vector<double>& cstar) const {
    // mean over the uniform prior grid of exp(loglik - loglik(cstar))
    const double l_star = log_lik(cstar);
    return std::exp(log_norm_ - std::log(static_cast<double>(weights_.size())) - l_star);
}

// -------------------------------------------------------------------------
// Evidence bound
// -------------------------------------------------------------------------

EvidenceCheckResult evidence_bound_check(const EvidenceCheckInput& in, std::uint64_t seed) {
    if (in.reps < 8) throw std::invalid_argument("evidence_bound_check: reps too small");
    EvidenceCheckResult out;
    out.bound = 1.0 / (in.C * in.C * in.n * in.eps * in.eps);

    CounterRng prior_rng(derive_seed({seed, 0xA11CE}));
    int hits = 0;
    for (int i = 0; i < in.prior_mass_draws; ++i)
        if (in.in_neighborhood(in.prior_draw(prior_rng))) ++hits;
    out.hits = hits;
    out.prior_mass = static_cast<double>(hits) / in.prior_mass_draws;
    if (hits < 30)
        throw std::runtime_error("evidence_bound_check: only " + std::to_string(hits) +
                                 " prior hits in the KL neighborhood; increase epsilon");

    const double log_threshold =
        std::log(out.prior_mass) - in.n * in.eps * in.eps * (1.0 + in.C);

    int violations = 0;
    std::vector<double> terms(in.evidence_draws);
    for (int r = 0; r < in.reps; ++r) {
        const auto data = in.truth.draw(derive_seed({seed, 0xDA7A, static_cast<std::uint64_t>(r)}),
                                        static_cast<std::size_t>(in.n));
        CounterRng rng(derive_seed({seed, 0x9121, static_cast<std::uint64_t>(r)}));
        for (int m = 0; m < in.evidence_draws; ++m)
            terms[m] = in.log_ratio_sum(in.prior_draw(rng), data);
        const double log_evidence = logsumexp(terms) - std::log(static_cast<double>(in.evidence_draws));
        if (log_evidence < log_threshold) ++violations;
    }
    out.violation_freq = static_cast<double>(violations) / in.reps;
    out.stderr_ = std::sqrt(out.violation_freq * (1.0 - out.violation_freq) / in.reps);
    return out;
}

// -------------------------------------------------------------------------
// Rate fit
// -------------------------------------------------------------------------

RateFit rate_fit(const std::vector<PosteriorSummary>& summaries) {
    std::vector<int> ns;
    for (const auto& s : summaries)
        if (std::find(ns.begin(), ns.end(), s.n) == ns.end()) ns.push_back(s.n);
    std::sort(ns.begin(), ns.end());
    if (ns.size() < 4) throw std::invalid_argument("rate_fit: need at least 4 distinct n");

    RateFit fit;
    std::vector<double> lx, ly;
    for (int n : ns) {
        std::vector<double> radii;
        for (const auto& s : summaries)
            if (s.n == n) radii.push_back(s.quantile_radius);
        std::sort(radii.begin(), radii.end());
        const std::size_t m = radii.size();
        const double med = (m % 2 == 1) ? radii[m / 2] : 0.5 * (radii[m / 2 - 1] + radii[m / 2]);
        if (!(med > 0.0))
            throw std::runtime_error("rate_fit: zero quantile radius at n=" + std::to_string(n) +
                                     " (posterior collapsed onto the grid; refine it)");
        fit.medians.push_back({n, med});
        lx.push_back(std::log(static_cast<double>(n)));
        ly.push_back(std::log(med));
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= lx.size();
    my /= ly.size();
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    fit.beta = sxy / sxx;
    fit.intercept = my - fit.beta * mx;
    fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return fit;
}

} // namespace misspec
