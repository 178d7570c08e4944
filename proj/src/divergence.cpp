#include "misspec/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace misspec {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPosInf = std::numeric_limits<double>::infinity();

std::vector<double> log_values(const DensityHandle& h, const QuadratureGrid& grid) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = h.log_at(grid.nodes[i]);
    return v;
}

double weighted_sum(const QuadratureGrid& grid, const std::vector<double>& integrand) {
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) acc += grid.weights[i] * integrand[i];
    return acc;
}

} // namespace

double kl_divergence(const DensityHandle& p0, const DensityHandle& p, const QuadratureGrid& grid) {
    const auto l0 = log_values(p0, grid);
    const auto lp = log_values(p, grid);
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (l0[i] == kNegInf) continue;
        if (lp[i] == kNegInf) return kPosInf;
        acc += grid.weights[i] * std::exp(l0[i]) * (l0[i] - lp[i]);
    }
    return acc;
}

double hellinger_sq(const DensityHandle& p, const DensityHandle& q, const QuadratureGrid& grid) {
    const auto lp = log_values(p, grid);
    const auto lq = log_values(q, grid);
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double d = std::exp(0.5 * lp[i]) - std::exp(0.5 * lq[i]);
        acc += grid.weights[i] * d * d;
    }
    return 0.5 * acc;
}

double hellinger(const DensityHandle& p, const DensityHandle& q, const QuadratureGrid& grid) {
    return std::sqrt(std::max(0.0, hellinger_sq(p, q, grid)));
}

double l1_distance(const DensityHandle& p, const DensityHandle& q, const QuadratureGrid& grid) {
    const auto lp = log_values(p, grid);
    const auto lq = log_values(q, grid);
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        acc += grid.weights[i] * std::fabs(std::exp(lp[i]) - std::exp(lq[i]));
    return acc;
}

double weighted_hellinger_sq(const DensityHandle& p1, const DensityHandle& p2,
                             const DensityHandle& p0, const DensityHandle& pstar,
                             const QuadratureGrid& grid, double factor) {
    const auto l1 = log_values(p1, grid);
    const auto l2 = log_values(p2, grid);
    const auto l0 = log_values(p0, grid);
    const auto ls = log_values(pstar, grid);
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (l0[i] == kNegInf) continue;
        if (ls[i] == kNegInf)
            throw std::runtime_error("weighted_hellinger_sq: absolute continuity violated near x=" +
                                     std::to_string(grid.nodes[i]));
        const double w = std::exp(l0[i] - ls[i]);
        const double d = std::exp(0.5 * l1[i]) - std::exp(0.5 * l2[i]);
        acc += grid.weights[i] * d * d * w;
    }
    return factor * acc;
}

double hellinger_transform(const DensityHandle& p0, const DensityHandle& q, double alpha,
                           const QuadratureGrid& grid) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("hellinger_transform: alpha outside (0,1)");
    return transform_value(p0, q, 1.0 - alpha, grid);
}

double transform_value(const DensityHandle& p0, const DensityHandle& q, double beta,
                       const QuadratureGrid& grid) {
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("transform_value: beta outside (0,1)");
    const auto l0 = log_values(p0, grid);
    const auto lq = log_values(q, grid);
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (l0[i] == kNegInf || lq[i] == kNegInf) continue;
        acc += grid.weights[i] * std::exp(beta * lq[i] + (1.0 - beta) * l0[i]);
    }
    return acc;
}

void TransformCurve::validate() const {
    if (alphas.size() != values.size() || alphas.size() < 3)
        throw std::logic_error("TransformCurve: malformed");
    for (std::size_t i = 2; i < values.size(); ++i) {
        const double second = values[i] - 2.0 * values[i - 1] + values[i - 2];
        const double tol = 1e-8 * std::max(1.0, std::fabs(values[i - 1]));
        if (second < -tol)
            throw std::runtime_error("TransformCurve: convexity violated at alpha=" +
                                     std::to_string(alphas[i - 1]));
    }
}

void TransformCurve::write_table(std::ostream& os) const {
    os << "alpha,rho\n";
    char buf[64];
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", alphas[i], values[i]);
        os << buf;
    }
}

TransformCurve transform_curve(const DensityHandle& p0, const DensityHandle& q, int n_alphas,
                               const QuadratureGrid& grid) {
    if (n_alphas < 8) throw std::invalid_argument("transform_curve: need n_alphas >= 8");
    const auto l0 = log_values(p0, grid);
    const auto lq = log_values(q, grid);

    TransformCurve c;
    c.alphas.resize(n_alphas);
    c.values.resize(n_alphas);
    for (int k = 0; k < n_alphas; ++k) {
        const double a = static_cast<double>(k + 1) / (n_alphas + 1);
        c.alphas[k] = a;
        double acc = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (l0[i] == kNegInf || lq[i] == kNegInf) continue;
            acc += grid.weights[i] * std::exp(a * lq[i] + (1.0 - a) * l0[i]);
        }
        c.values[k] = acc;
    }

    double left = 0.0, right = 0.0, slope = 0.0;
    bool slope_inf = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (l0[i] != kNegInf && lq[i] != kNegInf) {
            const double w = grid.weights[i];
            left += w * std::exp(l0[i]);
            right += w * std::exp(lq[i]);
            slope += w * std::exp(l0[i]) * (lq[i] - l0[i]);
        } else if (l0[i] != kNegInf && lq[i] == kNegInf) {
            slope_inf = true; // p0-mass where q vanishes pulls the slope to -inf
        } else if (l0[i] == kNegInf && lq[i] != kNegInf) {
            // q-mass off the p0 support contributes to neither limit
        }
    }
    c.left_limit = left;
    c.right_limit = right;
    c.slope_at_zero = slope_inf ? kNegInf : slope;
    c.validate();
    return c;
}

namespace {

// Golden-section minimum of a convex function on [lo, hi].
template <typename F>
double golden_min(F&& f, double lo, double hi, int iters = 90) {
    const double invphi = 0.6180339887498948482;
    double a = lo, b = hi;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters && (b - a) > 1e-14; ++i) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

double sup_margin_impl(const std::vector<double>& log_ratio, const std::vector<double>& l0,
                       const QuadratureGrid& grid) {
    // log of integral p0 * exp(alpha * log_ratio); log_ratio may be -inf.
    auto log_rho = [&](double alpha) {
        double acc = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (l0[i] == kNegInf) continue;
            const double lr = log_ratio[i];
            const double t = (lr == kNegInf) ? 0.0 : std::exp(l0[i] + alpha * lr);
            if (!std::isfinite(t))
                throw std::runtime_error("sup margin: non-finite transform integrand at x=" +
                                         std::to_string(grid.nodes[i]));
            acc += grid.weights[i] * t;
        }
        return std::log(acc);
    };

    const double delta = 1e-6;
    const double astar = golden_min(log_rho, delta, 1.0 - delta);
    double best = -log_rho(astar);
    best = std::max(best, -log_rho(delta));
    best = std::max(best, -log_rho(1.0 - delta));

    // Convexity of the sampled transform; failure signals broken integration.
    double prev2 = 0.0, prev1 = 0.0;
    for (int k = 0; k < 17; ++k) {
        const double a = 0.02 + k * (0.96 / 16.0);
        const double v = std::exp(log_rho(a));
        if (k >= 2) {
            const double second = v - 2.0 * prev1 + prev2;
            if (second < -1e-8 * std::max(1.0, std::fabs(prev1)))
                throw std::runtime_error("sup margin: sampled transform is not convex");
        }
        prev2 = prev1;
        prev1 = v;
    }
    return std::max(0.0, best);
}

} // namespace

double misspec_margin(const DensityHandle& p0, const DensityHandle& p, const DensityHandle& pstar,
                      const QuadratureGrid& grid) {
    const auto l0 = log_values(p0, grid);
    const auto lp = log_values(p, grid);
    const auto ls = log_values(pstar, grid);
    std::vector<double> log_ratio(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (l0[i] == kNegInf) {
            log_ratio[i] = 0.0;
            continue;
        }
        if (ls[i] == kNegInf)
            throw std::runtime_error("misspec_margin: pstar vanishes on p0 support near x=" +
                                     std::to_string(grid.nodes[i]));
        log_ratio[i] = (lp[i] == kNegInf) ? kNegInf : lp[i] - ls[i];
    }
    return sup_margin_impl(log_ratio, l0, grid);
}

double sup_log_margin(const DensityHandle& p0, const DensityHandle& q, const QuadratureGrid& grid) {
    const auto l0 = log_values(p0, grid);
    const auto lq = log_values(q, grid);
    std::vector<double> log_ratio(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        log_ratio[i] = (lq[i] == kNegInf) ? kNegInf : lq[i] - l0[i];
    return sup_margin_impl(log_ratio, l0, grid);
}

KLNeighborhoodSpec::KLNeighborhoodSpec(double eps, DensityHandle pstar_, DensityHandle p0_,
                                       const QuadratureGrid& grid)
    : epsilon(eps), pstar(std::move(pstar_)), p0(std::move(p0_)) {
    if (!(eps > 0.0)) throw std::invalid_argument("KLNeighborhoodSpec: epsilon must be positive");
    const double kl = kl_divergence(p0, pstar, grid);
    if (!std::isfinite(kl))
        throw std::invalid_argument("KLNeighborhoodSpec: KL divergence of p0 to pstar is infinite");
}

KlMoments kl_neighborhood_moments(const DensityHandle& p0, const DensityHandle& pstar,
                                  const DensityHandle& p, const QuadratureGrid& grid) {
    const auto l0 = log_values(p0, grid);
    const auto lp = log_values(p, grid);
    const auto ls = log_values(pstar, grid);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (l0[i] == kNegInf) continue;
        if (lp[i] == kNegInf) return KlMoments{kPosInf, kPosInf};
        const double lr = lp[i] - ls[i];
        const double w = grid.weights[i] * std::exp(l0[i]);
        m1 -= w * lr;
        m2 += w * lr * lr;
    }
    return KlMoments{m1, m2};
}

bool in_kl_neighborhood(const KLNeighborhoodSpec& spec, const DensityHandle& p,
                        const QuadratureGrid& grid) {
    const KlMoments m = kl_neighborhood_moments(spec.p0, spec.pstar, p, grid);
    const double e2 = spec.epsilon * spec.epsilon;
    return m.mean_log <= e2 && m.sq_log <= e2;
}

// -------------------------------------------------------------------------
// Expansion residuals
// -------------------------------------------------------------------------

double expansion_lhs(const DensityHandle& p0, const DensityHandle& p, const DensityHandle& q,
                     double alpha, const QuadratureGrid& grid) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("expansion_lhs: alpha outside (0,1]");
    const auto l0 = log_values(p0, grid);
    const auto lp = log_values(p, grid);
    const auto lq = log_values(q, grid);
    double power = 0.0, logterm = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (l0[i] == kNegInf) continue;
        const double w = grid.weights[i] * std::exp(l0[i]);
        const double lr = lq[i] - lp[i]; // log(q/p)
        power += w * std::exp(alpha * lr);
        logterm += w * (-lr); // log(p/q)
    }
    return std::fabs(1.0 - power - alpha * logterm);
}

ExpansionResidual expansion_residual(const DensityHandle& p0, const DensityHandle& p,
                                     const DensityHandle& q, double alpha,
                                     const QuadratureGrid& grid) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("expansion_residual: alpha outside (0,1]");
    const auto l0 = log_values(p0, grid);
    const auto lp = log_values(p, grid);
    const auto lq = log_values(q, grid);
    double power = 0.0, logterm = 0.0, env = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (l0[i] == kNegInf) continue;
        const double w = grid.weights[i] * std::exp(l0[i]);
        const double lr = lq[i] - lp[i];
        power += w * std::exp(alpha * lr);
        logterm += w * (-lr);
        if (lr > 0.0) {
            const double s = std::exp(0.5 * lr) - 1.0;
            env += w * s * s;
        } else {
            env += w * lr * lr;
        }
    }
    ExpansionResidual r;
    r.lhs = std::fabs(1.0 - power - alpha * logterm);
    r.envelope = alpha * alpha * env;
    return r;
}

double envelope_log_tilted(const DensityHandle& p0, const DensityHandle& p, const DensityHandle& q,
                           double alpha, const QuadratureGrid& grid) {
    const auto l0 = log_values(p0, grid);
    const auto lp = log_values(p, grid);
    const auto lq = log_values(q, grid);
    double env = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (l0[i] == kNegInf) continue;
        const double w = grid.weights[i] * std::exp(l0[i]);
        const double lr = lq[i] - lp[i];
        const double tilt = lr > 0.0 ? std::exp(alpha * lr) : 1.0;
        env += w * lr * lr * tilt;
    }
    return alpha * alpha * env;
}

namespace {

double mixture_envelope_impl(const DensityHandle& p0, const DensityHandle& p,
                             const std::vector<DensityHandle>& qs, const std::vector<double>& lambdas,
                             double alpha, const QuadratureGrid& grid, bool sqrt_form) {
    if (qs.empty() || qs.size() != lambdas.size())
        throw std::invalid_argument("mixture envelope: size mismatch");
    const auto l0 = log_values(p0, grid);
    const auto lp = log_values(p, grid);
    double total = 0.0;
    for (std::size_t j = 0; j < qs.size(); ++j) {
        const auto lq = log_values(qs[j], grid);
        double env = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (l0[i] == kNegInf) continue;
            const double w = grid.weights[i] * std::exp(l0[i]);
            const double lr = lq[i] - lp[i];
            if (sqrt_form) {
                const double s = std::exp(0.5 * lr) - 1.0;
                env += w * (s * s + lr * lr);
            } else {
                env += w * lr * lr * (std::exp(2.0 * lr) + 1.0);
            }
        }
        total += lambdas[j] * env;
    }
    return 2.0 * alpha * alpha * total;
}

} // namespace

double mixture_envelope_sqrt_log(const DensityHandle& p0, const DensityHandle& p,
                                 const std::vector<DensityHandle>& qs,
                                 const std::vector<double>& lambdas, double alpha,
                                 const QuadratureGrid& grid) {
    return mixture_envelope_impl(p0, p, qs, lambdas, alpha, grid, true);
}

double mixture_envelope_log_tilted(const DensityHandle& p0, const DensityHandle& p,
                                   const std::vector<DensityHandle>& qs,
                                   const std::vector<double>& lambdas, double alpha,
                                   const QuadratureGrid& grid) {
    return mixture_envelope_impl(p0, p, qs, lambdas, alpha, grid, false);
}

// -------------------------------------------------------------------------
// Log-moment bound
// -------------------------------------------------------------------------

namespace {

// r(x) defined by log x = 2(sqrt x - 1) - r(x)(sqrt x - 1)^2.
double remainder_r(double x) {
    const double s = std::sqrt(x) - 1.0;
    if (std::fabs(s) < 1e-6) return 1.0 - (2.0 / 3.0) * s; // series around x = 1
    return (2.0 * s - std::log(x)) / (s * s);
}

} // namespace

double log_moment_regime_bound(double b) {
    if (!(b > 0.0)) throw std::invalid_argument("log_moment_regime_bound: b must be positive");
    double eps_bpp = 1.0;
    if (b < 1.0) {
        // Scan x^b r(x) on a log grid; keep the largest prefix on which it
        // increases.
        double cutoff = 1.0;
        double prev = 0.0;
        bool first = true;
        const int n = 4000;
        for (int i = 0; i <= n; ++i) {
            const double x = std::exp(-28.0 + 28.0 * static_cast<double>(i) / n); // e^-28 .. 1
            const double g = std::pow(x, b) * remainder_r(x);
            if (!first && g < prev) {
                cutoff = std::exp(-28.0 + 28.0 * static_cast<double>(i - 1) / n);
                break;
            }
            prev = g;
            first = false;
        }
        eps_bpp = cutoff;
    }
    const double eps_prime = 0.4;
    return std::pow(std::min({eps_prime, eps_bpp, 4.0}), b);
}

LogMomentBound log_moment_bound_check(const DensityHandle& p, const DensityHandle& q, double b,
                                      const QuadratureGrid& grid) {
    if (!(b > 0.0)) throw std::invalid_argument("log_moment_bound_check: b must be positive");
    const auto lp = log_values(p, grid);
    const auto lq = log_values(q, grid);

    double h2 = 0.0, l1 = 0.0, ratio_b = 0.0, kl = 0.0, sqlog = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double w = grid.weights[i];
        const double pv = std::exp(lp[i]);
        const double qv = std::exp(lq[i]);
        const double d = std::sqrt(pv) - std::sqrt(qv);
        h2 += w * d * d; // unhalved convention
        l1 += w * std::fabs(pv - qv);
        if (lp[i] == kNegInf) continue;
        const double lr = lp[i] - lq[i]; // log(p/q)
        ratio_b += w * pv * std::exp(b * lr);
        kl += w * pv * lr;
        sqlog += w * pv * lr * lr;
    }

    const double eps_b = log_moment_regime_bound(b);
    if (!(h2 > 0.0) || !(h2 < eps_b * ratio_b))
        throw std::runtime_error("log_moment_bound_check: outside the bound regime, need 0 < h^2 < " +
                                 std::to_string(eps_b) + " * P(p/q)^b (h^2=" + std::to_string(h2) +
                                 ", P(p/q)^b=" + std::to_string(ratio_b) + ")");

    const double h = std::sqrt(h2);
    const double bracket =
        1.0 + std::max(0.0, std::log(1.0 / h)) / b + std::max(0.0, std::log(ratio_b)) / b;
    LogMomentBound out;
    out.kl = kl;
    out.sqlog = sqlog;
    out.rhs1 = h2 * bracket + l1;
    out.rhs2 = h2 * bracket * bracket;
    return out;
}

// -------------------------------------------------------------------------
// Calibration
// -------------------------------------------------------------------------

namespace {

DensityHandle random_scaled_gaussian(CounterRng& rng, double max_shift, double mass_lo,
                                     double mass_hi) {
    const double mu = rng.uniform(-max_shift, max_shift);
    const double sd = rng.uniform(0.75, 1.35);
    const double mass = rng.uniform(mass_lo, mass_hi);
    return scaled(gaussian(mu, sd), mass);
}

} // namespace

CalibrationReport calibrate_expansion_constant(EnvelopeForm form, std::uint64_t seed, int n_tuples,
                                               const QuadratureGrid& grid) {
    CalibrationReport rep;
    const DensityHandle p0 = gaussian(0.0, 1.2);
    for (int t = 0; t < n_tuples; ++t) {
        CounterRng rng(derive_seed({seed, static_cast<std::uint64_t>(t)}));
        const double alpha = rng.uniform(0.02, 1.0);
        const DensityHandle p = gaussian(rng.uniform(-0.8, 0.8), rng.uniform(0.8, 1.25));
        double lhs = 0.0, env = 0.0;
        if (form == EnvelopeForm::sqrt_log || form == EnvelopeForm::log_tilted) {
            const DensityHandle q = random_scaled_gaussian(rng, 0.8, 0.75, 1.3);
            const ExpansionResidual r = expansion_residual(p0, p, q, alpha, grid);
            lhs = r.lhs;
            env = (form == EnvelopeForm::sqrt_log) ? r.envelope
                                                   : envelope_log_tilted(p0, p, q, alpha, grid);
        } else {
            const int m = 2 + static_cast<int>(rng.uniform() * 2.0); // 2 or 3 components
            std::vector<DensityHandle> qs;
            std::vector<double> lambdas(m);
            double s = 0.0;
            for (int j = 0; j < m; ++j) {
                qs.push_back(gaussian(rng.uniform(-0.8, 0.8), rng.uniform(0.8, 1.25)));
                lambdas[j] = rng.uniform(0.05, 1.0);
                s += lambdas[j];
            }
            for (double& l : lambdas) l /= s;
            const DensityHandle qmix = convex_mix(qs, lambdas);
            lhs = expansion_lhs(p0, p, qmix, alpha, grid);
            env = (form == EnvelopeForm::mixture_sqrt_log)
                      ? mixture_envelope_sqrt_log(p0, p, qs, lambdas, alpha, grid)
                      : mixture_envelope_log_tilted(p0, p, qs, lambdas, alpha, grid);
        }
        if (env > 1e-14) {
            const double ratio = lhs / env;
            if (ratio > rep.max_ratio) {
                rep.max_ratio = ratio;
                rep.argmax_index = t;
            }
        }
    }
    return rep;
}

CalibrationReport calibrate_log_moment_constant(std::uint64_t seed, int n_tuples,
                                                const QuadratureGrid& grid) {
    CalibrationReport rep;
    const double bs[] = {0.5, 1.0, 2.0};
    int produced = 0;
    std::uint64_t attempt = 0;
    while (produced < n_tuples && attempt < static_cast<std::uint64_t>(n_tuples) * 40) {
        CounterRng rng(derive_seed({seed, 0xB0, attempt}));
        ++attempt;
        const double b = bs[rng.next_u64() % 3];
        const DensityHandle p = gaussian(0.0, 1.0);
        const DensityHandle q = random_scaled_gaussian(rng, 0.35, 0.8, 1.25);
        LogMomentBound lm;
        try {
            lm = log_moment_bound_check(p, q, b, grid);
        } catch (const std::runtime_error&) {
            continue; // outside the regime; draw another tuple
        }
        ++produced;
        const double r1 = lm.rhs1 > 1e-14 ? std::max(0.0, lm.kl) / lm.rhs1 : 0.0;
        const double r2 = lm.rhs2 > 1e-14 ? lm.sqlog / lm.rhs2 : 0.0;
        const double ratio = std::max(r1, r2);
        if (ratio > rep.max_ratio) {
            rep.max_ratio = ratio;
            rep.argmax_index = produced - 1;
        }
    }
    return rep;
}

} // namespace misspec
