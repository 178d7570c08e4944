#pragma once

// Posterior computation for the three model classes (theta grids, Dirichlet
// weights on a mixture support grid via Metropolis, tensor grids over a
// regression coefficient box), the evidence lower-bound frequency check, and
// the log-log rate fit over experiment summaries.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "misspec/density.hpp"
#include "misspec/projection.hpp"

namespace misspec {

struct PosteriorSummary {
    int n = 0;
    double tail_mass = 0.0;       // posterior mass of {d >= r} at the scenario radius
    double quantile_radius = 0.0; // smallest r with mass >= 0.9 inside {d <= r}
    double evidence = 0.0;
    std::uint64_t seed = 0;
};

// Normalizes prior_j * exp(log_lik_j) in log space (max-shift first).
// Throws when every term is -inf, the degenerate data/model pairing.
std::vector<double> grid_posterior(const std::vector<double>& prior,
                                   const std::vector<double>& log_lik);

// Convenience: log-likelihoods from a parametric family and a data vector.
std::vector<double> grid_posterior(const ParametricFamily& family,
                                   const std::vector<double>& thetas,
                                   const std::vector<double>& prior, std::span<const Point> data);

// 0.9-style quantile radius and tail mass over grid weights with known
// distances; ties broken toward the smallest index.
double weighted_quantile_radius(const std::vector<double>& dist, const std::vector<double>& w,
                                double mass = 0.9);
double weighted_tail_mass(const std::vector<double>& dist, const std::vector<double>& w, double r);

// Posterior mass of [c, 2] for the unit-variance location model on [1, 2]
// with a flat prior, truth centered so that Z_n = sqrt(n) * mean: the ratio
// (Phi(2 sqrt n - Z) - Phi(c sqrt n - Z)) / (Phi(2 sqrt n - Z) - Phi(sqrt n - Z))
// evaluated through log complementary CDFs so that it survives far tails.
double boundary_posterior_mass(double n, double zn, double c);

// -------------------------------------------------------------------------
// Mixture posterior (Metropolis on the weight simplex)
// -------------------------------------------------------------------------

struct McmcConfig {
    int steps = 12000;
    int burnin = 4000;
    int thin = 40;
    double proposal_scale = 0.12;
};

struct MixturePosterior {
    std::vector<double> support;
    double half_width = 2.0;
    std::vector<std::vector<double>> weight_draws; // post-burnin, thinned
    double acceptance = 0.0;

    std::size_t n_draws() const { return weight_draws.size(); }
    MixingDistribution draw(std::size_t i) const {
        return MixingDistribution{support, weight_draws[i], half_width};
    }
};

// Random-walk Metropolis in additive log-ratio coordinates (symmetric
// logistic-normal proposals) targeting Dirichlet(alpha) x likelihood.
// Throws, advising a proposal_scale change, if acceptance leaves
// [0.02, 0.95].
MixturePosterior mixture_posterior(const std::vector<double>& data,
                                   const std::vector<double>& support,
                                   const std::vector<double>& dirichlet_alpha,
                                   const McmcConfig& cfg, std::uint64_t seed);

double gamma_draw(CounterRng& rng, double shape);
std::vector<double> dirichlet_draw(CounterRng& rng, const std::vector<double>& alpha);

// -------------------------------------------------------------------------
// Regression posterior (tensor grid over the coefficient box)
// -------------------------------------------------------------------------

class RegressionPosterior {
  public:
    RegressionPosterior(const RegressionSpec& spec, std::span<const Point> data,
                        int points_per_axis);

    int n_axes() const { return n_axes_; }
    const std::vector<double>& axis() const { return axis_; }
    const std::vector<double>& weights() const { return weights_; } // flat tensor

    // L2(P0) distance for the piecewise-constant basis with uniform design:
    // sqrt(mean over bins of squared coefficient gaps).
    double tail_mass(const std::vector<double>& cstar, double r) const;
    double quantile_radius(const std::vector<double>& cstar, double mass = 0.9) const;
    std::vector<double> mean() const;
    std::vector<double> sd() const;

    // Exact log-likelihood at arbitrary coefficients (from per-bin data).
    double log_lik(const std::vector<double>& c) const;

    // integral of prod (p_f / p_fstar) over the uniform prior.
    double evidence_vs(const std::vector<double>& cstar) const;

  private:
    RegressionSpec::Likelihood lik_;
    int n_axes_ = 0;
    std::vector<double> axis_;
    std::vector<double> weights_;
    double log_norm_ = 0.0; // log sum over tensor of exp(loglik)
    // per-bin data for exact loglik at arbitrary coefficients
    std::vector<std::vector<double>> bin_sorted_y_;
    std::vector<std::vector<double>> bin_prefix_y_;
    std::vector<double> bin_sum_, bin_sumsq_;
    std::vector<int> bin_count_;

    double bin_log_lik(int b, double c) const;
};

// -------------------------------------------------------------------------
// Evidence lower bound
// -------------------------------------------------------------------------

struct EvidenceCheckInput {
    Sampler truth;
    std::function<double(CounterRng&)> prior_draw; // theta from the prior
    std::function<double(double, std::span<const Point>)> log_ratio_sum; // sum_i log(p/pstar)
    std::function<bool(double)> in_neighborhood;   // theta in B(eps)
    int n = 200;
    int reps = 400;
    double eps = 0.15;
    double C = 2.0;
    int prior_mass_draws = 100000;
    int evidence_draws = 4000;
};

struct EvidenceCheckResult {
    double violation_freq = 0.0;
    double bound = 0.0; // 1 / (C^2 n eps^2)
    double prior_mass = 0.0;
    int hits = 0;
    double stderr_ = 0.0;
};

// Frequency, over seeded datasets, of the evidence dropping below
// prior_mass(B(eps)) * exp(-n eps^2 (1 + C)). Throws when fewer than 30 of
// the prior-mass draws land in the neighborhood (advice: larger eps).
EvidenceCheckResult evidence_bound_check(const EvidenceCheckInput& in, std::uint64_t seed);

// -------------------------------------------------------------------------
// Rate fit
// -------------------------------------------------------------------------

struct RateFit {
    double beta = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::vector<std::pair<int, double>> medians; // per-n median radius
};

// Least squares of log(median quantile_radius) on log n. Needs >= 4 distinct
// n and strictly positive radii (throws advising a finer grid otherwise).
RateFit rate_fit(const std::vector<PosteriorSummary>& summaries);

} // namespace misspec
