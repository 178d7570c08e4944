#pragma once

// Minimal-KL points: coarse-scan plus golden-section for parametric
// families (boundary minima are first-class), multiplicative-gradient
// iteration on the weight simplex for convex mixture models, and projected
// coordinate descent over a coefficient box for regression classes.

#include <cstdint>
#include <functional>
#include <vector>

#include "misspec/density.hpp"
#include "misspec/divergence.hpp"
#include "misspec/mixing.hpp"

namespace misspec {

// -------------------------------------------------------------------------
// Parametric families
// -------------------------------------------------------------------------

struct ParametricFamily {
    double theta_lo = 0.0;
    double theta_hi = 1.0;
    std::function<DensityHandle(double)> density_at;
    std::function<double(double, double)> metric; // semi-metric d(theta1, theta2)
};

ParametricFamily normal_location_family(double theta_lo, double theta_hi);

struct ParametricProjection {
    double theta_star = 0.0;
    double kl_min = 0.0;
};

// Minimizes theta -> KL(p0 || p_theta) to within tol. Throws if the KL is
// infinite on the whole probe grid.
ParametricProjection project_parametric(const ParametricFamily& family, const DensityHandle& p0,
                                        double tol, const QuadratureGrid& grid);

// -------------------------------------------------------------------------
// Mixture model
// -------------------------------------------------------------------------

// -P0 log(p_F / p0), the convex objective minimized by the projection.
double mixture_objective(const DensityHandle& p0, const MixingDistribution& F,
                         const QuadratureGrid& grid);

// max_j P0[phi(. - z_j)/p_F] - 1: the duality gap; <= 0 at the optimum
// (equivalently the first-order certificate P0(p/pstar) <= 1 at vertices).
double mixture_dual_gap(const DensityHandle& p0, const MixingDistribution& F,
                        const QuadratureGrid& grid);

// Multiplicative-gradient iteration w_j <- w_j * P0[phi(. - z_j)/p_F] with
// renormalization, from init (uniform if empty), until the dual gap drops
// to tol. The objective is checked to be non-increasing every iteration.
// Throws with the final gap if max_iters is exhausted first.
MixingDistribution project_mixture(const DensityHandle& p0, const std::vector<double>& grid_points,
                                   double tol, int max_iters, const QuadratureGrid& grid,
                                   std::vector<double> init_weights = {});

// -------------------------------------------------------------------------
// Regression
// -------------------------------------------------------------------------

struct ErrorSpec {
    enum class Kind { gaussian, laplace };
    Kind kind = Kind::gaussian;
    double location = 0.0;
    double scale = 1.0; // sd for gaussian, diversity scale for laplace

    double mean() const { return location; }
    double median() const { return location; }
    double variance() const;
    DensityHandle density() const;
    Sampler sampler() const;
    double cdf(double x) const;
};

// Piecewise-constant functions on equal bins of [0,1]; one coefficient per
// bin, all bounded by the same box.
struct RegressionBasis {
    int n_bins = 3;
    double box_lo = -1.5;
    double box_hi = 1.5;

    int bin_of(double x) const;
    double eval(const std::vector<double>& coeffs, double x) const;
};

struct RegressionSpec {
    std::function<double(double)> f0;
    double f0_bound = 2.0; // declared sup bound on |f0|
    ErrorSpec error;       // true error distribution e0
    RegressionBasis basis;
    enum class Likelihood { normal, laplace } likelihood = Likelihood::normal;
    Sampler covariate = uniform_sampler(0.0, 1.0);

    void validate() const; // probes |f0| <= f0_bound, checks the box
};

// Phi(nu) = E(|e0 - nu| - |e0|): closed form for gaussian errors, kink-split
// quadrature otherwise. Minimized at the median of e0.
double abs_deviation_gap(double nu, const ErrorSpec& e0);

// Coefficient vector of the in-class KL minimizer under the empirical
// covariate design of n_mc Monte Carlo draws. Normal likelihood projects
// f0 + mean(e0) in least squares; laplace minimizes the sampled
// abs-deviation gap. Projected coordinate descent to gradient tolerance
// 1e-8; throws with the final gradient norm on non-convergence.
std::vector<double> project_regression(const RegressionSpec& spec, std::size_t n_mc,
                                       std::uint64_t seed);

// max over coefficient-box vertices f of |P0 (f - fstar)(fstar - f0 - mu)|,
// estimated over the same Monte Carlo design. Zero (within noise) iff the
// KL neighborhood collapses to an L2 ball around fstar.
struct PythagorasCheck {
    double max_abs_inner = 0.0;
    double stderr_ = 0.0;
};
PythagorasCheck pythagoras_check(const std::vector<double>& f_star, const RegressionSpec& spec,
                                 std::size_t n_mc, std::uint64_t seed);

} // namespace misspec
