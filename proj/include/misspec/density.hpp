#pragma once

// Evaluable (log-)densities with declared support and total mass, plus
// seeded samplers and Monte Carlo expectation. Total mass 1 marks a
// probability density; the tilted measures built by q_of_p carry arbitrary
// finite mass.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "misspec/mixing.hpp"
#include "misspec/quadrature.hpp"
#include "misspec/rng.hpp"

namespace misspec {

struct Point {
    double x = 0.0;
    double y = 0.0; // unused when dim == 1
};

struct DensityHandle {
    int dim = 1;
    std::function<double(const Point&)> log_density; // -inf exactly off support
    std::function<bool(const Point&)> support;
    double total_mass = 1.0;
    std::string label;

    double log_at(double x) const { return log_density(Point{x, 0.0}); }
    double at(double x) const { return std::exp(log_at(x)); }
    double log_at(const Point& p) const { return log_density(p); }
    double at(const Point& p) const { return std::exp(log_density(p)); }
    bool in_support(double x) const { return support(Point{x, 0.0}); }
};

DensityHandle gaussian(double mean, double sd, std::string label = {});
DensityHandle laplace_density(double location, double scale, std::string label = {});

// Scales a density by a positive constant (total mass scales with it).
DensityHandle scaled(const DensityHandle& p, double factor);

// Pointwise convex combination of probability densities.
DensityHandle convex_mix(const std::vector<DensityHandle>& parts,
                         const std::vector<double>& lambdas);

// Normal location mixture with mixing distribution F. Throws if the weights
// leave the simplex by more than 1e-10.
DensityHandle mixture_density(const MixingDistribution& F);

// Pointwise envelopes of every mixture density with mixing support in
// [-M, M]: lower <= p_F <= upper everywhere.
double mixture_upper_envelope(double half_width, double x);
double mixture_lower_envelope(double half_width, double x);

// The tilted measure with density p * p0 / pstar (zero where p0 vanishes).
// Total mass computed by integration; throws if p0 has support where pstar
// has none (absolute continuity violated), probed on the grid.
DensityHandle q_of_p(const DensityHandle& p, const DensityHandle& p0,
                     const DensityHandle& pstar, const QuadratureGrid& grid = default_grid());

struct Sampler {
    DensityHandle target; // total_mass 1
    std::function<std::vector<Point>(std::uint64_t seed, std::size_t count)> draw;
};

Sampler normal_sampler(double mean, double sd);
Sampler uniform_sampler(double lo, double hi);
Sampler laplace_sampler(double location, double scale);
Sampler mixture_sampler(const MixingDistribution& F);

struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

// Sample average and standard error of f over n draws. Throws (with the
// offending draw index) on a non-finite value. Requires n >= 2.
McEstimate mc_expectation(const Sampler& s, const std::function<double(const Point&)>& f,
                          std::size_t n, std::uint64_t seed);

} // namespace misspec
