#pragma once

// Covering machinery over discretized models: greedy covers by cells of
// bounded diameter, exact brute-force covers for small instances, certified
// local covers of the annulus around the projection point, and sup-norm
// entropy growth for the mixture family.

#include <cstdint>
#include <functional>
#include <vector>

#include "misspec/density.hpp"
#include "misspec/projection.hpp"

namespace misspec {

using PointMetric = std::function<double(int, int)>;

struct CoverReport {
    double epsilon = 0.0;        // requested radius
    int n_balls = 0;
    std::vector<int> centers;    // seed indices
    std::vector<int> assignment; // cell index per point, -1 if none
    double radius_used = 0.0;    // max distance from a point to its seed (<= 2 eps)
    bool certified = false;
};

// Greedy cover of {0..n_points-1} by cells of diameter <= 2 eps: seeds are
// picked farthest-first (lowest index breaks ties), each cell grows from its
// seed by increasing distance while the pairwise diameter stays within
// bounds. Every point ends within 2 eps of its seed.
CoverReport covering_number(int n_points, const PointMetric& d, double eps);

// Exact minimum number of diameter <= 2 eps cells covering the points.
// Exponential; intended for n_points <= 16.
int brute_force_cover(int n_points, const PointMetric& d, double eps);

struct LocalCoverInput {
    std::vector<DensityHandle> members;   // discretized model
    PointMetric d;                        // semi-metric between members
    std::function<double(int)> d_to_star; // distance of member i to the projection
    DensityHandle p0;
    DensityHandle pstar;
    double C = 6.0; // constants entering the cover radius factor
    double c = 1.0;
};

// Covers the annulus {eps < d(P, Pstar) < 2 eps} at radius A eps with
// A = 1/8 ^ 1/(4 sqrt C) ^ c/2, then certifies every cell: members and
// random 2-3 member convex combinations must carry misspec margin at least
// eps^2/4. Throws naming the first failing cell. An empty annulus yields
// zero balls, certified.
CoverReport local_cover_for_testing(const LocalCoverInput& in, double eps, int n_hull_probes,
                                    std::uint64_t seed, const QuadratureGrid& grid);

double local_cover_radius_factor(double C, double c);

struct EntropyCurve {
    std::vector<double> eps;
    std::vector<double> log_cover;
    double c_fit = 0.0;     // log_cover ~ c * (log 1/eps)^gamma
    double gamma_fit = 0.0;
    int points_in_fit = 0;  // saturated or trivial covers are excluded
};

// Sup-norm covering numbers of the discretized mixture family, probed by
// seeded random mixing distributions (a blend of sparse and dense weights)
// on a fixed support grid, with a power-law fit of log_cover against
// log(1/eps).
EntropyCurve mixture_entropy_curve(double half_width, const std::vector<double>& eps_list,
                                   int n_probe, int support_points, std::uint64_t seed);

// Random mixing distributions used by the entropy probe and reused by the
// geometry checks: a mix of sparse (few active atoms) and dense weights.
MixingDistribution random_mixing(CounterRng& rng, const std::vector<double>& support,
                                 double half_width);

} // namespace misspec
