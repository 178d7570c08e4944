#pragma once

// Discrete mixing distributions: support points on [-M, M] with simplex
// weights. The parameter of the convolution mixture model.

#include <cstdint>
#include <vector>

namespace misspec {

struct MixingDistribution {
    std::vector<double> support; // within [-M, M]
    std::vector<double> weights; // nonnegative, sum 1 within 1e-12
    double half_width = 2.0;     // M

    void validate() const; // throws on violated invariants

    static MixingDistribution point_mass(double z, double half_width);
    static MixingDistribution uniform_on(std::vector<double> support, double half_width);

    double mean() const;
    double variance() const;
};

// |w1 - w2|_1 over a shared support grid.
double l1_weight_distance(const MixingDistribution& a, const MixingDistribution& b);

// Equispaced grid of n points on [-M, M].
std::vector<double> mixing_grid(double half_width, int n_points);

} // namespace misspec
