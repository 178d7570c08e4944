#pragma once

// Tests of a probability measure against finite alternative measures:
// single-observation likelihood-ratio tests, i.i.d. power bounds through the
// Hellinger transform, product factorization, and shell-aggregated tests
// over certified covers of a misspecified family.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "misspec/density.hpp"
#include "misspec/divergence.hpp"
#include "misspec/projection.hpp"

namespace misspec {

struct TestFunction {
    std::function<double(std::span<const Point>)> decide; // values in [0,1]
    std::string description;
};

// Single-observation test 1{p(x) < q(x)}; ties decide 0.
TestFunction lr_test(const DensityHandle& p, const DensityHandle& q);

// n-sample product test 1{prod p < prod q}, n inferred from the sample.
TestFunction product_lr_test(const DensityHandle& p, const DensityHandle& q);

// integral p0 * t + integral q * (1 - t), evaluated one observation at a time.
double test_risk(const TestFunction& t, const DensityHandle& p0, const DensityHandle& q,
                 const QuadratureGrid& grid);

struct PowerBound {
    double type1_hat = 0.0;
    double type1_se = 0.0;
    double type2_hat = 0.0;
    double type2_se = 0.0;
    double bound = 0.0;  // (min_alpha rho_alpha)^n
    double margin = 0.0; // sup_alpha -log rho_alpha
    double ess = 0.0;    // effective sample size of the importance integrand
};

// Builds the n-sample product LR test of p0 against the finite measure q.
// Type I is estimated under P0^n by plain Monte Carlo; type II under Q^n by
// importance sampling from P0^n with the exact weights prod(q/p0). Throws
// when the importance estimate is nonzero but its effective sample size
// drops below 50 (advice: smaller n).
PowerBound iid_power_bound(const Sampler& p0_sampler, const DensityHandle& q, int n, int n_reps,
                           std::uint64_t seed, const QuadratureGrid& grid);

struct FactorizationCheck {
    double lhs = 0.0; // rho_alpha of the product pair, by 2-d quadrature
    double rhs = 0.0; // product of the 1-d transforms
};

FactorizationCheck factorization_check(const DensityHandle& p0a, const DensityHandle& qa,
                                       const DensityHandle& p0b, const DensityHandle& qb,
                                       double alpha, const QuadratureGrid& grid_a,
                                       const QuadratureGrid& grid_b);

// True iff every probe of the cell [theta_lo, theta_hi] - endpoints, random
// interior members, and random 2-3 member convex combinations - carries
// misspec margin at least j^2 eps^2 / 4.
bool verify_cell(double theta_lo, double theta_hi, const DensityHandle& p0,
                 const DensityHandle& pstar, const ParametricFamily& family, double eps, int j,
                 int n_probe, std::uint64_t seed, const QuadratureGrid& grid);

struct ShellCell {
    double theta_lo = 0.0;
    double theta_hi = 0.0;
    double worst_theta = 0.0; // member of minimal margin, used by the cell test
    bool certified = false;
};

struct Shell {
    int j = 0;
    std::vector<ShellCell> cells;
};

struct ShellCover {
    double epsilon = 0.0;
    std::vector<Shell> shells;

    bool all_certified() const;
    std::size_t n_cells() const;
};

// Cover of the d-shells {j eps < d(theta, theta_star) <= (j+1) eps} for a
// family whose distance to theta_star increases with theta (theta_star at
// the left edge). Cells have d-diameter at most 2 A eps and are certified
// via verify_cell. Throws naming the first failing cell.
ShellCover build_shell_cover(const ParametricFamily& family, const DensityHandle& p0,
                             const DensityHandle& pstar, double theta_star,
                             const std::function<double(double)>& d_to_star, double eps, int max_j,
                             double cover_radius_factor, int n_probe, std::uint64_t seed,
                             const QuadratureGrid& grid);

struct ShellTest {
    TestFunction test;
    double type1_bound = 0.0;          // sum_j N_j exp(-n j^2 eps^2 / 4)
    double type2_bound = 0.0;          // exp(-n J^2 eps^2 / 4)
    double type1_bound_geometric = 0.0;// D eps-form: D e^{-n eps^2/4} / (1 - e^{-n eps^2/4})
    std::vector<int> cells_per_shell;
};

// Pointwise max of per-cell n-sample LR tests against each cell's worst
// member. Throws on an empty or uncertified cover.
ShellTest shell_test(const ShellCover& cover, const ParametricFamily& family,
                     const DensityHandle& p0, const DensityHandle& pstar, int n, int J);

struct ShellEmpirical {
    double type1_hat = 0.0;
    double type1_se = 0.0;
    double worst_type2_hat = 0.0;
    double type2_se = 0.0; // stderr at the worst probe
};

// Monte Carlo check of the shell test: type I under P0^n, worst type II over
// probe thetas with d(theta, theta_star) > J eps (importance sampling).
ShellEmpirical shell_test_empirical(const ShellTest& st, const ShellCover& cover,
                                    const ParametricFamily& family, const Sampler& p0_sampler,
                                    const DensityHandle& pstar,
                                    const std::vector<double>& probe_thetas, int n, int n_reps,
                                    std::uint64_t seed);

} // namespace misspec
