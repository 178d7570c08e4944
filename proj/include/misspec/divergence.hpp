#pragma once

// Distances and transforms between measures: Kullback-Leibler, L1, Hellinger
// and weighted Hellinger, the Hellinger transform rho_alpha with its curve
// diagnostics, the sup-over-alpha margin that drives every test error
// exponent, KL-neighborhood membership, and the expansion/moment-bound
// envelopes used by the inequality harness.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "misspec/density.hpp"
#include "misspec/quadrature.hpp"

namespace misspec {

// -------------------------------------------------------------------------
// Basic divergences
// -------------------------------------------------------------------------

// Integral of p0 * log(p0/p); +inf when p vanishes on a p0-positive node.
double kl_divergence(const DensityHandle& p0, const DensityHandle& p, const QuadratureGrid& grid);

// h with h^2 = (1/2) * integral of (sqrt p - sqrt q)^2.
double hellinger(const DensityHandle& p, const DensityHandle& q, const QuadratureGrid& grid);
double hellinger_sq(const DensityHandle& p, const DensityHandle& q, const QuadratureGrid& grid);

double l1_distance(const DensityHandle& p, const DensityHandle& q, const QuadratureGrid& grid);

// factor * integral of (sqrt p1 - sqrt p2)^2 * (p0/pstar). The natural
// squared distance for convex misspecified models carries factor 1/4; the
// mixture-model variant uses 1/2. Throws on p0 > 0 where pstar = 0.
double weighted_hellinger_sq(const DensityHandle& p1, const DensityHandle& p2,
                             const DensityHandle& p0, const DensityHandle& pstar,
                             const QuadratureGrid& grid, double factor = 0.25);

// -------------------------------------------------------------------------
// Hellinger transform
// -------------------------------------------------------------------------

// integral of p0^alpha * q^(1-alpha), alpha in (0,1). Finite for finite
// measures by Holder.
double hellinger_transform(const DensityHandle& p0, const DensityHandle& q, double alpha,
                           const QuadratureGrid& grid);

// Same transform with the exponent on q: integral of q^beta * p0^(1-beta).
// This is the orientation plotted as a curve in beta.
double transform_value(const DensityHandle& p0, const DensityHandle& q, double beta,
                       const QuadratureGrid& grid);

struct TransformCurve {
    std::vector<double> alphas; // increasing, interior of (0,1); exponent on q
    std::vector<double> values;
    double left_limit = 0.0;    // P0(q > 0), the alpha -> 0 limit
    double right_limit = 0.0;   // mass of q on {p0 > 0}, the alpha -> 1 limit
    double slope_at_zero = 0.0; // integral of p0 * log(q/p0) over {q > 0}; -inf allowed

    void validate() const;                      // discrete convexity
    void write_table(std::ostream& os) const;   // two-column "alpha,rho" text
};

TransformCurve transform_curve(const DensityHandle& p0, const DensityHandle& q, int n_alphas,
                               const QuadratureGrid& grid);

// -------------------------------------------------------------------------
// Margins
// -------------------------------------------------------------------------

// sup over alpha in (0,1) of -log integral p0 * (p/pstar)^alpha, located by
// golden-section on the convex log-transform plus endpoint probes at 1e-6.
// Returns 0 when p = pstar. Throws if the sampled transform fails convexity
// (an integration failure).
double misspec_margin(const DensityHandle& p0, const DensityHandle& p, const DensityHandle& pstar,
                      const QuadratureGrid& grid);

// Same supremum for a direct pair (p0, q): sup_alpha -log rho_alpha.
double sup_log_margin(const DensityHandle& p0, const DensityHandle& q, const QuadratureGrid& grid);

// -------------------------------------------------------------------------
// KL neighborhoods
// -------------------------------------------------------------------------

struct KLNeighborhoodSpec {
    double epsilon;
    DensityHandle pstar;
    DensityHandle p0;

    // Checks at construction that p0's KL divergence to pstar is finite.
    KLNeighborhoodSpec(double eps, DensityHandle pstar_, DensityHandle p0_,
                       const QuadratureGrid& grid = default_grid());
};

// True iff both -P0 log(p/pstar) <= eps^2 and P0 (log(p/pstar))^2 <= eps^2.
bool in_kl_neighborhood(const KLNeighborhoodSpec& spec, const DensityHandle& p,
                        const QuadratureGrid& grid);

// The two moments above, exposed for reuse.
struct KlMoments {
    double mean_log = 0.0; // -P0 log(p/pstar)
    double sq_log = 0.0;   // P0 (log(p/pstar))^2
};
KlMoments kl_neighborhood_moments(const DensityHandle& p0, const DensityHandle& pstar,
                                  const DensityHandle& p, const QuadratureGrid& grid);

// -------------------------------------------------------------------------
// Expansion residuals and moment-bound envelopes
// -------------------------------------------------------------------------

struct ExpansionResidual {
    double lhs = 0.0;      // |1 - P0 (q/p)^alpha - alpha * P0 log(p/q)|
    double envelope = 0.0; // alpha^2 * P0[(sqrt(q/p)-1)^2 1{q>p} + (log(p/q))^2 1{q<=p}]
};

ExpansionResidual expansion_residual(const DensityHandle& p0, const DensityHandle& p,
                                     const DensityHandle& q, double alpha,
                                     const QuadratureGrid& grid);

// Alternative single-measure envelope with a tilted squared logarithm:
// alpha^2 * P0[(log(p/q))^2 ((q/p)^alpha 1{q>p} + 1{q<=p})].
double envelope_log_tilted(const DensityHandle& p0, const DensityHandle& p, const DensityHandle& q,
                           double alpha, const QuadratureGrid& grid);

// Convex-combination envelopes (q = sum lambda_i q_i on the left-hand side):
// 2 alpha^2 sum_i lambda_i P0[(sqrt(q_i/p)-1)^2 + (log(q_i/p))^2]
double mixture_envelope_sqrt_log(const DensityHandle& p0, const DensityHandle& p,
                                 const std::vector<DensityHandle>& qs,
                                 const std::vector<double>& lambdas, double alpha,
                                 const QuadratureGrid& grid);
// 2 alpha^2 sum_i lambda_i P0[(log(q_i/p))^2 ((q_i/p)^2 + 1)]
double mixture_envelope_log_tilted(const DensityHandle& p0, const DensityHandle& p,
                                   const std::vector<DensityHandle>& qs,
                                   const std::vector<double>& lambdas, double alpha,
                                   const QuadratureGrid& grid);

// lhs of the expansion for an explicit convex combination.
double expansion_lhs(const DensityHandle& p0, const DensityHandle& p, const DensityHandle& q,
                     double alpha, const QuadratureGrid& grid);

// -------------------------------------------------------------------------
// Log-moment bound (KL and squared log bounded via Hellinger and L1)
// -------------------------------------------------------------------------

struct LogMomentBound {
    double kl = 0.0;    // P log(p/q)
    double sqlog = 0.0; // P (log(p/q))^2
    double rhs1 = 0.0;  // h^2 * (1 + (1/b) log+ 1/h + (1/b) log+ P(p/q)^b) + |p - q|_1
    double rhs2 = 0.0;  // h^2 * (...)^2
};

// Here h^2 is the unhalved integral of (sqrt p - sqrt q)^2, matching the
// envelope derivation for finite measures q. Precondition (throws if
// violated): 0 < h^2 < eps_b(b) * P(p/q)^b.
LogMomentBound log_moment_bound_check(const DensityHandle& p, const DensityHandle& q, double b,
                                      const QuadratureGrid& grid);

// (0.4 ^ eps_b'' ^ 4)^b with eps_b'' = 1 for b >= 1 and, for b < 1, the
// largest scanned cutoff below which x^b * r(x) stays increasing.
double log_moment_regime_bound(double b);

// -------------------------------------------------------------------------
// Calibrated constants (see calibrate_* below; seeds recorded there)
// -------------------------------------------------------------------------

// Frozen multipliers turning the "up to a universal constant" inequalities
// into testable ones. Calibrated once by maximizing lhs/envelope over the
// 500-tuple seeded family below (observed maxima 1.93, 0.50, 0.41, 0.17 and
// 1.13), rounded up to the next integer and hard-coded.
inline constexpr double kExpansionConstSqrtLog = 2.0;   // single q, sqrt/log envelope
inline constexpr double kExpansionConstLogTilted = 1.0; // single q, tilted log^2 envelope
inline constexpr double kMixtureConstSqrtLog = 1.0;     // convex combinations
inline constexpr double kMixtureConstLogTilted = 1.0;
inline constexpr double kLogMomentConst = 2.0;          // kl/rhs1 and sqlog/rhs2
inline constexpr std::uint64_t kCalibrationSeed = 0x5EEDCA11BULL;

struct CalibrationReport {
    double max_ratio = 0.0;
    int argmax_index = -1;
};

enum class EnvelopeForm { sqrt_log, log_tilted, mixture_sqrt_log, mixture_log_tilted };

CalibrationReport calibrate_expansion_constant(EnvelopeForm form, std::uint64_t seed, int n_tuples,
                                               const QuadratureGrid& grid);
CalibrationReport calibrate_log_moment_constant(std::uint64_t seed, int n_tuples,
                                                const QuadratureGrid& grid);

} // namespace misspec
