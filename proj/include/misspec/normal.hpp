#pragma once

// Standard-normal special functions: pdf, cdf, complementary cdf with a
// log-space variant that stays finite far in the tail, and the quantile
// (Wichura's AS 241 rational approximation, ~1e-16 relative accuracy).

#include <cmath>
#include <limits>
#include <stdexcept>

namespace misspec {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178; // log sqrt(2*pi)

inline double norm_pdf(double z) { return std::exp(-0.5 * z * z - kLogSqrt2Pi); }

inline double norm_log_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865475244); }

inline double norm_ccdf(double z) { return 0.5 * std::erfc(z * 0.7071067811865475244); }

// log of the upper tail probability. erfc underflows past z ~ 37.5; beyond
// that an asymptotic expansion of the Mills ratio takes over.
inline double norm_log_ccdf(double z) {
    if (z < 36.0) {
        const double c = norm_ccdf(z);
        if (c > 0.0) return std::log(c);
    }
    const double z2 = z * z;
    // 1 - 1/z^2 + 3/z^4 - 15/z^6 + 105/z^8 - 945/z^10
    double series = 1.0;
    double term = 1.0;
    for (int k = 1; k <= 5; ++k) {
        term *= -(2.0 * k - 1.0) / z2;
        series += term;
    }
    return -0.5 * z2 - kLogSqrt2Pi - std::log(z) + std::log(series);
}

// AS 241 (PPND16). p in (0, 1).
inline double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("norm_quantile: p outside (0,1)");
    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r + 6.7265770927008700853e4) * r +
                    4.5921953931549871457e4) * r + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                  1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r + 3.9307895800092710610e4) * r +
                    2.1213794301586595867e4) * r + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                  4.2313330701600911252e1) * r + 1.0);
    }
    r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double v;
    if (r <= 5.0) {
        r -= 1.6;
        v = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
                 1.27045825245236838258e0) * r + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
               4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
                 1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
               2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        v = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
                 2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
               5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
                 7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
               5.99832206555887937690e-1) * r + 1.0);
    }
    return (q < 0.0) ? -v : v;
}

} // namespace misspec
