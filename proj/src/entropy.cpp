#include "misspec/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "misspec/divergence.hpp"
#include "misspec/normal.hpp"

namespace misspec {

CoverReport covering_number(int n_points, const PointMetric& d, double eps) {
    if (n_points < 0) throw std::invalid_argument("covering_number: negative point count");
    CoverReport rep;
    rep.epsilon = eps;
    rep.assignment.assign(n_points, -1);
    if (n_points == 0) return rep;

    const double diam = 2.0 * eps;
    std::vector<double> dist_to_centers(n_points, std::numeric_limits<double>::infinity());
    std::vector<char> covered(n_points, 0);
    int n_covered = 0;

    while (n_covered < n_points) {
        // Farthest-first seed among uncovered points; lowest index on ties.
        int seed = -1;
        double best = -1.0;
        for (int i = 0; i < n_points; ++i) {
            if (covered[i]) continue;
            const double di = rep.centers.empty() ? 0.0 : dist_to_centers[i];
            if (di > best) {
                best = di;
                seed = i;
            }
        }
        const int cell = static_cast<int>(rep.centers.size());
        rep.centers.push_back(seed);

        // Candidates ordered by distance to the seed; keep pairwise diameter.
        std::vector<std::pair<double, int>> cand;
        for (int i = 0; i < n_points; ++i) {
            if (covered[i]) continue;
            const double di = d(seed, i);
            if (di <= diam) cand.push_back({di, i});
        }
        std::sort(cand.begin(), cand.end());
        std::vector<int> cell_members;
        for (const auto& [di, i] : cand) {
            bool ok = true;
            for (int u : cell_members) {
                if (d(u, i) > diam) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            cell_members.push_back(i);
            covered[i] = 1;
            ++n_covered;
            rep.assignment[i] = cell;
            rep.radius_used = std::max(rep.radius_used, di);
        }
        for (int i = 0; i < n_points; ++i)
            if (!covered[i]) dist_to_centers[i] = std::min(dist_to_centers[i], d(seed, i));
    }
    rep.n_balls = static_cast<int>(rep.centers.size());
    return rep;
}

int brute_force_cover(int n_points, const PointMetric& d, double eps) {
    if (n_points <= 0) return 0;
    if (n_points > 16) throw std::invalid_argument("brute_force_cover: too many points");
    const double diam = 2.0 * eps;
    const int full = (1 << n_points) - 1;

    std::vector<std::vector<double>> dm(n_points, std::vector<double>(n_points, 0.0));
    for (int i = 0; i < n_points; ++i)
        for (int j = i + 1; j < n_points; ++j) dm[i][j] = dm[j][i] = d(i, j);

    // Candidate cells: subsets of diameter <= 2 eps. Per point, keep the
    // candidates containing it for the set-cover DP.
    std::vector<std::vector<int>> by_point(n_points);
    for (int mask = 1; mask <= full; ++mask) {
        bool ok = true;
        for (int i = 0; i < n_points && ok; ++i) {
            if (!(mask >> i & 1)) continue;
            for (int j = i + 1; j < n_points; ++j)
                if ((mask >> j & 1) && dm[i][j] > diam) {
                    ok = false;
                    break;
                }
        }
        if (!ok) continue;
        for (int i = 0; i < n_points; ++i)
            if (mask >> i & 1) by_point[i].push_back(mask);
    }

    std::vector<int> best(full + 1, n_points + 1);
    best[0] = 0;
    for (int covered = 0; covered < full; ++covered) {
        if (best[covered] > n_points) continue;
        int i = 0;
        while (covered >> i & 1) ++i; // lowest uncovered point
        for (int cell : by_point[i]) {
            const int next = covered | cell;
            best[next] = std::min(best[next], best[covered] + 1);
        }
    }
    return best[full];
}

double local_cover_radius_factor(double C, double c) {
    return std::min({1.0 / 8.0, 1.0 / (4.0 * std::sqrt(C)), 0.5 * c});
}

CoverReport local_cover_for_testing(const LocalCoverInput& in, double eps, int n_hull_probes,
                                    std::uint64_t seed, const QuadratureGrid& grid) {
    if (!(eps > 0.0)) throw std::invalid_argument("local_cover_for_testing: eps must be positive");
    std::vector<int> annulus;
    for (int i = 0; i < static_cast<int>(in.members.size()); ++i) {
        const double di = in.d_to_star(i);
        if (di > eps && di < 2.0 * eps) annulus.push_back(i);
    }
    CoverReport rep;
    rep.epsilon = local_cover_radius_factor(in.C, in.c) * eps;
    if (annulus.empty()) {
        rep.certified = true;
        return rep;
    }
    auto sub_metric = [&](int a, int b) { return in.d(annulus[a], annulus[b]); };
    CoverReport sub = covering_number(static_cast<int>(annulus.size()), sub_metric, rep.epsilon);

    rep.n_balls = sub.n_balls;
    rep.radius_used = sub.radius_used;
    rep.assignment.assign(in.members.size(), -1);
    for (std::size_t k = 0; k < annulus.size(); ++k) rep.assignment[annulus[k]] = sub.assignment[k];
    for (int c_idx : sub.centers) rep.centers.push_back(annulus[c_idx]);

    const double threshold = eps * eps / 4.0;
    for (int cell = 0; cell < sub.n_balls; ++cell) {
        std::vector<int> members;
        for (std::size_t k = 0; k < annulus.size(); ++k)
            if (sub.assignment[k] == cell) members.push_back(annulus[k]);

        auto fail = [&](double margin) {
            throw std::runtime_error("local_cover_for_testing: cell " + std::to_string(cell) +
                                     " failed certification (margin " + std::to_string(margin) +
                                     " < " + std::to_string(threshold) + ")");
        };
        for (int m : members) {
            const double margin = misspec_margin(in.p0, in.members[m], in.pstar, grid);
            if (margin < threshold) fail(margin);
        }
        CounterRng rng(derive_seed({seed, static_cast<std::uint64_t>(cell)}));
        for (int t = 0; t < n_hull_probes; ++t) {
            const int m = 2 + static_cast<int>(rng.uniform() * 2.0);
            std::vector<DensityHandle> parts;
            std::vector<double> lambdas(m);
            double s = 0.0;
            for (int u = 0; u < m; ++u) {
                parts.push_back(in.members[members[rng.next_u64() % members.size()]]);
                lambdas[u] = rng.uniform(0.05, 1.0);
                s += lambdas[u];
            }
            for (double& l : lambdas) l /= s;
            const double margin = misspec_margin(in.p0, convex_mix(parts, lambdas), in.pstar, grid);
            if (margin < threshold) fail(margin);
        }
    }
    rep.certified = true;
    return rep;
}

MixingDistribution random_mixing(CounterRng& rng, const std::vector<double>& support,
                                 double half_width) {
    const std::size_t K = support.size();
    std::vector<double> w(K, 0.0);
    const double u = rng.uniform();
    if (u < 0.5) {
        // Sparse: a few active atoms anywhere on the grid.
        const int active = 1 + static_cast<int>(rng.uniform() * 6.0);
        double s = 0.0;
        for (int a = 0; a < active; ++a) {
            const std::size_t j = rng.next_u64() % K;
            const double g = rng.exponential();
            w[j] += g;
            s += g;
        }
        for (double& x : w) x /= s;
    } else {
        // Dense: exponential weights, flat-Dirichlet style.
        double s = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            w[j] = rng.exponential();
            s += w[j];
        }
        for (double& x : w) x /= s;
    }
    return MixingDistribution{support, w, half_width};
}

EntropyCurve mixture_entropy_curve(double half_width, const std::vector<double>& eps_list,
                                   int n_probe, int support_points, std::uint64_t seed) {
    if (n_probe < 2) throw std::invalid_argument("mixture_entropy_curve: need n_probe >= 2");
    for (double e : eps_list)
        if (!(e > 0.0 && e < std::exp(-1.0)))
            throw std::invalid_argument("mixture_entropy_curve: eps must lie in (0, 1/e)");

    const std::vector<double> support = mixing_grid(half_width, support_points);
    const std::size_t K = support.size();

    // Evaluation grid for the sup norm.
    std::vector<double> xs;
    for (double x = -half_width - 4.0; x <= half_width + 4.0 + 1e-9; x += 0.05) xs.push_back(x);
    const std::size_t nx = xs.size();

    // Kernel values phi(x - z_j) once; each probed mixture is one weight row.
    std::vector<double> kernel(nx * K);
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < K; ++j) kernel[i * K + j] = norm_pdf(xs[i] - support[j]);

    std::vector<double> values(static_cast<std::size_t>(n_probe) * nx);
    CounterRng rng(derive_seed({seed, 0xE27}));
    for (int t = 0; t < n_probe; ++t) {
        const MixingDistribution F = random_mixing(rng, support, half_width);
        for (std::size_t i = 0; i < nx; ++i) {
            const double* row = &kernel[i * K];
            double acc = 0.0;
            for (std::size_t j = 0; j < K; ++j) acc += F.weights[j] * row[j];
            values[static_cast<std::size_t>(t) * nx + i] = acc;
        }
    }

    auto sup_dist = [&](int a, int b) {
        const double* ra = &values[static_cast<std::size_t>(a) * nx];
        const double* rb = &values[static_cast<std::size_t>(b) * nx];
        double m = 0.0;
        for (std::size_t i = 0; i < nx; ++i) m = std::max(m, std::fabs(ra[i] - rb[i]));
        return m;
    };

    EntropyCurve curve;
    for (double e : eps_list) {
        const CoverReport rep = covering_number(n_probe, sup_dist, e);
        curve.eps.push_back(e);
        curve.log_cover.push_back(std::log(static_cast<double>(rep.n_balls)));
    }

    // Fit log_cover ~ c * (log 1/eps)^gamma on informative points: at least
    // two cells, and not saturated against the probe count.
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < curve.eps.size(); ++i) {
        const double n_balls = std::exp(curve.log_cover[i]);
        if (n_balls < 1.5 || n_balls > 0.2 * n_probe) continue;
        lx.push_back(std::log(std::log(1.0 / curve.eps[i])));
        ly.push_back(std::log(curve.log_cover[i]));
    }
    curve.points_in_fit = static_cast<int>(lx.size());
    if (lx.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            mx += lx[i];
            my += ly[i];
        }
        mx /= lx.size();
        my /= ly.size();
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxy += (lx[i] - mx) * (ly[i] - my);
            sxx += (lx[i] - mx) * (lx[i] - mx);
        }
        curve.gamma_fit = sxy / sxx;
        curve.c_fit = std::exp(my - curve.gamma_fit * mx);
    }
    return curve;
}

} // namespace misspec
