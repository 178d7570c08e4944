#include "misspec/testing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace misspec {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
} // namespace

TestFunction lr_test(const DensityHandle& p, const DensityHandle& q) {
    auto lp = p.log_density;
    auto lq = q.log_density;
    TestFunction t;
    t.decide = [lp, lq](std::span<const Point> xs) -> double {
        if (xs.size() != 1) throw std::invalid_argument("lr_test: expects a single observation");
        return lp(xs[0]) < lq(xs[0]) ? 1.0 : 0.0;
    };
    t.description = "1{" + p.label + " < " + q.label + "}";
    return t;
}

TestFunction product_lr_test(const DensityHandle& p, const DensityHandle& q) {
    auto lp = p.log_density;
    auto lq = q.log_density;
    TestFunction t;
    t.decide = [lp, lq](std::span<const Point> xs) -> double {
        double s = 0.0;
        for (const Point& x : xs) {
            const double a = lp(x), b = lq(x);
            if (a == kNegInf && b == kNegInf) continue;
            if (a == kNegInf) return 1.0; // p vanished: any q-mass wins
            if (b == kNegInf) return 0.0;
            s += b - a;
        }
        return s > 0.0 ? 1.0 : 0.0;
    };
    t.description = "prod 1{" + p.label + " < " + q.label + "}";
    return t;
}

double test_risk(const TestFunction& t, const DensityHandle& p0, const DensityHandle& q,
                 const QuadratureGrid& grid) {
    auto decide_at = [&](double x) {
        const Point pt{x, 0.0};
        const double phi = t.decide(std::span<const Point>(&pt, 1));
        if (phi < -1e-12 || phi > 1.0 + 1e-12)
            throw std::runtime_error("test_risk: decision outside [0,1]");
        return phi;
    };

    // Indicator tests jump; a panel straddling a switch wrecks the
    // quadrature. Locate the switches by bisection and cut panels there.
    std::vector<double> cuts = {grid.lower, grid.upper};
    double prev = decide_at(grid.nodes.front());
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double cur = decide_at(grid.nodes[i]);
        if (std::fabs(cur - prev) > 1e-12) {
            double lo = grid.nodes[i - 1], hi = grid.nodes[i];
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo + hi);
                (std::fabs(decide_at(mid) - prev) > 1e-12 ? hi : lo) = mid;
            }
            cuts.push_back(0.5 * (lo + hi));
        }
        prev = cur;
    }
    std::sort(cuts.begin(), cuts.end());

    double acc = 0.0;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        if (!(cuts[s + 1] > cuts[s] + 1e-13)) continue;
        const QuadratureGrid piece = QuadratureGrid::gauss_legendre(cuts[s], cuts[s + 1], 32, 1.0);
        for (std::size_t i = 0; i < piece.size(); ++i) {
            const Point x{piece.nodes[i], 0.0};
            const double phi = decide_at(piece.nodes[i]);
            acc += piece.weights[i] * (p0.at(x) * phi + q.at(x) * (1.0 - phi));
        }
    }
    return acc;
}

PowerBound iid_power_bound(const Sampler& p0_sampler, const DensityHandle& q, int n, int n_reps,
                           std::uint64_t seed, const QuadratureGrid& grid) {
    if (n < 1 || n_reps < 2) throw std::invalid_argument("iid_power_bound: need n >= 1, n_reps >= 2");
    const DensityHandle& p0 = p0_sampler.target;

    PowerBound out;
    out.margin = sup_log_margin(p0, q, grid);
    out.bound = std::exp(-static_cast<double>(n) * out.margin);

    auto lp0 = p0.log_density;
    auto lq = q.log_density;

    double t1_mean = 0.0, t1_m2 = 0.0;
    double t2_mean = 0.0, t2_m2 = 0.0;
    double v_sum = 0.0, v_sqsum = 0.0;
    for (int r = 0; r < n_reps; ++r) {
        const auto xs = p0_sampler.draw(derive_seed({seed, static_cast<std::uint64_t>(r)}),
                                        static_cast<std::size_t>(n));
        double log_w = 0.0;
        bool q_dead = false;
        for (const Point& x : xs) {
            const double b = lq(x);
            if (b == kNegInf) {
                q_dead = true;
                break;
            }
            log_w += b - lp0(x);
        }
        const double reject = (!q_dead && log_w > 0.0) ? 1.0 : 0.0;
        const double v = (q_dead || reject > 0.5) ? 0.0 : std::exp(log_w); // weight * 1{accept}

        double delta = reject - t1_mean;
        t1_mean += delta / (r + 1);
        t1_m2 += delta * (reject - t1_mean);
        delta = v - t2_mean;
        t2_mean += delta / (r + 1);
        t2_m2 += delta * (v - t2_mean);
        v_sum += v;
        v_sqsum += v * v;
    }
    out.type1_hat = t1_mean;
    out.type1_se = std::sqrt(t1_m2 / (n_reps - 1) / n_reps);
    out.type2_hat = t2_mean;
    out.type2_se = std::sqrt(t2_m2 / (n_reps - 1) / n_reps);
    out.ess = v_sqsum > 0.0 ? v_sum * v_sum / v_sqsum : static_cast<double>(n_reps);
    if (v_sum > 0.0 && out.ess < 50.0)
        throw std::runtime_error("iid_power_bound: importance effective sample size " +
                                 std::to_string(out.ess) + " < 50; use a smaller n");
    return out;
}

FactorizationCheck factorization_check(const DensityHandle& p0a, const DensityHandle& qa,
                                       const DensityHandle& p0b, const DensityHandle& qb,
                                       double alpha, const QuadratureGrid& grid_a,
                                       const QuadratureGrid& grid_b) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("factorization_check: alpha outside (0,1)");

    std::vector<double> ua(grid_a.size()), ub(grid_b.size());
    for (std::size_t i = 0; i < grid_a.size(); ++i) {
        const double l0 = p0a.log_at(grid_a.nodes[i]);
        const double lq = qa.log_at(grid_a.nodes[i]);
        ua[i] = (l0 == kNegInf || lq == kNegInf) ? kNegInf : alpha * l0 + (1.0 - alpha) * lq;
    }
    for (std::size_t j = 0; j < grid_b.size(); ++j) {
        const double l0 = p0b.log_at(grid_b.nodes[j]);
        const double lq = qb.log_at(grid_b.nodes[j]);
        ub[j] = (l0 == kNegInf || lq == kNegInf) ? kNegInf : alpha * l0 + (1.0 - alpha) * lq;
    }

    FactorizationCheck out;
    double acc = 0.0;
    for (std::size_t i = 0; i < grid_a.size(); ++i) {
        if (ua[i] == kNegInf) continue;
        double row = 0.0;
        for (std::size_t j = 0; j < grid_b.size(); ++j) {
            if (ub[j] == kNegInf) continue;
            row += grid_b.weights[j] * std::exp(ua[i] + ub[j]);
        }
        acc += grid_a.weights[i] * row;
    }
    out.lhs = acc;
    out.rhs = hellinger_transform(p0a, qa, alpha, grid_a) * hellinger_transform(p0b, qb, alpha, grid_b);
    return out;
}

bool verify_cell(double theta_lo, double theta_hi, const DensityHandle& p0,
                 const DensityHandle& pstar, const ParametricFamily& family, double eps, int j,
                 int n_probe, std::uint64_t seed, const QuadratureGrid& grid) {
    if (n_probe < 2) throw std::invalid_argument("verify_cell: need n_probe >= 2");
    const double threshold = static_cast<double>(j) * j * eps * eps / 4.0;

    auto margin_of = [&](const DensityHandle& p) { return misspec_margin(p0, p, pstar, grid); };

    // Single members: endpoints first, then interior draws.
    CounterRng rng(seed);
    std::vector<double> thetas = {theta_lo, theta_hi};
    for (int i = 2; i < n_probe; ++i) thetas.push_back(rng.uniform(theta_lo, theta_hi));
    for (double th : thetas)
        if (margin_of(family.density_at(th)) < threshold) return false;

    // Random convex combinations of 2-3 members of the cell.
    for (int i = 0; i < n_probe; ++i) {
        const int m = 2 + static_cast<int>(rng.uniform() * 2.0);
        std::vector<DensityHandle> parts;
        std::vector<double> lambdas(m);
        double s = 0.0;
        for (int t = 0; t < m; ++t) {
            parts.push_back(family.density_at(rng.uniform(theta_lo, theta_hi)));
            lambdas[t] = rng.uniform(0.05, 1.0);
            s += lambdas[t];
        }
        for (double& l : lambdas) l /= s;
        if (margin_of(convex_mix(parts, lambdas)) < threshold) return false;
    }
    return true;
}

bool ShellCover::all_certified() const {
    for (const Shell& s : shells)
        for (const ShellCell& c : s.cells)
            if (!c.certified) return false;
    return true;
}

std::size_t ShellCover::n_cells() const {
    std::size_t n = 0;
    for (const Shell& s : shells) n += s.cells.size();
    return n;
}

ShellCover build_shell_cover(const ParametricFamily& family, const DensityHandle& p0,
                             const DensityHandle& pstar, double theta_star,
                             const std::function<double(double)>& d_to_star, double eps, int max_j,
                             double cover_radius_factor, int n_probe, std::uint64_t seed,
                             const QuadratureGrid& grid) {
    if (!(eps > 0.0)) throw std::invalid_argument("build_shell_cover: eps must be positive");
    ShellCover cover;
    cover.epsilon = eps;

    // Invert the monotone distance d(theta) by bisection on [theta_star, hi].
    auto theta_at_d = [&](double target) {
        double lo = theta_star, hi = family.theta_hi;
        if (d_to_star(hi) <= target) return hi;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (d_to_star(mid) < target ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };

    const double d_max = d_to_star(family.theta_hi);
    for (int j = 1; j <= max_j; ++j) {
        const double d_lo = j * eps;
        if (d_lo >= d_max) break;
        const double d_hi = std::min((j + 1.0) * eps, d_max);
        Shell shell;
        shell.j = j;
        const int n_cells = std::max(1, static_cast<int>(std::ceil(
                                             (d_hi - d_lo) / (2.0 * cover_radius_factor * eps))));
        for (int i = 0; i < n_cells; ++i) {
            const double a = d_lo + (d_hi - d_lo) * i / n_cells;
            const double b = d_lo + (d_hi - d_lo) * (i + 1) / n_cells;
            ShellCell cell;
            cell.theta_lo = theta_at_d(a);
            cell.theta_hi = theta_at_d(b);
            cell.worst_theta = cell.theta_lo; // margin grows with the distance
            cell.certified =
                verify_cell(cell.theta_lo, cell.theta_hi, p0, pstar, family, eps, j, n_probe,
                            derive_seed({seed, static_cast<std::uint64_t>(j),
                                         static_cast<std::uint64_t>(i)}),
                            grid);
            if (!cell.certified)
                throw std::runtime_error("build_shell_cover: certification failed for shell " +
                                         std::to_string(j) + " cell [" +
                                         std::to_string(cell.theta_lo) + ", " +
                                         std::to_string(cell.theta_hi) + "]");
            shell.cells.push_back(cell);
        }
        cover.shells.push_back(std::move(shell));
    }
    return cover;
}

ShellTest shell_test(const ShellCover& cover, const ParametricFamily& family,
                     const DensityHandle& /*p0*/, const DensityHandle& pstar, int n, int J) {
    if (cover.shells.empty()) throw std::invalid_argument("shell_test: empty cover");
    if (!cover.all_certified()) throw std::invalid_argument("shell_test: cover has uncertified cells");

    // Per-cell worst-member log ratio log(q_w/p0) = log(p_w/pstar).
    std::vector<std::function<double(const Point&)>> cell_log_ratios;
    for (const Shell& s : cover.shells) {
        for (const ShellCell& c : s.cells) {
            auto lw = family.density_at(c.worst_theta).log_density;
            auto ls = pstar.log_density;
            cell_log_ratios.push_back(
                [lw, ls](const Point& x) { return lw(x) - ls(x); });
        }
    }

    ShellTest out;
    out.test.decide = [cell_log_ratios](std::span<const Point> xs) -> double {
        for (const auto& lr : cell_log_ratios) {
            double s = 0.0;
            for (const Point& x : xs) s += lr(x);
            if (s > 0.0) return 1.0;
        }
        return 0.0;
    };
    out.test.description = "max over certified cells of product LR tests";

    const double ne2 = static_cast<double>(n) * cover.epsilon * cover.epsilon;
    double t1 = 0.0;
    int max_cells = 0;
    for (const Shell& s : cover.shells) {
        t1 += static_cast<double>(s.cells.size()) * std::exp(-ne2 * s.j * s.j / 4.0);
        out.cells_per_shell.push_back(static_cast<int>(s.cells.size()));
        max_cells = std::max(max_cells, static_cast<int>(s.cells.size()));
    }
    out.type1_bound = t1;
    out.type2_bound = std::exp(-ne2 * static_cast<double>(J) * J / 4.0);
    const double e = std::exp(-ne2 / 4.0);
    out.type1_bound_geometric = e < 1.0 ? max_cells * e / (1.0 - e)
                                        : std::numeric_limits<double>::infinity();
    return out;
}

ShellEmpirical shell_test_empirical(const ShellTest& st, const ShellCover& cover,
                                    const ParametricFamily& family, const Sampler& p0_sampler,
                                    const DensityHandle& pstar,
                                    const std::vector<double>& probe_thetas, int n, int n_reps,
                                    std::uint64_t seed) {
    (void)cover;
    ShellEmpirical out;
    auto ls = pstar.log_density;

    double t1_mean = 0.0, t1_m2 = 0.0;
    std::vector<double> t2_mean(probe_thetas.size(), 0.0), t2_m2(probe_thetas.size(), 0.0);
    std::vector<std::function<double(const Point&)>> probe_log_ratio;
    for (double th : probe_thetas) {
        auto lt = family.density_at(th).log_density;
        probe_log_ratio.push_back([lt, ls](const Point& x) { return lt(x) - ls(x); });
    }

    for (int r = 0; r < n_reps; ++r) {
        const auto xs = p0_sampler.draw(derive_seed({seed, 0xE, static_cast<std::uint64_t>(r)}),
                                        static_cast<std::size_t>(n));
        const double phi = st.test.decide(xs);
        double delta = phi - t1_mean;
        t1_mean += delta / (r + 1);
        t1_m2 += delta * (phi - t1_mean);

        for (std::size_t k = 0; k < probe_thetas.size(); ++k) {
            // Weight for Q(theta)^n from P0^n draws: q_theta/p0 = p_theta/pstar.
            double log_w = 0.0;
            for (const Point& x : xs) log_w += probe_log_ratio[k](x);
            const double v = phi > 0.5 ? 0.0 : std::exp(log_w);
            delta = v - t2_mean[k];
            t2_mean[k] += delta / (r + 1);
            t2_m2[k] += delta * (v - t2_mean[k]);
        }
    }
    out.type1_hat = t1_mean;
    out.type1_se = std::sqrt(t1_m2 / (n_reps - 1) / n_reps);
    for (std::size_t k = 0; k < probe_thetas.size(); ++k) {
        if (t2_mean[k] >= out.worst_type2_hat) {
            out.worst_type2_hat = t2_mean[k];
            out.type2_se = std::sqrt(t2_m2[k] / (n_reps - 1) / n_reps);
        }
    }
    return out;
}

} // namespace misspec
