#include "misspec/quadrature.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace misspec {

void gauss_legendre_rule(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    if (n < 1) throw std::invalid_argument("gauss_legendre_rule: n must be positive");
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Chebyshev-based starting guess for the i-th root of P_n.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Legendre recurrence for P_n(x) and derivative.
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
}

namespace {

const std::pair<std::vector<double>, std::vector<double>>& cached_rule(int n) {
    static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    auto it = cache.find(n);
    if (it == cache.end()) {
        std::vector<double> x, w;
        gauss_legendre_rule(n, x, w);
        it = cache.emplace(n, std::make_pair(std::move(x), std::move(w))).first;
    }
    return it->second;
}

} // namespace

QuadratureGrid QuadratureGrid::gauss_legendre(double lower, double upper,
                                              int nodes_per_panel, double panel_width) {
    if (!(upper > lower)) throw std::invalid_argument("gauss_legendre: upper <= lower");
    if (panel_width <= 0.0) throw std::invalid_argument("gauss_legendre: panel_width <= 0");
    const auto& [ref_nodes, ref_weights] = cached_rule(nodes_per_panel);
    const int n_panels = std::max(1, static_cast<int>(std::ceil((upper - lower) / panel_width)));
    const double width = (upper - lower) / n_panels;

    QuadratureGrid g;
    g.lower = lower;
    g.upper = upper;
    g.scheme = Scheme::gauss_legendre;
    g.nodes.reserve(static_cast<std::size_t>(n_panels) * nodes_per_panel);
    g.weights.reserve(static_cast<std::size_t>(n_panels) * nodes_per_panel);
    for (int p = 0; p < n_panels; ++p) {
        const double a = lower + p * width;
        const double mid = a + 0.5 * width;
        const double half = 0.5 * width;
        for (int i = 0; i < nodes_per_panel; ++i) {
            g.nodes.push_back(mid + half * ref_nodes[i]);
            g.weights.push_back(half * ref_weights[i]);
        }
    }
    return g;
}

QuadratureGrid QuadratureGrid::trapezoid(double lower, double upper, int n_nodes) {
    if (!(upper > lower)) throw std::invalid_argument("trapezoid: upper <= lower");
    if (n_nodes < 2) throw std::invalid_argument("trapezoid: need at least 2 nodes");
    QuadratureGrid g;
    g.lower = lower;
    g.upper = upper;
    g.scheme = Scheme::trapezoid;
    const double h = (upper - lower) / (n_nodes - 1);
    g.nodes.resize(n_nodes);
    g.weights.assign(n_nodes, h);
    for (int i = 0; i < n_nodes; ++i) g.nodes[i] = lower + i * h;
    g.weights.front() = 0.5 * h;
    g.weights.back() = 0.5 * h;
    return g;
}

void QuadratureGrid::validate() const {
    if (nodes.size() != weights.size()) throw std::logic_error("grid: nodes/weights size mismatch");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i] < lower || nodes[i] > upper) throw std::logic_error("grid: node outside range");
        if (i > 0 && !(nodes[i] > nodes[i - 1])) throw std::logic_error("grid: nodes not increasing");
        if (!(weights[i] > 0.0)) throw std::logic_error("grid: nonpositive weight");
    }
    if (scheme == Scheme::trapezoid) {
        double s = 0.0;
        for (double w : weights) s += w;
        if (std::fabs(s - (upper - lower)) > 1e-12)
            throw std::logic_error("grid: trapezoid weights do not sum to the interval length");
    }
}

double integrate(const std::function<double(double)>& f, const QuadratureGrid& grid) {
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
        const double v = f(grid.nodes[i]);
        if (!std::isfinite(v))
            throw std::runtime_error("integrate: non-finite integrand at node x=" +
                                     std::to_string(grid.nodes[i]));
        acc += grid.weights[i] * v;
    }
    return acc;
}

const QuadratureGrid& default_grid() {
    static const QuadratureGrid g = QuadratureGrid::gauss_legendre(-24.0, 24.0);
    return g;
}

const QuadratureGrid& mixture_grid() {
    static const QuadratureGrid g = QuadratureGrid::gauss_legendre(-26.0, 26.0);
    return g;
}

} // namespace misspec
