#pragma once

// Deterministic 1-d quadrature: composite Gauss-Legendre panels (the default
// for every density integral in this library) and a trapezoid fallback.

#include <functional>
#include <string>
#include <vector>

namespace misspec {

struct QuadratureGrid {
    enum class Scheme { gauss_legendre, trapezoid };

    double lower = 0.0;
    double upper = 0.0;
    std::vector<double> nodes;
    std::vector<double> weights;
    Scheme scheme = Scheme::gauss_legendre;

    std::size_t size() const { return nodes.size(); }

    // Composite rule: panels of width <= panel_width, nodes_per_panel each.
    static QuadratureGrid gauss_legendre(double lower, double upper,
                                         int nodes_per_panel = 64,
                                         double panel_width = 1.0);

    static QuadratureGrid trapezoid(double lower, double upper, int n_nodes);

    // Throws if nodes are not strictly increasing inside [lower, upper] or
    // trapezoid weights fail to sum to the interval length.
    void validate() const;
};

// Gauss-Legendre rule on [-1, 1]; nodes to machine precision via Newton.
void gauss_legendre_rule(int n, std::vector<double>& nodes, std::vector<double>& weights);

// Sum of weights * f(nodes). Throws (naming the node) if f is non-finite anywhere.
double integrate(const std::function<double(double)>& f, const QuadratureGrid& grid);

// Wide default grid: Gaussian-tailed integrands in every scenario are below
// 1e-30 outside [-24, 24].
const QuadratureGrid& default_grid();

// Wider grid for mixture-weighted integrands, whose ratio weights push mass
// further into the tails.
const QuadratureGrid& mixture_grid();

} // namespace misspec
