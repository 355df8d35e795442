#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ddm/common.hpp"

namespace ddm {

struct Box {
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;

    double area() const { return (xmax - xmin) * (ymax - ymin); }
};

/// Uniform tensor grid of bilinear cells. Nodes are numbered
/// lexicographically, x fastest.
class Grid {
  public:
    Grid(Box box, std::size_t nx, std::size_t ny) : box_(box), nx_(nx), ny_(ny) {
        if (nx < 2 || ny < 2) throw Error("grid: nx and ny must be at least 2");
        if (!(box.xmax > box.xmin) || !(box.ymax > box.ymin) || !std::isfinite(box.area()))
            throw Error("grid: degenerate box");
        hx_ = (box.xmax - box.xmin) / static_cast<double>(nx);
        hy_ = (box.ymax - box.ymin) / static_cast<double>(ny);
    }

    const Box& box() const { return box_; }
    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }
    double hx() const { return hx_; }
    double hy() const { return hy_; }
    std::size_t node_count() const { return (nx_ + 1) * (ny_ + 1); }
    std::size_t cell_count() const { return nx_ * ny_; }

    std::size_t node(std::size_t i, std::size_t j) const { return j * (nx_ + 1) + i; }

    Point node_point(std::size_t n) const {
        const std::size_t i = n % (nx_ + 1), j = n / (nx_ + 1);
        return {x_of(i), y_of(j)};
    }

    // Coordinates are computed from the index directly so the last node
    // lands exactly on the box edge.
    double x_of(std::size_t i) const {
        return i == nx_ ? box_.xmax : box_.xmin + static_cast<double>(i) * hx_;
    }
    double y_of(std::size_t j) const {
        return j == ny_ ? box_.ymax : box_.ymin + static_cast<double>(j) * hy_;
    }

    /// Node indices of cell c, counterclockwise from the lower-left corner.
    std::array<std::size_t, 4> cell_nodes(std::size_t c) const {
        const std::size_t i = c % nx_, j = c / nx_;
        return {node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)};
    }

    /// Maps reference coordinates in [-1, 1]^2 to the physical point in cell c.
    Point map(std::size_t c, double xi, double eta) const {
        const std::size_t i = c % nx_, j = c / nx_;
        const double x0 = x_of(i), y0 = y_of(j);
        return {x0 + 0.5 * (xi + 1.0) * (x_of(i + 1) - x0), y0 + 0.5 * (eta + 1.0) * (y_of(j + 1) - y0)};
    }

    /// Jacobian determinant of the reference map.
    double jacobian() const { return 0.25 * hx_ * hy_; }

  private:
    Box box_;
    std::size_t nx_, ny_;
    double hx_ = 0.0, hy_ = 0.0;
};

inline Grid make_grid(Box box, std::size_t nx, std::size_t ny) { return Grid(box, nx, ny); }

/// Reference vertex signs, matching Grid::cell_nodes order.
inline constexpr std::array<double, 4> kRefX{-1.0, 1.0, 1.0, -1.0};
inline constexpr std::array<double, 4> kRefY{-1.0, -1.0, 1.0, 1.0};

struct ShapeValues {
    std::array<double, 4> value;
    std::array<double, 4> d_xi;
    std::array<double, 4> d_eta;
};

/// Bilinear shape functions N_a = (1 + xi_a xi)(1 + eta_a eta) / 4.
inline ShapeValues q1_shape(double xi, double eta) {
    ShapeValues s{};
    for (int a = 0; a < 4; ++a) {
        const double fx = 1.0 + kRefX[a] * xi, fy = 1.0 + kRefY[a] * eta;
        s.value[a] = 0.25 * fx * fy;
        s.d_xi[a] = 0.25 * kRefX[a] * fy;
        s.d_eta[a] = 0.25 * kRefY[a] * fx;
    }
    return s;
}

struct QuadraturePoint {
    double xi, eta, weight;
};

struct QuadratureRule {
    std::vector<QuadraturePoint> points;
    int order = 0;  // points per axis
};

/// One-dimensional Gauss-Legendre nodes and weights on [-1, 1].
inline std::vector<std::pair<double, double>> gauss_legendre_1d(int n) {
    std::vector<std::pair<double, double>> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        double x = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int m = 2; m <= n; ++m) {
                const double p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        out[static_cast<std::size_t>(k)] = {x, 2.0 / ((1.0 - x * x) * dp * dp)};
    }
    return out;
}

/// Tensor Gauss-Legendre rule with n points per axis.
inline QuadratureRule gauss_rule(int n) {
    if (n < 2 || n > 5) throw Error("gauss_rule: unsupported order " + std::to_string(n) + " (expected 2..5)");
    const auto g = gauss_legendre_1d(n);
    QuadratureRule rule;
    rule.order = n;
    for (const auto& [y, wy] : g)
        for (const auto& [x, wx] : g) rule.points.push_back({x, y, wx * wy});
    return rule;
}

}  // namespace ddm
