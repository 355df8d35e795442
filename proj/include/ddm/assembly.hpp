#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ddm/common.hpp"
#include "ddm/geometry.hpp"
#include "ddm/grid.hpp"
#include "ddm/linalg.hpp"

namespace ddm {

/// Diffusion coefficient left the admissible range at a quadrature point.
class CoercivityError : public Error {
  public:
    using Error::Error;
};

/// How the Neumann datum is carried off the boundary into the diffuse band.
enum class NeumannExtension {
    /// g(t, x) = g(t, p(x)) with p(x) = x - d(x) n(x) the closest boundary
    /// point: constant along normals.
    normal_constant,
    /// g evaluated at x itself with the normal field n(x) = grad d(x).
    pointwise,
};

/// Coefficients and data of a semilinear parabolic problem with Neumann
/// boundary data. Every field must be evaluable on the whole covering box.
struct ProblemSpec {
    std::function<double(Point)> diffusion;
    /// f(t, x, u)
    std::function<double(double, Point, double)> reaction;
    /// Optional df/du(t, x, u); enables implicit treatment of stiff decay.
    std::function<double(double, Point, double)> reaction_derivative;
    /// g(t, x, n) with n the outward unit normal field of the domain.
    std::function<double(double, Point, Point)> neumann;
    std::function<double(Point)> initial;
    std::function<double(double, Point)> exact;
    std::function<Point(double, Point)> exact_gradient;
    double final_time = 1.0;
    /// Declared coercivity bound kappa <= A <= 1/kappa; 0 checks only A > 0.
    double kappa = 0.0;
    /// Runs abort when |u| exceeds this bound.
    double blowup_limit = std::numeric_limits<double>::infinity();
};

inline std::string format_point(Point p) {
    std::ostringstream os;
    os.precision(17);
    os << "(" << p.x << ", " << p.y << ")";
    return os.str();
}

/// Quadrature points of every cell together with the phase-field weight
/// sampled there: w * detJ * omega for volume terms, w * detJ * |grad omega|
/// for diffuse surface terms, the unit normal and the closest boundary
/// point. Built once per (grid, weight, rule) and shared by every assembly
/// and norm routine.
class WeightedQuadrature {
  public:
    template <class Weight>
    WeightedQuadrature(const Grid& grid, const Weight& weight, const QuadratureRule& rule)
        : grid_(grid), rule_(rule), nq_(rule.points.size()) {
        for (const auto& qp : rule.points) {
            ShapeValues s = q1_shape(qp.xi, qp.eta);
            for (auto& d : s.d_xi) d *= 2.0 / grid.hx();
            for (auto& d : s.d_eta) d *= 2.0 / grid.hy();
            shapes_.push_back(s);
        }
        const std::size_t total = grid.cell_count() * nq_;
        points_.resize(total);
        w_volume_.resize(total);
        w_surface_.resize(total);
        normals_.resize(total);
        feet_.resize(total);
        const double jac = grid.jacobian();
        parallel_for(0, grid.cell_count(), [&](std::size_t c) {
            for (std::size_t q = 0; q < nq_; ++q) {
                const auto& qp = rule.points[q];
                const Point x = grid.map(c, qp.xi, qp.eta);
                const WeightSample ws = weight.sample(x);
                const std::size_t k = c * nq_ + q;
                points_[k] = x;
                w_volume_[k] = qp.weight * jac * ws.omega;
                w_surface_[k] = qp.weight * jac * ws.grad_mag;
                normals_[k] = ws.normal;
                feet_[k] = x - ws.distance * ws.normal;
            }
        });
    }

    template <class Weight>
    WeightedQuadrature(const Grid& grid, const Weight& weight, int order = 4)
        : WeightedQuadrature(grid, weight, gauss_rule(order)) {}

    const Grid& grid() const { return grid_; }
    const QuadratureRule& rule() const { return rule_; }
    std::size_t points_per_cell() const { return nq_; }
    std::size_t size() const { return points_.size(); }

    /// Shape values and physical gradients at quadrature point q of any cell.
    const ShapeValues& shape(std::size_t q) const { return shapes_[q]; }

    Point point(std::size_t k) const { return points_[k]; }
    double volume_weight(std::size_t k) const { return w_volume_[k]; }
    double surface_weight(std::size_t k) const { return w_surface_[k]; }
    Point normal(std::size_t k) const { return normals_[k]; }
    Point boundary_point(std::size_t k) const { return feet_[k]; }

  private:
    Grid grid_;
    QuadratureRule rule_;
    std::size_t nq_;
    std::vector<ShapeValues> shapes_;
    std::vector<Point> points_;
    std::vector<double> w_volume_, w_surface_;
    std::vector<Point> normals_, feet_;
};

/// Value of the Q1 interpolant of u at quadrature point q of cell c.
inline double interpolant_at(const WeightedQuadrature& quad, const std::array<std::size_t, 4>& nodes, std::size_t q,
                             const Vector& u) {
    const auto& s = quad.shape(q);
    return s.value[0] * u[nodes[0]] + s.value[1] * u[nodes[1]] + s.value[2] * u[nodes[2]] + s.value[3] * u[nodes[3]];
}

inline Point interpolant_gradient_at(const WeightedQuadrature& quad, const std::array<std::size_t, 4>& nodes,
                                     std::size_t q, const Vector& u) {
    const auto& s = quad.shape(q);
    Point g{0.0, 0.0};
    for (int a = 0; a < 4; ++a) g = g + u[nodes[a]] * Point{s.d_xi[a], s.d_eta[a]};
    return g;
}

/// Nine-point sparsity pattern of Q1 on the grid, zero-valued.
inline CsrMatrix q1_pattern(const Grid& g) {
    CsrMatrix m;
    m.n = g.node_count();
    m.row_ptr.reserve(m.n + 1);
    m.col.reserve(9 * m.n);
    for (std::size_t j = 0; j <= g.ny(); ++j) {
        for (std::size_t i = 0; i <= g.nx(); ++i) {
            for (std::size_t jj = j > 0 ? j - 1 : 0; jj <= std::min(j + 1, g.ny()); ++jj)
                for (std::size_t ii = i > 0 ? i - 1 : 0; ii <= std::min(i + 1, g.nx()); ++ii)
                    m.col.push_back(static_cast<std::uint32_t>(g.node(ii, jj)));
            m.row_ptr.push_back(m.col.size());
        }
    }
    m.val.assign(m.col.size(), 0.0);
    return m;
}

namespace detail {

// Calls fn(c, a) for each cell c adjacent to node (i, j), a being the node's
// local index in c. Cells are visited in increasing index order.
template <class Fn>
void for_adjacent_cells(const Grid& g, std::size_t i, std::size_t j, Fn&& fn) {
    static constexpr int local[2][2] = {{0, 3}, {1, 2}};  // [di][dj]
    for (int dj = 1; dj >= 0; --dj) {
        if (j < static_cast<std::size_t>(dj) || j - dj >= g.ny()) continue;
        for (int di = 1; di >= 0; --di) {
            if (i < static_cast<std::size_t>(di) || i - di >= g.nx()) continue;
            const std::size_t c = (j - dj) * g.nx() + (i - di);
            fn(c, local[di][dj]);
        }
    }
}

}  // namespace detail

/// Assembles a matrix from per-cell 4x4 element matrices. Element matrices
/// are computed independently, then every row gathers its contributions in
/// a fixed cell order, so the result does not depend on the worker count.
template <class ElementFn>
CsrMatrix assemble_matrix(const Grid& g, ElementFn&& element) {
    std::vector<std::array<double, 16>> local(g.cell_count());
    parallel_for(0, g.cell_count(), [&](std::size_t c) { element(c, local[c]); });
    CsrMatrix m = q1_pattern(g);
    parallel_for(0, m.n, [&](std::size_t row) {
        const std::size_t i = row % (g.nx() + 1), j = row / (g.nx() + 1);
        detail::for_adjacent_cells(g, i, j, [&](std::size_t c, int a) {
            const auto nodes = g.cell_nodes(c);
            for (int b = 0; b < 4; ++b) {
                for (std::size_t k = m.row_ptr[row]; k < m.row_ptr[row + 1]; ++k) {
                    if (m.col[k] == nodes[b]) {
                        m.val[k] += local[c][4 * a + b];
                        break;
                    }
                }
            }
        });
    });
    return m;
}

/// Assembles a nodal vector from per-cell element vectors.
template <class ElementFn>
Vector assemble_vector(const Grid& g, ElementFn&& element) {
    std::vector<std::array<double, 4>> local(g.cell_count());
    parallel_for(0, g.cell_count(), [&](std::size_t c) { element(c, local[c]); });
    Vector v(g.node_count(), 0.0);
    parallel_for(0, v.size(), [&](std::size_t n) {
        const std::size_t i = n % (g.nx() + 1), j = n / (g.nx() + 1);
        double s = 0.0;
        detail::for_adjacent_cells(g, i, j, [&](std::size_t c, int a) { s += local[c][a]; });
        v[n] = s;
    });
    return v;
}

/// M_ij = int N_i N_j omega.
inline CsrMatrix assemble_weighted_mass(const WeightedQuadrature& quad) {
    const Grid& g = quad.grid();
    const std::size_t nq = quad.points_per_cell();
    return assemble_matrix(g, [&](std::size_t c, std::array<double, 16>& e) {
        e.fill(0.0);
        for (std::size_t q = 0; q < nq; ++q) {
            const double w = quad.volume_weight(c * nq + q);
            const auto& s = quad.shape(q);
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) e[4 * a + b] += w * s.value[a] * s.value[b];
        }
    });
}

/// M_ij = int coeff(x, u_h) N_i N_j omega, a state-dependent weighted mass.
template <class Coeff>
CsrMatrix assemble_coefficient_mass(const WeightedQuadrature& quad, const Vector& u, Coeff&& coeff) {
    const Grid& g = quad.grid();
    const std::size_t nq = quad.points_per_cell();
    if (u.size() != g.node_count()) throw Error("assembly: state vector has wrong length");
    return assemble_matrix(g, [&](std::size_t c, std::array<double, 16>& e) {
        e.fill(0.0);
        const auto nodes = g.cell_nodes(c);
        for (std::size_t q = 0; q < nq; ++q) {
            const std::size_t k = c * nq + q;
            const double w = quad.volume_weight(k) * coeff(quad.point(k), interpolant_at(quad, nodes, q, u));
            const auto& s = quad.shape(q);
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) e[4 * a + b] += w * s.value[a] * s.value[b];
        }
    });
}

/// K_ij = int A grad N_i . grad N_j omega. A is checked against the
/// coercivity bound at every quadrature point.
inline CsrMatrix assemble_weighted_stiffness(const WeightedQuadrature& quad, const std::function<double(Point)>& diffusion,
                                             double kappa = 0.0) {
    const Grid& g = quad.grid();
    const std::size_t nq = quad.points_per_cell();
    return assemble_matrix(g, [&](std::size_t c, std::array<double, 16>& e) {
        e.fill(0.0);
        for (std::size_t q = 0; q < nq; ++q) {
            const std::size_t k = c * nq + q;
            const double a_val = diffusion(quad.point(k));
            const bool ok = kappa > 0.0 ? (a_val >= kappa && a_val <= 1.0 / kappa) : a_val > 0.0;
            if (!ok || !std::isfinite(a_val)) {
                std::ostringstream os;
                os << "coercivity violation: A = " << a_val << " at " << format_point(quad.point(k));
                if (kappa > 0.0) os << " outside [" << kappa << ", " << 1.0 / kappa << "]";
                throw CoercivityError(os.str());
            }
            const double w = quad.volume_weight(k) * a_val;
            const auto& s = quad.shape(q);
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b)
                    e[4 * a + b] += w * (s.d_xi[a] * s.d_xi[b] + s.d_eta[a] * s.d_eta[b]);
        }
    });
}

/// b_i = int f(t, x, u_h) N_i omega.
inline Vector assemble_source(const WeightedQuadrature& quad, const std::function<double(double, Point, double)>& f,
                              double t, const Vector& u) {
    const Grid& g = quad.grid();
    const std::size_t nq = quad.points_per_cell();
    if (u.size() != g.node_count()) throw Error("assembly: state vector has wrong length");
    return assemble_vector(g, [&](std::size_t c, std::array<double, 4>& e) {
        e.fill(0.0);
        const auto nodes = g.cell_nodes(c);
        for (std::size_t q = 0; q < nq; ++q) {
            const std::size_t k = c * nq + q;
            const double uh = interpolant_at(quad, nodes, q, u);
            const double fv = f(t, quad.point(k), uh);
            if (!std::isfinite(fv))
                throw Error("source: non-finite f at " + format_point(quad.point(k)) + " (u = " + std::to_string(uh) + ")");
            const double w = quad.volume_weight(k) * fv;
            const auto& s = quad.shape(q);
            for (int a = 0; a < 4; ++a) e[a] += w * s.value[a];
        }
    });
}

/// c_i = int g(t, x, n) N_i |grad omega|, the diffuse Neumann load.
inline Vector assemble_boundary_load(const WeightedQuadrature& quad,
                                     const std::function<double(double, Point, Point)>& g_fn, double t,
                                     NeumannExtension ext = NeumannExtension::normal_constant) {
    const Grid& g = quad.grid();
    const std::size_t nq = quad.points_per_cell();
    return assemble_vector(g, [&](std::size_t c, std::array<double, 4>& e) {
        e.fill(0.0);
        for (std::size_t q = 0; q < nq; ++q) {
            const std::size_t k = c * nq + q;
            const double ws = quad.surface_weight(k);
            if (ws == 0.0) continue;
            const Point x = ext == NeumannExtension::normal_constant ? quad.boundary_point(k) : quad.point(k);
            const double gv = g_fn(t, x, quad.normal(k));
            if (!std::isfinite(gv)) throw Error("boundary load: non-finite g at " + format_point(x));
            const auto& s = quad.shape(q);
            for (int a = 0; a < 4; ++a) e[a] += ws * gv * s.value[a];
        }
    });
}

/// Nodal interpolant of fn on the grid.
inline Vector interpolate(const Grid& g, const std::function<double(Point)>& fn) {
    Vector v(g.node_count());
    parallel_for(0, v.size(), [&](std::size_t n) { v[n] = fn(g.node_point(n)); });
    return v;
}

}  // namespace ddm
