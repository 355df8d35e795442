#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ddm/assembly.hpp"
#include "ddm/common.hpp"

namespace ddm {

using ExactFn = std::function<double(double, Point)>;
using ExactGradFn = std::function<Point(double, Point)>;

/// sqrt( int (u_h - u(t))^2 omega ).
inline double weighted_l2_error(const WeightedQuadrature& quad, const Vector& uh, const ExactFn& exact, double t) {
    if (!exact) throw Error("weighted_l2_error: problem has no exact solution");
    const Grid& g = quad.grid();
    if (uh.size() != g.node_count()) throw Error("weighted_l2_error: vector has wrong length");
    const std::size_t nq = quad.points_per_cell();
    const double sum = deterministic_sum(g.cell_count(), [&](std::size_t c) {
        const auto nodes = g.cell_nodes(c);
        double s = 0.0;
        for (std::size_t q = 0; q < nq; ++q) {
            const std::size_t k = c * nq + q;
            const double e = interpolant_at(quad, nodes, q, uh) - exact(t, quad.point(k));
            s += quad.volume_weight(k) * e * e;
        }
        return s;
    });
    return std::sqrt(sum);
}

/// Full weighted H1 norm of the error: sqrt(|e|^2 + |grad e|^2 weighted).
inline double weighted_h1_error(const WeightedQuadrature& quad, const Vector& uh, const ExactFn& exact,
                                const ExactGradFn& exact_grad, double t) {
    if (!exact) throw Error("weighted_h1_error: problem has no exact solution");
    if (!exact_grad) throw Error("weighted_h1_error: problem has no exact gradient");
    const Grid& g = quad.grid();
    if (uh.size() != g.node_count()) throw Error("weighted_h1_error: vector has wrong length");
    const std::size_t nq = quad.points_per_cell();
    const double sum = deterministic_sum(g.cell_count(), [&](std::size_t c) {
        const auto nodes = g.cell_nodes(c);
        double s = 0.0;
        for (std::size_t q = 0; q < nq; ++q) {
            const std::size_t k = c * nq + q;
            const Point x = quad.point(k);
            const double e = interpolant_at(quad, nodes, q, uh) - exact(t, x);
            const Point ge = interpolant_gradient_at(quad, nodes, q, uh) - exact_grad(t, x);
            s += quad.volume_weight(k) * (e * e + dot(ge, ge));
        }
        return s;
    });
    return std::sqrt(sum);
}

/// int h omega over the covering box.
inline double weighted_integral(const WeightedQuadrature& quad, const std::function<double(Point)>& h) {
    return deterministic_sum(quad.size(), [&](std::size_t k) { return quad.volume_weight(k) * h(quad.point(k)); });
}

/// int h |grad omega| over the covering box, the diffuse surface integral.
inline double diffuse_surface_integral(const WeightedQuadrature& quad, const std::function<double(Point)>& h) {
    return deterministic_sum(quad.size(), [&](std::size_t k) {
        const double w = quad.surface_weight(k);
        return w == 0.0 ? 0.0 : w * h(quad.point(k));
    });
}

struct ErrorReport {
    double epsilon = 0.0;
    double l2_weighted = 0.0;
    std::optional<double> h1_weighted;
    std::size_t nx = 0, ny = 0, nt = 0;
    double seconds = 0.0;
    std::size_t cg_iterations = 0;
};

struct RateRow {
    double epsilon = 0.0;
    double l2_error = 0.0;
    std::optional<double> l2_rate;
    std::optional<double> h1_error;
    std::optional<double> h1_rate;
    std::size_t nx = 0, ny = 0, nt = 0;
    std::optional<double> seconds;
};

/// Errors and observed orders log2(e_prev / e_next) over halving epsilon.
struct RateTable {
    std::vector<RateRow> rows;

    std::vector<double> l2_rates() const {
        std::vector<double> r;
        for (const auto& row : rows)
            if (row.l2_rate) r.push_back(*row.l2_rate);
        return r;
    }
    std::vector<double> h1_rates() const {
        std::vector<double> r;
        for (const auto& row : rows)
            if (row.h1_rate) r.push_back(*row.h1_rate);
        return r;
    }

    static constexpr const char* kCsvHeader = "epsilon,l2_error,l2_rate,h1_error,h1_rate,nx,ny,nt,seconds";

    std::string csv() const {
        std::ostringstream os;
        os << kCsvHeader << "\n";
        auto num = [&os](std::optional<double> v) {
            if (v) os << format_exact(*v);
        };
        for (const auto& r : rows) {
            os << format_exact(r.epsilon) << "," << format_exact(r.l2_error) << ",";
            num(r.l2_rate);
            os << ",";
            num(r.h1_error);
            os << ",";
            num(r.h1_rate);
            os << "," << r.nx << "," << r.ny << "," << r.nt << ",";
            num(r.seconds);
            os << "\n";
        }
        return os.str();
    }

    std::string text() const {
        std::ostringstream os;
        os << std::setw(10) << "epsilon" << std::setw(14) << "L2 error" << std::setw(8) << "CR" << std::setw(14)
           << "H1 error" << std::setw(8) << "CR" << "\n";
        for (const auto& r : rows) {
            os << std::setw(10) << epsilon_label(r.epsilon) << std::setw(14) << sci(r.l2_error) << std::setw(8)
               << (r.l2_rate ? fixed2(*r.l2_rate) : "-") << std::setw(14) << (r.h1_error ? sci(*r.h1_error) : "-")
               << std::setw(8) << (r.h1_rate ? fixed2(*r.h1_rate) : "-") << "\n";
        }
        return os.str();
    }

    static std::string format_exact(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

  private:
    static std::string sci(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4e", v);
        return buf;
    }
    static std::string fixed2(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return buf;
    }
    static std::string epsilon_label(double eps) {
        const double inv = 1.0 / eps;
        if (std::abs(inv - std::round(inv)) < 1e-9 * inv) return "1/" + std::to_string(static_cast<long>(std::round(inv)));
        return sci(eps);
    }
};

/// True when b is a within relative tolerance of a / 2.
inline bool is_halving(double a, double b) { return std::abs(a - 2.0 * b) <= 1e-12 * a; }

inline RateTable rate_table(const std::vector<ErrorReport>& reports, bool include_seconds = false) {
    if (reports.empty()) throw Error("rate_table: no reports");
    RateTable t;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const ErrorReport& r = reports[i];
        RateRow row;
        row.epsilon = r.epsilon;
        row.l2_error = r.l2_weighted;
        row.h1_error = r.h1_weighted;
        row.nx = r.nx;
        row.ny = r.ny;
        row.nt = r.nt;
        if (include_seconds) row.seconds = r.seconds;
        if (i > 0) {
            const ErrorReport& p = reports[i - 1];
            if (!is_halving(p.epsilon, r.epsilon)) throw Error("rate_table: eps must halve between consecutive reports");
            row.l2_rate = std::log2(p.l2_weighted / r.l2_weighted);
            if (p.h1_weighted && r.h1_weighted) row.h1_rate = std::log2(*p.h1_weighted / *r.h1_weighted);
        }
        t.rows.push_back(row);
    }
    return t;
}

/// Ratio int |v|^2 |grad omega| / ||v||^2_{H1(omega)} for one phase field.
inline double trace_ratio(const WeightedQuadrature& quad, const std::function<double(Point)>& v,
                          const std::function<Point(Point)>& grad_v) {
    const double lhs = deterministic_sum(quad.size(), [&](std::size_t k) {
        const double val = v(quad.point(k));
        return quad.surface_weight(k) * val * val;
    });
    const double rhs = deterministic_sum(quad.size(), [&](std::size_t k) {
        const Point x = quad.point(k);
        const double val = v(x);
        const Point g = grad_v(x);
        return quad.volume_weight(k) * (val * val + dot(g, g));
    });
    return lhs / rhs;
}

/// Ratio ||v||^2_{L2(omega)} / ( ||grad v||^2_{L2(omega)} + int |v|^2 |grad omega| ).
inline double poincare_ratio(const WeightedQuadrature& quad, const std::function<double(Point)>& v,
                             const std::function<Point(Point)>& grad_v) {
    const double lhs = deterministic_sum(quad.size(), [&](std::size_t k) {
        const double val = v(quad.point(k));
        return quad.volume_weight(k) * val * val;
    });
    const double rhs = deterministic_sum(quad.size(), [&](std::size_t k) {
        const Point x = quad.point(k);
        const double val = v(x);
        const Point g = grad_v(x);
        return quad.volume_weight(k) * dot(g, g) + quad.surface_weight(k) * val * val;
    });
    return lhs / rhs;
}

}  // namespace ddm
