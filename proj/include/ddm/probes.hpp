#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ddm/analysis.hpp"
#include "ddm/assembly.hpp"
#include "ddm/geometry.hpp"
#include "ddm/grid.hpp"

// Numerical probes of the weighted-space inequalities and diffuse integral
// approximations, on the reference circle of radius 1/4 in [-1/2, 1/2]^2.

namespace ddm::probes {

inline constexpr double kRadius = 0.25;

inline Box unit_box() { return {-0.5, 0.5, -0.5, 0.5}; }

inline DistanceField reference_circle() { return DistanceField::circle({0.0, 0.0}, kRadius); }

struct ProbeResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Observed orders log2(e_i / e_{i+1}).
inline std::vector<double> observed_orders(const std::vector<double>& errors) {
    std::vector<double> r;
    for (std::size_t i = 1; i < errors.size(); ++i) r.push_back(std::log2(errors[i - 1] / errors[i]));
    return r;
}

/// |int h omega_eps - exact| for each eps on an n x n grid of the unit box.
inline std::vector<double> volume_integral_errors(const std::function<double(Point)>& h, double exact,
                                                  const std::vector<double>& eps, std::size_t n) {
    const Grid grid(unit_box(), n, n);
    std::vector<double> out;
    for (double e : eps) {
        const WeightedQuadrature quad(grid, PhaseField(reference_circle(), e));
        out.push_back(std::abs(weighted_integral(quad, h) - exact));
    }
    return out;
}

/// Diffuse perimeter int |grad omega_eps| of the reference circle.
inline double diffuse_perimeter(double eps, std::size_t n) {
    const Grid grid(unit_box(), n, n);
    const WeightedQuadrature quad(grid, PhaseField(reference_circle(), eps));
    return diffuse_surface_integral(quad, [](Point) { return 1.0; });
}

struct TestFunction {
    std::string name;
    std::function<double(Point)> v;
    std::function<Point(Point)> grad;
};

inline std::vector<TestFunction> trace_family() {
    using std::numbers::pi;
    return {
        {"1", [](Point) { return 1.0; }, [](Point) { return Point{0.0, 0.0}; }},
        {"x", [](Point p) { return p.x; }, [](Point) { return Point{1.0, 0.0}; }},
        {"x^2", [](Point p) { return p.x * p.x; }, [](Point p) { return Point{2.0 * p.x, 0.0}; }},
        {"sin(pi x)cos(pi y)", [](Point p) { return std::sin(pi * p.x) * std::cos(pi * p.y); },
         [](Point p) {
             return Point{pi * std::cos(pi * p.x) * std::cos(pi * p.y), -pi * std::sin(pi * p.x) * std::sin(pi * p.y)};
         }},
    };
}

inline std::vector<TestFunction> poincare_family() {
    using std::numbers::pi;
    return {
        {"x", [](Point p) { return p.x; }, [](Point) { return Point{1.0, 0.0}; }},
        {"y", [](Point p) { return p.y; }, [](Point) { return Point{0.0, 1.0}; }},
        {"x^2-y^2", [](Point p) { return p.x * p.x - p.y * p.y; }, [](Point p) { return Point{2.0 * p.x, -2.0 * p.y}; }},
        {"sin(pi x)", [](Point p) { return std::sin(pi * p.x); },
         [](Point p) { return Point{pi * std::cos(pi * p.x), 0.0}; }},
    };
}

/// Largest ratio over the family, one entry per eps.
inline std::vector<double> max_ratio_per_epsilon(
    const std::vector<TestFunction>& family, const std::vector<double>& eps, std::size_t n,
    double (*ratio)(const WeightedQuadrature&, const std::function<double(Point)>&, const std::function<Point(Point)>&)) {
    const Grid grid(unit_box(), n, n);
    std::vector<double> out;
    for (double e : eps) {
        const WeightedQuadrature quad(grid, PhaseField(reference_circle(), e));
        double worst = 0.0;
        for (const auto& f : family) worst = std::max(worst, ratio(quad, f.v, f.grad));
        out.push_back(worst);
    }
    return out;
}

inline double spread(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi / *lo;
}

namespace detail {

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

inline std::string join(const std::vector<double>& v, const char* f = "%.3g") {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(f, v[i]);
    return s;
}

}  // namespace detail

/// Bounds, monotonicity and the analytic gradient of omega.
inline std::vector<ProbeResult> phase_field_probes() {
    std::vector<ProbeResult> out;
    const PhaseField pf(reference_circle(), 1.0 / 16);
    std::mt19937_64 rng(7);
    // beyond a few widths omega rounds to exactly 0 or 1
    const double width = 0.05;
    std::uniform_real_distribution<double> u(-5 * width, 5 * width);

    bool ok = PhaseField::omega_of(0.0, 0.1) == 0.5;
    for (int k = 0; k < 1000 && ok; ++k) {
        const double a = u(rng), b = u(rng);
        const double lo = std::min(a, b), hi = std::max(a, b);
        const double wl = PhaseField::omega_of(lo, width), wh = PhaseField::omega_of(hi, width);
        ok = wl > 0.0 && wl < 1.0 && wh > 0.0 && wh < 1.0 && (lo == hi || wl > wh);
    }
    out.push_back({"phase field bounds and monotonicity", ok, "1000 sampled pairs within five widths"});

    std::uniform_real_distribution<double> box(-0.4, 0.4);
    double worst = 0.0;
    const double step = 1e-6 * pf.epsilon();
    for (int k = 0; k < 200; ++k) {
        const Point x{box(rng), box(rng)};
        const double gx = (pf.omega(x + Point{step, 0}) - pf.omega(x - Point{step, 0})) / (2 * step);
        const double gy = (pf.omega(x + Point{0, step}) - pf.omega(x - Point{0, step})) / (2 * step);
        const double fd = std::hypot(gx, gy), an = pf.grad_omega_mag(x);
        if (an > 1e-3) worst = std::max(worst, std::abs(fd - an) / an);
    }
    out.push_back({"grad omega against central differences", worst < 1e-5,
                   "max rel diff " + detail::fmt("%.2e", worst)});
    return out;
}

/// Observed orders of |int h omega - int_D h| for h = 1 and h = x^2 against
/// the disk integrals pi r^2 and pi r^4 / 4; each must be >= 1.4.
inline std::vector<ProbeResult> volume_order_probes(std::size_t n = 512) {
    using std::numbers::pi;
    const std::vector<double> eps{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
    const double r = kRadius;
    std::vector<ProbeResult> out;
    auto probe = [&](const char* name, const std::function<double(Point)>& h, double exact) {
        const auto errors = volume_integral_errors(h, exact, eps, n);
        const auto orders = observed_orders(errors);
        out.push_back({name, *std::min_element(orders.begin(), orders.end()) >= 1.4,
                       "errors " + detail::join(errors) + ", orders " + detail::join(orders, "%.2f")});
    };
    probe("volume integral h=1 order >= 1.4", [](Point) { return 1.0; }, pi * r * r);
    probe("volume integral h=x^2 order >= 1.4", [](Point p) { return p.x * p.x; }, pi * r * r * r * r / 4);
    return out;
}

/// int |grad omega| at eps = 1/32 on a 256^2 grid within 2% of 2 pi r.
inline ProbeResult perimeter_probe() {
    using std::numbers::pi;
    const double per = diffuse_perimeter(1.0 / 32, 256);
    const double rel = std::abs(per - 2 * pi * kRadius) / (2 * pi * kRadius);
    return {"diffuse perimeter within 2%", rel <= 0.02,
            "value " + detail::fmt("%.10f", per) + ", relative error " + detail::fmt("%.2e", rel)};
}

/// Trace and Poincare ratios, maximized over their families, vary by less
/// than 3x over eps = 1/8 .. 1/64.
inline std::vector<ProbeResult> ratio_probes(std::size_t n = 256) {
    const std::vector<double> eps{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
    const auto tr = max_ratio_per_epsilon(trace_family(), eps, n, trace_ratio);
    const auto pr = max_ratio_per_epsilon(poincare_family(), eps, n, poincare_ratio);
    return {{"trace ratio bounded", spread(tr) < 3.0, "ratios " + detail::join(tr)},
            {"poincare ratio bounded", spread(pr) < 3.0, "ratios " + detail::join(pr)}};
}

}  // namespace ddm::probes
