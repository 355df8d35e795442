#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ddm/assembly.hpp"
#include "ddm/geometry.hpp"
#include "ddm/grid.hpp"

namespace ddm {

/// A problem instance together with its domain and default discretization.
struct NamedProblem {
    std::string name;
    ProblemSpec spec;
    DistanceField domain;
    Box box;
    std::size_t nx = 0, ny = 0, nt = 0;
    std::vector<double> epsilons;
};

enum class DomainShape { circle, flower };

inline DomainShape parse_domain_shape(const std::string& s) {
    if (s == "circle") return DomainShape::circle;
    if (s == "flower") return DomainShape::flower;
    throw Error("unknown domain '" + s + "' (expected circle or flower)");
}

inline DistanceField reference_domain(DomainShape shape) {
    if (shape == DomainShape::circle) return DistanceField::circle({0.0, 0.0}, 0.25);
    return DistanceField::flower({0.0, 0.0}, 0.18, 0.03, 4);
}

inline const char* to_string(DomainShape s) { return s == DomainShape::circle ? "circle" : "flower"; }

namespace detail {

// (1 - tanh z) / 2 without cancellation in the tails
inline double half_one_minus_tanh(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-2.0 * z);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(2.0 * z));
}

inline double sech2(double z) {
    const double e = std::exp(-2.0 * std::abs(z));
    return 4.0 * e / ((1.0 + e) * (1.0 + e));
}

inline NamedProblem unit_box_defaults(std::string name, DomainShape shape) {
    NamedProblem p{std::move(name), {}, reference_domain(shape), Box{-0.5, 0.5, -0.5, 0.5}, 512, 512, 512,
                   {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64}};
    return p;
}

}  // namespace detail

/// Constant coefficient diffusion u_t = 3 lap u + f(t, x, y, u) with
/// u = exp(-pi^2 t) (5/2 x^2 - 5x)(5/2 y^2 - 5y).
inline NamedProblem example1(DomainShape shape) {
    NamedProblem p = detail::unit_box_defaults(std::string("example1-") + to_string(shape), shape);
    constexpr double pi2 = std::numbers::pi * std::numbers::pi;
    auto poly = [](double s) { return 2.5 * s * s - 5.0 * s; };
    auto dpoly = [](double s) { return 5.0 * s - 5.0; };
    ProblemSpec& s = p.spec;
    s.diffusion = [](Point) { return 3.0; };
    s.kappa = 1.0 / 3.0;
    s.reaction = [=](double t, Point x, double u) {
        const double e = std::exp(-pi2 * t);
        const double px = poly(x.x), py = poly(x.y);
        return u - e * ((pi2 + 1.0) * px * py + 15.0 * px + 15.0 * py);
    };
    s.exact = [=](double t, Point x) { return std::exp(-pi2 * t) * poly(x.x) * poly(x.y); };
    s.exact_gradient = [=](double t, Point x) {
        const double e = std::exp(-pi2 * t);
        return Point{e * dpoly(x.x) * poly(x.y), e * poly(x.x) * dpoly(x.y)};
    };
    s.neumann = [grad = s.exact_gradient](double t, Point x, Point n) { return 3.0 * dot(grad(t, x), n); };
    s.initial = [=](Point x) { return poly(x.x) * poly(x.y); };
    s.final_time = 0.5;
    return p;
}

/// Variable coefficient diffusion with A = x^2 + y^2 + 4 and
/// u = exp(-pi^2 t) (2x^2 - 4x)(2y^2 - 4y).
inline NamedProblem example2(DomainShape shape) {
    NamedProblem p = detail::unit_box_defaults(std::string("example2-") + to_string(shape), shape);
    constexpr double pi2 = std::numbers::pi * std::numbers::pi;
    auto poly = [](double s) { return 2.0 * s * s - 4.0 * s; };
    auto dpoly = [](double s) { return 4.0 * s - 4.0; };
    auto coef = [](Point x) { return x.x * x.x + x.y * x.y + 4.0; };
    ProblemSpec& s = p.spec;
    s.diffusion = coef;
    s.kappa = 1.0 / 5.0;
    s.reaction = [=](double t, Point x, double) {
        const double e = std::exp(-pi2 * t);
        const double a = coef(x);
        const double px = poly(x.x), py = poly(x.y);
        return -e * (pi2 * px * py + (4.0 * a + 2.0 * x.x * dpoly(x.x)) * py + (4.0 * a + 2.0 * x.y * dpoly(x.y)) * px);
    };
    s.exact = [=](double t, Point x) { return std::exp(-pi2 * t) * poly(x.x) * poly(x.y); };
    s.exact_gradient = [=](double t, Point x) {
        const double e = std::exp(-pi2 * t);
        return Point{e * dpoly(x.x) * poly(x.y), e * poly(x.x) * dpoly(x.y)};
    };
    s.neumann = [=, grad = s.exact_gradient](double t, Point x, Point n) { return coef(x) * dot(grad(t, x), n); };
    s.initial = [=](Point x) { return poly(x.x) * poly(x.y); };
    s.final_time = 0.5;
    return p;
}

/// Parameters of the Allen-Cahn traveling wave.
struct AllenCahnParams {
    double width = 0.01;  // interface parameter of the double well
    double final_time = 0.185;

    double speed() const { return 3.0 / (std::numbers::sqrt2 * width); }
};

/// Allen-Cahn u_t = lap u - (u^3 - u) / w^2 on the flower, with the traveling
/// wave u = (1 - tanh((x - s t) / (2 sqrt2 w))) / 2, s = 3 / (sqrt2 w).
inline NamedProblem example3(AllenCahnParams ac = {}) {
    NamedProblem p{"example3-flower", {}, reference_domain(DomainShape::flower), Box{-0.5, 0.5, -0.5, 0.5}, 256, 64,
                   1024, {1.0 / 4, 1.0 / 8, 1.0 / 16, 1.0 / 32}};
    const double w = ac.width;
    const double w2 = w * w;
    const double speed = ac.speed();
    const double scale = 2.0 * std::numbers::sqrt2 * w;
    ProblemSpec& s = p.spec;
    s.diffusion = [](Point) { return 1.0; };
    s.kappa = 1.0;
    s.reaction = [w2](double, Point, double u) { return -(u * u * u - u) / w2; };
    s.reaction_derivative = [w2](double, Point, double u) { return -(3.0 * u * u - 1.0) / w2; };
    s.exact = [=](double t, Point x) { return detail::half_one_minus_tanh((x.x - speed * t) / scale); };
    s.exact_gradient = [=](double t, Point x) {
        return Point{-0.5 * detail::sech2((x.x - speed * t) / scale) / scale, 0.0};
    };
    s.neumann = [grad = s.exact_gradient](double t, Point x, Point n) { return dot(grad(t, x), n); };
    s.initial = [exact = s.exact](Point x) { return exact(0.0, x); };
    s.final_time = ac.final_time;
    s.blowup_limit = 10.0;
    return p;
}

struct FisherKppParams {
    std::string mask_path;
    double cell = 0.0;  // 0 selects box width / mask columns
    Box box{-0.5, 0.5, -0.5, 0.5};
    double rho = 1.0;
    double diffusion = 1e-3;
    Point seed_center{0.0, 0.0};
    double seed_width = 0.05;
    double seed_amplitude = 1.0;
    double final_time = 1.0;
};

/// u_t = div(A grad u) + rho u (1 - u) with zero flux on a masked domain.
/// The raster is anchored at the lower-left corner of the box.
inline NamedProblem fisher_kpp(const Mask& mask, const FisherKppParams& prm) {
    const double cell = prm.cell > 0.0 ? prm.cell : (prm.box.xmax - prm.box.xmin) / static_cast<double>(mask.cols);
    NamedProblem p{"fisher_kpp", {}, DistanceField::raster(mask, cell, {prm.box.xmin, prm.box.ymin}), prm.box, 128,
                   128, 200, {1.0 / 32}};
    if (!(prm.diffusion > 0.0)) throw Error("fisher_kpp: diffusion must be positive");
    if (!(prm.seed_width > 0.0)) throw Error("fisher_kpp: seed width must be positive");
    ProblemSpec& s = p.spec;
    const double a = prm.diffusion, rho = prm.rho;
    s.diffusion = [a](Point) { return a; };
    s.reaction = [rho](double, Point, double u) { return rho * u * (1.0 - u); };
    s.reaction_derivative = [rho](double, Point, double u) { return rho * (1.0 - 2.0 * u); };
    s.initial = [c = prm.seed_center, w = prm.seed_width, amp = prm.seed_amplitude](Point x) {
        const Point d = x - c;
        return amp * std::exp(-dot(d, d) / (2.0 * w * w));
    };
    s.final_time = prm.final_time;
    return p;
}

inline NamedProblem fisher_kpp(const FisherKppParams& prm) { return fisher_kpp(read_pgm(prm.mask_path), prm); }

/// Residual u_t - div(A grad u) - f of the exact solution at (t, x), by
/// central differences of the exact solution and coefficient.
inline double pde_residual(const ProblemSpec& s, double t, Point x, double h = 1e-4, double dt = 1e-7) {
    if (!s.exact) throw Error("pde_residual: problem has no exact solution");
    const auto& u = s.exact;
    const double ut = (u(t + dt, x) - u(t - dt, x)) / (2.0 * dt);
    auto flux_div = [&](Point e) {
        const Point xp = x + h * e, xm = x - h * e;
        const double ap = s.diffusion(x + (0.5 * h) * e), am = s.diffusion(x - (0.5 * h) * e);
        const double u0 = u(t, x);
        return (ap * (u(t, xp) - u0) - am * (u0 - u(t, xm))) / (h * h);
    };
    const double div = flux_div({1.0, 0.0}) + flux_div({0.0, 1.0});
    return ut - div - s.reaction(t, x, u(t, x));
}

/// Largest |residual| over seeded random space-time samples in the box.
inline double max_pde_residual(const NamedProblem& p, std::size_t samples, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(p.box.xmin, p.box.xmax), uy(p.box.ymin, p.box.ymax),
        ut(0.0, p.spec.final_time);
    double worst = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        const double t = ut(rng);
        const Point x{ux(rng), uy(rng)};
        worst = std::max(worst, std::abs(pde_residual(p.spec, t, x)));
    }
    return worst;
}

}  // namespace ddm
