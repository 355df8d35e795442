#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "ddm/analysis.hpp"
#include "ddm/problems.hpp"
#include "ddm/timestepper.hpp"

using namespace ddm;
using Catch::Approx;
using std::numbers::pi;

namespace {

Mask disk_mask(std::size_t n, double radius_px) {
    Mask m{n, n, std::vector<std::uint8_t>(n * n, 0)};
    const double c = 0.5 * static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            const double x = i + 0.5 - c, y = j + 0.5 - c;
            m.inside[j * n + i] = x * x + y * y <= radius_px * radius_px;
        }
    return m;
}

// Independent hand-written gradients of the exact solutions.
Point grad_example1(double t, Point x) {
    const double e = std::exp(-pi * pi * t);
    const double px = 2.5 * x.x * x.x - 5 * x.x, py = 2.5 * x.y * x.y - 5 * x.y;
    return {e * (5 * x.x - 5) * py, e * px * (5 * x.y - 5)};
}

Point grad_example2(double t, Point x) {
    const double e = std::exp(-pi * pi * t);
    const double px = 2 * x.x * x.x - 4 * x.x, py = 2 * x.y * x.y - 4 * x.y;
    return {e * (4 * x.x - 4) * py, e * px * (4 * x.y - 4)};
}

}  // namespace

TEST_CASE("example 1") {
    for (DomainShape shape : {DomainShape::circle, DomainShape::flower}) {
        const NamedProblem p = example1(shape);
        CHECK(p.spec.final_time == 0.5);
        CHECK(p.box.xmin == -0.5);
        CHECK(p.box.ymax == 0.5);
        CHECK(p.spec.diffusion({0.3, -0.2}) == 3.0);
        CHECK(p.spec.exact(0.0, {0.1, 0.1}) == Approx(0.225625).epsilon(1e-14));
        CHECK(p.spec.initial({0.1, 0.1}) == Approx(0.225625).epsilon(1e-14));
        CHECK(max_pde_residual(p, 100, 7) < 1e-6);
    }
    CHECK(example1(DomainShape::circle).domain({0.25, 0.0}) == Approx(0.0).margin(1e-15));
    CHECK(example1(DomainShape::flower).domain({0.18, 0.0}) == Approx(0.0).margin(1e-9));
}

TEST_CASE("example 2") {
    for (DomainShape shape : {DomainShape::circle, DomainShape::flower}) {
        const NamedProblem p = example2(shape);
        CHECK(p.spec.diffusion({0.0, 0.0}) == 4.0);
        CHECK(p.spec.kappa == Approx(0.2));
        CHECK(max_pde_residual(p, 100, 11) < 1e-6);
        // kappa <= A <= 1/kappa on the box; A ranges over [4, 4.5]
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        for (int k = 0; k < 1000; ++k) {
            const double a = p.spec.diffusion({u(rng), u(rng)});
            CHECK(a >= 4.0);
            CHECK(a <= 4.5);
            CHECK(a >= p.spec.kappa);
            CHECK(a <= 1.0 / p.spec.kappa);
        }
        CHECK(p.spec.diffusion({0.5, 0.5}) == 4.5);
    }
}

TEST_CASE("Neumann data equals the conormal derivative of the exact solution") {
    struct Case {
        NamedProblem p;
        Point (*grad)(double, Point);
    };
    const std::vector<Case> cases{{example1(DomainShape::circle), &grad_example1},
                                  {example2(DomainShape::circle), &grad_example2}};
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> th(0.0, 2 * pi), band(-0.05, 0.05), tt(0.0, 0.5);
    for (const auto& c : cases) {
        for (int k = 0; k < 200; ++k) {
            const double theta = th(rng), r = 0.25 + band(rng), t = tt(rng);
            const Point x{r * std::cos(theta), r * std::sin(theta)};
            const Point n{std::cos(theta), std::sin(theta)};
            const double oracle = c.p.spec.diffusion(x) * dot(c.grad(t, x), n);
            CHECK(c.p.spec.neumann(t, x, n) == Approx(oracle).margin(1e-8));
            // the circle's own normal field agrees with the analytic one
            const DistanceSample s = c.p.domain.sample(x);
            CHECK(s.gradient.x == Approx(n.x).margin(1e-12));
            CHECK(s.gradient.y == Approx(n.y).margin(1e-12));
        }
    }
    // on the circle at (0.25, 0): g = 3 u_x
    const NamedProblem ex1 = example1(DomainShape::circle);
    CHECK(ex1.spec.neumann(0.1, {0.25, 0.0}, {1.0, 0.0}) == Approx(3 * grad_example1(0.1, {0.25, 0.0}).x).margin(1e-15));
}

TEST_CASE("example 3 traveling wave") {
    const NamedProblem p = example3();
    const AllenCahnParams ac;
    const double s = ac.speed();
    CHECK(s == Approx(3.0 / (std::sqrt(2.0) * 0.01)));
    CHECK(p.nx == 256);
    CHECK(p.ny == 64);
    for (double t : {0.0, 0.001, 0.002}) CHECK(p.spec.exact(t, {s * t, 0.1}) == Approx(0.5).margin(1e-15));
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-0.5, 0.5), tt(0.0, p.spec.final_time);
    for (int k = 0; k < 1000; ++k) {
        // strictly inside (0, 1) within a few widths of the front
        const double t = tt(rng);
        const double v = p.spec.exact(t, {s * t + 0.1 * u(rng), u(rng)});
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    const double w = 0.01;
    CHECK(max_pde_residual(p, 100, 21) < 1e-4 / (w * w));
    CHECK(p.spec.reaction(0.0, {0, 0}, 1.0) == 0.0);
    CHECK(p.spec.reaction(0.0, {0, 0}, 0.5) == Approx(-(0.125 - 0.5) / (w * w)));
}

TEST_CASE("domain shapes") {
    CHECK(parse_domain_shape("circle") == DomainShape::circle);
    CHECK(parse_domain_shape("flower") == DomainShape::flower);
    CHECK_THROWS_AS(parse_domain_shape("square"), Error);
}

TEST_CASE("Fisher-KPP on a raster mask") {
    const Mask mask = disk_mask(64, 20.0);
    FisherKppParams prm;
    prm.final_time = 0.5;
    prm.diffusion = 1e-2;
    const Grid g(prm.box, 48, 48);

    SECTION("no exact solution") {
        const NamedProblem p = fisher_kpp(mask, prm);
        CHECK_FALSE(p.spec.exact);
        CHECK_FALSE(p.spec.neumann);
        CHECK(p.spec.reaction(0.0, {0, 0}, 0.5) == Approx(0.25));
        CHECK(p.spec.initial(prm.seed_center) == Approx(1.0));
    }
    SECTION("pure diffusion conserves weighted mass") {
        prm.rho = 0.0;
        const NamedProblem p = fisher_kpp(mask, prm);
        const WeightedQuadrature quad(g, PhaseField(p.domain, 1.0 / 16));
        const CsrMatrix mass = assemble_weighted_mass(quad);
        RunOptions opt;
        opt.snapshot_steps = {0};
        double m0 = 0.0;
        auto total = [&](const Vector& u) { return dot(Vector(u.size(), 1.0), spmv(mass, u)); };
        opt.on_snapshot = [&](const TimeState& st) { m0 = total(st.u_curr); };
        const TimeState end = run(p.spec, quad, 40, opt);
        CHECK(m0 > 0.0);
        CHECK(total(end.u_curr) == Approx(m0).epsilon(1e-6));
    }
    SECTION("zero and one are fixed points") {
        for (double c : {0.0, 1.0}) {
            NamedProblem p = fisher_kpp(mask, prm);
            p.spec.initial = [c](Point) { return c; };
            const WeightedQuadrature quad(g, PhaseField(p.domain, 1.0 / 16));
            const TimeState end = run(p.spec, quad, 20);
            for (double v : end.u_curr) CHECK(v == Approx(c).margin(1e-10));
        }
    }
    SECTION("parameter errors") {
        prm.diffusion = 0.0;
        CHECK_THROWS_AS(fisher_kpp(mask, prm), Error);
        prm.diffusion = 1e-3;
        prm.seed_width = -1.0;
        CHECK_THROWS_AS(fisher_kpp(mask, prm), Error);
        prm.seed_width = 0.05;
        prm.mask_path = "/nonexistent/mask.pgm";
        CHECK_THROWS_AS(fisher_kpp(prm), Error);
    }
}
