#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ddm/analysis.hpp"
#include "ddm/probes.hpp"

using namespace ddm;
using Catch::Approx;

namespace {

const Grid& unit_grid() {
    static const Grid g(Box{0, 1, 0, 1}, 16, 16);
    return g;
}

const ExactFn zero = [](double, Point) { return 0.0; };
const ExactGradFn zero_grad = [](double, Point) { return Point{0.0, 0.0}; };

}  // namespace

TEST_CASE("weighted norms against closed forms") {
    const WeightedQuadrature quad(unit_grid(), UnitWeight{}, 4);
    const Vector x = interpolate(unit_grid(), [](Point p) { return p.x; });

    CHECK(weighted_l2_error(quad, x, zero, 0.0) == Approx(1.0 / std::sqrt(3.0)).margin(1e-12));
    CHECK(weighted_h1_error(quad, x, zero, zero_grad, 0.0) == Approx(2.0 / std::sqrt(3.0)).margin(1e-12));

    // exact + 1
    const ExactFn bilinear = [](double t, Point p) { return 0.3 + p.x - 2 * p.y + t * p.x * p.y; };
    const ExactGradFn bilinear_grad = [](double t, Point p) { return Point{1.0 + t * p.y, -2.0 + t * p.x}; };
    const Vector shifted = interpolate(unit_grid(), [&](Point p) { return bilinear(0.5, p) + 1.0; });
    CHECK(weighted_l2_error(quad, shifted, bilinear, 0.5) == Approx(1.0).margin(1e-12));

    // a bilinear exact solution is reproduced by its interpolant
    const Vector exact = interpolate(unit_grid(), [&](Point p) { return bilinear(0.5, p); });
    CHECK(weighted_l2_error(quad, exact, bilinear, 0.5) < 1e-13);
    CHECK(weighted_h1_error(quad, exact, bilinear, bilinear_grad, 0.5) < 1e-13);
    const Vector none(unit_grid().node_count(), 0.0);
    CHECK(weighted_h1_error(quad, none, zero, zero_grad, 0.0) == 0.0);

    // int (xy)^2 = 1/9 on the unit square
    const Vector xy = interpolate(unit_grid(), [](Point p) { return p.x * p.y; });
    CHECK(weighted_l2_error(quad, xy, zero, 0.0) == Approx(1.0 / 3.0).margin(1e-12));

    CHECK_THROWS_AS(weighted_l2_error(quad, x, ExactFn{}, 0.0), Error);
    CHECK_THROWS_AS(weighted_h1_error(quad, x, zero, ExactGradFn{}, 0.0), Error);
    CHECK_THROWS_AS(weighted_l2_error(quad, Vector(3), zero, 0.0), Error);
}

TEST_CASE("norm nesting and homogeneity") {
    const Grid g(Box{-0.5, 0.5, -0.5, 0.5}, 32, 32);
    const WeightedQuadrature quad(g, PhaseField(DistanceField::flower({0, 0}, 0.18, 0.03, 4), 1.0 / 16));
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 10; ++trial) {
        Vector v(g.node_count());
        for (auto& e : v) e = u(rng);
        const double l2 = weighted_l2_error(quad, v, zero, 0.0);
        const double h1 = weighted_h1_error(quad, v, zero, zero_grad, 0.0);
        CHECK(h1 >= l2);
        const double c = -2.5 + trial;
        Vector cv = v;
        for (auto& e : cv) e *= c;
        CHECK(weighted_l2_error(quad, cv, zero, 0.0) == Approx(std::abs(c) * l2).epsilon(1e-12));
        CHECK(weighted_h1_error(quad, cv, zero, zero_grad, 0.0) == Approx(std::abs(c) * h1).epsilon(1e-12));
    }
}

TEST_CASE("rate tables") {
    auto report = [](double eps, double l2, std::optional<double> h1 = {}) {
        ErrorReport r;
        r.epsilon = eps;
        r.l2_weighted = l2;
        r.h1_weighted = h1;
        r.nx = r.ny = r.nt = 512;
        r.seconds = 1.5;
        return r;
    };
    const RateTable circle = rate_table({report(1.0 / 8, 1.03e-2), report(1.0 / 16, 2.6e-3)});
    REQUIRE(circle.l2_rates().size() == 1);
    CHECK(circle.l2_rates()[0] == Approx(1.99).margin(0.005));
    const RateTable flower = rate_table({report(1.0 / 8, 8.5e-3), report(1.0 / 16, 2.1e-3)});
    CHECK(flower.l2_rates()[0] == Approx(2.02).margin(0.005));
    const RateTable flat = rate_table({report(0.5, 3e-3, 4e-2), report(0.25, 3e-3, 4e-2)});
    CHECK(flat.l2_rates()[0] == 0.0);
    CHECK(flat.h1_rates()[0] == 0.0);

    CHECK_THROWS_AS(rate_table({report(1.0 / 8, 1e-2), report(1.0 / 12, 1e-3)}), Error);
    CHECK_THROWS_AS(rate_table({}), Error);

    SECTION("csv") {
        const RateTable t = rate_table({report(1.0 / 8, 1e-2, 0.1), report(1.0 / 16, 2.5e-3, 0.05)});
        const std::string csv = t.csv();
        std::istringstream in(csv);
        std::string header, first, second, extra;
        std::getline(in, header);
        std::getline(in, first);
        std::getline(in, second);
        CHECK(header == "epsilon,l2_error,l2_rate,h1_error,h1_rate,nx,ny,nt,seconds");
        CHECK(first == "0.125,0.01,,0.10000000000000001,,512,512,512,");
        CHECK(second == "0.0625,0.0025000000000000001,2,0.050000000000000003,1,512,512,512,");
        CHECK_FALSE(std::getline(in, extra));
        const RateTable timed = rate_table({report(1.0 / 8, 1e-2)}, true);
        CHECK(timed.csv().find(",1.5\n") != std::string::npos);
    }
    SECTION("text") {
        const std::string text = circle.text();
        CHECK(text.find("1/8") != std::string::npos);
        CHECK(text.find("1.99") != std::string::npos);
        CHECK(text.find("1.0300e-02") != std::string::npos);
    }
}

TEST_CASE("trace and Poincare ratios stay bounded as eps shrinks") {
    const std::vector<double> eps{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
    const std::vector<double> trace = probes::max_ratio_per_epsilon(probes::trace_family(), eps, 256, &trace_ratio);
    const std::vector<double> poincare =
        probes::max_ratio_per_epsilon(probes::poincare_family(), eps, 256, &poincare_ratio);
    for (std::size_t i = 0; i < eps.size(); ++i) INFO("eps " << eps[i] << ": " << trace[i] << " " << poincare[i]);
    CHECK(probes::spread(trace) < 3.0);
    CHECK(probes::spread(poincare) < 3.0);
}
