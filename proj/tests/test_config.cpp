#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ddm/config.hpp"

using namespace ddm;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ddm-test-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string config_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("parse the reference setup") {
    const RunConfig c = parse_config("problem=example1\nnx=512\nny=512\nnt=512\neps=1/8,1/16,1/32,1/64\n");
    CHECK(c.problem == "example1");
    CHECK(c.nx == 512u);
    CHECK(c.ny == 512u);
    CHECK(c.nt == 512u);
    CHECK(c.epsilons == std::vector<double>{0.125, 0.0625, 0.03125, 0.015625});
    CHECK(c.rates_enabled());
    CHECK(c.quad_order == 4);
    CHECK(c.cg_tol == 1e-10);

    const NamedProblem p = resolve_problem(c);
    CHECK(p.nx == 512);
    CHECK(p.nt == 512);
    CHECK(p.spec.final_time == 0.5);
}

TEST_CASE("parser details") {
    const RunConfig c = parse_config(
        "# comment line\n"
        "  problem = example2   # trailing comment\n"
        "\n"
        "domain=flower\n"
        "box=-1,1,-0.5,0.5\n"
        "snapshots=0,4,8\n"
        "T=0.25\n"
        "rates=off\n"
        "neumann_extension=pointwise\n"
        "cg_tol=1e-12\n");
    CHECK(c.problem == "example2");
    CHECK(c.domain == "flower");
    REQUIRE(c.box);
    CHECK(c.box->xmin == -1.0);
    CHECK(c.box->ymax == 0.5);
    CHECK(c.snapshots == std::vector<std::size_t>{0, 4, 8});
    CHECK(c.final_time == 0.25);
    CHECK_FALSE(c.rates_enabled());
    CHECK(c.extension == NeumannExtension::pointwise);
    CHECK(c.cg_tol == 1e-12);
}

TEST_CASE("configuration errors") {
    CHECK(config_error("") == "missing required key: problem");
    CHECK_THAT(config_error("problem=example1\neps=1/8,1/10\n"), ContainsSubstring("eps must halve"));
    CHECK_THAT(config_error("problem=example1\neps=1/8,1/10\n"), ContainsSubstring("line 2"));
    CHECK(config_error("problem=example1\nrates=off\neps=1/8,1/10\n").empty());
    CHECK_THAT(config_error("problem=example1\ncolour=blue\n"), ContainsSubstring("line 2"));
    CHECK_THAT(config_error("problem=example1\ncolour=blue\n"), ContainsSubstring("colour"));
    CHECK_THAT(config_error("problem=example1\n\nnx=12x\n"), ContainsSubstring("line 3"));
    CHECK_THAT(config_error("problem=example1\nnx=-4\n"), ContainsSubstring("line 2"));
    CHECK_THAT(config_error("problem=example1\nnx=0\n"), ContainsSubstring("line 2"));
    CHECK_THAT(config_error("problem=example1\nnx 64\n"), ContainsSubstring("line 2"));
    CHECK_THAT(config_error("problem=example1\nnx=8\nnx=16\n"), ContainsSubstring("line 3"));
    CHECK_THAT(config_error("problem=heat\n"), ContainsSubstring("line 1"));
    CHECK_THAT(config_error("problem=fisher_kpp\n"), ContainsSubstring("missing required key: mask"));
    CHECK_THAT(config_error("problem=fisher_kpp\nmask=a.pgm\nrates=on\n"),
               ContainsSubstring("rates need a problem with an exact solution"));
    CHECK_THROWS_AS(load_config("/nonexistent/run.cfg"), Error);
}

TEST_CASE("field dumps") {
    const fs::path dir = scratch_dir("field");
    SECTION("zero field on a 2x2 grid") {
        const Grid g(Box{0, 1, 0, 1}, 2, 2);
        const std::string path = (dir / "zero.field").string();
        dump_field(g, Vector(9, 0.0), UnitWeight{}, path);
        std::ifstream in(path);
        std::string header, line;
        std::getline(in, header);
        CHECK(header == "ddm-field 2 2 0 1 0 1");
        std::size_t lines = 0;
        while (std::getline(in, line)) {
            ++lines;
            std::istringstream ls(line);
            double x, y, u, w;
            ls >> x >> y >> u >> w;
            CHECK(u == 0.0);
        }
        CHECK(lines == 9);
    }
    SECTION("round trip is bit-exact") {
        const Grid g(Box{-0.5, 0.5, -0.5, 0.5}, 13, 7);
        const PhaseField pf(DistanceField::circle({0, 0}, 0.25), 1.0 / 16);
        Vector v(g.node_count());
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> u(-1e3, 1e3);
        for (auto& e : v) e = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        const std::string path = (dir / "random.field").string();
        dump_field(g, v, pf, path);
        const FieldData d = read_field(path);
        CHECK(d.nx == 13);
        CHECK(d.ny == 7);
        CHECK(d.u == v);
        for (std::size_t n = 0; n < v.size(); ++n) {
            CHECK(d.points[n] == g.node_point(n));
            CHECK(d.omega[n] == pf.omega(g.node_point(n)));
        }
    }
    SECTION("omega is one half on the boundary") {
        const Grid g(Box{-0.5, 0.5, -0.5, 0.5}, 4, 4);
        const PhaseField pf(DistanceField::circle({0, 0}, 0.25), 1.0 / 8);
        const std::string path = (dir / "half.field").string();
        dump_field(g, Vector(g.node_count(), 1.0), pf, path);
        const FieldData d = read_field(path);
        CHECK(d.omega[g.node(3, 2)] == 0.5);  // node (0.25, 0)
    }
    SECTION("errors") {
        const Grid g(Box{0, 1, 0, 1}, 2, 2);
        CHECK_THROWS_AS(dump_field(g, Vector(4, 0.0), UnitWeight{}, (dir / "x.field").string()), Error);
        CHECK_THROWS_AS(dump_field(g, Vector(9, 0.0), UnitWeight{}, "/nonexistent/dir/x.field"), Error);
        CHECK_THROWS_AS(read_field("/nonexistent/x.field"), Error);
    }
}

TEST_CASE("sweeps write their artifacts") {
    const fs::path dir = scratch_dir("sweep");
    SECTION("rates run") {
        RunConfig c = parse_config("problem=example1\nnx=32\nny=32\nnt=16\neps=1/4,1/8\nsnapshots=0,8\n");
        c.output = (dir / "ex1").string();
        const SweepResult r = run_sweep(c);
        REQUIRE(r.table);
        CHECK(r.table->rows.size() == 2);
        CHECK(r.table->l2_rates().size() == 1);
        REQUIRE(r.max_residual);
        CHECK(*r.max_residual < 1e-6);
        const std::string manifest = slurp(dir / "ex1" / "manifest.txt");
        CHECK_THAT(manifest, ContainsSubstring("problem=example1"));
        CHECK_THAT(manifest, ContainsSubstring("nx=32"));
        CHECK_THAT(manifest, ContainsSubstring("exact_solution_max_residual="));
        for (const char* tag : {"eps_4", "eps_8"}) {
            const fs::path sub = dir / "ex1" / tag;
            CHECK_THAT(slurp(sub / "report.txt"), ContainsSubstring("l2_error="));
            CHECK(fs::exists(sub / "step_0.field"));
            CHECK(fs::exists(sub / "step_8.field"));
            CHECK(fs::exists(sub / "final.field"));
        }
        const std::string csv = slurp(dir / "ex1" / "rates.csv");
        CHECK(csv.rfind("epsilon,l2_error,l2_rate,h1_error,h1_rate,nx,ny,nt,seconds\n", 0) == 0);

        // identical configuration, byte-identical table
        c.output = (dir / "ex1-again").string();
        run_sweep(c);
        CHECK(slurp(dir / "ex1-again" / "rates.csv") == csv);
    }
    SECTION("single eps gives a table without rates") {
        RunConfig c = parse_config("problem=example2\ndomain=flower\nnx=16\nny=16\nnt=4\neps=1/4\n");
        c.output = (dir / "single").string();
        const SweepResult r = run_sweep(c, SweepMode::rates);
        REQUIRE(r.table);
        CHECK(r.table->rows.size() == 1);
        CHECK(r.table->l2_rates().empty());
        CHECK_FALSE(r.table->rows[0].l2_rate);
        // rates mode writes no field dumps
        CHECK_FALSE(fs::exists(dir / "single" / "eps_4" / "final.field"));
    }
    SECTION("Fisher-KPP writes snapshots but no rates") {
        {
            std::ofstream pgm(dir / "mask.pgm");
            pgm << "P2\n16 16\n255\n";
            for (int j = 0; j < 16; ++j) {
                for (int i = 0; i < 16; ++i) pgm << ((i - 7.5) * (i - 7.5) + (j - 7.5) * (j - 7.5) < 36 ? 255 : 0) << " ";
                pgm << "\n";
            }
        }
        RunConfig c = parse_config("problem=fisher_kpp\nmask=" + (dir / "mask.pgm").string() +
                                   "\nnx=24\nny=24\nnt=6\nT=0.1\nsnapshots=3\n");
        c.output = (dir / "fkpp").string();
        const SweepResult r = run_sweep(c);
        CHECK_FALSE(r.table);
        CHECK_FALSE(r.max_residual);
        CHECK_FALSE(fs::exists(dir / "fkpp" / "rates.csv"));
        const fs::path sub = dir / "fkpp" / epsilon_tag(1.0 / 32);
        CHECK(fs::exists(sub / "step_3.field"));
        CHECK(fs::exists(sub / "final.field"));
        CHECK_THAT(slurp(sub / "report.txt"), ContainsSubstring("weighted_mass="));
        CHECK_THROWS_AS(run_sweep(c, SweepMode::rates), ConfigError);
    }
    SECTION("solver failures name the eps") {
        RunConfig c = parse_config("problem=example1\nnx=16\nny=16\nnt=4\neps=1/4\ncg_maxit=1\n");
        c.output = (dir / "fail").string();
        CHECK_THROWS_WITH(run_sweep(c), ContainsSubstring("eps=0.25"));
    }
}
