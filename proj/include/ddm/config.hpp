#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ddm/analysis.hpp"
#include "ddm/assembly.hpp"
#include "ddm/geometry.hpp"
#include "ddm/grid.hpp"
#include "ddm/problems.hpp"
#include "ddm/timestepper.hpp"

namespace ddm {

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Resolved settings of one experiment. Unset optionals take the defaults
/// of the selected problem.
struct RunConfig {
    std::string problem;
    std::string domain = "circle";
    std::optional<Box> box;
    std::optional<std::size_t> nx, ny, nt;
    std::optional<double> final_time;
    std::vector<double> epsilons;
    int quad_order = 4;
    double cg_tol = 1e-10;
    std::size_t cg_maxit = 0;
    double regularization = 1e-10;
    NeumannExtension extension = NeumannExtension::normal_constant;
    std::string output = "ddm-out";
    std::vector<std::size_t> snapshots;
    unsigned seed = 1;
    std::optional<bool> rates;
    bool timing = false;
    // Allen-Cahn
    double ac_width = 0.01;
    // Fisher-KPP
    std::string mask;
    double cell = 0.0;
    double rho = 1.0;
    double diffusion = 1e-3;
    Point seed_center{0.0, 0.0};
    double seed_width = 0.05;
    double seed_amplitude = 1.0;

    bool has_exact() const { return problem != "fisher_kpp"; }
    bool rates_enabled() const { return rates.value_or(has_exact()); }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

inline std::optional<double> parse_plain(const std::string& s) {
    double v = 0.0;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
    return v;
}

/// Decimal number or a fraction a/b.
inline std::optional<double> parse_number(const std::string& s) {
    const auto slash = s.find('/');
    if (slash == std::string::npos) return parse_plain(s);
    const auto a = parse_plain(trim(s.substr(0, slash)));
    const auto b = parse_plain(trim(s.substr(slash + 1)));
    if (!a || !b || *b == 0.0) return std::nullopt;
    return *a / *b;
}

}  // namespace detail

/// Parses the flat key=value format: one pair per line, '#' starts a
/// comment, lists are comma-separated.
inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, std::size_t> seen;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;

    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        auto fail = [line_no](const std::string& msg) -> ConfigError {
            return ConfigError("line " + std::to_string(line_no) + ": " + msg);
        };
        if (eq == std::string::npos) throw fail("expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (seen.count(key)) throw fail("duplicate key '" + key + "'");
        seen[key] = line_no;

        auto number = [&](const std::string& s) {
            const auto v = detail::parse_number(s);
            if (!v || !std::isfinite(*v)) throw fail("malformed number '" + s + "' for " + key);
            return *v;
        };
        auto positive = [&](const std::string& s) {
            const double v = number(s);
            if (!(v > 0.0)) throw fail(key + " must be positive");
            return v;
        };
        auto count = [&](const std::string& s) {
            const double v = number(s);
            if (!(v >= 1.0) || v != std::floor(v) || v > 1e9) throw fail(key + " must be a positive integer");
            return static_cast<std::size_t>(v);
        };
        auto flag = [&](const std::string& s) {
            if (s == "on" || s == "true" || s == "1") return true;
            if (s == "off" || s == "false" || s == "0") return false;
            throw fail(key + " must be on or off");
        };

        if (key == "problem") {
            if (value != "example1" && value != "example2" && value != "example3" && value != "fisher_kpp")
                throw fail("unknown problem '" + value + "'");
            cfg.problem = value;
        } else if (key == "domain") {
            if (value != "circle" && value != "flower") throw fail("domain must be circle or flower");
            cfg.domain = value;
        } else if (key == "box") {
            const auto parts = detail::split_list(value);
            if (parts.size() != 4) throw fail("box needs xmin,xmax,ymin,ymax");
            Box b{number(parts[0]), number(parts[1]), number(parts[2]), number(parts[3])};
            if (!(b.xmax > b.xmin) || !(b.ymax > b.ymin)) throw fail("degenerate box");
            cfg.box = b;
        } else if (key == "nx") {
            cfg.nx = count(value);
            if (*cfg.nx < 2) throw fail("nx must be at least 2");
        } else if (key == "ny") {
            cfg.ny = count(value);
            if (*cfg.ny < 2) throw fail("ny must be at least 2");
        } else if (key == "nt") {
            cfg.nt = count(value);
            if (*cfg.nt < 2) throw fail("nt must be at least 2");
        } else if (key == "T") {
            cfg.final_time = positive(value);
        } else if (key == "eps") {
            for (const auto& item : detail::split_list(value)) cfg.epsilons.push_back(positive(item));
            if (cfg.epsilons.empty()) throw fail("eps list is empty");
        } else if (key == "quad_order") {
            const auto n = count(value);
            if (n < 2 || n > 5) throw fail("quad_order must be in 2..5");
            cfg.quad_order = static_cast<int>(n);
        } else if (key == "cg_tol") {
            cfg.cg_tol = positive(value);
        } else if (key == "cg_maxit") {
            cfg.cg_maxit = count(value);
        } else if (key == "regularization") {
            cfg.regularization = number(value);
            if (cfg.regularization < 0.0) throw fail("regularization must be nonnegative");
        } else if (key == "neumann_extension") {
            if (value == "normal_constant") {
                cfg.extension = NeumannExtension::normal_constant;
            } else if (value == "pointwise") {
                cfg.extension = NeumannExtension::pointwise;
            } else {
                throw fail("neumann_extension must be normal_constant or pointwise");
            }
        } else if (key == "output") {
            if (value.empty()) throw fail("output must name a directory");
            cfg.output = value;
        } else if (key == "snapshots") {
            for (const auto& item : detail::split_list(value)) {
                const double v = number(item);
                if (v < 0.0 || v != std::floor(v)) throw fail("snapshot indices must be nonnegative integers");
                cfg.snapshots.push_back(static_cast<std::size_t>(v));
            }
        } else if (key == "seed") {
            const double v = number(value);
            if (v < 0.0 || v != std::floor(v) || v > 4294967295.0) throw fail("seed must be a nonnegative integer");
            cfg.seed = static_cast<unsigned>(v);
        } else if (key == "rates") {
            cfg.rates = flag(value);
        } else if (key == "timing") {
            cfg.timing = flag(value);
        } else if (key == "ac_width") {
            cfg.ac_width = positive(value);
        } else if (key == "mask") {
            cfg.mask = value;
        } else if (key == "cell") {
            cfg.cell = positive(value);
        } else if (key == "rho") {
            cfg.rho = number(value);
        } else if (key == "diffusion") {
            cfg.diffusion = positive(value);
        } else if (key == "seed_center") {
            const auto parts = detail::split_list(value);
            if (parts.size() != 2) throw fail("seed_center needs x,y");
            cfg.seed_center = {number(parts[0]), number(parts[1])};
        } else if (key == "seed_width") {
            cfg.seed_width = positive(value);
        } else if (key == "seed_amplitude") {
            cfg.seed_amplitude = number(value);
        } else {
            throw fail("unknown key '" + key + "'");
        }
    }

    if (cfg.problem.empty()) throw ConfigError("missing required key: problem");
    auto at = [&](const std::string& key) { return "line " + std::to_string(seen[key]) + ": "; };
    if (cfg.problem == "fisher_kpp" && cfg.mask.empty()) throw ConfigError("missing required key: mask");
    if (cfg.rates_enabled()) {
        if (!cfg.has_exact()) throw ConfigError(at("rates") + "rates need a problem with an exact solution");
        for (std::size_t i = 1; i < cfg.epsilons.size(); ++i)
            if (!is_halving(cfg.epsilons[i - 1], cfg.epsilons[i])) throw ConfigError(at("eps") + "eps must halve");
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// The problem selected by a configuration, with configured overrides applied.
inline NamedProblem resolve_problem(const RunConfig& cfg) {
    NamedProblem p = [&] {
        if (cfg.problem == "example1") return example1(parse_domain_shape(cfg.domain));
        if (cfg.problem == "example2") return example2(parse_domain_shape(cfg.domain));
        if (cfg.problem == "example3") {
            AllenCahnParams ac;
            ac.width = cfg.ac_width;
            if (cfg.final_time) ac.final_time = *cfg.final_time;
            return example3(ac);
        }
        FisherKppParams f;
        f.mask_path = cfg.mask;
        f.cell = cfg.cell;
        if (cfg.box) f.box = *cfg.box;
        f.rho = cfg.rho;
        f.diffusion = cfg.diffusion;
        f.seed_center = cfg.seed_center;
        f.seed_width = cfg.seed_width;
        f.seed_amplitude = cfg.seed_amplitude;
        if (cfg.final_time) f.final_time = *cfg.final_time;
        return fisher_kpp(f);
    }();
    if (cfg.box) p.box = *cfg.box;
    if (cfg.nx) p.nx = *cfg.nx;
    if (cfg.ny) p.ny = *cfg.ny;
    if (cfg.nt) p.nt = *cfg.nt;
    if (cfg.final_time) p.spec.final_time = *cfg.final_time;
    if (!cfg.epsilons.empty()) p.epsilons = cfg.epsilons;
    return p;
}

inline std::string format_g17(double v) { return RateTable::format_exact(v); }

/// The configuration with every default filled in, one key per line.
inline std::string manifest(const RunConfig& cfg, const NamedProblem& p) {
    std::ostringstream os;
    auto list = [](const auto& xs) {
        std::string s;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (i) s += ",";
            if constexpr (std::is_floating_point_v<std::decay_t<decltype(xs[i])>>) {
                s += format_g17(xs[i]);
            } else {
                s += std::to_string(xs[i]);
            }
        }
        return s;
    };
    os << "problem=" << cfg.problem << "\n";
    os << "name=" << p.name << "\n";
    if (cfg.problem == "example1" || cfg.problem == "example2") os << "domain=" << cfg.domain << "\n";
    os << "box=" << format_g17(p.box.xmin) << "," << format_g17(p.box.xmax) << "," << format_g17(p.box.ymin) << ","
       << format_g17(p.box.ymax) << "\n";
    os << "nx=" << p.nx << "\nny=" << p.ny << "\nnt=" << p.nt << "\n";
    os << "T=" << format_g17(p.spec.final_time) << "\n";
    os << "eps=" << list(p.epsilons) << "\n";
    os << "quad_order=" << cfg.quad_order << "\n";
    os << "cg_tol=" << format_g17(cfg.cg_tol) << "\n";
    os << "cg_maxit=" << cfg.cg_maxit << "\n";
    os << "regularization=" << format_g17(cfg.regularization) << "\n";
    os << "neumann_extension="
       << (cfg.extension == NeumannExtension::normal_constant ? "normal_constant" : "pointwise") << "\n";
    os << "output=" << cfg.output << "\n";
    os << "snapshots=" << list(cfg.snapshots) << "\n";
    os << "seed=" << cfg.seed << "\n";
    os << "rates=" << (cfg.rates_enabled() ? "on" : "off") << "\n";
    os << "timing=" << (cfg.timing ? "on" : "off") << "\n";
    if (cfg.problem == "example3") os << "ac_width=" << format_g17(cfg.ac_width) << "\n";
    if (cfg.problem == "fisher_kpp") {
        os << "mask=" << cfg.mask << "\ncell=" << format_g17(cfg.cell) << "\nrho=" << format_g17(cfg.rho)
           << "\ndiffusion=" << format_g17(cfg.diffusion) << "\nseed_center=" << format_g17(cfg.seed_center.x) << ","
           << format_g17(cfg.seed_center.y) << "\nseed_width=" << format_g17(cfg.seed_width)
           << "\nseed_amplitude=" << format_g17(cfg.seed_amplitude) << "\n";
    }
    return os.str();
}

/// Writes a nodal field as text: a header line
/// `ddm-field nx ny xmin xmax ymin ymax`, then `x y u omega` per node in
/// node order, all with 17 significant digits.
template <class Weight>
void dump_field(const Grid& grid, const Vector& values, const Weight& weight, const std::string& path) {
    if (values.size() != grid.node_count()) throw Error("dump_field: vector length does not match the grid");
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("dump_field: cannot open " + path);
    const Box& b = grid.box();
    std::fprintf(f, "ddm-field %zu %zu %.17g %.17g %.17g %.17g\n", grid.nx(), grid.ny(), b.xmin, b.xmax, b.ymin,
                 b.ymax);
    for (std::size_t n = 0; n < values.size(); ++n) {
        const Point x = grid.node_point(n);
        std::fprintf(f, "%.17g %.17g %.17g %.17g\n", x.x, x.y, values[n], weight.sample(x).omega);
    }
    const bool bad = std::ferror(f) != 0;
    if (std::fclose(f) != 0 || bad) throw Error("dump_field: write failed for " + path);
}

struct FieldData {
    std::size_t nx = 0, ny = 0;
    Box box;
    std::vector<Point> points;
    Vector u, omega;
};

inline FieldData read_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("read_field: cannot open " + path);
    std::string tag;
    FieldData d;
    in >> tag >> d.nx >> d.ny >> d.box.xmin >> d.box.xmax >> d.box.ymin >> d.box.ymax;
    if (!in || tag != "ddm-field") throw Error("read_field: bad header in " + path);
    const std::size_t n = (d.nx + 1) * (d.ny + 1);
    std::string tok[4];
    for (std::size_t k = 0; k < n; ++k) {
        for (auto& t : tok) in >> t;
        if (!in) throw Error("read_field: truncated data in " + path);
        d.points.push_back({std::strtod(tok[0].c_str(), nullptr), std::strtod(tok[1].c_str(), nullptr)});
        d.u.push_back(std::strtod(tok[2].c_str(), nullptr));
        d.omega.push_back(std::strtod(tok[3].c_str(), nullptr));
    }
    return d;
}

enum class SweepMode { run, rates };

struct SweepResult {
    std::vector<ErrorReport> reports;
    std::optional<RateTable> table;
    std::optional<double> max_residual;
};

inline std::string epsilon_tag(double eps) {
    const double inv = 1.0 / eps;
    char buf[64];
    if (std::abs(inv - std::round(inv)) < 1e-9 * inv) {
        std::snprintf(buf, sizeof buf, "eps_%ld", static_cast<long>(std::round(inv)));
    } else {
        std::snprintf(buf, sizeof buf, "eps_%.6g", eps);
    }
    return buf;
}

/// Runs one solve per epsilon and writes manifest.txt, per-epsilon
/// report.txt, field dumps (run mode) and rates.csv when rates are enabled.
inline SweepResult run_sweep(const RunConfig& cfg, SweepMode mode = SweepMode::run, std::ostream* log = nullptr) {
    namespace fs = std::filesystem;
    if (mode == SweepMode::rates && !cfg.rates_enabled())
        throw ConfigError("rates: configuration has rates disabled or no exact solution");
    const NamedProblem p = resolve_problem(cfg);
    if (p.epsilons.empty()) throw ConfigError("eps list is empty");
    const Grid grid(p.box, p.nx, p.ny);
    const fs::path root(cfg.output);
    fs::create_directories(root);

    SweepResult result;
    std::string residual_line;
    if (p.spec.exact) {
        result.max_residual = max_pde_residual(p, 100, cfg.seed);
        residual_line = "exact_solution_max_residual=" + format_g17(*result.max_residual) + "\n";
    }
    {
        std::ofstream m(root / "manifest.txt");
        m << manifest(cfg, p) << residual_line;
        if (!m) throw Error("cannot write manifest in " + root.string());
    }

    RunOptions opt;
    opt.cg.tol = cfg.cg_tol;
    opt.cg.max_iterations = cfg.cg_maxit;
    opt.regularization = cfg.regularization;
    opt.extension = cfg.extension;

    for (double eps : p.epsilons) {
        const fs::path dir = root / epsilon_tag(eps);
        fs::create_directories(dir);
        try {
            const PhaseField pf(p.domain, eps);
            const auto start = std::chrono::steady_clock::now();
            const WeightedQuadrature quad(grid, pf, cfg.quad_order);
            RunOptions local = opt;
            if (mode == SweepMode::run) {
                local.snapshot_steps = cfg.snapshots;
                local.on_snapshot = [&](const TimeState& s) {
                    dump_field(grid, s.u_curr, pf, (dir / ("step_" + std::to_string(s.step_index) + ".field")).string());
                };
            }
            const TimeState final_state = run(p.spec, quad, p.nt, local);
            const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (mode == SweepMode::run) dump_field(grid, final_state.u_curr, pf, (dir / "final.field").string());

            ErrorReport rep;
            rep.epsilon = eps;
            rep.nx = p.nx;
            rep.ny = p.ny;
            rep.nt = p.nt;
            rep.seconds = seconds;
            rep.cg_iterations = final_state.cg_iterations;
            std::ofstream r(dir / "report.txt");
            r << "problem=" << p.name << "\nepsilon=" << format_g17(eps) << "\nnx=" << p.nx << "\nny=" << p.ny
              << "\nnt=" << p.nt << "\nfinal_time=" << format_g17(final_state.t)
              << "\ncg_iterations=" << final_state.cg_iterations << "\n";
            if (p.spec.exact) {
                rep.l2_weighted = weighted_l2_error(quad, final_state.u_curr, p.spec.exact, final_state.t);
                rep.h1_weighted =
                    weighted_h1_error(quad, final_state.u_curr, p.spec.exact, p.spec.exact_gradient, final_state.t);
                r << "l2_error=" << format_g17(rep.l2_weighted) << "\nh1_error=" << format_g17(*rep.h1_weighted)
                  << "\n";
            } else {
                // mass int u omega, conserved when the reaction vanishes
                const CsrMatrix m = assemble_weighted_mass(quad);
                const Vector mu = spmv(m, final_state.u_curr);
                double mass = 0.0;
                for (double v : mu) mass += v;
                r << "weighted_mass=" << format_g17(mass) << "\n";
            }
            r << "seconds=" << format_g17(seconds) << "\n";
            if (!r) throw Error("cannot write " + (dir / "report.txt").string());
            result.reports.push_back(rep);
            if (log) {
                *log << epsilon_tag(eps) << ": ";
                if (p.spec.exact) *log << "l2=" << rep.l2_weighted << " h1=" << *rep.h1_weighted << " ";
                *log << "cg_iterations=" << rep.cg_iterations << " seconds=" << seconds << std::endl;
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw SolverError("eps=" + format_g17(eps) + ": " + e.what());
        }
    }

    if (cfg.rates_enabled() && p.spec.exact) {
        result.table = rate_table(result.reports, cfg.timing);
        std::ofstream csv(root / "rates.csv", std::ios::binary);
        csv << result.table->csv();
        if (!csv) throw Error("cannot write rates.csv in " + root.string());
    }
    return result;
}

}  // namespace ddm
