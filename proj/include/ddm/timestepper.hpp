#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "ddm/assembly.hpp"
#include "ddm/common.hpp"
#include "ddm/linalg.hpp"

namespace ddm {

/// Semi-discrete system M du/dt + K u = b_f(t, u) + c_g(t).
struct SemiDiscreteSystem {
    const CsrMatrix* mass = nullptr;
    const CsrMatrix* stiffness = nullptr;
    std::function<Vector(double, const Vector&)> source;
    std::function<Vector(double)> boundary;
    /// Optional S(t, u): weighted mass of max(-df/du, 0). When set, the
    /// decaying part of the reaction is taken implicitly around the
    /// extrapolated state, which keeps every step a symmetric positive solve.
    std::function<CsrMatrix(double, const Vector&)> stabilization;
    /// Diagonal shift of the mass matrix, M + reg I. Keeps rows of nodes
    /// where omega vanishes solvable; constants stay steady.
    double regularization = 0.0;
    CgOptions cg;
    double blowup_limit = std::numeric_limits<double>::infinity();

    /// lead (M + reg I) + dt K for the operators and step sizes seen so far.
    struct StepMatrix {
        const CsrMatrix* mass;
        const CsrMatrix* stiffness;
        double lead, dt, regularization;
        CsrMatrix matrix;
    };
    mutable std::vector<StepMatrix> step_matrices;
};

struct TimeState {
    double t0 = 0.0;
    double t = 0.0;
    double dt = 0.0;
    std::size_t step_index = 0;
    Vector u_curr;
    Vector u_prev;
    /// b_f(t - dt, u_prev), cached by the previous step.
    std::optional<Vector> source_prev;
    std::size_t cg_iterations = 0;
};

namespace detail {

inline Vector source_or_zero(const SemiDiscreteSystem& sys, double t, const Vector& u) {
    return sys.source ? sys.source(t, u) : Vector(u.size(), 0.0);
}

inline Vector boundary_or_zero(const SemiDiscreteSystem& sys, double t, std::size_t n) {
    return sys.boundary ? sys.boundary(t) : Vector(n, 0.0);
}

inline void check_finite(const Vector& u, std::size_t step, double limit) {
    double umax = 0.0;
    for (double v : u) {
        if (!std::isfinite(v)) throw SolverError("non-finite state at step " + std::to_string(step));
        umax = std::max(umax, std::abs(v));
    }
    if (umax > limit) {
        std::ostringstream os;
        os << "stiffness guard: max |u| = " << umax << " exceeds " << limit << " at step " << step
           << "; reduce the time step";
        throw SolverError(os.str());
    }
}

// Solves (lead (M + reg I) + dt K + dt S(u*)) x = rhs + reg hist + dt S(u*) u*, starting
// from u*. rhs already holds M hist.
inline Vector solve_step(const SemiDiscreteSystem& sys, double lead, double dt, double t_new, Vector rhs,
                         const Vector& hist, const Vector& u_star, std::size_t step, std::size_t& iterations) {
    const CsrMatrix* base = nullptr;
    for (const auto& sm : sys.step_matrices)
        if (sm.mass == sys.mass && sm.stiffness == sys.stiffness && sm.lead == lead && sm.dt == dt &&
            sm.regularization == sys.regularization)
            base = &sm.matrix;
    if (!base) {
        sys.step_matrices.push_back({sys.mass, sys.stiffness, lead, dt, sys.regularization,
                                     combine(lead, *sys.mass, dt, *sys.stiffness, lead * sys.regularization)});
        base = &sys.step_matrices.back().matrix;
    }
    CsrMatrix stabilized;
    if (sys.regularization != 0.0)
        for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += sys.regularization * hist[i];
    if (sys.stabilization) {
        const CsrMatrix s = sys.stabilization(t_new, u_star);
        const Vector su = spmv(s, u_star);
        for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += dt * su[i];
        stabilized = combine(1.0, *base, dt, s);
        base = &stabilized;
    }
    const CsrMatrix& lhs = *base;
    Vector x = u_star;
    const CgReport rep = cg_solve(lhs, rhs, x, sys.cg);
    iterations += rep.iterations;
    if (!rep.converged) {
        std::ostringstream os;
        os << "cg did not converge at step " << step << " (relative residual " << rep.relative_residual << " after "
           << rep.iterations << " iterations)";
        throw SolverError(os.str());
    }
    check_finite(x, step, sys.blowup_limit);
    return x;
}

}  // namespace detail

/// Initial state from nodal values.
inline TimeState init_state(Vector u0, double dt, double t0 = 0.0) {
    if (!(dt > 0.0)) throw Error("time step must be positive");
    for (std::size_t n = 0; n < u0.size(); ++n)
        if (!std::isfinite(u0[n])) throw Error("initial data is not finite at node " + std::to_string(n));
    TimeState s;
    s.t0 = t0;
    s.t = t0;
    s.dt = dt;
    s.u_curr = std::move(u0);
    s.u_prev = s.u_curr;
    return s;
}

/// Initial state from the nodal interpolant of u0.
inline TimeState init_state(const Grid& grid, const std::function<double(Point)>& u0, double dt, double t0 = 0.0) {
    Vector v(grid.node_count());
    for (std::size_t n = 0; n < v.size(); ++n) {
        v[n] = u0(grid.node_point(n));
        if (!std::isfinite(v[n]))
            throw Error("initial data is not finite at node " + format_point(grid.node_point(n)));
    }
    return init_state(std::move(v), dt, t0);
}

/// Backward Euler bootstrap step with the reaction frozen at u^0:
/// (M + dt K) u^1 = M u^0 + dt (b_f(t^1, u^0) + c_g(t^1)).
inline TimeState bdf1_step(const TimeState& state, const SemiDiscreteSystem& sys) {
    if (state.step_index != 0) throw Error("bdf1_step: only valid as the first step");
    const double dt = state.dt;
    const double t1 = state.t0 + dt;
    const std::size_t n = state.u_curr.size();

    Vector rhs = spmv(*sys.mass, state.u_curr);
    const Vector bf = detail::source_or_zero(sys, t1, state.u_curr);
    const Vector cg = detail::boundary_or_zero(sys, t1, n);
    for (std::size_t i = 0; i < n; ++i) rhs[i] += dt * (bf[i] + cg[i]);

    TimeState next = state;
    next.u_curr = detail::solve_step(sys, 1.0, dt, t1, std::move(rhs), state.u_curr, state.u_curr, 1,
                                     next.cg_iterations);
    next.u_prev = state.u_curr;
    next.step_index = 1;
    next.t = t1;
    next.source_prev.reset();
    return next;
}

/// Second-order step with explicitly extrapolated reaction (SBDF2):
/// (3/2 M + dt K) u^{n+1} = M (2 u^n - u^{n-1} / 2) + dt (2 b_f^n - b_f^{n-1} + c_g(t^{n+1})).
inline TimeState bdf2_step(const TimeState& state, const SemiDiscreteSystem& sys) {
    if (state.step_index < 1) throw Error("bdf2_step: needs a previous step");
    const double dt = state.dt;
    const double t_new = state.t0 + static_cast<double>(state.step_index + 1) * dt;
    const double t_cur = state.t0 + static_cast<double>(state.step_index) * dt;
    const double t_old = state.t0 + static_cast<double>(state.step_index - 1) * dt;
    const std::size_t n = state.u_curr.size();

    Vector hist(n);
    for (std::size_t i = 0; i < n; ++i) hist[i] = 2.0 * state.u_curr[i] - 0.5 * state.u_prev[i];
    Vector rhs = spmv(*sys.mass, hist);

    Vector f_cur = detail::source_or_zero(sys, t_cur, state.u_curr);
    const Vector f_old = state.source_prev ? *state.source_prev : detail::source_or_zero(sys, t_old, state.u_prev);
    const Vector cg = detail::boundary_or_zero(sys, t_new, n);
    Vector u_star(n);
    for (std::size_t i = 0; i < n; ++i) {
        rhs[i] += dt * (2.0 * f_cur[i] - f_old[i] + cg[i]);
        u_star[i] = 2.0 * state.u_curr[i] - state.u_prev[i];
    }

    TimeState next = state;
    next.u_curr = detail::solve_step(sys, 1.5, dt, t_new, std::move(rhs), hist, u_star, state.step_index + 1,
                                     next.cg_iterations);
    next.u_prev = state.u_curr;
    next.step_index = state.step_index + 1;
    next.t = t_new;
    next.source_prev = std::move(f_cur);
    return next;
}

struct RunOptions {
    CgOptions cg;
    /// Mass-matrix shift sigma * hx * hy.
    double regularization = 1e-10;
    NeumannExtension extension = NeumannExtension::normal_constant;
    std::vector<std::size_t> snapshot_steps;
    std::function<void(const TimeState&)> on_snapshot;
};

/// Builds the semi-discrete system of a problem on a weighted quadrature.
/// The returned system refers to mass and stiffness by pointer.
inline SemiDiscreteSystem make_system(const ProblemSpec& problem, const WeightedQuadrature& quad, const CsrMatrix& mass,
                                      const CsrMatrix& stiffness, const RunOptions& opt) {
    SemiDiscreteSystem sys;
    sys.mass = &mass;
    sys.stiffness = &stiffness;
    if (problem.reaction)
        sys.source = [&quad, f = problem.reaction](double t, const Vector& u) { return assemble_source(quad, f, t, u); };
    if (problem.neumann)
        sys.boundary = [&quad, g = problem.neumann, ext = opt.extension](double t) {
            return assemble_boundary_load(quad, g, t, ext);
        };
    if (problem.reaction_derivative) {
        sys.stabilization = [&quad, df = problem.reaction_derivative](double t, const Vector& u) {
            return assemble_coefficient_mass(quad, u, [&](Point x, double uh) { return std::max(-df(t, x, uh), 0.0); });
        };
    }
    sys.regularization = opt.regularization * quad.grid().hx() * quad.grid().hy();
    sys.cg = opt.cg;
    sys.blowup_limit = problem.blowup_limit;
    return sys;
}

/// Integrates to the problem's final time in nt steps: one BDF1 bootstrap
/// step followed by nt - 1 SBDF2 steps.
inline TimeState run(const ProblemSpec& problem, const WeightedQuadrature& quad, std::size_t nt,
                     const RunOptions& opt = {}) {
    if (nt < 2) throw Error("run: at least two time steps are required");
    if (!problem.diffusion || !problem.initial) throw Error("run: problem needs a diffusion coefficient and initial data");
    if (!(problem.final_time > 0.0)) throw Error("run: final time must be positive");
    const Grid& grid = quad.grid();
    const CsrMatrix mass = assemble_weighted_mass(quad);
    const CsrMatrix stiffness = assemble_weighted_stiffness(quad, problem.diffusion, problem.kappa);
    const SemiDiscreteSystem sys = make_system(problem, quad, mass, stiffness, opt);

    const double dt = problem.final_time / static_cast<double>(nt);
    TimeState state = init_state(grid, problem.initial, dt);
    auto snapshot = [&](const TimeState& s) {
        if (!opt.on_snapshot) return;
        for (std::size_t k : opt.snapshot_steps)
            if (k == s.step_index) {
                opt.on_snapshot(s);
                return;
            }
    };
    snapshot(state);
    state = bdf1_step(state, sys);
    snapshot(state);
    while (state.step_index < nt) {
        state = bdf2_step(state, sys);
        snapshot(state);
    }
    return state;
}

template <class Weight>
TimeState run(const ProblemSpec& problem, const Grid& grid, const Weight& weight, std::size_t nt,
              const RunOptions& opt = {}, int quadrature_order = 4) {
    const WeightedQuadrature quad(grid, weight, quadrature_order);
    return run(problem, quad, nt, opt);
}

}  // namespace ddm
