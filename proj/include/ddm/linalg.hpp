#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ddm/common.hpp"

namespace ddm {

/// Square sparse matrix in compressed row storage.
struct CsrMatrix {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::uint32_t> col;
    std::vector<double> val;

    std::size_t nnz() const { return val.size(); }

    double max_abs() const {
        double m = 0.0;
        for (double v : val) m = std::max(m, std::abs(v));
        return m;
    }

    double at(std::size_t i, std::size_t j) const {
        for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
            if (col[k] == j) return val[k];
        return 0.0;
    }

    Vector diagonal() const {
        Vector d(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) d[i] = at(i, i);
        return d;
    }

    static CsrMatrix identity(std::size_t n) {
        CsrMatrix m;
        m.n = n;
        m.row_ptr.resize(n + 1);
        for (std::size_t i = 0; i <= n; ++i) m.row_ptr[i] = i;
        m.col.resize(n);
        for (std::size_t i = 0; i < n; ++i) m.col[i] = static_cast<std::uint32_t>(i);
        m.val.assign(n, 1.0);
        return m;
    }

    /// Builds from a dense row-major array, dropping exact zeros.
    static CsrMatrix from_dense(std::size_t n, const std::vector<double>& a) {
        CsrMatrix m;
        m.n = n;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (a[i * n + j] != 0.0) {
                    m.col.push_back(static_cast<std::uint32_t>(j));
                    m.val.push_back(a[i * n + j]);
                }
            }
            m.row_ptr.push_back(m.col.size());
        }
        return m;
    }
};

/// Max over entries of |A - A^T|, by row lookup.
inline double asymmetry(const CsrMatrix& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.n; ++i)
        for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
            m = std::max(m, std::abs(a.val[k] - a.at(a.col[k], i)));
    return m;
}

/// alpha A + beta B + shift I for matrices sharing one sparsity pattern.
inline CsrMatrix combine(double alpha, const CsrMatrix& a, double beta, const CsrMatrix& b, double shift = 0.0) {
    if (a.n != b.n || a.col != b.col || a.row_ptr != b.row_ptr)
        throw Error("combine: matrices must share a sparsity pattern");
    CsrMatrix c = a;
    for (std::size_t k = 0; k < c.val.size(); ++k) c.val[k] = alpha * a.val[k] + beta * b.val[k];
    if (shift != 0.0) {
        for (std::size_t i = 0; i < c.n; ++i)
            for (std::size_t k = c.row_ptr[i]; k < c.row_ptr[i + 1]; ++k)
                if (c.col[k] == i) c.val[k] += shift;
    }
    return c;
}

inline void spmv_into(const CsrMatrix& a, const Vector& x, Vector& y) {
    if (x.size() != a.n) {
        throw Error("spmv: dimension mismatch (matrix " + std::to_string(a.n) + ", vector " +
                    std::to_string(x.size()) + ")");
    }
    y.resize(a.n);
    parallel_for(0, a.n, [&](std::size_t i) {
        double s = 0.0;
        for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) s += a.val[k] * x[a.col[k]];
        y[i] = s;
    });
}

inline Vector spmv(const CsrMatrix& a, const Vector& x) {
    Vector y;
    spmv_into(a, x, y);
    return y;
}

inline double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw Error("dot: dimension mismatch");
    return deterministic_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

inline double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

/// A symmetric operator stored by its main and upper diagonals, so rows
/// stream without column indices and the mirrored half is not stored. Each
/// row sums in ascending column order like the CSR kernel.
struct SymmetricDiagonals {
    std::size_t n = 0;
    std::vector<std::size_t> offsets;  // ascending, offsets[0] == 0
    std::vector<double> data;          // diagonal-major, offsets.size() * n

    /// Built from the upper triangle of a; empty when that has more than
    /// max_diagonals distinct offsets.
    static std::optional<SymmetricDiagonals> from_upper(const CsrMatrix& a, std::size_t max_diagonals = 8) {
        SymmetricDiagonals d;
        d.n = a.n;
        d.offsets.push_back(0);
        for (std::size_t i = 0; i < a.n; ++i)
            for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
                if (a.col[k] < i) continue;
                const std::size_t off = a.col[k] - i;
                const auto it = std::lower_bound(d.offsets.begin(), d.offsets.end(), off);
                if (it == d.offsets.end() || *it != off) {
                    if (d.offsets.size() == max_diagonals) return std::nullopt;
                    d.offsets.insert(it, off);
                }
            }
        d.data.assign(d.offsets.size() * a.n, 0.0);
        for (std::size_t i = 0; i < a.n; ++i)
            for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
                if (a.col[k] < i) continue;
                const std::size_t j = std::lower_bound(d.offsets.begin(), d.offsets.end(), a.col[k] - i) -
                                      d.offsets.begin();
                d.data[j * a.n + i] = a.val[k];
            }
        return d;
    }

    /// y[lo, hi) = (A x)[lo, hi).
    void apply_rows(std::size_t lo, std::size_t hi, const Vector& x, Vector& y) const {
        for (std::size_t i = lo; i < hi; ++i) y[i] = 0.0;
        // mirrored lower part, farthest column first
        for (std::size_t j = offsets.size(); j-- > 1;) {
            const std::size_t off = offsets[j];
            const double* dj = data.data() + j * n;
            for (std::size_t i = std::max(lo, off); i < hi; ++i) y[i] += dj[i - off] * x[i - off];
        }
        for (std::size_t j = 0; j < offsets.size(); ++j) {
            const std::size_t off = offsets[j];
            if (off >= n) break;
            const double* dj = data.data() + j * n;
            const std::size_t end = std::min(hi, n - off);
            for (std::size_t i = lo; i < end; ++i) y[i] += dj[i] * x[i + off];
        }
    }
};

struct CgOptions {
    double tol = 1e-10;             // relative residual target
    std::size_t max_iterations = 0;  // 0 selects 10 sqrt(n)
    double diag_floor = 1e-12;       // relative to max diagonal entry
    bool record_history = false;
};

struct CgReport {
    std::size_t iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
    /// sqrt(r^T z) at each iterate when requested, starting with the initial guess.
    std::vector<double> preconditioned_residual;
    /// Quadratic functional x^T A x / 2 - b^T x at each iterate.
    std::vector<double> energy;
};

/// Jacobi-preconditioned conjugate gradients for symmetric positive
/// (semi)definite systems. Diagonal entries below diag_floor * max(diag) are
/// raised to that floor in the preconditioner.
inline CgReport cg_solve(const CsrMatrix& a, const Vector& rhs, Vector& x, const CgOptions& opt = {}) {
    const std::size_t n = a.n;
    if (rhs.size() != n) throw Error("cg: right-hand side has wrong length");
    if (x.size() != n) x.assign(n, 0.0);
    if (!(opt.tol > 0.0)) throw Error("cg: tolerance must be positive");
    const std::size_t maxit = opt.max_iterations
                                  ? opt.max_iterations
                                  : std::max<std::size_t>(1, static_cast<std::size_t>(10.0 * std::sqrt(double(n))));

    Vector inv_diag = a.diagonal();
    double dmax = 0.0;
    for (double d : inv_diag) dmax = std::max(dmax, std::abs(d));
    const double floor = opt.diag_floor * dmax;
    for (double& d : inv_diag) d = 1.0 / std::max(d, floor > 0.0 ? floor : 1.0);

    CgReport rep;
    const double bnorm = norm2(rhs);
    if (!std::isfinite(bnorm)) throw SolverError("cg: non-finite right-hand side");
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        rep.converged = true;
        return rep;
    }

    Vector r(n), p(n), q(n);
    spmv_into(a, x, q);
    const auto [rz0, rr0] = deterministic_sum2(n, [&](std::size_t i) {
        r[i] = rhs[i] - q[i];
        p[i] = inv_diag[i] * r[i];
        return std::pair{r[i] * p[i], r[i] * r[i]};
    });
    double rz = rz0;
    double rnorm = std::sqrt(rr0);
    auto energy = [&] {
        spmv_into(a, x, q);
        return deterministic_sum(n, [&](std::size_t i) { return 0.5 * x[i] * q[i] - rhs[i] * x[i]; });
    };
    if (opt.record_history) {
        rep.preconditioned_residual.push_back(std::sqrt(std::max(rz, 0.0)));
        rep.energy.push_back(energy());
    }

    Vector best = x;
    double best_res = rnorm;
    // Q1 step matrices have five upper diagonals; half storage roughly halves
    // the memory traffic of the product, which dominates each iteration.
    const std::optional<SymmetricDiagonals> dia = SymmetricDiagonals::from_upper(a);
    while (rnorm > opt.tol * bnorm && rep.iterations < maxit) {
        // q = A p fused with p . q
        const double pq = blocked_sum(n, [&](std::size_t lo, std::size_t hi) {
            if (dia) {
                dia->apply_rows(lo, hi, p, q);
            } else {
                for (std::size_t i = lo; i < hi; ++i) {
                    double s = 0.0;
                    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) s += a.val[k] * p[a.col[k]];
                    q[i] = s;
                }
            }
            double s = 0.0;
            for (std::size_t i = lo; i < hi; ++i) s += p[i] * q[i];
            return s;
        });
        if (!std::isfinite(pq) || !std::isfinite(rz)) throw SolverError("cg: non-finite value encountered");
        if (pq <= 0.0) break;  // breakdown on a semidefinite direction
        const double alpha = rz / pq;
        const auto [rz_new, rr] = deterministic_sum2(n, [&](std::size_t i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            return std::pair{inv_diag[i] * r[i] * r[i], r[i] * r[i]};
        });
        const double beta = rz_new / rz;
        rz = rz_new;
        parallel_for(0, n, [&](std::size_t i) { p[i] = inv_diag[i] * r[i] + beta * p[i]; });
        rnorm = std::sqrt(rr);
        ++rep.iterations;
        if (!std::isfinite(rnorm)) throw SolverError("cg: non-finite value encountered");
        if (rnorm < best_res) {
            best_res = rnorm;
            // the last iterate is nearly always the best; checkpoint sparsely
            if (rep.iterations % 32 == 0) best = x;
        }
        if (opt.record_history) {
            rep.preconditioned_residual.push_back(std::sqrt(std::max(rz, 0.0)));
            rep.energy.push_back(energy());
        }
    }
    rep.converged = rnorm <= opt.tol * bnorm;
    if (!rep.converged && best_res < rnorm) {
        const Vector ab = spmv(a, best);
        const double rb = std::sqrt(deterministic_sum(n, [&](std::size_t i) {
            const double d = rhs[i] - ab[i];
            return d * d;
        }));
        if (rb < rnorm) {
            x = best;
            rnorm = rb;
        }
    }
    rep.relative_residual = rnorm / bnorm;
    return rep;
}

}  // namespace ddm
