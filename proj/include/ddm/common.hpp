#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace ddm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Linear solve failure or a non-finite state during time stepping.
class SolverError : public Error {
  public:
    using Error::Error;
};

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
    friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
    friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Point a, Point b) = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }

using Vector = std::vector<double>;

/// Worker count for data-parallel kernels. DDM_THREADS caps it.
inline unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("DDM_THREADS")) {
        char* end = nullptr;
        long cap = std::strtol(env, &end, 10);
        if (end != env && cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return n;
}

/// Runs fn(i) for i in [begin, end). Iterations must be independent; results
/// never depend on the number of workers.
template <class Fn>
void parallel_for(std::size_t begin, std::size_t end, Fn&& fn, std::size_t grain = 4096) {
    const std::size_t count = end > begin ? end - begin : 0;
    const unsigned workers = worker_count();
    if (workers <= 1 || count < grain) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = begin + w * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn, &err = errors[w]] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                err = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    // report the failure with the lowest index range
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Sum of term(i) over [0, n) with a fixed blocking: each block of
/// kReductionBlock terms is summed left to right, then the block partials are
/// summed in order. The result is bit-identical for any worker count.
inline constexpr std::size_t kReductionBlock = 4096;

template <class Term>
double deterministic_sum(std::size_t n, Term&& term) {
    const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
    std::vector<double> partial(blocks, 0.0);
    parallel_for(0, blocks, [&](std::size_t b) {
        const std::size_t lo = b * kReductionBlock;
        const std::size_t hi = std::min(n, lo + kReductionBlock);
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += term(i);
        partial[b] = s;
    }, 2);
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

/// Sum of block(lo, hi) over the fixed blocks of deterministic_sum; the
/// callback sums its own range in index order.
template <class Block>
double blocked_sum(std::size_t n, Block&& block) {
    const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
    std::vector<double> partial(blocks, 0.0);
    parallel_for(0, blocks, [&](std::size_t b) {
        const std::size_t lo = b * kReductionBlock;
        partial[b] = block(lo, std::min(n, lo + kReductionBlock));
    }, 2);
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

/// Two sums over [0, n) in one pass, with the blocking of deterministic_sum.
template <class Term>
std::pair<double, double> deterministic_sum2(std::size_t n, Term&& term) {
    const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
    std::vector<std::pair<double, double>> partial(blocks, {0.0, 0.0});
    parallel_for(0, blocks, [&](std::size_t b) {
        const std::size_t lo = b * kReductionBlock;
        const std::size_t hi = std::min(n, lo + kReductionBlock);
        double s0 = 0.0, s1 = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const auto [a, c] = term(i);
            s0 += a;
            s1 += c;
        }
        partial[b] = {s0, s1};
    }, 2);
    std::pair<double, double> total{0.0, 0.0};
    for (auto [a, c] : partial) {
        total.first += a;
        total.second += c;
    }
    return total;
}

}  // namespace ddm
