#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ddm/common.hpp"

namespace ddm {

/// Sigmoidal transition profile tanh(3s).
inline double transition(double s) { return std::tanh(3.0 * s); }

/// Signed distance and its gradient at one point. The gradient has unit
/// length for exact distance functions.
struct DistanceSample {
    double distance = 0.0;
    Point gradient{1.0, 0.0};
};

struct Circle {
    Point center;
    double radius = 0.0;

    DistanceSample sample(Point p) const {
        const Point r = p - center;
        const double len = norm(r);
        DistanceSample s;
        s.distance = len - radius;
        if (len > 0.0) s.gradient = {r.x / len, r.y / len};
        return s;
    }
};

/// Star-shaped curve r(theta) = r0 - r1 sin(lobes * theta) around a center.
/// The boundary is sampled densely once; queries pick the nearest sample and
/// refine the curve parameter with Newton's method.
class Flower {
  public:
    static constexpr std::size_t kSamples = 4096;
    static constexpr std::size_t kBlock = 64;

    Flower(Point center, double r0, double r1, int lobes) : center_(center), r0_(r0), r1_(r1), lobes_(lobes) {
        if (!(r0 > r1) || !(r1 >= 0.0)) throw Error("flower: requires r0 > r1 >= 0");
        if (lobes < 0) throw Error("flower: lobe count must be nonnegative");
        auto table = std::make_shared<Table>();
        table->theta.resize(kSamples);
        table->points.resize(kSamples);
        for (std::size_t k = 0; k < kSamples; ++k) {
            const double th = 2.0 * std::numbers::pi * static_cast<double>(k) / kSamples;
            table->theta[k] = th;
            table->points[k] = curve(th) - center_;
        }
        for (std::size_t b = 0; b < kSamples; b += kBlock) {
            Point c{0.0, 0.0};
            for (std::size_t k = b; k < b + kBlock; ++k) c = c + table->points[k];
            c = (1.0 / kBlock) * c;
            double rad = 0.0;
            for (std::size_t k = b; k < b + kBlock; ++k) rad = std::max(rad, norm(table->points[k] - c));
            table->block_center.push_back(c);
            table->block_radius.push_back(rad);
        }
        table_ = std::move(table);
    }

    Point center() const { return center_; }
    double r0() const { return r0_; }
    double r1() const { return r1_; }
    int lobes() const { return lobes_; }

    double radius_at(double theta) const { return r0_ - r1_ * std::sin(lobes_ * theta); }

    Point curve(double theta) const {
        const double r = radius_at(theta);
        return center_ + Point{r * std::cos(theta), r * std::sin(theta)};
    }

    DistanceSample sample(Point p) const {
        const Point q = p - center_;
        const Table& t = *table_;

        // nearest sample, pruning blocks by their bounding circles
        double best2 = std::numeric_limits<double>::infinity();
        std::size_t best = 0;
        std::array<std::pair<double, std::size_t>, kSamples / kBlock> order{};
        for (std::size_t b = 0; b < order.size(); ++b) {
            const double lb = std::max(0.0, norm(q - t.block_center[b]) - t.block_radius[b]);
            order[b] = {lb, b};
        }
        std::sort(order.begin(), order.end());
        for (auto [lb, b] : order) {
            if (lb * lb > best2) break;
            for (std::size_t k = b * kBlock; k < (b + 1) * kBlock; ++k) {
                const Point d = q - t.points[k];
                const double d2 = d.x * d.x + d.y * d.y;
                if (d2 < best2) {
                    best2 = d2;
                    best = k;
                }
            }
        }

        const double step = 2.0 * std::numbers::pi / kSamples;
        double theta = t.theta[best];
        double dist2 = best2;
        for (int it = 0; it < 30; ++it) {
            const auto [c, c1, c2] = derivatives(theta);
            const Point r = c - q;
            const double g = dot(r, c1);
            const double h = dot(c1, c1) + dot(r, c2);
            if (h <= 0.0) break;
            const double delta = std::clamp(-g / h, -step, step);
            const Point rn = std::get<0>(derivatives(theta + delta)) - q;
            const double d2 = dot(rn, rn);
            if (d2 > dist2) break;
            theta += delta;
            dist2 = d2;
            if (std::abs(delta) < 1e-15) break;
        }

        const double dist = std::sqrt(dist2);
        const Point foot = std::get<0>(derivatives(theta));
        const double rq = norm(q);
        const bool inside = rq < radius_at(std::atan2(q.y, q.x));
        DistanceSample s;
        s.distance = inside ? -dist : dist;
        if (dist > 1e-12) {
            const double sign = inside ? -1.0 : 1.0;
            s.gradient = (sign / dist) * (q - foot);
        } else {
            const Point c1 = std::get<1>(derivatives(theta));
            const double len = norm(c1);
            s.gradient = {c1.y / len, -c1.x / len};
        }
        return s;
    }

  private:
    struct Table {
        std::vector<double> theta;
        std::vector<Point> points;  // relative to center
        std::vector<Point> block_center;
        std::vector<double> block_radius;
    };

    // curve point (relative to center) and its first two parameter derivatives
    std::tuple<Point, Point, Point> derivatives(double th) const {
        const double s = std::sin(lobes_ * th), c = std::cos(lobes_ * th);
        const double r = r0_ - r1_ * s;
        const double r1 = -r1_ * lobes_ * c;
        const double r2 = r1_ * lobes_ * lobes_ * s;
        const double ct = std::cos(th), st = std::sin(th);
        return {Point{r * ct, r * st}, Point{r1 * ct - r * st, r1 * st + r * ct},
                Point{r2 * ct - 2.0 * r1 * st - r * ct, r2 * st + 2.0 * r1 * ct - r * st}};
    }

    Point center_;
    double r0_, r1_;
    int lobes_;
    std::shared_ptr<const Table> table_;
};

/// Signed distance to a star-shaped flower centered at the origin.
inline double flower_distance(Point p, double r0, double r1, int lobes) {
    return Flower({0.0, 0.0}, r0, r1, lobes).sample(p).distance;
}

/// Signed distance sampled on the cell centers of a raster, bilinearly
/// interpolated. Gradients come from central differences of the samples.
class Raster {
  public:
    Raster(std::vector<double> values, std::size_t cols, std::size_t rows, double cell, Point origin)
        : values_(std::move(values)), cols_(cols), rows_(rows), cell_(cell), origin_(origin) {
        if (cols_ < 2 || rows_ < 2 || values_.size() != cols_ * rows_)
            throw Error("raster: distance grid must be at least 2x2");
        if (!(cell_ > 0.0)) throw Error("raster: cell size must be positive");
        grad_x_.resize(values_.size());
        grad_y_.resize(values_.size());
        for (std::size_t j = 0; j < rows_; ++j) {
            for (std::size_t i = 0; i < cols_; ++i) {
                grad_x_[j * cols_ + i] = diff(i, cols_, [&](std::size_t k) { return at(k, j); });
                grad_y_[j * cols_ + i] = diff(j, rows_, [&](std::size_t k) { return at(i, k); });
            }
        }
    }

    std::size_t cols() const { return cols_; }
    std::size_t rows() const { return rows_; }
    double cell() const { return cell_; }
    Point origin() const { return origin_; }
    /// Value at cell (i, j); j = 0 is the bottom row.
    double at(std::size_t i, std::size_t j) const { return values_[j * cols_ + i]; }
    Point center_of(std::size_t i, std::size_t j) const {
        return origin_ + Point{(static_cast<double>(i) + 0.5) * cell_, (static_cast<double>(j) + 0.5) * cell_};
    }

    DistanceSample sample(Point p) const {
        // continuous index space: cell centers sit on integers
        const double fx = (p.x - origin_.x) / cell_ - 0.5;
        const double fy = (p.y - origin_.y) / cell_ - 0.5;
        const double cx = std::clamp(fx, 0.0, static_cast<double>(cols_ - 1));
        const double cy = std::clamp(fy, 0.0, static_cast<double>(rows_ - 1));
        const std::size_t i = std::min(static_cast<std::size_t>(cx), cols_ - 2);
        const std::size_t j = std::min(static_cast<std::size_t>(cy), rows_ - 2);
        const double s = cx - static_cast<double>(i), t = cy - static_cast<double>(j);
        auto lerp = [&](const std::vector<double>& f) {
            const auto v = [&](std::size_t a, std::size_t b) { return f[b * cols_ + a]; };
            return (1 - s) * (1 - t) * v(i, j) + s * (1 - t) * v(i + 1, j) + s * t * v(i + 1, j + 1) +
                   (1 - s) * t * v(i, j + 1);
        };
        DistanceSample out;
        out.distance = lerp(values_);
        out.gradient = {lerp(grad_x_), lerp(grad_y_)};
        // outside the sampled window, continue with the Euclidean offset
        const double ox = (fx - cx) * cell_, oy = (fy - cy) * cell_;
        if (ox != 0.0 || oy != 0.0) {
            const double off = std::hypot(ox, oy);
            out.distance += off;
            out.gradient = {ox / off, oy / off};
        }
        return out;
    }

  private:
    template <class F>
    double diff(std::size_t k, std::size_t n, F f) const {
        if (k == 0) return (f(1) - f(0)) / cell_;
        if (k == n - 1) return (f(n - 1) - f(n - 2)) / cell_;
        return (f(k + 1) - f(k - 1)) / (2.0 * cell_);
    }

    std::vector<double> values_, grad_x_, grad_y_;
    std::size_t cols_, rows_;
    double cell_;
    Point origin_;
};

/// Binary inside/outside mask; row 0 is the bottom row.
struct Mask {
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::vector<std::uint8_t> inside;

    bool at(std::size_t i, std::size_t j) const { return inside[j * cols + i] != 0; }
};

/// Signed distance from a binary mask by fast sweeping on |grad d| = 1.
/// The interface lies on the pixel edges separating inside from outside.
inline Raster raster_distance(const Mask& mask, double cell, Point origin = {0.0, 0.0}) {
    const std::size_t nx = mask.cols, ny = mask.rows;
    if (nx == 0 || ny == 0 || mask.inside.size() != nx * ny) throw Error("raster: empty mask");
    if (nx < 2 || ny < 2) throw Error("raster: mask must be at least 2x2");
    if (!(cell > 0.0)) throw Error("raster: cell size must be positive");
    const auto n_inside = std::count_if(mask.inside.begin(), mask.inside.end(), [](auto v) { return v != 0; });
    if (n_inside == 0 || static_cast<std::size_t>(n_inside) == mask.inside.size())
        throw Error("degenerate mask");

    constexpr double kFar = std::numeric_limits<double>::max() / 4;
    std::vector<double> u(nx * ny, kFar);
    std::vector<std::uint8_t> frozen(nx * ny, 0);
    auto idx = [nx](std::size_t i, std::size_t j) { return j * nx + i; };
    // Pixels with an opposite pixel among their 8 neighbours get the exact
    // distance to the nearest opposite square: cell/2 across an edge,
    // cell/sqrt(2) across a corner.
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            const bool in = mask.at(i, j);
            double best = kFar;
            for (int dj = -1; dj <= 1; ++dj) {
                for (int di = -1; di <= 1; ++di) {
                    const auto a = static_cast<std::ptrdiff_t>(i) + di, b = static_cast<std::ptrdiff_t>(j) + dj;
                    if (a < 0 || b < 0 || a >= static_cast<std::ptrdiff_t>(nx) || b >= static_cast<std::ptrdiff_t>(ny))
                        continue;
                    if (mask.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) == in) continue;
                    best = std::min(best, (di != 0 && dj != 0 ? std::sqrt(0.5) : 0.5) * cell);
                }
            }
            if (best < kFar) {
                u[idx(i, j)] = best;
                frozen[idx(i, j)] = 1;
            }
        }
    }

    auto update = [&](std::size_t i, std::size_t j) {
        if (frozen[idx(i, j)]) return 0.0;
        const double a = std::min(i > 0 ? u[idx(i - 1, j)] : kFar, i + 1 < nx ? u[idx(i + 1, j)] : kFar);
        const double b = std::min(j > 0 ? u[idx(i, j - 1)] : kFar, j + 1 < ny ? u[idx(i, j + 1)] : kFar);
        double cand;
        if (std::abs(a - b) >= cell) {
            cand = std::min(a, b) + cell;
        } else {
            cand = 0.5 * (a + b + std::sqrt(2.0 * cell * cell - (a - b) * (a - b)));
        }
        double& cur = u[idx(i, j)];
        if (cand < cur) {
            const double change = cur - cand;
            cur = cand;
            return change;
        }
        return 0.0;
    };

    const double threshold = 1e-10 * cell;
    for (int pass = 0; pass < 1000; ++pass) {
        double max_change = 0.0;
        for (int order = 0; order < 4; ++order) {
            const bool rev_i = order & 1, rev_j = order & 2;
            for (std::size_t jj = 0; jj < ny; ++jj) {
                const std::size_t j = rev_j ? ny - 1 - jj : jj;
                for (std::size_t ii = 0; ii < nx; ++ii) {
                    const std::size_t i = rev_i ? nx - 1 - ii : ii;
                    const double c = update(i, j);
                    // the first assignment from kFar is not a convergence signal
                    if (c < kFar / 2) max_change = std::max(max_change, c);
                }
            }
        }
        if (max_change < threshold && pass > 0) break;
    }

    for (std::size_t k = 0; k < u.size(); ++k) {
        if (mask.inside[k]) u[k] = -u[k];
    }
    return Raster(std::move(u), nx, ny, cell, origin);
}

/// Reads a binary (P5) or ASCII (P2) PGM image. Pixels with value >= 128 are
/// inside. The first image row is the top of the domain.
inline Mask read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("pgm: cannot open " + path);
    auto next_token = [&in, &path]() {
        std::string tok;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                std::string rest;
                std::getline(in, rest);
                if (!tok.empty()) break;
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!tok.empty()) break;
                continue;
            }
            tok.push_back(c);
        }
        if (tok.empty()) throw Error("pgm: truncated header in " + path);
        return tok;
    };
    const std::string magic = next_token();
    if (magic != "P5" && magic != "P2") throw Error("pgm: unsupported format '" + magic + "' in " + path);
    std::size_t cols = 0, rows = 0;
    long maxval = 0;
    try {
        cols = std::stoul(next_token());
        rows = std::stoul(next_token());
        maxval = std::stol(next_token());
    } catch (const std::logic_error&) {
        throw Error("pgm: malformed header in " + path);
    }
    if (cols == 0 || rows == 0 || maxval <= 0 || maxval > 65535) throw Error("pgm: bad dimensions in " + path);

    std::vector<long> raw(cols * rows);
    if (magic == "P2") {
        for (auto& v : raw) {
            try {
                v = std::stol(next_token());
            } catch (const std::logic_error&) {
                throw Error("pgm: malformed pixel in " + path);
            }
        }
    } else {
        const std::size_t bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> buf(raw.size() * bytes);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw Error("pgm: truncated pixels in " + path);
        for (std::size_t k = 0; k < raw.size(); ++k)
            raw[k] = bytes == 1 ? buf[k] : (static_cast<long>(buf[2 * k]) << 8) | buf[2 * k + 1];
    }

    Mask m;
    m.cols = cols;
    m.rows = rows;
    m.inside.resize(cols * rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t j = rows - 1 - r;
        for (std::size_t i = 0; i < cols; ++i) m.inside[j * cols + i] = raw[r * cols + i] >= 128 ? 1 : 0;
    }
    return m;
}

/// Signed distance evaluator, negative inside the domain.
class DistanceField {
  public:
    using Kind = std::variant<Circle, Flower, Raster>;

    DistanceField(Kind kind) : kind_(std::make_shared<const Kind>(std::move(kind))) {}

    static DistanceField circle(Point center, double radius) {
        if (!(radius > 0.0)) throw Error("circle: radius must be positive");
        return DistanceField(Circle{center, radius});
    }
    static DistanceField flower(Point center, double r0, double r1, int lobes) {
        return DistanceField(Flower(center, r0, r1, lobes));
    }
    static DistanceField raster(const Mask& mask, double cell, Point origin) {
        return DistanceField(raster_distance(mask, cell, origin));
    }

    DistanceSample sample(Point p) const {
        return std::visit([p](const auto& k) { return k.sample(p); }, *kind_);
    }
    double operator()(Point p) const { return sample(p).distance; }

    const Kind& kind() const { return *kind_; }

  private:
    std::shared_ptr<const Kind> kind_;
};

/// Weight value, surface density, unit normal and signed distance at a point.
struct WeightSample {
    double omega = 1.0;
    double grad_mag = 0.0;
    Point normal{1.0, 0.0};
    double distance = 0.0;
};

/// Smooth indicator of the domain: omega = (1 - tanh(3 d / eps)) / 2.
class PhaseField {
  public:
    PhaseField(DistanceField distance, double epsilon) : distance_(std::move(distance)), epsilon_(epsilon) {
        if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error("phase field: epsilon must be positive");
    }

    const DistanceField& distance() const { return distance_; }
    double epsilon() const { return epsilon_; }

    // Logistic form of (1 - tanh z)/2; keeps the far tails positive.
    static double omega_of(double d, double eps) {
        const double two_z = 6.0 * d / eps;
        if (two_z >= 0.0) {
            const double e = std::exp(-two_z);
            return e / (1.0 + e);
        }
        return 1.0 / (1.0 + std::exp(two_z));
    }

    // (3 / (2 eps)) sech^2(3 d / eps)
    static double omega_slope_of(double d, double eps) {
        const double e = std::exp(-6.0 * std::abs(d) / eps);
        return 1.5 / eps * 4.0 * e / ((1.0 + e) * (1.0 + e));
    }

    double omega(Point p) const { return omega_of(distance_(p), epsilon_); }

    double grad_omega_mag(Point p) const {
        const DistanceSample s = distance_.sample(p);
        return omega_slope_of(s.distance, epsilon_) * norm(s.gradient);
    }

    WeightSample sample(Point p) const {
        const DistanceSample s = distance_.sample(p);
        const double g = norm(s.gradient);
        WeightSample w;
        w.omega = omega_of(s.distance, epsilon_);
        w.grad_mag = omega_slope_of(s.distance, epsilon_) * g;
        if (g > 0.0) w.normal = (1.0 / g) * s.gradient;
        w.distance = s.distance;
        return w;
    }

  private:
    DistanceField distance_;
    double epsilon_;
};

/// omega == 1 everywhere with no diffuse surface; the plain finite element
/// setting used to check assembly against closed forms.
struct UnitWeight {
    WeightSample sample(Point) const { return {}; }
};

}  // namespace ddm
