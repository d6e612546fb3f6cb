#include "monospde/convex_core.hpp"

#include "monospde/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace monospde {

namespace {

void require_dimension(int n) {
    if (n < 1 || n > kMaxDimension) {
        throw std::invalid_argument("integrand dimension must be in [1, " +
                                    std::to_string(kMaxDimension) + "], got " + std::to_string(n));
    }
}

void require_lambda(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("lambda must be a positive finite number");
    }
}

} // namespace

Point::Point(int n) : n_(n) { require_dimension(n); }

Point::Point(std::initializer_list<double> values) : n_(static_cast<int>(values.size())) {
    require_dimension(n_);
    std::copy(values.begin(), values.end(), v_.begin());
}

Point Point::from(std::span<const double> values) {
    Point p(static_cast<int>(values.size()));
    std::copy(values.begin(), values.end(), p.v_.begin());
    return p;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double euclidean_norm(std::span<const double> x) {
    if (x.size() == 1) return std::abs(x[0]);
    if (x.size() == 2) return std::hypot(x[0], x[1]);
    return std::sqrt(dot(x, x));
}

ConvexIntegrand::ConvexIntegrand(int dimension, double asymmetry_bound)
    : dimension_(dimension), asymmetry_bound_(asymmetry_bound) {
    require_dimension(dimension);
    if (!(asymmetry_bound >= 1.0)) throw std::invalid_argument("asymmetry bound must be >= 1");
}

// ---------------------------------------------------------------------------
// Generic resolvent solvers

void radial_prox(const RadialProfile& profile, double lambda, std::span<const double> x,
                 std::span<double> out, const ProxOptions& options) {
    require_lambda(lambda);
    const double r = euclidean_norm(x);
    // Below the threshold lambda*phi'(0+) the resolvent collapses to the origin.
    if (r <= lambda * profile.slope(0.0)) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    const double scale = std::max(1.0, r);
    auto residual = [&](double s) { return s + lambda * profile.slope(s) - r; };

    double lo = 0.0;
    double hi = r;
    double s = r / (1.0 + lambda);
    double f = residual(s);
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        if (std::abs(f) <= options.tolerance * scale || hi - lo <= options.tolerance * scale) break;
        if (f > 0.0) hi = s; else lo = s;
        const double deriv = 1.0 + lambda * profile.curvature(s);
        double next = s - f / deriv;
        if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
        s = next;
        f = residual(s);
    }
    if (it == options.max_iterations) {
        std::vector<double> last(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) last[i] = s * x[i] / r;
        throw SolverFailure("radial prox: root-find did not converge", std::move(last), f);
    }
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * (x[i] / r);
}

void gradient_prox(const ValueFn& value, const GradientFn& gradient, double lambda,
                   std::span<const double> x, std::span<double> out, const ProxOptions& options) {
    require_lambda(lambda);
    const std::size_t n = x.size();
    auto objective = [&](std::span<const double> y) {
        double q = 0.0;
        for (std::size_t i = 0; i < n; ++i) q += (y[i] - x[i]) * (y[i] - x[i]);
        return value(y) + q / (2.0 * lambda);
    };
    auto full_gradient = [&](std::span<const double> y, std::span<double> g) {
        gradient(y, g);
        for (std::size_t i = 0; i < n; ++i) g[i] += (y[i] - x[i]) / lambda;
    };

    std::vector<double> y(x.begin(), x.end());
    std::vector<double> g(n), y_prev(n), g_prev(n), trial(n);
    full_gradient(y, g);
    double step = lambda;
    const double scale = std::max(1.0, euclidean_norm(x));
    double gnorm = euclidean_norm(g);
    for (int it = 0; it < options.max_iterations; ++it) {
        if (lambda * gnorm <= options.tolerance * scale) {
            std::copy(y.begin(), y.end(), out.begin());
            return;
        }
        const double f0 = objective(y);
        double t = step;
        for (int bt = 0; bt < 60; ++bt) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = y[i] - t * g[i];
            if (objective(trial) <= f0 - 1e-4 * t * gnorm * gnorm) break;
            t *= 0.5;
        }
        y_prev = y;
        g_prev = g;
        y = trial;
        full_gradient(y, g);
        gnorm = euclidean_norm(g);
        double sy = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double ds = y[i] - y_prev[i];
            sy += ds * (g[i] - g_prev[i]);
            ss += ds * ds;
        }
        // Barzilai-Borwein step; strong convexity keeps sy > 0 away from convergence.
        step = (sy > 0.0) ? std::min(ss / sy, 1e3 * lambda) : lambda;
    }
    throw SolverFailure("gradient prox: no convergence", std::move(y), lambda * gnorm);
}

// ---------------------------------------------------------------------------
// Built-in integrands

QuadraticIntegrand::QuadraticIntegrand(int dimension) : ConvexIntegrand(dimension, 1.0) {}

double QuadraticIntegrand::value(std::span<const double> x) const { return 0.5 * dot(x, x); }

void QuadraticIntegrand::prox(double lambda, std::span<const double> x,
                              std::span<double> out) const {
    const double c = 1.0 / (1.0 + lambda);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = c * x[i];
}

std::optional<double> QuadraticIntegrand::conjugate_closed_form(std::span<const double> r) const {
    return 0.5 * dot(r, r);
}

RadialIntegrand::RadialIntegrand(int dimension, RadialProfile profile, std::string name,
                                 std::function<double(double)> conjugate_profile,
                                 double asymmetry_bound)
    : ConvexIntegrand(dimension, asymmetry_bound), profile_(std::move(profile)),
      name_(std::move(name)), conjugate_profile_(std::move(conjugate_profile)) {}

double RadialIntegrand::value(std::span<const double> x) const {
    return profile_.value(euclidean_norm(x));
}

void RadialIntegrand::prox(double lambda, std::span<const double> x, std::span<double> out) const {
    radial_prox(profile_, lambda, x, out);
}

std::optional<double> RadialIntegrand::conjugate_closed_form(std::span<const double> r) const {
    if (!conjugate_profile_) return std::nullopt;
    return conjugate_profile_(euclidean_norm(r));
}

namespace {

RadialProfile power_profile(double p) {
    return {
        [p](double s) { return std::pow(s, p) / p; },
        [p](double s) { return std::pow(s, p - 1.0); },
        [p](double s) { return (p - 1.0) * std::pow(s, p - 2.0); },
    };
}

std::string power_name(double p) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), p);
    return "pgrow:" + std::string(buf, end);
}

} // namespace

PowerIntegrand::PowerIntegrand(int dimension, double p)
    : RadialIntegrand(dimension, power_profile(p), power_name(p),
                      [q = p / (p - 1.0)](double s) { return std::pow(s, q) / q; }),
      p_(p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw ConfigError("integrand", "pgrow exponent must exceed 1");
}

AbsQuadIntegrand::AbsQuadIntegrand(int dimension) : ConvexIntegrand(dimension, 1.0) {}

double AbsQuadIntegrand::value(std::span<const double> x) const {
    const double r = euclidean_norm(x);
    return r + 0.5 * r * r;
}

void AbsQuadIntegrand::prox(double lambda, std::span<const double> x, std::span<double> out) const {
    const double r = euclidean_norm(x);
    if (r <= lambda) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    const double c = (r - lambda) / ((1.0 + lambda) * r);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = c * x[i];
}

std::optional<double> AbsQuadIntegrand::conjugate_closed_form(std::span<const double> r) const {
    const double excess = std::max(euclidean_norm(r) - 1.0, 0.0);
    return 0.5 * excess * excess;
}

RadialProfile AbsQuadIntegrand::radial_profile() {
    return {
        [](double s) { return s + 0.5 * s * s; },
        [](double s) { return 1.0 + s; },
        [](double) { return 1.0; },
    };
}

AnisoQuadIntegrand::AnisoQuadIntegrand(int dimension) : ConvexIntegrand(dimension, 2.0) {}

double AnisoQuadIntegrand::value(std::span<const double> x) const {
    return 0.5 * dot(x, x) + std::max(x[0], 0.0);
}

void AnisoQuadIntegrand::prox(double lambda, std::span<const double> x,
                              std::span<double> out) const {
    const double c = 1.0 / (1.0 + lambda);
    // Separable: the kinked first coordinate has its own three-branch resolvent.
    if (x[0] > lambda) out[0] = (x[0] - lambda) * c;
    else if (x[0] < 0.0) out[0] = x[0] * c;
    else out[0] = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) out[i] = c * x[i];
}

std::optional<double> AnisoQuadIntegrand::conjugate_closed_form(std::span<const double> r) const {
    double s = 0.0;
    for (std::size_t i = 1; i < r.size(); ++i) s += 0.5 * r[i] * r[i];
    const double r0 = r[0];
    if (r0 < 0.0) s += 0.5 * r0 * r0;
    else if (r0 > 1.0) s += 0.5 * (r0 - 1.0) * (r0 - 1.0);
    return s;
}

SmoothIntegrand::SmoothIntegrand(int dimension, ValueFn value, GradientFn gradient,
                                 std::string name, double asymmetry_bound)
    : ConvexIntegrand(dimension, asymmetry_bound), value_(std::move(value)),
      gradient_(std::move(gradient)), name_(std::move(name)) {}

void SmoothIntegrand::prox(double lambda, std::span<const double> x, std::span<double> out) const {
    gradient_prox(value_, gradient_, lambda, x, out);
}

IntegrandPtr make_integrand(std::string_view name, int dimension) {
    if (dimension < 1 || dimension > kMaxDimension) {
        throw ConfigError("dimension", "unsupported dimension " + std::to_string(dimension));
    }
    if (name == "quad") return std::make_shared<QuadraticIntegrand>(dimension);
    if (name == "abs_quad") return std::make_shared<AbsQuadIntegrand>(dimension);
    if (name == "aniso_quad") return std::make_shared<AnisoQuadIntegrand>(dimension);
    if (name.starts_with("pgrow:")) {
        const std::string_view digits = name.substr(6);
        double p = 0.0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), p);
        if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
            throw ConfigError("integrand", "cannot parse pgrow exponent '" + std::string(digits) + "'");
        }
        if (!(p > 1.0)) throw ConfigError("integrand", "pgrow exponent must exceed 1");
        return std::make_shared<PowerIntegrand>(dimension, p);
    }
    throw ConfigError("integrand", "unknown integrand '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Operations

Point prox_solve(const ConvexIntegrand& k, double lambda, std::span<const double> x) {
    require_lambda(lambda);
    if (static_cast<int>(x.size()) != k.dimension()) {
        throw std::invalid_argument("prox_solve: dimension mismatch");
    }
    Point p(k.dimension());
    k.prox(lambda, x, p.span());
    return p;
}

Point yosida_apply(const ConvexIntegrand& k, double lambda, std::span<const double> x) {
    Point p = prox_solve(k, lambda, x);
    Point g(k.dimension());
    for (int i = 0; i < g.size(); ++i) g[i] = (x[static_cast<std::size_t>(i)] - p[i]) / lambda;
    return g;
}

namespace {

struct BoxSearch {
    const ConvexIntegrand& k;
    std::span<const double> r;
    int n;

    double objective(std::span<const double> x) const { return dot(x, r) - k.value(x); }

    // Samples the boundary of [-R, R]^n: every face on a `pts`-per-axis lattice.
    double boundary_sup(double radius, int pts) const {
        if (n == 1) {
            const double a = radius, b = -radius;
            return std::max(objective({&a, 1}), objective({&b, 1}));
        }
        double best = -std::numeric_limits<double>::infinity();
        std::array<double, kMaxDimension> x{};
        std::array<int, kMaxDimension> idx{};
        for (int face = 0; face < n; ++face) {
            for (double side : {-radius, radius}) {
                idx.fill(0);
                while (true) {
                    int axis_pos = 0;
                    for (int d = 0; d < n; ++d) {
                        if (d == face) { x[static_cast<std::size_t>(d)] = side; continue; }
                        const int i = idx[static_cast<std::size_t>(axis_pos++)];
                        x[static_cast<std::size_t>(d)] = -radius + 2.0 * radius * i / (pts - 1);
                    }
                    best = std::max(best, objective({x.data(), static_cast<std::size_t>(n)}));
                    int carry = 0;
                    while (carry < n - 1 && ++idx[static_cast<std::size_t>(carry)] == pts) {
                        idx[static_cast<std::size_t>(carry)] = 0;
                        ++carry;
                    }
                    if (carry == n - 1) break;
                }
            }
        }
        return best;
    }

    // Maximizes on the lattice center +- half_width with `pts` per axis.
    double lattice_max(std::span<double> center, double half_width, int pts) const {
        std::array<double, kMaxDimension> x{};
        std::array<double, kMaxDimension> best_x{};
        std::array<int, kMaxDimension> idx{};
        double best = -std::numeric_limits<double>::infinity();
        while (true) {
            for (int d = 0; d < n; ++d) {
                const auto du = static_cast<std::size_t>(d);
                x[du] = center[du] - half_width + 2.0 * half_width * idx[du] / (pts - 1);
            }
            const double v = objective({x.data(), static_cast<std::size_t>(n)});
            if (v > best) { best = v; best_x = x; }
            int carry = 0;
            while (carry < n && ++idx[static_cast<std::size_t>(carry)] == pts) {
                idx[static_cast<std::size_t>(carry)] = 0;
                ++carry;
            }
            if (carry == n) break;
        }
        for (int d = 0; d < n; ++d) center[static_cast<std::size_t>(d)] = best_x[static_cast<std::size_t>(d)];
        return best;
    }
};

double golden_section_max(const std::function<double(double)>& f, double a, double b, double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    double best = std::max({f(a), f(b), fc, fd});
    while (b - a > tol) {
        if (fc >= fd) {
            b = d; d = c; fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        best = std::max({best, fc, fd});
    }
    return best;
}

} // namespace

double legendre_oracle(const ConvexIntegrand& k, std::span<const double> r,
                       const LegendreOptions& options) {
    const int n = k.dimension();
    if (static_cast<int>(r.size()) != n) throw std::invalid_argument("legendre_oracle: dimension mismatch");
    BoxSearch search{k, r, n};

    // Expand until the boundary supremum has dropped twice in a row and sits
    // below the value at the origin (0, since k(0) = 0): the maximizer is inside.
    double radius = std::max(options.min_radius, 10.0 * euclidean_norm(r));
    double previous = search.boundary_sup(radius, options.boundary_points);
    int decreases = 0;
    int doublings = 0;
    while (decreases < 2 || previous >= 0.0) {
        if (++doublings > options.max_doublings) {
            throw ConjugateOverflow("legendre oracle: box expansion did not terminate (radius " +
                                    std::to_string(radius) + ")");
        }
        radius *= 2.0;
        const double current = search.boundary_sup(radius, options.boundary_points);
        if (!std::isfinite(current) && current > 0.0) {
            throw ConjugateOverflow("legendre oracle: objective overflowed on the box boundary");
        }
        decreases = (current < previous) ? decreases + 1 : 0;
        previous = current;
    }

    std::array<double, kMaxDimension> center{};
    std::span<double> c{center.data(), static_cast<std::size_t>(n)};
    if (n == 1) {
        const int pts = options.grid_points_1d;
        double best = search.lattice_max(c, radius, pts);
        const double cell = 2.0 * radius / (pts - 1);
        auto f1 = [&](double t) { return search.objective({&t, 1}); };
        best = std::max(best, golden_section_max(f1, center[0] - cell, center[0] + cell,
                                                 1e-13 * std::max(1.0, std::abs(center[0]))));
        return std::max(best, 0.0);
    }

    const int pts = options.grid_points_nd;
    double half_width = radius;
    double best = search.lattice_max(c, half_width, pts);
    half_width = 2.0 * (2.0 * half_width / (pts - 1));
    const int zoom_pts = 33;
    while (half_width > 1e-14 * std::max(1.0, radius)) {
        best = std::max(best, search.lattice_max(c, half_width, zoom_pts));
        half_width = 4.0 * (2.0 * half_width / (zoom_pts - 1));
    }
    return std::max(best, 0.0);
}

double conjugate_eval(const ConvexIntegrand& k, std::span<const double> r) {
    if (auto closed = k.conjugate_closed_form(r)) return *closed;
    return legendre_oracle(k, r);
}

double fenchel_gap(const ConvexIntegrand& k, std::span<const double> y, std::span<const double> r) {
    return k.value(y) + conjugate_eval(k, r) - dot(r, y);
}

double yosida_duality_check(const ConvexIntegrand& k, double lambda, std::span<const double> x) {
    const Point p = prox_solve(k, lambda, x);
    Point g(k.dimension());
    for (int i = 0; i < g.size(); ++i) g[i] = (x[static_cast<std::size_t>(i)] - p[i]) / lambda;
    return k.value(p) + conjugate_eval(k, g) - dot(g, x) + lambda * dot(g, g);
}

} // namespace monospde
