#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace monospde {

/// Largest vector dimension supported by the built-in integrands and oracles.
inline constexpr int kMaxDimension = 4;

/// Fixed-capacity point of R^n (n <= kMaxDimension). Value type, no heap.
class Point {
public:
    Point() = default;
    explicit Point(int n);
    Point(std::initializer_list<double> values);
    static Point from(std::span<const double> values);

    int size() const noexcept { return n_; }
    double& operator[](int i) noexcept { return v_[static_cast<std::size_t>(i)]; }
    double operator[](int i) const noexcept { return v_[static_cast<std::size_t>(i)]; }

    std::span<double> span() noexcept { return {v_.data(), static_cast<std::size_t>(n_)}; }
    std::span<const double> span() const noexcept { return {v_.data(), static_cast<std::size_t>(n_)}; }
    operator std::span<const double>() const noexcept { return span(); }

private:
    std::array<double, kMaxDimension> v_{};
    int n_ = 0;
};

double dot(std::span<const double> a, std::span<const double> b);
double euclidean_norm(std::span<const double> x);

struct ProxOptions {
    double tolerance = 1e-12;
    int max_iterations = 100;
};

/// Convex integrand k: R^n -> R_+ with k(0) = 0 and superlinear growth.
///
/// The subdifferential gamma = dk is never evaluated directly. Callers use the
/// resolvent (prox), the Yosida approximation built on it, and membership via
/// the Fenchel gap. Instances are immutable and safe to share across threads.
class ConvexIntegrand {
public:
    ConvexIntegrand(int dimension, double asymmetry_bound);
    virtual ~ConvexIntegrand() = default;

    int dimension() const noexcept { return dimension_; }
    /// Constant C with k(-x) <= C (1 + k(x)).
    double asymmetry_bound() const noexcept { return asymmetry_bound_; }

    virtual std::string name() const = 0;
    virtual double value(std::span<const double> x) const = 0;
    /// Writes the resolvent point (I + lambda*gamma)^{-1} x, i.e.
    /// argmin_y k(y) + |y - x|^2 / (2 lambda).
    virtual void prox(double lambda, std::span<const double> x, std::span<double> out) const = 0;
    /// Closed-form k*(r) when the integrand provides one.
    virtual std::optional<double> conjugate_closed_form(std::span<const double> /*r*/) const {
        return std::nullopt;
    }

private:
    int dimension_;
    double asymmetry_bound_;
};

using IntegrandPtr = std::shared_ptr<const ConvexIntegrand>;

/// Profile of a radially symmetric integrand k(x) = phi(|x|).
/// `slope` is the right derivative (phi'(0+) may be positive: kink at 0).
struct RadialProfile {
    std::function<double(double)> value;
    std::function<double(double)> slope;
    std::function<double(double)> curvature;
};

/// Resolvent of a radial integrand: safeguarded Newton on
/// s + lambda*phi'(s) = |x| with bisection fallback.
/// Throws SolverFailure on non-convergence.
void radial_prox(const RadialProfile& profile, double lambda, std::span<const double> x,
                 std::span<double> out, const ProxOptions& options = {});

using GradientFn = std::function<void(std::span<const double>, std::span<double>)>;
using ValueFn = std::function<double(std::span<const double>)>;

/// Resolvent of a smooth (C^1) integrand by gradient descent on the
/// (1/lambda)-strongly convex prox objective, Barzilai-Borwein steps with an
/// Armijo safeguard. Throws SolverFailure on non-convergence.
void gradient_prox(const ValueFn& value, const GradientFn& gradient, double lambda,
                   std::span<const double> x, std::span<double> out,
                   const ProxOptions& options = {.tolerance = 1e-12, .max_iterations = 5000});

// Built-in catalog ----------------------------------------------------------

/// k(x) = |x|^2 / 2, gamma = identity.
class QuadraticIntegrand final : public ConvexIntegrand {
public:
    explicit QuadraticIntegrand(int dimension);
    std::string name() const override { return "quad"; }
    double value(std::span<const double> x) const override;
    void prox(double lambda, std::span<const double> x, std::span<double> out) const override;
    std::optional<double> conjugate_closed_form(std::span<const double> r) const override;
};

/// Generic radial integrand k(x) = phi(|x|); prox through radial_prox.
class RadialIntegrand : public ConvexIntegrand {
public:
    RadialIntegrand(int dimension, RadialProfile profile, std::string name,
                    std::function<double(double)> conjugate_profile = {},
                    double asymmetry_bound = 1.0);
    std::string name() const override { return name_; }
    double value(std::span<const double> x) const override;
    void prox(double lambda, std::span<const double> x, std::span<double> out) const override;
    std::optional<double> conjugate_closed_form(std::span<const double> r) const override;
    const RadialProfile& profile() const noexcept { return profile_; }

private:
    RadialProfile profile_;
    std::string name_;
    std::function<double(double)> conjugate_profile_;
};

/// k(x) = |x|^p / p, p > 1. k*(r) = |r|^q / q with 1/p + 1/q = 1.
class PowerIntegrand final : public RadialIntegrand {
public:
    PowerIntegrand(int dimension, double p);
    double exponent() const noexcept { return p_; }

private:
    double p_;
};

/// k(x) = |x| + |x|^2/2. gamma(0) is the closed unit ball (multivalued).
class AbsQuadIntegrand final : public ConvexIntegrand {
public:
    explicit AbsQuadIntegrand(int dimension);
    std::string name() const override { return "abs_quad"; }
    double value(std::span<const double> x) const override;
    void prox(double lambda, std::span<const double> x, std::span<double> out) const override;
    std::optional<double> conjugate_closed_form(std::span<const double> r) const override;
    /// Same integrand expressed as a radial profile; used to cross-check radial_prox.
    static RadialProfile radial_profile();
};

/// k(x) = |x|^2/2 + max(x_1, 0). Not even: k(-x) <= 2 (1 + k(x)).
class AnisoQuadIntegrand final : public ConvexIntegrand {
public:
    explicit AnisoQuadIntegrand(int dimension);
    std::string name() const override { return "aniso_quad"; }
    double value(std::span<const double> x) const override;
    void prox(double lambda, std::span<const double> x, std::span<double> out) const override;
    std::optional<double> conjugate_closed_form(std::span<const double> r) const override;
};

/// Smooth integrand given by value and gradient; prox through gradient_prox.
class SmoothIntegrand final : public ConvexIntegrand {
public:
    SmoothIntegrand(int dimension, ValueFn value, GradientFn gradient, std::string name,
                    double asymmetry_bound = 1.0);
    std::string name() const override { return name_; }
    double value(std::span<const double> x) const override { return value_(x); }
    void prox(double lambda, std::span<const double> x, std::span<double> out) const override;

private:
    ValueFn value_;
    GradientFn gradient_;
    std::string name_;
};

/// Registry: `quad`, `pgrow:<p>`, `abs_quad`, `aniso_quad`.
/// Throws ConfigError (field "integrand") on unknown names or p <= 1.
IntegrandPtr make_integrand(std::string_view name, int dimension);

// Operations ----------------------------------------------------------------

Point prox_solve(const ConvexIntegrand& k, double lambda, std::span<const double> x);

/// gamma_lambda(x) = (x - prox(lambda, x)) / lambda.
Point yosida_apply(const ConvexIntegrand& k, double lambda, std::span<const double> x);

struct LegendreOptions {
    double min_radius = 10.0;
    int grid_points_1d = 4096;
    /// Per-axis resolution for n >= 2; refined afterwards by zooming.
    int grid_points_nd = 512;
    int boundary_points = 64;
    int max_doublings = 40;
};

/// Brute-force k*(r) = sup_x (x.r - k(x)) over an adaptively expanded box.
/// Throws ConjugateOverflow when the box cannot be closed.
double legendre_oracle(const ConvexIntegrand& k, std::span<const double> r,
                       const LegendreOptions& options = {});

/// k*(r): closed form when available, else the Legendre oracle.
double conjugate_eval(const ConvexIntegrand& k, std::span<const double> r);

/// k(y) + k*(r) - r.y; zero exactly when r is in gamma(y).
double fenchel_gap(const ConvexIntegrand& k, std::span<const double> y, std::span<const double> r);

/// k(J x) + k*(gamma_lambda x) - gamma_lambda(x).x + lambda |gamma_lambda x|^2,
/// J the resolvent. Vanishes identically; returned signed.
double yosida_duality_check(const ConvexIntegrand& k, double lambda, std::span<const double> x);

} // namespace monospde
