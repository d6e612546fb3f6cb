#pragma once

#include "monospde/discretization.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace monospde {

/// Philox4x32-10 counter-based generator: a pure function of (key, counter).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Truncated cylindrical Wiener process on K modes.
///
/// Increments are keyed by (seed, path, step, mode) and drawn on a fine time
/// grid of width `fine_dt`; a driver with stride s sums s consecutive fine
/// increments, so coarse and fine drivers built from the same seed see the
/// same Brownian path.
class WienerDriver {
public:
    WienerDriver(std::uint64_t seed, std::size_t modes, double dt, std::size_t stride = 1);

    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t modes() const noexcept { return modes_; }
    double dt() const noexcept { return fine_dt_ * static_cast<double>(stride_); }
    double fine_dt() const noexcept { return fine_dt_; }
    std::size_t stride() const noexcept { return stride_; }

    /// Driver over the same Brownian path with steps `factor` times longer.
    WienerDriver coarsened(std::size_t factor) const;

    std::vector<double> sample_increment(std::size_t path, std::size_t step) const;
    void sample_into(std::size_t path, std::size_t step, std::span<double> out) const;

private:
    std::uint64_t seed_;
    std::size_t modes_;
    double fine_dt_;
    std::size_t stride_;
};

enum class NoiseKind { additive, multiplicative };

/// Writes B(t, u) e_k into `out`.
using ModeMap = std::function<void(double t, const Field& u, std::size_t k, Field& out)>;

/// Hilbert-Schmidt diffusion coefficient acting on K modes.
class DiffusionCoefficient {
public:
    DiffusionCoefficient(std::string name, NoiseKind kind, std::size_t modes, ModeMap map,
                         double lipschitz_constant, double growth_constant,
                         double hs_tail_fraction = 0.0);

    /// Additive coefficient with fixed mode fields G e_k.
    static DiffusionCoefficient additive(std::string name, std::vector<Field> mode_fields,
                                         double hs_tail_fraction = 0.0);
    /// B(u) e_k = c_k u.
    static DiffusionCoefficient linear(std::vector<double> coefficients);

    const std::string& name() const noexcept { return name_; }
    NoiseKind kind() const noexcept { return kind_; }
    std::size_t modes() const noexcept { return modes_; }
    double lipschitz_constant() const noexcept { return lipschitz_; }
    double growth_constant() const noexcept { return growth_; }
    /// Fraction of the untruncated squared HS norm carried by modes > K.
    double hs_tail_fraction() const noexcept { return hs_tail_fraction_; }

    void mode_field(double t, const Field& u, std::size_t k, Field& out) const;

    /// sum_k (B(t,u) e_k) dw_k.
    Field apply_noise(double t, const Field& u, std::span<const double> dw) const;
    void apply_noise_into(double t, const Field& u, std::span<const double> dw, Field& out,
                          Field& scratch) const;

    double hs_norm(double t, const Field& u) const;
    double hs_norm_squared(double t, const Field& u) const;

    /// Both sums in one pass over the modes.
    double apply_and_hs(double t, const Field& u, std::span<const double> dw, Field& out,
                        Field& scratch) const;

private:
    std::string name_;
    NoiseKind kind_;
    std::size_t modes_;
    ModeMap map_;
    double lipschitz_;
    double growth_;
    double hs_tail_fraction_;
    std::optional<std::vector<Field>> fixed_modes_;
};

struct CoefficientParams {
    double decay = 2.0;      // a_k = amplitude * k^{-decay}
    double amplitude = 1.0;
    double c0 = 1.0;
    double c1 = 0.5;
    double clamp = 1.0;
};

/// Spatial mode phi_k (1-based). 1D: sin(k pi x / L); 2D: products of sines
/// with index pairs enumerated along anti-diagonals.
Field sine_mode(const Grid& grid, std::size_t k);

/// Registry: `add_smooth`, `mult_nemytskii`, `none`.
DiffusionCoefficient make_coefficient(std::string_view name, const CoefficientParams& params,
                                      const Grid& grid, std::size_t modes);

} // namespace monospde
