#include "monospde/noise.hpp"

#include "monospde/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace monospde {

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
    constexpr std::uint64_t kM0 = 0xD2511F53u;
    constexpr std::uint64_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = kM0 * ctr[0];
        const std::uint64_t p1 = kM1 * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

namespace {

double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Two standard normals for (seed, path, fine step, mode pair).
std::array<double, 2> normal_pair(std::uint64_t seed, std::size_t path, std::size_t step,
                                  std::size_t pair) {
    const auto out = philox4x32(
        {static_cast<std::uint32_t>(pair), static_cast<std::uint32_t>(step),
         static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(static_cast<std::uint64_t>(step) >> 32)},
        {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    const double u1 = to_open_unit(out[0], out[1]);
    const double u2 = to_open_unit(out[2], out[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

} // namespace

WienerDriver::WienerDriver(std::uint64_t seed, std::size_t modes, double dt, std::size_t stride)
    : seed_(seed), modes_(modes), fine_dt_(dt / static_cast<double>(stride)), stride_(stride) {
    if (modes == 0) throw ConfigError("modes", "need at least one noise mode");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt", "time step must be positive");
    if (stride == 0) throw std::invalid_argument("WienerDriver: stride must be positive");
}

WienerDriver WienerDriver::coarsened(std::size_t factor) const {
    if (factor == 0) throw std::invalid_argument("WienerDriver::coarsened: factor must be positive");
    WienerDriver d = *this;
    d.stride_ = stride_ * factor;
    return d;
}

std::vector<double> WienerDriver::sample_increment(std::size_t path, std::size_t step) const {
    std::vector<double> out(modes_);
    sample_into(path, step, out);
    return out;
}

void WienerDriver::sample_into(std::size_t path, std::size_t step, std::span<double> out) const {
    const double scale = std::sqrt(fine_dt_);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t j = 0; j < stride_; ++j) {
        const std::size_t fine_step = step * stride_ + j;
        for (std::size_t pair = 0; 2 * pair < modes_; ++pair) {
            const auto z = normal_pair(seed_, path, fine_step, pair);
            out[2 * pair] += scale * z[0];
            if (2 * pair + 1 < modes_) out[2 * pair + 1] += scale * z[1];
        }
    }
}

// ---------------------------------------------------------------------------

DiffusionCoefficient::DiffusionCoefficient(std::string name, NoiseKind kind, std::size_t modes,
                                           ModeMap map, double lipschitz_constant,
                                           double growth_constant, double hs_tail_fraction)
    : name_(std::move(name)), kind_(kind), modes_(modes), map_(std::move(map)),
      lipschitz_(lipschitz_constant), growth_(growth_constant), hs_tail_fraction_(hs_tail_fraction) {
    if (modes == 0) throw ConfigError("modes", "need at least one noise mode");
}

DiffusionCoefficient DiffusionCoefficient::additive(std::string name, std::vector<Field> mode_fields,
                                                    double hs_tail_fraction) {
    if (mode_fields.empty()) throw ConfigError("modes", "need at least one noise mode");
    double hs2 = 0.0;
    for (const auto& f : mode_fields) hs2 += inner(f, f);
    const std::size_t k = mode_fields.size();
    DiffusionCoefficient c(std::move(name), NoiseKind::additive, k, {}, 0.0, std::sqrt(hs2),
                           hs_tail_fraction);
    c.fixed_modes_ = std::move(mode_fields);
    return c;
}

DiffusionCoefficient DiffusionCoefficient::linear(std::vector<double> coefficients) {
    double s2 = 0.0;
    for (double c : coefficients) s2 += c * c;
    const std::size_t k = coefficients.size();
    auto map = [coefficients = std::move(coefficients)](double, const Field& u, std::size_t mode, Field& out) {
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = coefficients[mode] * u[i];
    };
    return DiffusionCoefficient("linear", NoiseKind::multiplicative, k, std::move(map), std::sqrt(s2),
                                std::sqrt(s2));
}

void DiffusionCoefficient::mode_field(double t, const Field& u, std::size_t k, Field& out) const {
    if (k >= modes_) throw std::out_of_range("DiffusionCoefficient: mode index out of range");
    if (fixed_modes_) {
        const Field& m = (*fixed_modes_)[k];
        std::copy(m.values().begin(), m.values().end(), out.values().begin());
        return;
    }
    map_(t, u, k, out);
}

double DiffusionCoefficient::apply_and_hs(double t, const Field& u, std::span<const double> dw,
                                          Field& out, Field& scratch) const {
    if (dw.size() != modes_) throw std::invalid_argument("apply_noise: increment has wrong mode count");
    std::fill(out.values().begin(), out.values().end(), 0.0);
    double hs2 = 0.0;
    for (std::size_t k = 0; k < modes_; ++k) {
        const Field* mode = nullptr;
        if (fixed_modes_) {
            mode = &(*fixed_modes_)[k];
        } else {
            map_(t, u, k, scratch);
            mode = &scratch;
        }
        hs2 += inner(*mode, *mode);
        const double w = dw[k];
        if (w != 0.0) {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*mode)[i] * w;
        }
    }
    return hs2;
}

void DiffusionCoefficient::apply_noise_into(double t, const Field& u, std::span<const double> dw,
                                            Field& out, Field& scratch) const {
    apply_and_hs(t, u, dw, out, scratch);
}

Field DiffusionCoefficient::apply_noise(double t, const Field& u, std::span<const double> dw) const {
    Field out(u.grid()), scratch(u.grid());
    apply_noise_into(t, u, dw, out, scratch);
    return out;
}

double DiffusionCoefficient::hs_norm_squared(double t, const Field& u) const {
    Field scratch(u.grid());
    double hs2 = 0.0;
    for (std::size_t k = 0; k < modes_; ++k) {
        mode_field(t, u, k, scratch);
        hs2 += inner(scratch, scratch);
    }
    return hs2;
}

double DiffusionCoefficient::hs_norm(double t, const Field& u) const {
    return std::sqrt(hs_norm_squared(t, u));
}

// ---------------------------------------------------------------------------

namespace {

std::pair<std::size_t, std::size_t> mode_pair_2d(std::size_t k) {
    // k = 1, 2, 3, ... -> (1,1), (2,1), (1,2), (3,1), (2,2), (1,3), ...
    std::size_t diag = 1;
    std::size_t remaining = k;
    while (remaining > diag) {
        remaining -= diag;
        ++diag;
    }
    const std::size_t kx = diag - remaining + 1;
    const std::size_t ky = remaining;
    return {kx, ky};
}

// sum_{k > K} k^{-2d} / sum_{k >= 1} k^{-2d}; direct sum plus integral remainder.
double power_tail_fraction(std::size_t modes, double decay) {
    const double e = 2.0 * decay;
    if (e <= 1.0) return 1.0;
    const std::size_t cutoff = modes + 100000;
    double head = 0.0, tail = 0.0;
    for (std::size_t k = 1; k <= cutoff; ++k) {
        const double v = std::pow(static_cast<double>(k), -e);
        (k <= modes ? head : tail) += v;
    }
    tail += std::pow(static_cast<double>(cutoff) + 0.5, 1.0 - e) / (e - 1.0);
    return tail / (head + tail);
}

} // namespace

Field sine_mode(const Grid& grid, std::size_t k) {
    if (k == 0) throw std::invalid_argument("sine_mode: modes are 1-based");
    const double L = grid.extent();
    if (grid.dimension() == 1) {
        const double w = static_cast<double>(k) * std::numbers::pi / L;
        return sample_field(grid, [w](double x, double) { return std::sin(w * x); });
    }
    const auto [kx, ky] = mode_pair_2d(k);
    const double wx = static_cast<double>(kx) * std::numbers::pi / L;
    const double wy = static_cast<double>(ky) * std::numbers::pi / L;
    return sample_field(grid, [wx, wy](double x, double y) { return std::sin(wx * x) * std::sin(wy * y); });
}

DiffusionCoefficient make_coefficient(std::string_view name, const CoefficientParams& params,
                                      const Grid& grid, std::size_t modes) {
    if (modes == 0) throw ConfigError("modes", "need at least one noise mode");
    std::vector<double> a(modes);
    double a2 = 0.0;
    for (std::size_t k = 0; k < modes; ++k) {
        a[k] = params.amplitude * std::pow(static_cast<double>(k + 1), -params.decay);
        a2 += a[k] * a[k];
    }
    const double tail = power_tail_fraction(modes, params.decay);

    if (name == "none") {
        std::vector<Field> zero(modes, Field(grid));
        return DiffusionCoefficient::additive("none", std::move(zero), 0.0);
    }
    if (name == "add_smooth") {
        std::vector<Field> fields;
        fields.reserve(modes);
        for (std::size_t k = 0; k < modes; ++k) fields.push_back(a[k] * sine_mode(grid, k + 1));
        return DiffusionCoefficient::additive("add_smooth", std::move(fields), tail);
    }
    if (name == "mult_nemytskii") {
        if (!(params.clamp > 0.0)) throw ConfigError("clamp", "clamp bound must be positive");
        if (!(params.c1 >= 0.0)) throw ConfigError("c1", "c1 must be nonnegative");
        const double c0 = params.c0, c1 = params.c1, bound = params.clamp;
        auto map = [a, c0, c1, bound](double, const Field& u, std::size_t k, Field& out) {
            for (std::size_t i = 0; i < u.size(); ++i) {
                out[i] = a[k] * (c0 + c1 * std::clamp(u[i], -bound, bound));
            }
        };
        const double a_norm = std::sqrt(a2);
        const double domain_root = std::pow(grid.extent(), 0.5 * grid.dimension());
        const double growth = a_norm * std::max(std::abs(c0) * domain_root, c1);
        return DiffusionCoefficient("mult_nemytskii", NoiseKind::multiplicative, modes, std::move(map),
                                    c1 * a_norm, growth, tail);
    }
    throw ConfigError("coefficient", "unknown coefficient '" + std::string(name) + "'");
}

} // namespace monospde
