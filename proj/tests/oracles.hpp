#pragma once

// Independent reference computations for the unit and acceptance tests.
// Nothing here calls the library code it is used to check.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

using Scalar1 = std::function<double(double)>;

inline double golden_min(const Scalar1& f, double a, double b, double tol = 1e-14) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
        if (fc <= fd) {
            b = d; d = c; fd = fc;
            c = b - inv_phi * (b - a); fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + inv_phi * (b - a); fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// argmin_y k(y) + (y - x)^2 / (2 lambda) by a dense grid followed by golden
/// section on the bracketing cells.
inline double prox_1d(const Scalar1& k, double lambda, double x, int points = 20001) {
    const double radius = std::abs(x) + 2.0;
    auto obj = [&](double y) { return k(y) + (y - x) * (y - x) / (2.0 * lambda); };
    double best_y = -radius, best = obj(best_y);
    const double cell = 2.0 * radius / (points - 1);
    for (int i = 1; i < points; ++i) {
        const double y = -radius + cell * i;
        const double v = obj(y);
        if (v < best) { best = v; best_y = y; }
    }
    const double y = golden_min(obj, best_y - cell, best_y + cell);
    // Built-in kinks sit at 0; the minimizer may be exactly there.
    return obj(0.0) < obj(y) ? 0.0 : y;
}

/// sup_x x r - k(x) on a dense grid over an expanding interval plus golden refinement.
inline double conjugate_1d(const Scalar1& k, double r, int points = 40001) {
    auto obj = [&](double x) { return x * r - k(x); };
    double radius = std::max(10.0, 10.0 * std::abs(r));
    while (std::max(obj(radius), obj(-radius)) >= 0.0) radius *= 2.0;
    const double cell = 2.0 * radius / (points - 1);
    double best_x = 0.0, best = obj(0.0);
    for (int i = 0; i < points; ++i) {
        const double x = -radius + cell * i;
        const double v = obj(x);
        if (v > best) { best = v; best_x = x; }
    }
    const double x = golden_min([&](double t) { return -obj(t); }, best_x - cell, best_x + cell);
    return std::max({best, obj(x), 0.0});
}

/// Eigenvalue of minus the 1D Dirichlet stencil for sin(j pi x / L).
inline double stencil_eigenvalue(int j, double h, double L = 1.0) {
    const double s = std::sin(std::numbers::pi * j * h / (2.0 * L));
    return 4.0 / (h * h) * s * s;
}

/// One-step amplification of the sine mode under the semi-implicit scheme
/// with k = |x|^2/2: gamma_lambda(x) = x / (1 + lambda).
inline double quadratic_step_factor(double lambda, double dt, double mu) {
    return (1.0 - dt * mu / (1.0 + lambda)) / (1.0 + lambda * dt * mu);
}

/// Dense Laplacian stencil applied by hand (1D, Dirichlet ghost zeros).
inline std::vector<double> laplacian_1d(const std::vector<double>& u, double h) {
    const std::size_t n = u.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double left = i > 0 ? u[i - 1] : 0.0;
        const double right = i + 1 < n ? u[i + 1] : 0.0;
        out[i] = (left - 2.0 * u[i] + right) / (h * h);
    }
    return out;
}

/// 5-point stencil on an m x m interior lattice, x fastest.
inline std::vector<double> laplacian_2d(const std::vector<double>& u, int m, double h) {
    std::vector<double> out(u.size());
    auto at = [&](int i, int j) { return (i < 0 || j < 0 || i >= m || j >= m) ? 0.0 : u[static_cast<std::size_t>(j * m + i)]; };
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < m; ++i) {
            out[static_cast<std::size_t>(j * m + i)] =
                (at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1) - 4.0 * at(i, j)) / (h * h);
        }
    }
    return out;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    v /= static_cast<double>(xs.size() - 1);
    return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("monospde_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace oracle
