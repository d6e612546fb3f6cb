#pragma once

#include "monospde/evolution.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace monospde {

/// States u_m, m = 0..steps, of every path on a common time grid.
class TrajectorySet {
public:
    TrajectorySet(const Grid& grid, std::size_t paths, std::size_t steps, double dt);

    /// v(t) = u0[path] for every t; a single initial field is broadcast to all paths.
    static TrajectorySet constant(const std::vector<Field>& u0, std::size_t paths, std::size_t steps, double dt);

    const Grid& grid() const noexcept { return grid_; }
    std::size_t paths() const noexcept { return paths_; }
    std::size_t steps() const noexcept { return steps_; }
    double dt() const noexcept { return dt_; }

    std::span<double> state(std::size_t path, std::size_t m) noexcept;
    std::span<const double> state(std::size_t path, std::size_t m) const noexcept;
    void copy_state(std::size_t path, std::size_t m, Field& out) const;
    void set_state(std::size_t path, std::size_t m, const Field& u);

    bool operator==(const TrajectorySet& other) const;

private:
    Grid grid_;
    std::size_t paths_;
    std::size_t steps_;
    double dt_;
    std::vector<double> data_;
};

enum class NormVariant {
    /// sqrt(sum_{m<steps} dt e^{-alpha t_m} E||u_m - v_m||^2)
    l2_time,
    /// max_{m<=steps} e^{-alpha t_m / 2} (E||u_m - v_m||^2)^{1/2}
    sup_time,
};

/// Exponentially weighted distance of two trajectory sets; the expectation is
/// the mean over the common path set. Summation order is fixed.
double weighted_distance(const TrajectorySet& a, const TrajectorySet& b, double alpha,
                         NormVariant variant = NormVariant::l2_time);

struct GammaOutput {
    TrajectorySet trajectory;
    SolutionBundle bundle;
};

/// Gamma(u0, v): the additive problem with the frozen coefficient
/// G(t) = B(t, v(t)), Wiener increments replayed from (seed, path).
/// `diagnostics` controls whether the bundle carries StepRecords.
GammaOutput gamma_map(const ConvexIntegrand& k, const std::vector<Field>& u0, const TrajectorySet& v,
                      const SolverConfig& cfg, const DiffusionCoefficient& B, const WienerDriver& driver,
                      bool diagnostics = false);

enum class InitialGuess { initial_data, zero };

struct PicardOptions {
    /// Weight rate; calibrated when absent.
    std::optional<double> alpha;
    NormVariant norm = NormVariant::l2_time;
    InitialGuess guess = InitialGuess::initial_data;
};

enum class PicardStatus { converged, non_contraction, max_iterations };

std::string to_string(PicardStatus status);

struct PicardReport {
    /// distances[n-1] = d(v^n, v^{n-1}), n = 1..iterations.
    std::vector<double> distances;
    /// ratios[i] = distances[i+1] / distances[i]; defined from iteration 2 on.
    std::vector<double> ratios;
    std::size_t iterations = 0;
    double alpha = 0.0;
    /// Measured a priori constant used by the calibration (0 when alpha was given).
    double calibration_constant = 0.0;
    PicardStatus status = PicardStatus::max_iterations;
    /// d(Gamma(u0, v), v) for the returned trajectory v.
    double fixed_point_residual = 0.0;
};

struct MultiplicativeSolution {
    TrajectorySet trajectory;
    /// Diagnostics of the final application of Gamma.
    SolutionBundle bundle;
    PicardReport report;
};

struct AlphaCalibration {
    double alpha = 1.0;
    double constant = 1.0;
};

/// alpha = max(1, 16 L_B^2 N^2), N = max(1, measured a priori constant): the
/// sum of the three a priori terms over their right-hand side, taken from the
/// frozen-coefficient run Gamma(u0, u0).
AlphaCalibration calibrate_alpha(const ConvexIntegrand& k, const std::vector<Field>& u0, const SolverConfig& cfg,
                                 const DiffusionCoefficient& B, const WienerDriver& driver);

/// Picard iteration v^{n+1} = Gamma(u0, v^n) until
/// d(v^{n+1}, v^n) <= tol (1 + d(v^1, v^0)) or cfg.max_iterations.
/// Throws NumericalAbort on blow-up. Non-contraction (ratio >= 1 three times
/// in a row) stops the loop with that status; callers decide whether to abort.
MultiplicativeSolution solve_multiplicative(const ConvexIntegrand& k, const std::vector<Field>& u0,
                                            const SolverConfig& cfg, const DiffusionCoefficient& B,
                                            const WienerDriver& driver, const PicardOptions& options = {});

struct DependenceReport {
    double initial_distance = 0.0; // ||u01 - u02||_{L^2_{omega,x}}
    double sup_distance = 0.0;     // unweighted sup-in-time distance
    double l2_distance = 0.0;      // unweighted L^2-in-time distance
    double sup_weighted = 0.0;
    double l2_weighted = 0.0;
    double alpha = 0.0;
    double lipschitz_sup = 0.0;    // sup_distance / initial_distance
    double lipschitz_l2 = 0.0;     // l2_distance / initial_distance
    /// (sup_weighted + sqrt(alpha) l2_weighted) / initial_distance.
    double lipschitz_weighted = 0.0;
    PicardReport first;
    PicardReport second;
};

/// Solves both problems with common random numbers and the same alpha.
/// Lipschitz ratios are 0 when the initial data coincide.
DependenceReport continuous_dependence_test(const ConvexIntegrand& k, const std::vector<Field>& u01,
                                            const std::vector<Field>& u02, const SolverConfig& cfg,
                                            const DiffusionCoefficient& B, const WienerDriver& driver,
                                            const PicardOptions& options = {});

} // namespace monospde
