#pragma once

#include "monospde/csv.hpp"
#include "monospde/evolution.hpp"
#include "monospde/picard.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace monospde {

/// Moment bounds of the solution, time integrals by left-endpoint quadrature.
struct MomentReport {
    std::size_t paths = 0;
    /// M = 1: estimates are single-path values, standard errors are 0.
    bool point_estimate = false;
    /// max over recorded times of E||u(t)||^2 (and its standard error there).
    Estimate sup_u_sq;
    double sup_time = 0.0;
    Estimate w11_integral;    // E int ||grad u||_{L^1} dt
    Estimate eta_l1_integral; // E int ||eta||_{L^1} dt
    Estimate energy_integral; // E int (int k(grad u) + int k*(eta)) dt
    Estimate terminal_u_sq;   // E||u(T)||^2
    /// Fenchel-Young: min over records of int k(grad u) + k*(eta) - eta.grad u.
    double min_gap = 0.0;
    /// Selection consistency: max over records of |gap at the resolvent point|.
    double max_resolvent_gap = 0.0;
    /// max over consecutive records of |E<u(t'), phi_1> - E<u(t), phi_1>|.
    double max_probe_increment = 0.0;
};

MomentReport moment_report(const SolutionBundle& bundle);

/// Runs cfg as an additive solve, or as a Picard solve when the coefficient is
/// multiplicative (alpha from cfg.alpha when positive, else calibrated).
SolutionBundle run_configuration(const ConvexIntegrand& k, const SolverConfig& cfg, const WienerDriver& driver,
                                 PicardReport* report = nullptr);
SolutionBundle run_configuration(const ConvexIntegrand& k, const SolverConfig& cfg,
                                 PicardReport* report = nullptr);

struct LambdaSweepRow {
    double lambda = 0.0;
    AprioriEstimate apriori;
    MomentReport moments;
    /// ||u_lambda(T) - u_next(T)||_{L^2_{omega,x}} against the next lambda in
    /// the list; absent on the last row.
    std::optional<double> difference;
};

/// Same dt, seed and Wiener increments for every lambda. The stability guard
/// is checked at the smallest lambda; throws ConfigError("dt") when violated.
std::vector<LambdaSweepRow> lambda_sweep(const ConvexIntegrand& k, const SolverConfig& cfg,
                                         const std::vector<double>& lambdas);

struct RefinementRow {
    enum class Kind { time, space } kind = Kind::time;
    int level = 0;
    double dt = 0.0;
    int cells = 0;
    Estimate residual;       // energy residual at T
    Estimate terminal_u_sq;  // E||u(T)||^2
    /// Time rows: log2(|r_{l-1}| / |r_l|). Space rows: log2(e_{l-2} / e_{l-1}),
    /// e_l = |m_{l+1} - m_l| for the terminal moment m.
    std::optional<double> observed_order;
};

struct RefinementStudy {
    std::vector<RefinementRow> rows;
    /// Least-squares slope of log|residual| against log dt.
    std::optional<double> temporal_order;
    /// Least-squares slope of log e_l against log h.
    std::optional<double> spatial_order;
};

inline constexpr int kMaxHalvings = 5;
inline constexpr std::size_t kMaxNodes = 512 * 512;
inline constexpr std::size_t kMaxSteps = 1'000'000;

/// Temporal sweep dt / 2^l at fixed cells (one Brownian path sampled on the
/// finest grid), and spatial sweep cells * 2^l at dt / 4^halvings.
/// Throws ConfigError("halvings") and ResourceGuardError.
RefinementStudy refinement_study(const ConvexIntegrand& k, const SolverConfig& cfg, int halvings);

struct ConvexCheckOptions {
    std::vector<double> lambdas{1.0, 0.1, 0.01};
    std::size_t samples = 10000;
    std::uint64_t seed = 0;
    /// Points at which closed-form k* is compared with the Legendre oracle.
    std::size_t oracle_samples = 32;
    /// Sample points are drawn from [-s, s]^n with s in {0.1, 1, scale}.
    double scale = 10.0;
};

struct ConvexCheckReport {
    std::string integrand;
    std::size_t evaluations = 0;
    double min_value = 0.0;             // min k(x), should be >= 0
    double max_convexity_violation = 0.0;
    double min_fenchel_gap = 0.0;       // random (y, r) pairs
    double max_selection_gap = 0.0;     // |gap(J x, gamma_lambda x)|
    double max_duality_residual = 0.0;  // |k(Jx) + k*(g) - g.x + lambda |g|^2|
    double max_lipschitz_ratio = 0.0;   // lambda |g(x) - g(y)| / |x - y|, rounding removed
    double min_monotonicity = 0.0;      // (g(x) - g(y)).(x - y) / |x - y|^2
    double max_resolvent_expansion = 0.0; // |Jx - Jy| / |x - y|, rounding removed
    double max_reconstruction_error = 0.0; // |x - Jx - lambda g(x)| / max(1, |x|)
    double max_conjugate_mismatch = 0.0; // closed form vs Legendre oracle (absent: 0)
};

ConvexCheckReport convex_check(const ConvexIntegrand& k, const ConvexCheckOptions& options = {});

// CSV tables -----------------------------------------------------------------

CsvTable path_table(const PathResult& path);
CsvTable moment_table(const MomentReport& report);
/// Energy residual at every time recorded on all paths.
CsvTable energy_table(const SolutionBundle& bundle);
CsvTable apriori_table(const AprioriEstimate& estimate);
CsvTable picard_table(const PicardReport& report);
CsvTable lambda_sweep_table(const std::vector<LambdaSweepRow>& rows);
CsvTable refinement_table(const RefinementStudy& study);
CsvTable convex_check_table(const std::vector<ConvexCheckReport>& reports);

} // namespace monospde
