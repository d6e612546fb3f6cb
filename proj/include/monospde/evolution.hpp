#pragma once

#include "monospde/convex_core.hpp"
#include "monospde/discretization.hpp"
#include "monospde/noise.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace monospde {

enum class InitialShape { zero, sine, tent };

struct InitialCondition {
    InitialShape shape = InitialShape::sine;
    double amplitude = 1.0;
    int mode = 1;
};

/// Everything that determines a run. A run is a deterministic function of
/// this record (including `seed`).
struct SolverConfig {
    // regularization and time grid
    double lambda = 0.1;
    double dt = 1e-5;
    double horizon = 0.1;
    /// Exponential weight rate used by weighted norms and the Picard driver.
    double alpha = 0.0;
    /// Stability guard dt <= lambda h^2 / (4 n) is enforced unless set.
    bool override_guard = false;

    // geometry
    int dimension = 1;
    int cells = 32;
    double extent = 1.0;

    // model
    std::string integrand = "abs_quad";
    std::string coefficient = "add_smooth";
    CoefficientParams coefficient_params{};
    InitialCondition initial{};

    // sampling
    std::size_t modes = 16;
    std::size_t paths = 1;
    std::uint64_t seed = 0;

    // output and execution
    /// Keep a diagnostic record every this many steps; 0 keeps only t = 0 and t = T.
    std::size_t record_every = 1;
    unsigned workers = 0;

    // Picard
    double tolerance = 1e-8;
    std::size_t max_iterations = 50;

    std::size_t steps() const;
    double time(std::size_t step) const { return static_cast<double>(step) * dt; }
};

/// lambda h^2 / (4 n).
double stability_limit(double lambda, const Grid& grid);

/// Throws ConfigError naming the offending field.
void validate(const SolverConfig& cfg);
/// Throws ConfigError("dt") when the guard is violated and not overridden.
void check_stability_guard(const SolverConfig& cfg, const Grid& grid);

Grid make_grid(const SolverConfig& cfg);
Field initial_field(const SolverConfig& cfg, const Grid& grid);
DiffusionCoefficient make_coefficient(const SolverConfig& cfg, const Grid& grid);
WienerDriver make_driver(const SolverConfig& cfg);

/// Per-record diagnostics of one path. Instantaneous values are taken at t;
/// `cum_*` are left-endpoint rectangle sums over [0, t); `*_w` carry the
/// weight e^{-2 alpha s}.
struct StepRecord {
    std::size_t step = 0;
    double t = 0.0;
    double u_sq = 0.0;          // ||u||^2
    double flux = 0.0;          // int eta . grad u, eta = gamma_lambda(grad u)
    double viscous = 0.0;       // lambda ||grad u||^2
    double hs_sq = 0.0;         // ||G(t)||_HS^2
    double gap = 0.0;           // int k(grad u) + k*(eta) - eta . grad u
    double gap_resolvent = 0.0; // same at the resolvent point J grad u
    double k_grad = 0.0;        // int k(grad u)
    double kstar_eta = 0.0;     // int k*(eta)
    double k_resolvent = 0.0;   // int k(J grad u)
    double grad_l1 = 0.0;       // ||grad u||_{L^1}
    double eta_l1 = 0.0;        // ||eta||_{L^1}
    double probe = 0.0;         // <u, sin(pi x)...>, weak-continuity proxy

    double cum_flux = 0.0;
    double cum_viscous = 0.0;
    double cum_hs = 0.0;
    double cum_u_sq = 0.0;
    double cum_k_grad = 0.0;
    double cum_kstar = 0.0;
    double cum_k_resolvent = 0.0;
    double cum_grad_l1 = 0.0;
    double cum_eta_l1 = 0.0;

    double cum_flux_w = 0.0;
    double cum_viscous_w = 0.0;
    double cum_hs_w = 0.0;
    double cum_u_sq_w = 0.0;
};

struct PathResult {
    std::size_t path = 0;
    std::vector<StepRecord> records;
    std::optional<Field> initial;
    std::optional<Field> terminal;
    std::optional<VectorField> terminal_eta;
    /// max over every step of ||u||^2.
    double sup_u_sq = 0.0;
    bool aborted = false;
    std::size_t abort_step = 0;
    std::string abort_reason;
};

struct SolutionBundle {
    SolverConfig config;
    std::vector<PathResult> paths;

    bool any_aborted() const noexcept;
};

/// Noise source for one step: writes the increment field for the step that
/// starts at (step, t) from state u and returns ||B||_HS^2 at that point.
using StepNoise = std::function<double(std::size_t step, double t, const Field& u, Field& out)>;

struct EvolveOptions {
    /// Store StepRecords (every record_every steps); false keeps only sup_u_sq
    /// and the terminal state, which is what the Picard iterations need.
    bool diagnostics = true;
    /// Called with every state u_m, m = 0..steps.
    std::function<void(std::size_t step, const Field& u)> observer;
};

/// Semi-implicit stepper for the regularized equation: explicit Yosida drift,
/// implicit viscosity lambda*Laplacian.
class RegularizedStepper {
public:
    RegularizedStepper(const ConvexIntegrand& k, const Grid& grid, double lambda, double dt);

    /// u <- (I - lambda dt Lap)^{-1} (u + dt div gamma_lambda(grad u) + increment).
    void step(Field& u, const Field& increment);
    /// The same update with eta = gamma_lambda(grad u) already evaluated.
    void apply(Field& u, const VectorField& eta, const Field& increment);
    /// Evaluates gamma_lambda(grad u) into eta and fills the instantaneous part of `rec`.
    void evaluate(const Field& u, VectorField& eta, StepRecord* rec);

    const VectorField& last_eta() const noexcept { return eta_; }

private:
    const ConvexIntegrand& k_;
    Grid grid_;
    double lambda_;
    double dt_;
    ImplicitDiffusionSolver solver_;
    bool closed_conjugate_;
    Field probe_;
    VectorField grad_;
    VectorField eta_;
    Field div_;
};

/// One step of the scheme (see RegularizedStepper::step).
Field step_regularized(const ConvexIntegrand& k, const Field& u, const SolverConfig& cfg,
                       const Field& noise_increment);

/// Evolves one path from u0 over cfg.steps() steps with the given noise.
PathResult evolve_path(const ConvexIntegrand& k, const Field& u0, const SolverConfig& cfg,
                       std::size_t path, const StepNoise& noise, const EvolveOptions& options = {});

/// Additive-noise solve on one path; Wiener increments replayed from (seed, path).
PathResult solve_additive(const ConvexIntegrand& k, const Field& u0, const SolverConfig& cfg,
                          const DiffusionCoefficient& G, const WienerDriver& driver, std::size_t path);

/// All cfg.paths paths, in parallel; result order is path order.
SolutionBundle solve_additive_paths(const ConvexIntegrand& k, const Field& u0, const SolverConfig& cfg,
                                    const DiffusionCoefficient& G, const WienerDriver& driver);

struct Estimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

/// Monte Carlo mean and standard error; M = 1 yields standard_error 0.
Estimate monte_carlo(const std::vector<double>& samples);

struct AprioriEstimate {
    /// ||u||_{L^2_omega C_t L^2_x}
    double sup_term = 0.0;
    /// sqrt(lambda) ||grad u||_{L^2_{t,omega,x}}
    double viscous_term = 0.0;
    /// ||gamma_lambda(grad u) . grad u||_{L^1_{t,omega,x}}
    double flux_term = 0.0;
    /// ||u0||_{L^2_{omega,x}} + ||G||_{L^2_{t,omega} HS}
    double rhs = 0.0;
    double sup_ratio = 0.0;
    double viscous_ratio = 0.0;
    double flux_ratio = 0.0;
    /// (E||u0||^2 + E int ||G||_HS^2) / 2: the energy bound on the flux term
    /// and hence on both Yosida integrability statistics.
    double energy_bound = 0.0;
    Estimate kstar_statistic;     // E int int k*(gamma_lambda(grad u))
    Estimate resolvent_statistic; // E int int k(J grad u)
};

AprioriEstimate apriori_estimate(const SolutionBundle& bundle);

struct EnergyResidual {
    double t = 0.0;
    Estimate residual;
    /// Individual expectations entering the balance.
    double u_sq = 0.0;
    double flux = 0.0;
    double initial_sq = 0.0;
    double noise = 0.0;
};

/// E||u(t)||^2 + 2 E int (eta + lambda grad u) . grad u - E||u0||^2 - E int ||G||_HS^2.
/// With alpha != 0 the identity for e^{-alpha t} u is used instead.
/// Throws std::out_of_range when t is past the horizon or not a recorded time.
EnergyResidual energy_residual(const SolutionBundle& bundle, double t, double alpha = 0.0);

} // namespace monospde
