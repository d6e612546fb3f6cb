#include "monospde/picard.hpp"

#include "monospde/errors.hpp"
#include "monospde/parallel.hpp"
#include "monospde/summation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace monospde {

TrajectorySet::TrajectorySet(const Grid& grid, std::size_t paths, std::size_t steps, double dt)
    : grid_(grid), paths_(paths), steps_(steps), dt_(dt), data_(paths * (steps + 1) * grid.node_count(), 0.0) {
    if (paths == 0) throw std::invalid_argument("TrajectorySet: need at least one path");
}

TrajectorySet TrajectorySet::constant(const std::vector<Field>& u0, std::size_t paths, std::size_t steps,
                                      double dt) {
    if (u0.empty()) throw std::invalid_argument("TrajectorySet::constant: no initial data");
    if (u0.size() != 1 && u0.size() != paths) {
        throw std::invalid_argument("TrajectorySet::constant: need one initial field or one per path");
    }
    TrajectorySet set(u0.front().grid(), paths, steps, dt);
    for (std::size_t p = 0; p < paths; ++p) {
        const Field& f = u0.size() == 1 ? u0.front() : u0[p];
        for (std::size_t m = 0; m <= steps; ++m) set.set_state(p, m, f);
    }
    return set;
}

std::span<double> TrajectorySet::state(std::size_t path, std::size_t m) noexcept {
    const std::size_t n = grid_.node_count();
    return {data_.data() + (path * (steps_ + 1) + m) * n, n};
}

std::span<const double> TrajectorySet::state(std::size_t path, std::size_t m) const noexcept {
    const std::size_t n = grid_.node_count();
    return {data_.data() + (path * (steps_ + 1) + m) * n, n};
}

void TrajectorySet::copy_state(std::size_t path, std::size_t m, Field& out) const {
    const auto s = state(path, m);
    std::copy(s.begin(), s.end(), out.values().begin());
}

void TrajectorySet::set_state(std::size_t path, std::size_t m, const Field& u) {
    if (!(u.grid() == grid_)) throw std::invalid_argument("TrajectorySet: grid mismatch");
    std::copy(u.values().begin(), u.values().end(), state(path, m).begin());
}

bool TrajectorySet::operator==(const TrajectorySet& other) const {
    return grid_ == other.grid_ && paths_ == other.paths_ && steps_ == other.steps_ && dt_ == other.dt_ &&
           data_ == other.data_;
}

namespace {

void require_conforming(const TrajectorySet& a, const TrajectorySet& b) {
    if (!(a.grid() == b.grid()) || a.paths() != b.paths() || a.steps() != b.steps() || a.dt() != b.dt()) {
        throw std::invalid_argument("weighted_distance: trajectory sets differ in grid, paths, or steps");
    }
}

// E||a_m - b_m||^2 over the path set.
double mean_square_difference(const TrajectorySet& a, const TrajectorySet& b, std::size_t m) {
    const double w = a.grid().cell_volume();
    CompensatedSum total;
    for (std::size_t p = 0; p < a.paths(); ++p) {
        const auto x = a.state(p, m);
        const auto y = b.state(p, m);
        CompensatedSum s;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - y[i];
            s += d * d;
        }
        total += w * s.value();
    }
    return total.value() / static_cast<double>(a.paths());
}

} // namespace

double weighted_distance(const TrajectorySet& a, const TrajectorySet& b, double alpha, NormVariant variant) {
    require_conforming(a, b);
    if (!(alpha >= 0.0)) throw std::invalid_argument("weighted_distance: alpha must be nonnegative");
    const double dt = a.dt();
    if (variant == NormVariant::l2_time) {
        CompensatedSum sum;
        for (std::size_t m = 0; m < a.steps(); ++m) {
            const double t = static_cast<double>(m) * dt;
            sum += dt * std::exp(-alpha * t) * mean_square_difference(a, b, m);
        }
        return std::sqrt(sum.value());
    }
    double best = 0.0;
    for (std::size_t m = 0; m <= a.steps(); ++m) {
        const double t = static_cast<double>(m) * dt;
        best = std::max(best, std::exp(-0.5 * alpha * t) * std::sqrt(mean_square_difference(a, b, m)));
    }
    return best;
}

// ---------------------------------------------------------------------------

namespace {

const Field& initial_for(const std::vector<Field>& u0, std::size_t path) {
    return u0.size() == 1 ? u0.front() : u0[path];
}

void check_inputs(const std::vector<Field>& u0, const SolverConfig& cfg, const DiffusionCoefficient& B,
                  const WienerDriver& driver) {
    validate(cfg);
    if (u0.empty()) throw std::invalid_argument("no initial data");
    if (u0.size() != 1 && u0.size() != cfg.paths) {
        throw ConfigError("paths", "need one initial field or one per path");
    }
    if (driver.modes() != B.modes()) throw ConfigError("modes", "driver and coefficient mode counts differ");
    if (std::abs(driver.dt() - cfg.dt) > 1e-12 * cfg.dt) {
        throw std::invalid_argument("driver time step does not match cfg.dt");
    }
    check_stability_guard(cfg, u0.front().grid());
}

} // namespace

GammaOutput gamma_map(const ConvexIntegrand& k, const std::vector<Field>& u0, const TrajectorySet& v,
                      const SolverConfig& cfg, const DiffusionCoefficient& B, const WienerDriver& driver,
                      bool diagnostics) {
    check_inputs(u0, cfg, B, driver);
    const std::size_t steps = cfg.steps();
    if (v.paths() != cfg.paths || v.steps() != steps || !(v.grid() == u0.front().grid())) {
        throw std::invalid_argument("gamma_map: input trajectory does not match the configuration");
    }

    GammaOutput out{TrajectorySet(v.grid(), cfg.paths, steps, cfg.dt), SolutionBundle{cfg, {}}};
    out.bundle.paths.resize(cfg.paths);
    parallel_for(cfg.paths, cfg.workers, [&](std::size_t p) {
        std::vector<double> dw(B.modes());
        Field frozen(v.grid()), scratch(v.grid());
        StepNoise noise = [&](std::size_t step, double t, const Field&, Field& incr) {
            v.copy_state(p, step, frozen);
            driver.sample_into(p, step, dw);
            return B.apply_and_hs(t, frozen, dw, incr, scratch);
        };
        EvolveOptions options;
        options.diagnostics = diagnostics;
        options.observer = [&](std::size_t m, const Field& u) { out.trajectory.set_state(p, m, u); };
        out.bundle.paths[p] = evolve_path(k, initial_for(u0, p), cfg, p, noise, options);
    });
    for (const auto& p : out.bundle.paths) {
        if (p.aborted) {
            throw NumericalAbort("path " + std::to_string(p.path) + ": " + p.abort_reason, p.abort_step);
        }
    }
    return out;
}

std::string to_string(PicardStatus status) {
    switch (status) {
    case PicardStatus::converged: return "converged";
    case PicardStatus::non_contraction: return "non_contraction";
    case PicardStatus::max_iterations: return "max_iterations";
    }
    return "unknown";
}

AlphaCalibration calibrate_alpha(const ConvexIntegrand& k, const std::vector<Field>& u0, const SolverConfig& cfg,
                                 const DiffusionCoefficient& B, const WienerDriver& driver) {
    check_inputs(u0, cfg, B, driver);
    SolverConfig run = cfg;
    run.record_every = 0;
    const TrajectorySet v0 = TrajectorySet::constant(u0, cfg.paths, cfg.steps(), cfg.dt);
    const GammaOutput g = gamma_map(k, u0, v0, run, B, driver, true);
    const AprioriEstimate a = apriori_estimate(g.bundle);
    AlphaCalibration c;
    c.constant = std::max(1.0, a.sup_ratio + a.viscous_ratio + a.flux_ratio);
    const double lb = B.lipschitz_constant();
    c.alpha = std::max(1.0, 16.0 * lb * lb * c.constant * c.constant);
    return c;
}

MultiplicativeSolution solve_multiplicative(const ConvexIntegrand& k, const std::vector<Field>& u0,
                                            const SolverConfig& cfg, const DiffusionCoefficient& B,
                                            const WienerDriver& driver, const PicardOptions& options) {
    check_inputs(u0, cfg, B, driver);
    PicardReport report;
    if (options.alpha) {
        if (!(*options.alpha >= 0.0) || !std::isfinite(*options.alpha)) {
            throw ConfigError("alpha", "must be nonnegative");
        }
        report.alpha = *options.alpha;
    } else {
        const AlphaCalibration c = calibrate_alpha(k, u0, cfg, B, driver);
        report.alpha = c.alpha;
        report.calibration_constant = c.constant;
    }
    SolverConfig run = cfg;
    run.alpha = report.alpha;
    const std::size_t steps = cfg.steps();

    TrajectorySet v = options.guess == InitialGuess::zero
                          ? TrajectorySet(u0.front().grid(), cfg.paths, steps, cfg.dt)
                          : TrajectorySet::constant(u0, cfg.paths, steps, cfg.dt);

    std::size_t consecutive_expansions = 0;
    report.status = PicardStatus::max_iterations;
    for (std::size_t n = 1; n <= cfg.max_iterations; ++n) {
        TrajectorySet next = gamma_map(k, u0, v, run, B, driver, false).trajectory;
        const double d = weighted_distance(next, v, report.alpha, options.norm);
        report.distances.push_back(d);
        report.iterations = n;
        v = std::move(next);
        if (n >= 2) {
            const double prev = report.distances[n - 2];
            const double ratio = prev > 0.0 ? d / prev : 0.0;
            report.ratios.push_back(ratio);
            consecutive_expansions = ratio >= 1.0 ? consecutive_expansions + 1 : 0;
        }
        if (d <= cfg.tolerance * (1.0 + report.distances.front()) && n >= 2) {
            report.status = PicardStatus::converged;
            break;
        }
        if (consecutive_expansions >= 3) {
            report.status = PicardStatus::non_contraction;
            break;
        }
    }

    // One more application yields the diagnostics and the fixed-point residual.
    GammaOutput final_pass = gamma_map(k, u0, v, run, B, driver, true);
    report.fixed_point_residual = weighted_distance(final_pass.trajectory, v, report.alpha, options.norm);
    return MultiplicativeSolution{std::move(v), std::move(final_pass.bundle), std::move(report)};
}

DependenceReport continuous_dependence_test(const ConvexIntegrand& k, const std::vector<Field>& u01,
                                            const std::vector<Field>& u02, const SolverConfig& cfg,
                                            const DiffusionCoefficient& B, const WienerDriver& driver,
                                            const PicardOptions& options) {
    PicardOptions opts = options;
    if (!opts.alpha) opts.alpha = calibrate_alpha(k, u01, cfg, B, driver).alpha;
    const MultiplicativeSolution a = solve_multiplicative(k, u01, cfg, B, driver, opts);
    const MultiplicativeSolution b = solve_multiplicative(k, u02, cfg, B, driver, opts);

    DependenceReport r;
    r.alpha = *opts.alpha;
    const TrajectorySet i1 = TrajectorySet::constant(u01, cfg.paths, 0, cfg.dt);
    const TrajectorySet i2 = TrajectorySet::constant(u02, cfg.paths, 0, cfg.dt);
    r.initial_distance = weighted_distance(i1, i2, 0.0, NormVariant::sup_time);
    r.sup_distance = weighted_distance(a.trajectory, b.trajectory, 0.0, NormVariant::sup_time);
    r.l2_distance = weighted_distance(a.trajectory, b.trajectory, 0.0, NormVariant::l2_time);
    r.sup_weighted = weighted_distance(a.trajectory, b.trajectory, r.alpha, NormVariant::sup_time);
    r.l2_weighted = weighted_distance(a.trajectory, b.trajectory, r.alpha, NormVariant::l2_time);
    if (r.initial_distance > 0.0) {
        r.lipschitz_sup = r.sup_distance / r.initial_distance;
        r.lipschitz_l2 = r.l2_distance / r.initial_distance;
        r.lipschitz_weighted = (r.sup_weighted + std::sqrt(r.alpha) * r.l2_weighted) / r.initial_distance;
    }
    r.first = a.report;
    r.second = b.report;
    return r;
}

} // namespace monospde
