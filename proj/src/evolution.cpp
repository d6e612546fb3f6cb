#include "monospde/evolution.hpp"

#include "monospde/errors.hpp"
#include "monospde/parallel.hpp"
#include "monospde/summation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace monospde {

std::size_t SolverConfig::steps() const {
    // Tolerate T/dt landing a rounding error above an integer.
    const double ratio = horizon / dt;
    return static_cast<std::size_t>(std::ceil(ratio - 1e-9 * std::max(1.0, ratio)));
}

double stability_limit(double lambda, const Grid& grid) {
    const double h = grid.spacing();
    return lambda * h * h / (4.0 * grid.dimension());
}

void validate(const SolverConfig& cfg) {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(cfg.lambda)) throw ConfigError("lambda", "must be positive");
    if (!positive(cfg.dt)) throw ConfigError("dt", "must be positive");
    if (!positive(cfg.horizon)) throw ConfigError("horizon", "must be positive");
    if (!(cfg.alpha >= 0.0) || !std::isfinite(cfg.alpha)) throw ConfigError("alpha", "must be nonnegative");
    if (cfg.dimension != 1 && cfg.dimension != 2) throw ConfigError("dimension", "must be 1 or 2");
    if (cfg.cells < 2) throw ConfigError("cells", "need at least 2 cells per axis");
    if (!positive(cfg.extent)) throw ConfigError("extent", "must be positive");
    if (cfg.modes == 0) throw ConfigError("modes", "need at least one noise mode");
    if (cfg.paths == 0) throw ConfigError("paths", "need at least one path");
    if (!positive(cfg.tolerance)) throw ConfigError("tolerance", "must be positive");
    if (cfg.max_iterations == 0) throw ConfigError("max_iterations", "must be positive");
    if (cfg.initial.mode < 1) throw ConfigError("initial_mode", "modes are 1-based");
    if (!std::isfinite(cfg.initial.amplitude)) throw ConfigError("initial_amplitude", "must be finite");
    if (cfg.steps() > 100'000'000) throw ConfigError("dt", "more than 1e8 steps requested");
}

void check_stability_guard(const SolverConfig& cfg, const Grid& grid) {
    if (cfg.override_guard) return;
    const double limit = stability_limit(cfg.lambda, grid);
    if (cfg.dt > limit * (1.0 + 1e-12)) {
        throw ConfigError("dt", "time step " + std::to_string(cfg.dt) + " exceeds stability limit " +
                                    std::to_string(limit) + " = lambda h^2 / (4 n); set override_guard to force");
    }
}

Grid make_grid(const SolverConfig& cfg) { return Grid(cfg.dimension, cfg.cells, cfg.extent); }

Field initial_field(const SolverConfig& cfg, const Grid& grid) {
    const double a = cfg.initial.amplitude;
    switch (cfg.initial.shape) {
    case InitialShape::zero:
        return Field(grid);
    case InitialShape::sine:
        return a * sine_mode(grid, static_cast<std::size_t>(cfg.initial.mode));
    case InitialShape::tent: {
        const double L = grid.extent();
        const int n = grid.dimension();
        return sample_field(grid, [a, L, n](double x, double y) {
            double v = 2.0 * std::min(x, L - x) / L;
            if (n == 2) v *= 2.0 * std::min(y, L - y) / L;
            return a * v;
        });
    }
    }
    throw ConfigError("initial", "unknown initial shape");
}

DiffusionCoefficient make_coefficient(const SolverConfig& cfg, const Grid& grid) {
    return make_coefficient(cfg.coefficient, cfg.coefficient_params, grid, cfg.modes);
}

WienerDriver make_driver(const SolverConfig& cfg) { return WienerDriver(cfg.seed, cfg.modes, cfg.dt); }

bool SolutionBundle::any_aborted() const noexcept {
    return std::any_of(paths.begin(), paths.end(), [](const PathResult& p) { return p.aborted; });
}

// ---------------------------------------------------------------------------

RegularizedStepper::RegularizedStepper(const ConvexIntegrand& k, const Grid& grid, double lambda, double dt)
    : k_(k), grid_(grid), lambda_(lambda), dt_(dt), solver_(grid, lambda * dt),
      closed_conjugate_(false), probe_(sine_mode(grid, 1)), grad_(grid), eta_(grid), div_(grid) {
    if (k.dimension() != grid.dimension()) {
        throw ConfigError("dimension", "integrand dimension " + std::to_string(k.dimension()) +
                                           " does not match grid dimension " + std::to_string(grid.dimension()));
    }
    Point zero(k.dimension());
    closed_conjugate_ = k.conjugate_closed_form(zero.span()).has_value();
}

void RegularizedStepper::evaluate(const Field& u, VectorField& eta, StepRecord* rec) {
    gradient_into(u, grad_);
    const int n = grid_.dimension();
    const std::size_t sites = grid_.site_count();
    const double w = grid_.cell_volume();
    const double inv_lambda = 1.0 / lambda_;

    CompensatedSum flux, gradsq, gap, gap_res, kg, ks, kr, gl1, el1;
    Point g(n), p(n), e(n);
    for (std::size_t s = 0; s < sites; ++s) {
        const auto gs = grad_.site(s);
        auto es = eta.site(s);
        for (int i = 0; i < n; ++i) g[i] = gs[static_cast<std::size_t>(i)];
        k_.prox(lambda_, g.span(), p.span());
        for (int i = 0; i < n; ++i) {
            e[i] = (g[i] - p[i]) * inv_lambda;
            es[static_cast<std::size_t>(i)] = e[i];
        }
        if (rec == nullptr) continue;
        const double eg = dot(e, g);
        flux += w * eg;
        gradsq += w * dot(g, g);
        gl1 += w * euclidean_norm(g);
        el1 += w * euclidean_norm(e);
        const double kgv = k_.value(g);
        const double kpv = k_.value(p);
        const double ksv = closed_conjugate_ ? *k_.conjugate_closed_form(e) : conjugate_eval(k_, e);
        kg += w * kgv;
        kr += w * kpv;
        ks += w * ksv;
        gap += w * (kgv + ksv - eg);
        gap_res += w * (kpv + ksv - dot(e, p));
    }
    if (rec == nullptr) return;
    rec->u_sq = inner(u, u);
    rec->flux = flux.value();
    rec->viscous = lambda_ * gradsq.value();
    rec->gap = gap.value();
    rec->gap_resolvent = gap_res.value();
    rec->k_grad = kg.value();
    rec->kstar_eta = ks.value();
    rec->k_resolvent = kr.value();
    rec->grad_l1 = gl1.value();
    rec->eta_l1 = el1.value();
    rec->probe = inner(u, probe_);
}

void RegularizedStepper::apply(Field& u, const VectorField& eta, const Field& increment) {
    divergence_into(eta, div_);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += dt_ * div_[i] + increment[i];
    solver_.solve_in_place(u);
}

void RegularizedStepper::step(Field& u, const Field& increment) {
    evaluate(u, eta_, nullptr);
    apply(u, eta_, increment);
}

Field step_regularized(const ConvexIntegrand& k, const Field& u, const SolverConfig& cfg,
                       const Field& noise_increment) {
    check_stability_guard(cfg, u.grid());
    RegularizedStepper stepper(k, u.grid(), cfg.lambda, cfg.dt);
    Field next = u;
    stepper.step(next, noise_increment);
    return next;
}

// ---------------------------------------------------------------------------

namespace {

bool record_finite(const StepRecord& r) {
    for (double v : {r.u_sq, r.flux, r.viscous, r.hs_sq, r.gap, r.gap_resolvent, r.k_grad, r.kstar_eta,
                     r.k_resolvent, r.grad_l1, r.eta_l1, r.probe}) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

struct Accumulators {
    CompensatedSum flux, viscous, hs, u_sq, k_grad, kstar, k_res, grad_l1, eta_l1;
    CompensatedSum flux_w, viscous_w, hs_w, u_sq_w;

    void store(StepRecord& r) const {
        r.cum_flux = flux.value();
        r.cum_viscous = viscous.value();
        r.cum_hs = hs.value();
        r.cum_u_sq = u_sq.value();
        r.cum_k_grad = k_grad.value();
        r.cum_kstar = kstar.value();
        r.cum_k_resolvent = k_res.value();
        r.cum_grad_l1 = grad_l1.value();
        r.cum_eta_l1 = eta_l1.value();
        r.cum_flux_w = flux_w.value();
        r.cum_viscous_w = viscous_w.value();
        r.cum_hs_w = hs_w.value();
        r.cum_u_sq_w = u_sq_w.value();
    }

    void advance(const StepRecord& r, double dt, double weight) {
        flux += dt * r.flux;
        viscous += dt * r.viscous;
        hs += dt * r.hs_sq;
        u_sq += dt * r.u_sq;
        k_grad += dt * r.k_grad;
        kstar += dt * r.kstar_eta;
        k_res += dt * r.k_resolvent;
        grad_l1 += dt * r.grad_l1;
        eta_l1 += dt * r.eta_l1;
        flux_w += weight * dt * r.flux;
        viscous_w += weight * dt * r.viscous;
        hs_w += weight * dt * r.hs_sq;
        u_sq_w += weight * dt * r.u_sq;
    }
};

} // namespace

PathResult evolve_path(const ConvexIntegrand& k, const Field& u0, const SolverConfig& cfg,
                       std::size_t path, const StepNoise& noise, const EvolveOptions& options) {
    const Grid& grid = u0.grid();
    check_stability_guard(cfg, grid);
    const std::size_t steps = cfg.steps();

    PathResult result;
    result.path = path;
    result.initial = u0;

    RegularizedStepper stepper(k, grid, cfg.lambda, cfg.dt);
    VectorField eta(grid);
    Field u = u0;
    Field increment(grid);
    Accumulators acc;
    StepRecord rec;

    for (std::size_t m = 0;; ++m) {
        const double t = cfg.time(m);
        if (options.observer) options.observer(m, u);
        if (!u.all_finite()) {
            result.aborted = true;
            result.abort_step = m;
            result.abort_reason = "non-finite state at step " + std::to_string(m);
            return result;
        }

        // The diagnostic pass also produces eta, which the step reuses.
        stepper.evaluate(u, eta, &rec);
        rec.step = m;
        rec.t = t;
        rec.hs_sq = noise(m, t, u, increment);
        result.sup_u_sq = std::max(result.sup_u_sq, rec.u_sq);
        acc.store(rec);

        if (!record_finite(rec)) {
            result.aborted = true;
            result.abort_step = m;
            result.abort_reason = "non-finite diagnostics at step " + std::to_string(m);
            result.records.push_back(rec);
            return result;
        }

        const bool keep = m == 0 || m == steps || (cfg.record_every > 0 && m % cfg.record_every == 0);
        if (keep && options.diagnostics) result.records.push_back(rec);
        if (m == steps) break;

        acc.advance(rec, cfg.dt, std::exp(-2.0 * cfg.alpha * t));
        stepper.apply(u, eta, increment);
    }
    result.terminal = u;
    result.terminal_eta = eta;
    return result;
}

PathResult solve_additive(const ConvexIntegrand& k, const Field& u0, const SolverConfig& cfg,
                          const DiffusionCoefficient& G, const WienerDriver& driver, std::size_t path) {
    if (G.kind() != NoiseKind::additive) {
        throw ConfigError("coefficient", "solve_additive needs an additive coefficient, got '" + G.name() + "'");
    }
    if (driver.modes() != G.modes()) throw ConfigError("modes", "driver and coefficient mode counts differ");
    std::vector<double> dw(G.modes());
    Field scratch(u0.grid());
    StepNoise noise = [&](std::size_t step, double t, const Field& u, Field& out) {
        driver.sample_into(path, step, dw);
        return G.apply_and_hs(t, u, dw, out, scratch);
    };
    return evolve_path(k, u0, cfg, path, noise);
}

SolutionBundle solve_additive_paths(const ConvexIntegrand& k, const Field& u0, const SolverConfig& cfg,
                                    const DiffusionCoefficient& G, const WienerDriver& driver) {
    validate(cfg);
    check_stability_guard(cfg, u0.grid());
    SolutionBundle bundle;
    bundle.config = cfg;
    bundle.paths.resize(cfg.paths);
    parallel_for(cfg.paths, cfg.workers, [&](std::size_t p) {
        bundle.paths[p] = solve_additive(k, u0, cfg, G, driver, p);
    });
    return bundle;
}

// ---------------------------------------------------------------------------

Estimate monte_carlo(const std::vector<double>& samples) {
    if (samples.empty()) throw std::invalid_argument("monte_carlo: no samples");
    CompensatedSum sum;
    for (double x : samples) sum += x;
    const double m = static_cast<double>(samples.size());
    const double mean = sum.value() / m;
    if (samples.size() == 1) return {mean, 0.0};
    CompensatedSum sq;
    for (double x : samples) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq.value() / (m - 1.0) / m)};
}

namespace {

void require_completed(const SolutionBundle& bundle, const char* where) {
    if (bundle.paths.empty()) throw std::invalid_argument(std::string(where) + ": empty bundle");
    for (const auto& p : bundle.paths) {
        if (p.aborted) {
            throw NumericalAbort(std::string(where) + ": path " + std::to_string(p.path) + " aborted: " +
                                     p.abort_reason,
                                 p.abort_step);
        }
        if (p.records.empty()) throw std::invalid_argument(std::string(where) + ": path without records");
    }
}

template <class F>
double path_mean(const SolutionBundle& bundle, F&& f) {
    std::vector<double> xs;
    xs.reserve(bundle.paths.size());
    for (const auto& p : bundle.paths) xs.push_back(f(p));
    return monte_carlo(xs).mean;
}

template <class F>
Estimate path_estimate(const SolutionBundle& bundle, F&& f) {
    std::vector<double> xs;
    xs.reserve(bundle.paths.size());
    for (const auto& p : bundle.paths) xs.push_back(f(p));
    return monte_carlo(xs);
}

const StepRecord& record_at(const PathResult& p, double t, double dt) {
    for (const auto& r : p.records) {
        if (std::abs(r.t - t) <= 1e-9 * dt) return r;
    }
    throw std::out_of_range("no record at t = " + std::to_string(t) +
                            "; time is not grid-aligned or was not recorded (see record_every)");
}

} // namespace

AprioriEstimate apriori_estimate(const SolutionBundle& bundle) {
    require_completed(bundle, "apriori_estimate");
    AprioriEstimate a;
    a.sup_term = std::sqrt(path_mean(bundle, [](const PathResult& p) { return p.sup_u_sq; }));
    a.viscous_term = std::sqrt(path_mean(bundle, [](const PathResult& p) { return p.records.back().cum_viscous; }));
    a.flux_term = path_mean(bundle, [](const PathResult& p) { return p.records.back().cum_flux; });
    const double u0_sq = path_mean(bundle, [](const PathResult& p) { return p.records.front().u_sq; });
    const double noise_sq = path_mean(bundle, [](const PathResult& p) { return p.records.back().cum_hs; });
    a.rhs = std::sqrt(u0_sq) + std::sqrt(noise_sq);
    if (a.rhs > 0.0) {
        a.sup_ratio = a.sup_term / a.rhs;
        a.viscous_ratio = a.viscous_term / a.rhs;
        a.flux_ratio = a.flux_term / a.rhs;
    }
    a.energy_bound = 0.5 * (u0_sq + noise_sq);
    a.kstar_statistic = path_estimate(bundle, [](const PathResult& p) { return p.records.back().cum_kstar; });
    a.resolvent_statistic =
        path_estimate(bundle, [](const PathResult& p) { return p.records.back().cum_k_resolvent; });
    return a;
}

EnergyResidual energy_residual(const SolutionBundle& bundle, double t, double alpha) {
    require_completed(bundle, "energy_residual");
    const SolverConfig& cfg = bundle.config;
    const double end = cfg.time(cfg.steps());
    if (t < -1e-12 || t > end + 1e-9 * cfg.dt) {
        throw std::out_of_range("energy_residual: t = " + std::to_string(t) + " is outside [0, " +
                                std::to_string(end) + "]");
    }
    if (alpha != 0.0 && alpha != cfg.alpha) {
        throw std::invalid_argument("energy_residual: weighted integrals were accumulated with alpha = " +
                                    std::to_string(cfg.alpha));
    }
    EnergyResidual out;
    out.t = t;
    std::vector<double> samples;
    samples.reserve(bundle.paths.size());
    CompensatedSum usq, flux, init, noise;
    for (const auto& p : bundle.paths) {
        const StepRecord& r = record_at(p, t, cfg.dt);
        const double u0_sq = p.records.front().u_sq;
        double value = 0.0;
        if (alpha == 0.0) {
            value = r.u_sq + 2.0 * (r.cum_flux + r.cum_viscous) - u0_sq - r.cum_hs;
            usq += r.u_sq;
            flux += r.cum_flux + r.cum_viscous;
            noise += r.cum_hs;
        } else {
            const double w = std::exp(-2.0 * alpha * r.t);
            value = w * r.u_sq + 2.0 * alpha * r.cum_u_sq_w + 2.0 * (r.cum_flux_w + r.cum_viscous_w) - u0_sq -
                    r.cum_hs_w;
            usq += w * r.u_sq;
            flux += r.cum_flux_w + r.cum_viscous_w;
            noise += r.cum_hs_w;
        }
        init += u0_sq;
        samples.push_back(value);
    }
    const double m = static_cast<double>(bundle.paths.size());
    out.residual = monte_carlo(samples);
    out.u_sq = usq.value() / m;
    out.flux = flux.value() / m;
    out.initial_sq = init.value() / m;
    out.noise = noise.value() / m;
    return out;
}

} // namespace monospde
