#include "monospde/diagnostics.hpp"

#include "monospde/errors.hpp"
#include "monospde/summation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace monospde {

namespace {

template <class F>
Estimate estimate_over_paths(const SolutionBundle& bundle, F&& f) {
    std::vector<double> xs;
    xs.reserve(bundle.paths.size());
    for (const auto& p : bundle.paths) xs.push_back(f(p));
    return monte_carlo(xs);
}

void require_records(const SolutionBundle& bundle, const char* where) {
    if (bundle.paths.empty()) throw std::invalid_argument(std::string(where) + ": empty bundle");
    const std::size_t n = bundle.paths.front().records.size();
    for (const auto& p : bundle.paths) {
        if (p.aborted) {
            throw NumericalAbort(std::string(where) + ": path " + std::to_string(p.path) + " aborted: " +
                                     p.abort_reason,
                                 p.abort_step);
        }
        if (p.records.empty() || p.records.size() != n) {
            throw std::invalid_argument(std::string(where) + ": paths carry different record sets");
        }
    }
}

double terminal_difference(const SolutionBundle& a, const SolutionBundle& b) {
    if (a.paths.size() != b.paths.size()) throw std::invalid_argument("terminal_difference: path counts differ");
    CompensatedSum sum;
    for (std::size_t p = 0; p < a.paths.size(); ++p) {
        const Field d = *a.paths[p].terminal - *b.paths[p].terminal;
        sum += inner(d, d);
    }
    return std::sqrt(sum.value() / static_cast<double>(a.paths.size()));
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace

MomentReport moment_report(const SolutionBundle& bundle) {
    require_records(bundle, "moment_report");
    MomentReport r;
    r.paths = bundle.paths.size();
    r.point_estimate = r.paths == 1;
    const std::size_t records = bundle.paths.front().records.size();

    r.min_gap = std::numeric_limits<double>::infinity();
    double previous_probe = 0.0;
    for (std::size_t j = 0; j < records; ++j) {
        const Estimate u_sq = estimate_over_paths(bundle, [j](const PathResult& p) { return p.records[j].u_sq; });
        if (j == 0 || u_sq.mean > r.sup_u_sq.mean) {
            r.sup_u_sq = u_sq;
            r.sup_time = bundle.paths.front().records[j].t;
        }
        const double probe =
            estimate_over_paths(bundle, [j](const PathResult& p) { return p.records[j].probe; }).mean;
        if (j > 0) r.max_probe_increment = std::max(r.max_probe_increment, std::abs(probe - previous_probe));
        previous_probe = probe;
        for (const auto& p : bundle.paths) {
            r.min_gap = std::min(r.min_gap, p.records[j].gap);
            r.max_resolvent_gap = std::max(r.max_resolvent_gap, std::abs(p.records[j].gap_resolvent));
        }
    }
    r.w11_integral = estimate_over_paths(bundle, [](const PathResult& p) { return p.records.back().cum_grad_l1; });
    r.eta_l1_integral = estimate_over_paths(bundle, [](const PathResult& p) { return p.records.back().cum_eta_l1; });
    r.energy_integral = estimate_over_paths(
        bundle, [](const PathResult& p) { return p.records.back().cum_k_grad + p.records.back().cum_kstar; });
    r.terminal_u_sq = estimate_over_paths(bundle, [](const PathResult& p) { return p.records.back().u_sq; });
    return r;
}

SolutionBundle run_configuration(const ConvexIntegrand& k, const SolverConfig& cfg, const WienerDriver& driver,
                                 PicardReport* report) {
    validate(cfg);
    const Grid grid = make_grid(cfg);
    check_stability_guard(cfg, grid);
    const Field u0 = initial_field(cfg, grid);
    const DiffusionCoefficient coefficient = make_coefficient(cfg, grid);
    if (coefficient.kind() == NoiseKind::additive) {
        return solve_additive_paths(k, u0, cfg, coefficient, driver);
    }
    PicardOptions options;
    if (cfg.alpha > 0.0) options.alpha = cfg.alpha;
    MultiplicativeSolution solution = solve_multiplicative(k, {u0}, cfg, coefficient, driver, options);
    if (report != nullptr) *report = solution.report;
    return std::move(solution.bundle);
}

SolutionBundle run_configuration(const ConvexIntegrand& k, const SolverConfig& cfg, PicardReport* report) {
    return run_configuration(k, cfg, make_driver(cfg), report);
}

std::vector<LambdaSweepRow> lambda_sweep(const ConvexIntegrand& k, const SolverConfig& cfg,
                                         const std::vector<double>& lambdas) {
    if (lambdas.empty()) throw ConfigError("lambdas", "need at least one lambda");
    for (double l : lambdas) {
        if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("lambdas", "every lambda must be positive");
    }
    SolverConfig smallest = cfg;
    smallest.lambda = *std::min_element(lambdas.begin(), lambdas.end());
    validate(smallest);
    check_stability_guard(smallest, make_grid(smallest));

    const WienerDriver driver = make_driver(cfg);
    std::vector<LambdaSweepRow> rows;
    std::vector<SolutionBundle> bundles;
    for (double l : lambdas) {
        SolverConfig run = cfg;
        run.lambda = l;
        bundles.push_back(run_configuration(k, run, driver));
        LambdaSweepRow row;
        row.lambda = l;
        row.apriori = apriori_estimate(bundles.back());
        row.moments = moment_report(bundles.back());
        rows.push_back(row);
    }
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        rows[i].difference = terminal_difference(bundles[i], bundles[i + 1]);
    }
    return rows;
}

RefinementStudy refinement_study(const ConvexIntegrand& k, const SolverConfig& cfg, int halvings) {
    if (halvings < 0 || halvings > kMaxHalvings) {
        throw ConfigError("halvings", "must be between 0 and " + std::to_string(kMaxHalvings));
    }
    validate(cfg);
    const Grid base = make_grid(cfg);
    check_stability_guard(cfg, base);

    const std::size_t factor = std::size_t{1} << halvings;
    const Grid finest(cfg.dimension, cfg.cells * static_cast<int>(factor), cfg.extent);
    if (finest.node_count() > kMaxNodes) {
        throw ResourceGuardError("refinement study: finest grid has " + std::to_string(finest.node_count()) +
                                 " nodes (limit 512^2)");
    }
    SolverConfig finest_time = cfg;
    finest_time.dt = cfg.dt / static_cast<double>(factor * factor);
    if (finest_time.steps() > kMaxSteps) {
        throw ResourceGuardError("refinement study: finest level needs " + std::to_string(finest_time.steps()) +
                                 " steps (limit 1e6)");
    }

    RefinementStudy study;

    // Temporal sweep: one Brownian path sampled at dt / 2^H, summed per level.
    const WienerDriver fine(cfg.seed, cfg.modes, cfg.dt / static_cast<double>(factor));
    std::vector<double> log_dt, log_res;
    for (int l = 0; l <= halvings; ++l) {
        SolverConfig run = cfg;
        run.dt = cfg.dt / static_cast<double>(std::size_t{1} << l);
        run.record_every = 0;
        const WienerDriver driver = fine.coarsened(factor >> l);
        const SolutionBundle bundle = run_configuration(k, run, driver);
        RefinementRow row;
        row.kind = RefinementRow::Kind::time;
        row.level = l;
        row.dt = run.dt;
        row.cells = run.cells;
        row.residual = energy_residual(bundle, bundle.paths.front().records.back().t).residual;
        row.terminal_u_sq = moment_report(bundle).terminal_u_sq;
        if (l > 0) {
            const double prev = std::abs(study.rows.back().residual.mean);
            const double cur = std::abs(row.residual.mean);
            if (prev > 0.0 && cur > 0.0) row.observed_order = std::log2(prev / cur);
        }
        if (std::abs(row.residual.mean) > 0.0) {
            log_dt.push_back(std::log(run.dt));
            log_res.push_back(std::log(std::abs(row.residual.mean)));
        }
        study.rows.push_back(row);
    }
    if (log_dt.size() >= 2) study.temporal_order = least_squares_slope(log_dt, log_res);

    // Spatial sweep at the time step that satisfies the guard on the finest grid.
    SolverConfig space = cfg;
    space.dt = finest_time.dt;
    space.record_every = 0;
    const WienerDriver space_driver = make_driver(space);
    std::vector<double> moments;
    std::vector<RefinementRow> space_rows;
    for (int l = 0; l <= halvings; ++l) {
        SolverConfig run = space;
        run.cells = cfg.cells * (1 << l);
        const SolutionBundle bundle = run_configuration(k, run, space_driver);
        RefinementRow row;
        row.kind = RefinementRow::Kind::space;
        row.level = l;
        row.dt = run.dt;
        row.cells = run.cells;
        row.residual = energy_residual(bundle, bundle.paths.front().records.back().t).residual;
        row.terminal_u_sq = moment_report(bundle).terminal_u_sq;
        moments.push_back(row.terminal_u_sq.mean);
        space_rows.push_back(row);
    }
    std::vector<double> log_h, log_err;
    std::vector<double> err;
    for (std::size_t l = 0; l + 1 < moments.size(); ++l) err.push_back(std::abs(moments[l + 1] - moments[l]));
    for (std::size_t l = 0; l < err.size(); ++l) {
        if (err[l] > 0.0) {
            log_h.push_back(std::log(base.spacing() / static_cast<double>(std::size_t{1} << l)));
            log_err.push_back(std::log(err[l]));
        }
        if (l >= 1 && err[l - 1] > 0.0 && err[l] > 0.0) space_rows[l + 1].observed_order = std::log2(err[l - 1] / err[l]);
    }
    if (log_h.size() >= 2) study.spatial_order = least_squares_slope(log_h, log_err);
    study.rows.insert(study.rows.end(), space_rows.begin(), space_rows.end());
    return study;
}

// ---------------------------------------------------------------------------

namespace {

class Sampler {
public:
    Sampler(std::uint64_t seed, int dimension, double scale) : gen_(seed), n_(dimension), scale_(scale) {}

    double uniform(double a, double b) { return a + (b - a) * static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    Point point() {
        const double scales[3] = {0.1, 1.0, scale_};
        const double s = scales[gen_() % 3];
        Point x(n_);
        for (int i = 0; i < n_; ++i) x[i] = uniform(-s, s);
        return x;
    }

    // Either an independent point or a perturbation of x at a random scale.
    Point partner(const Point& x) {
        if (gen_() % 2 == 0) return point();
        const double scales[3] = {1e-3, 1e-1, 1.0};
        const double s = scales[gen_() % 3];
        Point y(n_);
        for (int i = 0; i < n_; ++i) y[i] = x[i] + uniform(-s, s);
        return y;
    }

private:
    std::mt19937_64 gen_;
    int n_;
    double scale_;
};

double distance(const Point& a, const Point& b) {
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

} // namespace

ConvexCheckReport convex_check(const ConvexIntegrand& k, const ConvexCheckOptions& options) {
    if (options.lambdas.empty()) throw ConfigError("lambdas", "need at least one lambda");
    for (double l : options.lambdas) {
        if (!(l > 0.0)) throw ConfigError("lambdas", "every lambda must be positive");
    }
    const int n = k.dimension();
    Sampler sampler(options.seed, n, options.scale);
    ConvexCheckReport r;
    r.integrand = k.name();
    r.min_value = std::numeric_limits<double>::infinity();
    r.min_fenchel_gap = std::numeric_limits<double>::infinity();
    r.min_monotonicity = std::numeric_limits<double>::infinity();

    std::size_t oracle_done = 0;
    for (double lambda : options.lambdas) {
        for (std::size_t i = 0; i < options.samples; ++i) {
            const Point x = sampler.point();
            const Point y = sampler.partner(x);
            const double t = sampler.uniform(0.0, 1.0);

            const double kx = k.value(x), ky = k.value(y);
            r.min_value = std::min(r.min_value, kx);
            Point mid(n);
            for (int j = 0; j < n; ++j) mid[j] = t * x[j] + (1.0 - t) * y[j];
            const double chord = t * kx + (1.0 - t) * ky;
            r.max_convexity_violation =
                std::max(r.max_convexity_violation, (k.value(mid) - chord) / std::max(1.0, std::abs(chord)));

            const Point r_dual = sampler.point();
            r.min_fenchel_gap = std::min(r.min_fenchel_gap, fenchel_gap(k, y, r_dual));

            const Point jx = prox_solve(k, lambda, x);
            const Point jy = prox_solve(k, lambda, y);
            Point gx(n), gy(n);
            for (int j = 0; j < n; ++j) {
                gx[j] = (x[j] - jx[j]) / lambda;
                gy[j] = (y[j] - jy[j]) / lambda;
            }
            r.max_selection_gap = std::max(r.max_selection_gap, std::abs(fenchel_gap(k, jx, gx)));
            r.max_duality_residual = std::max(r.max_duality_residual, std::abs(yosida_duality_check(k, lambda, x)));

            double recon = 0.0;
            for (int j = 0; j < n; ++j) recon = std::max(recon, std::abs(x[j] - (jx[j] + lambda * gx[j])));
            r.max_reconstruction_error =
                std::max(r.max_reconstruction_error, recon / std::max(1.0, euclidean_norm(x)));

            const double dxy = distance(x, y);
            if (dxy > 0.0) {
                // Forming x - Jx and the differences costs a few ulps of the operands; that
                // much is removed before comparing with |x - y|, which can be far smaller.
                const double ulps = 4.0 * std::numeric_limits<double>::epsilon() *
                                    (euclidean_norm(x) + euclidean_norm(y) + euclidean_norm(jx) + euclidean_norm(jy));
                const double lip = std::max(0.0, lambda * distance(gx, gy) - ulps) / dxy;
                const double expansion = std::max(0.0, distance(jx, jy) - ulps) / dxy;
                r.max_lipschitz_ratio = std::max(r.max_lipschitz_ratio, lip);
                r.max_resolvent_expansion = std::max(r.max_resolvent_expansion, expansion);
                double mono = 0.0;
                for (int j = 0; j < n; ++j) mono += (gx[j] - gy[j]) * (x[j] - y[j]);
                r.min_monotonicity = std::min(r.min_monotonicity, mono / (dxy * dxy));
            }

            if (oracle_done < options.oracle_samples) {
                if (auto closed = k.conjugate_closed_form(gx)) {
                    r.max_conjugate_mismatch =
                        std::max(r.max_conjugate_mismatch, std::abs(*closed - legendre_oracle(k, gx)));
                }
                ++oracle_done;
            }
            ++r.evaluations;
        }
    }
    return r;
}

// ---------------------------------------------------------------------------

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

} // namespace

CsvTable path_table(const PathResult& path) {
    CsvTable t("monospde.path/1",
               {"step", "t", "u_sq", "flux", "viscous", "hs_sq", "gap", "gap_resolvent", "k_grad", "kstar_eta",
                "k_resolvent", "grad_l1", "eta_l1", "probe", "cum_flux", "cum_viscous", "cum_hs", "cum_u_sq",
                "cum_k_grad", "cum_kstar", "cum_k_resolvent", "cum_grad_l1", "cum_eta_l1"});
    t.add_comment("path=" + std::to_string(path.path));
    if (path.aborted) {
        t.add_comment("aborted at step " + std::to_string(path.abort_step) + ": " + path.abort_reason);
    }
    for (const auto& r : path.records) {
        t.add_row(std::vector<double>{static_cast<double>(r.step), r.t, r.u_sq, r.flux, r.viscous, r.hs_sq, r.gap,
                                      r.gap_resolvent, r.k_grad, r.kstar_eta, r.k_resolvent, r.grad_l1, r.eta_l1,
                                      r.probe, r.cum_flux, r.cum_viscous, r.cum_hs, r.cum_u_sq, r.cum_k_grad,
                                      r.cum_kstar, r.cum_k_resolvent, r.cum_grad_l1, r.cum_eta_l1});
    }
    return t;
}

CsvTable moment_table(const MomentReport& m) {
    CsvTable t("monospde.moments/1", {"quantity", "mean", "standard_error"});
    t.add_comment("paths=" + std::to_string(m.paths) + (m.point_estimate ? " point_estimate" : ""));
    auto row = [&t](const std::string& name, const Estimate& e) {
        t.add_row(std::vector<std::string>{name, format_double(e.mean), format_double(e.standard_error)});
    };
    row("sup_t_u_sq", m.sup_u_sq);
    row("w11_integral", m.w11_integral);
    row("eta_l1_integral", m.eta_l1_integral);
    row("energy_integral", m.energy_integral);
    row("terminal_u_sq", m.terminal_u_sq);
    row("min_gap", {m.min_gap, 0.0});
    row("max_resolvent_gap", {m.max_resolvent_gap, 0.0});
    row("max_probe_increment", {m.max_probe_increment, 0.0});
    return t;
}

CsvTable energy_table(const SolutionBundle& bundle) {
    require_records(bundle, "energy_table");
    CsvTable t("monospde.energy/1",
               {"t", "residual", "standard_error", "u_sq", "dissipation", "initial_sq", "noise"});
    for (const auto& rec : bundle.paths.front().records) {
        const EnergyResidual e = energy_residual(bundle, rec.t);
        t.add_row(std::vector<double>{e.t, e.residual.mean, e.residual.standard_error, e.u_sq, e.flux,
                                      e.initial_sq, e.noise});
    }
    return t;
}

CsvTable apriori_table(const AprioriEstimate& a) {
    CsvTable t("monospde.apriori/1",
               {"sup_term", "viscous_term", "flux_term", "rhs", "sup_ratio", "viscous_ratio", "flux_ratio",
                "energy_bound", "kstar_statistic", "kstar_se", "resolvent_statistic", "resolvent_se"});
    t.add_row(std::vector<double>{a.sup_term, a.viscous_term, a.flux_term, a.rhs, a.sup_ratio, a.viscous_ratio,
                                  a.flux_ratio, a.energy_bound, a.kstar_statistic.mean,
                                  a.kstar_statistic.standard_error, a.resolvent_statistic.mean,
                                  a.resolvent_statistic.standard_error});
    return t;
}

CsvTable picard_table(const PicardReport& report) {
    CsvTable t("monospde.picard/1", {"n", "distance", "ratio"});
    t.add_comment("alpha=" + format_double(report.alpha) + " status=" + to_string(report.status) +
                  " fixed_point_residual=" + format_double(report.fixed_point_residual));
    for (std::size_t i = 0; i < report.distances.size(); ++i) {
        t.add_row(std::vector<std::string>{std::to_string(i + 1), format_double(report.distances[i]),
                                           i == 0 ? std::string() : format_double(report.ratios[i - 1])});
    }
    return t;
}

CsvTable lambda_sweep_table(const std::vector<LambdaSweepRow>& rows) {
    CsvTable t("monospde.lambda_sweep/1",
               {"lambda", "difference_to_next", "sup_ratio", "viscous_ratio", "flux_ratio", "rhs", "energy_bound",
                "kstar_statistic", "kstar_se", "resolvent_statistic", "resolvent_se", "terminal_u_sq",
                "terminal_u_sq_se"});
    for (const auto& r : rows) {
        const AprioriEstimate& a = r.apriori;
        t.add_row(std::vector<std::string>{
            format_double(r.lambda), opt(r.difference), format_double(a.sup_ratio), format_double(a.viscous_ratio),
            format_double(a.flux_ratio), format_double(a.rhs), format_double(a.energy_bound),
            format_double(a.kstar_statistic.mean), format_double(a.kstar_statistic.standard_error),
            format_double(a.resolvent_statistic.mean), format_double(a.resolvent_statistic.standard_error),
            format_double(r.moments.terminal_u_sq.mean), format_double(r.moments.terminal_u_sq.standard_error)});
    }
    return t;
}

CsvTable refinement_table(const RefinementStudy& study) {
    CsvTable t("monospde.refinement/1",
               {"kind", "level", "dt", "cells", "residual", "residual_se", "terminal_u_sq", "terminal_u_sq_se",
                "observed_order"});
    t.add_comment("temporal_order=" + opt(study.temporal_order) + " spatial_order=" + opt(study.spatial_order));
    for (const auto& r : study.rows) {
        t.add_row(std::vector<std::string>{
            r.kind == RefinementRow::Kind::time ? "time" : "space", std::to_string(r.level), format_double(r.dt),
            std::to_string(r.cells), format_double(r.residual.mean), format_double(r.residual.standard_error),
            format_double(r.terminal_u_sq.mean), format_double(r.terminal_u_sq.standard_error),
            opt(r.observed_order)});
    }
    return t;
}

CsvTable convex_check_table(const std::vector<ConvexCheckReport>& reports) {
    CsvTable t("monospde.convex_check/1",
               {"integrand", "evaluations", "min_value", "max_convexity_violation", "min_fenchel_gap",
                "max_selection_gap", "max_duality_residual", "max_lipschitz_ratio", "min_monotonicity",
                "max_resolvent_expansion", "max_reconstruction_error", "max_conjugate_mismatch"});
    for (const auto& r : reports) {
        t.add_row(std::vector<std::string>{
            r.integrand, std::to_string(r.evaluations), format_double(r.min_value),
            format_double(r.max_convexity_violation), format_double(r.min_fenchel_gap),
            format_double(r.max_selection_gap), format_double(r.max_duality_residual),
            format_double(r.max_lipschitz_ratio), format_double(r.min_monotonicity),
            format_double(r.max_resolvent_expansion), format_double(r.max_reconstruction_error),
            format_double(r.max_conjugate_mismatch)});
    }
    return t;
}

} // namespace monospde
