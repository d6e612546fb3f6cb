// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Configurations and tolerances are fixed here; a run takes under a minute in a
// Release build.

#include "monospde/cli.hpp"
#include "monospde/diagnostics.hpp"
#include "monospde/errors.hpp"
#include "monospde/picard.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace monospde;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::vector<std::string> lines;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    }
    void note(const std::string& what) { lines.push_back("     " + what); }
};

std::string fmt(double v) { return format_double(v); }

// The multivalued benchmark: k(x) = |x| + |x|^2/2, smooth additive noise.
SolverConfig benchmark() {
    SolverConfig cfg;
    cfg.integrand = "abs_quad";
    cfg.coefficient = "add_smooth";
    cfg.cells = 16;
    cfg.modes = 8;
    cfg.seed = 20240611;
    cfg.initial = {InitialShape::tent, 1.0, 1};
    cfg.workers = 0;
    return cfg;
}

// 1. Convex-core identity suite ----------------------------------------------
Verdict convex_identities() {
    Verdict v;
    const char* names[] = {"quad", "pgrow:1.5", "pgrow:3", "abs_quad", "aniso_quad"};
    for (int n : {1, 2}) {
        for (const char* name : names) {
            const auto k = make_integrand(name, n);
            ConvexCheckOptions opt;
            opt.lambdas = {1.0, 0.1, 0.01};
            opt.samples = 10000;
            opt.oracle_samples = 0;
            opt.seed = 17;
            const ConvexCheckReport r = convex_check(*k, opt);
            const std::string tag = std::string(name) + " n=" + std::to_string(n) + ": ";
            v.require(r.min_fenchel_gap >= -1e-8, tag + "min Fenchel gap " + fmt(r.min_fenchel_gap));
            v.require(r.max_selection_gap <= 1e-8, tag + "max gap at (J x, gamma_lambda x) " + fmt(r.max_selection_gap));
            v.require(r.max_duality_residual <= 1e-8, tag + "max duality residual " + fmt(r.max_duality_residual));
            v.require(r.max_lipschitz_ratio <= 1.0, tag + "max lambda*Lip(gamma_lambda) " + fmt(r.max_lipschitz_ratio));
            v.require(r.max_resolvent_expansion <= 1.0, tag + "max resolvent expansion " + fmt(r.max_resolvent_expansion));
            v.require(r.max_reconstruction_error <= 1e-12, tag + "max reconstruction error " + fmt(r.max_reconstruction_error));
        }
    }
    return v;
}

// 2. Summation by parts ------------------------------------------------------
Verdict summation_by_parts() {
    Verdict v;
    std::mt19937_64 gen(99);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::vector<std::pair<int, int>> grids{{1, 8}, {1, 16}, {1, 32}, {1, 64}, {2, 8}, {2, 16}, {2, 32}};
    for (const auto& [dim, cells] : grids) {
        const Grid g(dim, cells);
        double worst = 0.0;
        for (int pair = 0; pair < 100; ++pair) {
            Field phi(g);
            for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = normal(gen);
            VectorField eta(g);
            for (double& x : eta.values()) x = normal(gen);
            const VectorField grad = gradient(phi);
            const double defect = inner(divergence(eta), phi) + inner(eta, grad);
            const double scale = std::sqrt(inner(eta, eta) * inner(grad, grad));
            worst = std::max(worst, std::abs(defect) / scale);
        }
        v.require(worst <= 1e-14, "n=" + std::to_string(dim) + " cells=" + std::to_string(cells) +
                                      ": max |<div eta, phi> + <eta, grad phi>| / scale " + fmt(worst));
    }
    return v;
}

// 3. Heat equation -----------------------------------------------------------
Verdict heat_equation() {
    Verdict v;
    SolverConfig cfg;
    cfg.integrand = "quad";
    cfg.coefficient = "none";
    cfg.cells = 64;
    cfg.lambda = 0.01;
    const double h = 1.0 / 64.0;
    cfg.dt = cfg.lambda * h * h / 8.0;
    cfg.horizon = 0.1;
    cfg.paths = 1;
    cfg.record_every = 0;
    cfg.initial = {InitialShape::sine, 1.0, 1};
    const auto k = make_integrand("quad", 1);
    const auto bundle = run_configuration(*k, cfg);
    const Grid grid = make_grid(cfg);
    const Field phi = sine_mode(grid, 1);
    const Field& u = *bundle.paths[0].terminal;
    const double amplitude = inner(u, phi) / inner(phi, phi);

    const double mu = oracle::stencil_eigenvalue(1, h);
    const double steps = static_cast<double>(cfg.steps());
    const double scheme = std::pow(oracle::quadratic_step_factor(cfg.lambda, cfg.dt, mu), steps);
    const double T = steps * cfg.dt;
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double continuum = std::exp(-pi2 * (1.0 / (1.0 + cfg.lambda) + cfg.lambda) * T);
    v.require(std::abs(amplitude - scheme) <= 1e-10,
              "amplitude " + fmt(amplitude) + " vs scheme decay " + fmt(scheme) + " (diff " +
                  fmt(std::abs(amplitude - scheme)) + ")");
    const double rel = std::abs(amplitude - continuum) / continuum;
    v.require(rel <= 0.05, "vs continuum " + fmt(continuum) + ": relative error " + fmt(rel));
    v.note("h=1/64, lambda=0.01, dt=lambda h^2/8=" + fmt(cfg.dt) + ", " + std::to_string(cfg.steps()) + " steps");
    return v;
}

// 4. Energy identity ---------------------------------------------------------
Verdict energy_identity() {
    Verdict v;
    const auto k = make_integrand("abs_quad", 1);
    SolverConfig cfg = benchmark();
    cfg.coefficient = "none";
    cfg.lambda = 0.1;
    cfg.horizon = 0.02;
    cfg.dt = 8e-5;
    cfg.paths = 1;
    cfg.record_every = 0;

    std::vector<double> residuals;
    for (int l = 0; l <= 3; ++l) {
        SolverConfig run = cfg;
        run.dt = cfg.dt / std::pow(2.0, l);
        residuals.push_back(energy_residual(run_configuration(*k, run), run.horizon).residual.mean);
    }
    for (int l = 1; l <= 3; ++l) {
        const double ratio = residuals[l] / residuals[l - 1];
        v.require(std::abs(ratio - 0.5) <= 0.1, "deterministic residual " + fmt(residuals[l - 1]) + " -> " +
                                                    fmt(residuals[l]) + ", ratio " + fmt(ratio));
    }

    SolverConfig noisy = cfg;
    noisy.coefficient = "add_smooth";
    noisy.modes = 1;
    noisy.paths = 1000;
    noisy.dt = cfg.dt / 2.0;
    SolverConfig quiet = noisy;
    quiet.coefficient = "none";
    quiet.paths = 1;
    const double bias = energy_residual(run_configuration(*k, quiet), quiet.horizon).residual.mean;
    const EnergyResidual r = energy_residual(run_configuration(*k, noisy), noisy.horizon);
    v.require(std::abs(r.residual.mean) <= 3.0 * r.residual.standard_error + std::abs(bias),
              "one-mode additive noise, M=1000: residual " + fmt(r.residual.mean) + ", SE " +
                  fmt(r.residual.standard_error) + ", deterministic bias " + fmt(bias));
    return v;
}

// 5. Lambda-uniform a priori estimate ----------------------------------------
Verdict apriori_uniformity() {
    Verdict v;
    const auto k = make_integrand("abs_quad", 1);
    SolverConfig cfg = benchmark();
    cfg.dt = 9e-6; // guard at lambda = 0.01, h = 1/16: 9.77e-6
    cfg.horizon = 0.05;
    cfg.paths = 200;
    cfg.record_every = 0;
    const auto rows = lambda_sweep(*k, cfg, {1.0, 0.1, 0.01});

    auto spread = [&](auto get) {
        double lo = get(rows[0].apriori), hi = lo;
        for (const auto& r : rows) {
            lo = std::min(lo, get(r.apriori));
            hi = std::max(hi, get(r.apriori));
        }
        return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    };
    auto list = [&](auto get) {
        std::string s;
        for (const auto& r : rows) s += (s.empty() ? "" : ", ") + fmt(get(r.apriori));
        return s;
    };
    const auto sup = [](const AprioriEstimate& a) { return a.sup_ratio; };
    const auto visc = [](const AprioriEstimate& a) { return a.viscous_ratio; };
    const auto flux = [](const AprioriEstimate& a) { return a.flux_ratio; };
    const auto total = [](const AprioriEstimate& a) { return a.sup_ratio + a.viscous_ratio + a.flux_ratio; };
    v.require(spread(sup) < 2.0, "sup ratio over lambda = 1, 0.1, 0.01: " + list(sup) + " (spread " + fmt(spread(sup)) + ")");
    v.require(spread(visc) < 2.0, "viscous ratio: " + list(visc) + " (spread " + fmt(spread(visc)) + ")");
    v.require(spread(flux) < 2.0, "flux ratio: " + list(flux) + " (spread " + fmt(spread(flux)) + ")");
    v.note("sum of the three ratios: " + list(total) + " (spread " + fmt(spread(total)) + ")");
    for (const auto& r : rows) {
        const auto& a = r.apriori;
        v.require(a.kstar_statistic.mean <= a.energy_bound && a.resolvent_statistic.mean <= a.energy_bound,
                  "lambda=" + fmt(r.lambda) + ": E int int k*(eta) " + fmt(a.kstar_statistic.mean) +
                      ", E int int k(J grad u) " + fmt(a.resolvent_statistic.mean) + " <= bound " +
                      fmt(a.energy_bound));
    }
    return v;
}

// 6. Cauchy behavior as lambda -> 0 ------------------------------------------
Verdict cauchy_in_lambda() {
    Verdict v;
    const auto k = make_integrand("abs_quad", 1);
    SolverConfig cfg = benchmark();
    cfg.dt = 3e-5; // guard at lambda = 1/32, h = 1/16: 3.05e-5
    cfg.horizon = 0.05;
    cfg.paths = 200;
    cfg.record_every = 0;
    std::vector<double> lambdas;
    for (int j = 0; j <= 5; ++j) lambdas.push_back(std::ldexp(1.0, -j));
    const auto rows = lambda_sweep(*k, cfg, lambdas);
    for (int j = 0; j + 1 <= 4; ++j) {
        const double a = *rows[j].difference, b = *rows[j + 1].difference;
        v.require(b < a, "||u_lambda - u_lambda/2|| at lambda=2^-" + std::to_string(j) + ": " + fmt(a) +
                             " > at 2^-" + std::to_string(j + 1) + ": " + fmt(b));
    }
    return v;
}

// 7. Picard contraction ------------------------------------------------------
Verdict picard_contraction() {
    Verdict v;
    SolverConfig cfg = benchmark();
    cfg.coefficient = "mult_nemytskii";
    cfg.lambda = 0.1;
    cfg.dt = 5e-5;
    cfg.horizon = 0.05;
    cfg.paths = 100;
    cfg.tolerance = 1e-8;
    cfg.max_iterations = 50;
    cfg.record_every = 0;
    const Grid grid = make_grid(cfg);
    const auto k = make_integrand(cfg.integrand, 1);
    const std::vector<Field> u0{initial_field(cfg, grid)};
    const auto sol = solve_multiplicative(*k, u0, cfg, make_coefficient(cfg, grid), make_driver(cfg));
    const auto& rep = sol.report;
    v.note("calibrated alpha " + fmt(rep.alpha) + " (constant " + fmt(rep.calibration_constant) + ")");
    double worst = 0.0;
    std::string ratios;
    for (double q : rep.ratios) {
        worst = std::max(worst, q);
        ratios += (ratios.empty() ? "" : ", ") + fmt(q);
    }
    v.require(!rep.ratios.empty() && worst <= 0.5, "distance ratios from iteration 2: " + ratios);
    v.require(rep.status == PicardStatus::converged && rep.iterations <= 50,
              to_string(rep.status) + " after " + std::to_string(rep.iterations) + " iterations, fixed-point residual " +
                  fmt(rep.fixed_point_residual));

    SolverConfig additive = cfg;
    additive.coefficient = "add_smooth";
    const auto add = solve_multiplicative(*k, u0, additive, make_coefficient(additive, grid), make_driver(additive));
    v.require(add.report.status == PicardStatus::converged && add.report.iterations == 2,
              "additive noise: " + to_string(add.report.status) + " after " + std::to_string(add.report.iterations) +
                  " iterations");
    return v;
}

// 8. Uniqueness and Lipschitz dependence -------------------------------------
Verdict uniqueness_and_dependence() {
    Verdict v;
    SolverConfig cfg = benchmark();
    cfg.coefficient = "mult_nemytskii";
    cfg.lambda = 0.1;
    cfg.dt = 2e-5; // one halving of (dt, h) stays under the guard
    cfg.horizon = 0.02;
    cfg.paths = 100;
    cfg.tolerance = 1e-8;
    cfg.record_every = 0;
    const auto k = make_integrand(cfg.integrand, 1);

    {
        const Grid grid = make_grid(cfg);
        const auto B = make_coefficient(cfg, grid);
        const auto driver = make_driver(cfg);
        const std::vector<Field> u0{initial_field(cfg, grid)};
        const double alpha = calibrate_alpha(*k, u0, cfg, B, driver).alpha;
        const auto a = solve_multiplicative(*k, u0, cfg, B, driver, {.alpha = alpha});
        const auto b = solve_multiplicative(*k, u0, cfg, B, driver, {.alpha = alpha, .guess = InitialGuess::zero});
        const double d = weighted_distance(a.trajectory, b.trajectory, alpha);
        const double limit = 10.0 * cfg.tolerance * (1.0 + a.report.distances.front());
        v.require(d <= limit, "guesses u0 and 0: weighted distance " + fmt(d) + " <= " + fmt(limit));

        const auto c = solve_multiplicative(*k, u0, cfg, B, driver, {.alpha = alpha});
        v.require(a.trajectory == c.trajectory, "identical data and seed give bitwise-identical trajectories");
        const auto same = continuous_dependence_test(*k, u0, u0, cfg, B, driver);
        v.require(same.sup_distance == 0.0 && same.l2_distance == 0.0, "u01 = u02 gives distance exactly 0");
    }

    // Lipschitz constant of u0 -> u in the weighted norm (sup + sqrt(alpha) L2 in time)
    // at (dt, h) and (dt/2, h/2), one Brownian path. The unweighted sup ratio is
    // attained at t = 0 and is 1 on every grid, so it is only reported.
    SolverConfig other = cfg;
    other.initial = {InitialShape::sine, 0.6, 2};
    const WienerDriver fine(cfg.seed, cfg.modes, cfg.dt / 2.0);
    std::vector<double> constants;
    for (int level = 0; level < 2; ++level) {
        SolverConfig run = cfg;
        run.dt = cfg.dt / (level == 0 ? 1.0 : 2.0);
        run.cells = cfg.cells * (level == 0 ? 1 : 2);
        SolverConfig run2 = other;
        run2.dt = run.dt;
        run2.cells = run.cells;
        check_stability_guard(run, make_grid(run));
        const Grid grid = make_grid(run);
        const auto B = make_coefficient(run, grid);
        const WienerDriver driver = level == 0 ? fine.coarsened(2) : fine;
        const auto rep = continuous_dependence_test(*k, {initial_field(run, grid)}, {initial_field(run2, grid)}, run, B,
                                                    driver);
        constants.push_back(rep.lipschitz_weighted);
        v.note("cells=" + std::to_string(run.cells) + " dt=" + fmt(run.dt) + ": weighted Lipschitz ratio " +
               fmt(rep.lipschitz_weighted) + " (alpha " + fmt(rep.alpha) + "), unweighted sup-in-time " +
               fmt(rep.lipschitz_sup) + ", L2-in-time " + fmt(rep.lipschitz_l2));
    }
    const double change = std::abs(constants[1] / constants[0] - 1.0);
    v.require(change <= 0.2, "weighted Lipschitz ratio change under one (dt, h) halving: " + fmt(change));
    return v;
}

// 9. Determinism of the CLI --------------------------------------------------
Verdict cli_determinism() {
    Verdict v;
    const std::string common = "cells = 16\nlambda = 0.1\ndt = 5e-5\nT = 0.005\nmodes = 4\npaths = 16\nseed = 31\n"
                               "integrand = abs_quad\nlambdas = 1, 0.5, 0.25\nhalvings = 2\nsamples = 500\n"
                               "oracle_samples = 4\n";
    const std::vector<std::pair<std::string, std::string>> runs{
        {"simulate-additive", ""},
        {"solve-multiplicative", "coefficient = mult_nemytskii\n"},
        {"lambda-sweep", ""},
        {"refinement-study", "paths = 4\n"},
        {"convex-check", "dimension = 2\n"},
    };
    const fs::path root = oracle::scratch_dir("acceptance_cli");
    for (const auto& [sub, extra] : runs) {
        const fs::path dir = root / sub;
        fs::create_directories(dir);
        const fs::path cfg = dir / "input.cfg";
        std::ofstream(cfg) << common << extra;
        std::ostringstream out, err;
        const int first = run_cli({sub, "--config", cfg.string(), "--out", (dir / "a").string(), "--workers", "1"}, out, err);
        const int second = run_cli({sub, "--config", (dir / "a" / "manifest").string(), "--out", (dir / "b").string(),
                                    "--workers", "4"},
                                   out, err);
        bool identical = first == exit_ok && second == exit_ok;
        std::size_t files = 0;
        if (identical) {
            for (const auto& entry : fs::directory_iterator(dir / "a")) {
                if (entry.path().extension() != ".csv") continue;
                ++files;
                identical = identical && oracle::slurp(entry.path()) == oracle::slurp(dir / "b" / entry.path().filename());
            }
        }
        v.require(identical && files > 0, sub + ": rerun from manifest, exit codes " + std::to_string(first) + "/" +
                                              std::to_string(second) + ", " + std::to_string(files) +
                                              " CSV files byte-identical");
    }
    return v;
}

struct Criterion {
    int id;
    const char* title;
    double budget_seconds;
    std::function<Verdict()> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "convex-core identities", 10, convex_identities},
        {2, "summation by parts", 5, summation_by_parts},
        {3, "heat equation", 10, heat_equation},
        {4, "energy identity", 120, energy_identity},
        {5, "lambda-uniform a priori ratios", 300, apriori_uniformity},
        {6, "Cauchy behavior as lambda -> 0", 300, cauchy_in_lambda},
        {7, "Picard contraction", 300, picard_contraction},
        {8, "uniqueness and Lipschitz dependence", 600, uniqueness_and_dependence},
        {9, "determinism", 600, cli_determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v.require(false, std::string("exception: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ostringstream budget;
        budget.precision(3);
        budget << seconds << " s of " << c.budget_seconds << " s";
        v.require(seconds < c.budget_seconds, "runtime " + budget.str());
        std::cout << "criterion " << c.id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << c.title << '\n';
        for (const auto& line : v.lines) std::cout << "    " << line << '\n';
        std::cout.flush();
        if (!v.pass) ++failed;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criterion(s) failed") << '\n';
    return failed == 0 ? 0 : 1;
}
