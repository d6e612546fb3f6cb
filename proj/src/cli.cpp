#include "monospde/cli.hpp"

#include "monospde/diagnostics.hpp"
#include "monospde/errors.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

namespace monospde {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(std::string_view key, std::string_view value) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ConfigError(std::string(key), "expected a number, got '" + std::string(value) + "'");
    }
    return v;
}

template <class T>
T parse_integer(std::string_view key, std::string_view value) {
    T v{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ConfigError(std::string(key), "expected a nonnegative integer, got '" + std::string(value) + "'");
    }
    return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError(std::string(key), "expected true or false, got '" + std::string(value) + "'");
}

std::vector<double> parse_list(std::string_view key, std::string_view value) {
    std::vector<double> out;
    while (!value.empty()) {
        const auto comma = value.find(',');
        out.push_back(parse_double(key, trim(value.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        value.remove_prefix(comma + 1);
    }
    if (out.empty()) throw ConfigError(std::string(key), "empty list");
    return out;
}

std::string shape_name(InitialShape s) {
    switch (s) {
    case InitialShape::zero: return "zero";
    case InitialShape::sine: return "sine";
    case InitialShape::tent: return "tent";
    }
    return "sine";
}

} // namespace

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
    SolverConfig& s = cfg.solver;
    const std::string k(key);
    if (key == "lambda") s.lambda = parse_double(key, value);
    else if (key == "dt") s.dt = parse_double(key, value);
    else if (key == "horizon" || key == "T") s.horizon = parse_double(key, value);
    else if (key == "alpha") cfg.alpha = parse_double(key, value);
    else if (key == "override_guard") s.override_guard = parse_bool(key, value);
    else if (key == "dimension") s.dimension = parse_integer<int>(key, value);
    else if (key == "cells") s.cells = parse_integer<int>(key, value);
    else if (key == "extent") s.extent = parse_double(key, value);
    else if (key == "integrand") s.integrand = std::string(value);
    else if (key == "coefficient") s.coefficient = std::string(value);
    else if (key == "decay") s.coefficient_params.decay = parse_double(key, value);
    else if (key == "amplitude") s.coefficient_params.amplitude = parse_double(key, value);
    else if (key == "c0") s.coefficient_params.c0 = parse_double(key, value);
    else if (key == "c1") s.coefficient_params.c1 = parse_double(key, value);
    else if (key == "clamp") s.coefficient_params.clamp = parse_double(key, value);
    else if (key == "initial") {
        if (value == "zero") s.initial.shape = InitialShape::zero;
        else if (value == "sine") s.initial.shape = InitialShape::sine;
        else if (value == "tent") s.initial.shape = InitialShape::tent;
        else throw ConfigError(k, "expected zero, sine or tent");
    } else if (key == "initial_amplitude") s.initial.amplitude = parse_double(key, value);
    else if (key == "initial_mode") s.initial.mode = parse_integer<int>(key, value);
    else if (key == "modes") s.modes = parse_integer<std::size_t>(key, value);
    else if (key == "paths") s.paths = parse_integer<std::size_t>(key, value);
    else if (key == "seed") s.seed = parse_integer<std::uint64_t>(key, value);
    else if (key == "record_every") s.record_every = parse_integer<std::size_t>(key, value);
    else if (key == "workers") s.workers = parse_integer<unsigned>(key, value);
    else if (key == "tolerance") s.tolerance = parse_double(key, value);
    else if (key == "max_iterations") s.max_iterations = parse_integer<std::size_t>(key, value);
    else if (key == "lambdas") cfg.lambdas = parse_list(key, value);
    else if (key == "halvings") cfg.halvings = parse_integer<int>(key, value);
    else if (key == "samples") cfg.convex_samples = parse_integer<std::size_t>(key, value);
    else if (key == "oracle_samples") cfg.oracle_samples = parse_integer<std::size_t>(key, value);
    else if (key == "dump_paths") cfg.dump_paths = parse_integer<std::size_t>(key, value);
    else throw ConfigError(k, "unknown configuration key");
}

void parse_config(RunConfig& cfg, std::istream& in) {
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::string_view view = line;
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(number), "expected 'key = value'");
        }
        apply_setting(cfg, trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
    }
}

std::string config_text(const RunConfig& cfg) {
    const SolverConfig& s = cfg.solver;
    std::ostringstream os;
    auto line = [&os](const char* key, const std::string& value) { os << key << " = " << value << '\n'; };
    line("lambda", format_double(s.lambda));
    line("dt", format_double(s.dt));
    line("horizon", format_double(s.horizon));
    if (cfg.alpha) line("alpha", format_double(*cfg.alpha));
    line("override_guard", s.override_guard ? "true" : "false");
    line("dimension", std::to_string(s.dimension));
    line("cells", std::to_string(s.cells));
    line("extent", format_double(s.extent));
    line("integrand", s.integrand);
    line("coefficient", s.coefficient);
    line("decay", format_double(s.coefficient_params.decay));
    line("amplitude", format_double(s.coefficient_params.amplitude));
    line("c0", format_double(s.coefficient_params.c0));
    line("c1", format_double(s.coefficient_params.c1));
    line("clamp", format_double(s.coefficient_params.clamp));
    line("initial", shape_name(s.initial.shape));
    line("initial_amplitude", format_double(s.initial.amplitude));
    line("initial_mode", std::to_string(s.initial.mode));
    line("modes", std::to_string(s.modes));
    line("paths", std::to_string(s.paths));
    line("seed", std::to_string(s.seed));
    line("record_every", std::to_string(s.record_every));
    line("workers", std::to_string(s.workers));
    line("tolerance", format_double(s.tolerance));
    line("max_iterations", std::to_string(s.max_iterations));
    std::string lambdas;
    for (std::size_t i = 0; i < cfg.lambdas.size(); ++i) {
        if (i > 0) lambdas += ", ";
        lambdas += format_double(cfg.lambdas[i]);
    }
    line("lambdas", lambdas);
    line("halvings", std::to_string(cfg.halvings));
    line("samples", std::to_string(cfg.convex_samples));
    line("oracle_samples", std::to_string(cfg.oracle_samples));
    line("dump_paths", std::to_string(cfg.dump_paths));
    return os.str();
}

// ---------------------------------------------------------------------------

namespace {

void write_bundle(const RunConfig& rc, const SolutionBundle& bundle) {
    const std::size_t dumps = std::min(rc.dump_paths, bundle.paths.size());
    for (std::size_t p = 0; p < dumps; ++p) {
        path_table(bundle.paths[p]).write(rc.out / ("path" + std::to_string(p) + ".csv"));
    }
    moment_table(moment_report(bundle)).write(rc.out / "moments.csv");
    energy_table(bundle).write(rc.out / "energy.csv");
    apriori_table(apriori_estimate(bundle)).write(rc.out / "apriori.csv");
}

void require_finished(const SolutionBundle& bundle) {
    for (const auto& p : bundle.paths) {
        if (p.aborted) {
            throw NumericalAbort("path " + std::to_string(p.path) + ": " + p.abort_reason, p.abort_step);
        }
    }
}

int simulate_additive(const RunConfig& rc, std::ostream& out) {
    const SolverConfig& cfg = rc.solver;
    const Grid grid = make_grid(cfg);
    const IntegrandPtr k = make_integrand(cfg.integrand, cfg.dimension);
    const DiffusionCoefficient G = make_coefficient(cfg, grid);
    if (G.kind() != NoiseKind::additive) {
        throw ConfigError("coefficient", "simulate-additive needs an additive coefficient, got '" + G.name() + "'");
    }
    const SolutionBundle bundle = solve_additive_paths(*k, initial_field(cfg, grid), cfg, G, make_driver(cfg));
    if (bundle.any_aborted()) {
        const std::size_t dumps = std::min(rc.dump_paths, bundle.paths.size());
        for (std::size_t p = 0; p < dumps; ++p) {
            path_table(bundle.paths[p]).write(rc.out / ("path" + std::to_string(p) + ".csv"));
        }
        require_finished(bundle);
    }
    write_bundle(rc, bundle);
    const AprioriEstimate a = apriori_estimate(bundle);
    out << "paths " << bundle.paths.size() << ", sup ratio " << format_double(a.sup_ratio) << ", viscous ratio "
        << format_double(a.viscous_ratio) << ", flux ratio " << format_double(a.flux_ratio) << '\n';
    return exit_ok;
}

int solve_multiplicative_cmd(const RunConfig& rc, std::ostream& out) {
    const SolverConfig& cfg = rc.solver;
    const Grid grid = make_grid(cfg);
    const IntegrandPtr k = make_integrand(cfg.integrand, cfg.dimension);
    const DiffusionCoefficient B = make_coefficient(cfg, grid);
    PicardOptions options;
    options.alpha = rc.alpha;
    const MultiplicativeSolution sol =
        solve_multiplicative(*k, {initial_field(cfg, grid)}, cfg, B, make_driver(cfg), options);
    picard_table(sol.report).write(rc.out / "picard.csv");
    write_bundle(rc, sol.bundle);
    out << "picard " << to_string(sol.report.status) << " after " << sol.report.iterations
        << " iterations, alpha " << format_double(sol.report.alpha) << '\n';
    if (sol.report.status != PicardStatus::converged) {
        throw NumericalAbort("picard iteration " + to_string(sol.report.status), sol.report.iterations);
    }
    return exit_ok;
}

int lambda_sweep_cmd(const RunConfig& rc, std::ostream& out) {
    SolverConfig cfg = rc.solver;
    cfg.alpha = rc.alpha.value_or(0.0);
    cfg.record_every = 0;
    const IntegrandPtr k = make_integrand(cfg.integrand, cfg.dimension);
    const auto rows = lambda_sweep(*k, cfg, rc.lambdas);
    lambda_sweep_table(rows).write(rc.out / "lambda_sweep.csv");
    out << "lambda sweep over " << rows.size() << " values\n";
    return exit_ok;
}

int refinement_cmd(const RunConfig& rc, std::ostream& out) {
    SolverConfig cfg = rc.solver;
    cfg.alpha = rc.alpha.value_or(0.0);
    const IntegrandPtr k = make_integrand(cfg.integrand, cfg.dimension);
    const RefinementStudy study = refinement_study(*k, cfg, rc.halvings);
    refinement_table(study).write(rc.out / "refinement.csv");
    out << "temporal order " << (study.temporal_order ? format_double(*study.temporal_order) : "n/a")
        << ", spatial order " << (study.spatial_order ? format_double(*study.spatial_order) : "n/a") << '\n';
    return exit_ok;
}

int convex_check_cmd(const RunConfig& rc, std::ostream& out) {
    const IntegrandPtr k = make_integrand(rc.solver.integrand, rc.solver.dimension);
    ConvexCheckOptions options;
    options.samples = rc.convex_samples;
    options.oracle_samples = rc.oracle_samples;
    options.seed = rc.solver.seed;
    const ConvexCheckReport r = convex_check(*k, options);
    convex_check_table({r}).write(rc.out / "convex_check.csv");
    const double tol = 1e-8;
    const bool ok = r.min_value >= -1e-10 && r.max_convexity_violation <= 1e-10 && r.min_fenchel_gap >= -tol &&
                    r.max_selection_gap <= tol && r.max_duality_residual <= tol &&
                    r.max_lipschitz_ratio <= 1.0 && r.min_monotonicity >= -1e-9 &&
                    r.max_resolvent_expansion <= 1.0 && r.max_reconstruction_error <= 1e-12 &&
                    r.max_conjugate_mismatch <= 1e-6;
    out << "integrand " << r.integrand << " (" << r.evaluations << " evaluations)\n"
        << "  min fenchel gap         " << format_double(r.min_fenchel_gap) << '\n'
        << "  max selection gap       " << format_double(r.max_selection_gap) << '\n'
        << "  max duality residual    " << format_double(r.max_duality_residual) << '\n'
        << "  max lambda*lipschitz    " << format_double(r.max_lipschitz_ratio) << '\n'
        << "  min monotonicity        " << format_double(r.min_monotonicity) << '\n'
        << "  max resolvent expansion " << format_double(r.max_resolvent_expansion) << '\n'
        << "  max reconstruction err  " << format_double(r.max_reconstruction_error) << '\n'
        << "  max conjugate mismatch  " << format_double(r.max_conjugate_mismatch) << '\n'
        << (ok ? "all identities within tolerance\n" : "identity tolerance violated\n");
    if (!ok) throw NumericalAbort("convex-check: identity tolerance violated", 0);
    return exit_ok;
}

void write_manifest(const RunConfig& rc, double seconds) {
    std::ofstream os(rc.out / "manifest");
    if (!os) throw std::runtime_error("cannot write manifest in " + rc.out.string());
    os << "# monospde " << kVersion << '\n'
       << "# subcommand = " << rc.subcommand << '\n'
       << "# wall_clock_seconds = " << format_double(seconds) << '\n'
       << config_text(rc);
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Solver and experiment harness for stochastic PDEs with monotone gradient nonlinearity",
                 "monospde"};
    app.set_version_flag("--version", std::string(kVersion));
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<unsigned> workers;
    app.add_option("--config", config_path, "configuration file (key = value lines)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--alpha", alpha, "weight rate for the Picard driver (skips calibration)");
    app.add_option("--workers", workers, "worker threads (0: machine parallelism)");
    const std::vector<std::pair<std::string, std::string>> commands{
        {"simulate-additive", "regularized equation with additive noise"},
        {"solve-multiplicative", "Picard iteration for multiplicative noise"},
        {"lambda-sweep", "solutions and estimates across regularization parameters"},
        {"refinement-study", "energy residual and moments under dt and h halving"},
        {"convex-check", "identity checks on the selected integrand"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();
    app.require_subcommand(1);

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("monospde");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    }

    RunConfig rc;
    rc.subcommand = app.get_subcommands().front()->get_name();
    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("config", "cannot read '" + config_path + "'");
            parse_config(rc, in);
        }
        if (!out_dir.empty()) rc.out = out_dir;
        if (seed) rc.solver.seed = *seed;
        if (alpha) rc.alpha = *alpha;
        if (workers) rc.solver.workers = *workers;

        if (rc.subcommand != "convex-check") {
            validate(rc.solver);
            check_stability_guard(rc.solver, make_grid(rc.solver));
        }
        make_integrand(rc.solver.integrand, rc.solver.dimension);
        if (rc.alpha && (!(*rc.alpha >= 0.0) || !std::isfinite(*rc.alpha))) {
            throw ConfigError("alpha", "must be nonnegative");
        }
        if (rc.subcommand == "refinement-study" && (rc.halvings < 0 || rc.halvings > kMaxHalvings)) {
            throw ConfigError("halvings", "must be between 0 and " + std::to_string(kMaxHalvings));
        }

        std::filesystem::create_directories(rc.out);
        const auto start = std::chrono::steady_clock::now();
        int code = exit_ok;
        try {
            if (rc.subcommand == "simulate-additive") code = simulate_additive(rc, out);
            else if (rc.subcommand == "solve-multiplicative") code = solve_multiplicative_cmd(rc, out);
            else if (rc.subcommand == "lambda-sweep") code = lambda_sweep_cmd(rc, out);
            else if (rc.subcommand == "refinement-study") code = refinement_cmd(rc, out);
            else code = convex_check_cmd(rc, out);
        } catch (...) {
            const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
            write_manifest(rc, elapsed.count());
            throw;
        }
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        write_manifest(rc, elapsed.count());
        return code;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const NumericalAbort& e) {
        err << "numerical abort at step " << e.step() << ": " << e.what() << '\n';
        return exit_numerical;
    } catch (const SolverFailure& e) {
        err << "numerical abort: " << e.what() << " (residual " << format_double(e.residual()) << ")\n";
        return exit_numerical;
    } catch (const ResourceGuardError& e) {
        err << "resource guard: " << e.what() << '\n';
        return exit_resource;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
}

} // namespace monospde
