#include "doctest.h"

#include "monospde/diagnostics.hpp"
#include "monospde/errors.hpp"
#include "oracles.hpp"

#include <cmath>
#include <sstream>

using namespace monospde;

namespace {

SolverConfig base_config() {
    SolverConfig cfg;
    cfg.cells = 16;
    cfg.lambda = 0.1;
    cfg.dt = 5e-5;
    cfg.horizon = 0.01;
    cfg.modes = 4;
    cfg.paths = 8;
    cfg.seed = 2;
    cfg.workers = 2;
    cfg.record_every = 10;
    return cfg;
}

std::string first_line(const CsvTable& t) {
    std::ostringstream os;
    t.write(os);
    return os.str().substr(0, os.str().find('\n'));
}

} // namespace

TEST_CASE("moment report of an additive run") {
    const SolverConfig cfg = base_config();
    const auto k = make_integrand(cfg.integrand, 1);
    const auto bundle = run_configuration(*k, cfg);
    const MomentReport m = moment_report(bundle);
    CHECK(m.paths == cfg.paths);
    CHECK_FALSE(m.point_estimate);
    CHECK(m.sup_u_sq.mean >= m.terminal_u_sq.mean);
    CHECK(m.sup_u_sq.mean >= bundle.paths[0].records.front().u_sq);
    CHECK(m.min_gap >= -1e-8);
    CHECK(m.max_resolvent_gap <= 1e-8);
    CHECK(m.w11_integral.mean > 0.0);
    CHECK(m.energy_integral.mean > 0.0);

    // Independent recomputation of E||u(T)||^2 from the terminal fields.
    std::vector<double> sq;
    for (const auto& p : bundle.paths) sq.push_back(inner(*p.terminal, *p.terminal));
    const auto ref = oracle::mean_se(sq);
    CHECK(m.terminal_u_sq.mean == doctest::Approx(ref.mean).epsilon(1e-12));
    CHECK(m.terminal_u_sq.standard_error == doctest::Approx(ref.se).epsilon(1e-10));
}

TEST_CASE("single path is a point estimate") {
    SolverConfig cfg = base_config();
    cfg.paths = 1;
    const auto k = make_integrand(cfg.integrand, 1);
    const MomentReport m = moment_report(run_configuration(*k, cfg));
    CHECK(m.point_estimate);
    CHECK(m.terminal_u_sq.standard_error == 0.0);
}

TEST_CASE("multiplicative configuration goes through Picard") {
    SolverConfig cfg = base_config();
    cfg.coefficient = "mult_nemytskii";
    cfg.horizon = 0.004;
    cfg.alpha = 4.0;
    const auto k = make_integrand(cfg.integrand, 1);
    PicardReport report;
    const auto bundle = run_configuration(*k, cfg, &report);
    CHECK(report.status == PicardStatus::converged);
    CHECK(report.alpha == 4.0);
    CHECK(bundle.paths.size() == cfg.paths);
    CHECK(std::abs(energy_residual(bundle, cfg.horizon, 4.0).residual.mean) < 0.05);
}

TEST_CASE("lambda sweep") {
    SolverConfig cfg = base_config();
    cfg.integrand = "quad";
    cfg.dt = 2e-5;
    const auto k = make_integrand("quad", 1);

    const auto one = lambda_sweep(*k, cfg, {0.1});
    REQUIRE(one.size() == 1);
    CHECK_FALSE(one[0].difference.has_value());

    // Noiseless quadratic flow of one sine mode: u_lambda(T) = f_lambda^N u0.
    cfg.coefficient = "none";
    cfg.paths = 1;
    const auto rows = lambda_sweep(*k, cfg, {0.4, 0.2, 0.1});
    REQUIRE(rows.size() == 3);
    const Grid grid = make_grid(cfg);
    const Field u0 = initial_field(cfg, grid);
    const double mu = oracle::stencil_eigenvalue(1, grid.spacing());
    auto decay = [&](double lambda) {
        return std::pow(oracle::quadratic_step_factor(lambda, cfg.dt, mu), static_cast<double>(cfg.steps()));
    };
    const double norm0 = std::sqrt(inner(u0, u0));
    for (std::size_t i = 0; i < 2; ++i) {
        REQUIRE(rows[i].difference.has_value());
        const double expected = std::abs(decay(rows[i].lambda) - decay(rows[i + 1].lambda)) * norm0;
        CHECK(*rows[i].difference == doctest::Approx(expected).epsilon(1e-9));
    }
    CHECK(rows[2].lambda == 0.1);
    CHECK(lambda_sweep_table(rows).row_count() == 3);

    cfg.dt = 1e-4;
    CHECK_THROWS_AS(lambda_sweep(*k, cfg, {1.0, 0.01}), ConfigError);
}

TEST_CASE("refinement study of the zero solution") {
    SolverConfig cfg = base_config();
    cfg.coefficient = "none";
    cfg.initial.shape = InitialShape::zero;
    cfg.paths = 1;
    const auto k = make_integrand(cfg.integrand, 1);
    const auto study = refinement_study(*k, cfg, 2);
    CHECK(study.rows.size() == 6);
    for (const auto& r : study.rows) {
        CHECK(r.residual.mean == 0.0);
        CHECK(r.terminal_u_sq.mean == 0.0);
    }
}

TEST_CASE("refinement study observes first order in time and second in space") {
    SolverConfig cfg = base_config();
    cfg.integrand = "quad";
    cfg.coefficient = "none";
    cfg.paths = 1;
    cfg.cells = 8;
    cfg.dt = 2e-4;
    cfg.horizon = 0.02;
    const auto k = make_integrand("quad", 1);
    const auto study = refinement_study(*k, cfg, 3);
    REQUIRE(study.temporal_order.has_value());
    REQUIRE(study.spatial_order.has_value());
    CHECK(*study.temporal_order == doctest::Approx(1.0).epsilon(0.15));
    CHECK(*study.spatial_order == doctest::Approx(2.0).epsilon(0.15));
    CHECK(first_line(refinement_table(study)) == "# schema=monospde.refinement/1");
}

TEST_CASE("refinement study guards") {
    SolverConfig cfg = base_config();
    const auto k = make_integrand(cfg.integrand, 1);
    CHECK_THROWS_AS(refinement_study(*k, cfg, kMaxHalvings + 1), ConfigError);
    cfg.dimension = 2;
    cfg.cells = 256;
    cfg.dt = 1e-8;
    auto k2 = make_integrand(cfg.integrand, 2);
    CHECK_THROWS_AS(refinement_study(*k2, cfg, 2), ResourceGuardError);
}

TEST_CASE("convex check of the catalog") {
    for (const char* name : {"quad", "pgrow:1.5", "pgrow:3", "abs_quad", "aniso_quad"}) {
        const auto k = make_integrand(name, 2);
        const auto r = convex_check(*k, {.samples = 500, .oracle_samples = 4});
        CAPTURE(name);
        CHECK(r.evaluations > 0);
        CHECK(r.min_value >= 0.0);
        CHECK(r.max_convexity_violation <= 1e-10);
        CHECK(r.min_fenchel_gap >= -1e-8);
        CHECK(r.max_selection_gap <= 1e-8);
        CHECK(r.max_duality_residual <= 1e-8);
        CHECK(r.max_lipschitz_ratio <= 1.0);
        CHECK(r.min_monotonicity >= -1e-10);
        CHECK(r.max_resolvent_expansion <= 1.0);
        CHECK(r.max_reconstruction_error <= 1e-12);
        CHECK(r.max_conjugate_mismatch <= 1e-6);
    }
}

TEST_CASE("table schemas") {
    CHECK(first_line(moment_table(MomentReport{})) == "# schema=monospde.moments/1");
    CHECK(first_line(apriori_table(AprioriEstimate{})) == "# schema=monospde.apriori/1");
    CHECK(first_line(picard_table(PicardReport{})) == "# schema=monospde.picard/1");
    CHECK(first_line(convex_check_table({})) == "# schema=monospde.convex_check/1");
    CHECK(first_line(path_table(PathResult{})) == "# schema=monospde.path/1");
}
