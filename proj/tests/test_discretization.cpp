#include "doctest.h"

#include "monospde/discretization.hpp"
#include "monospde/errors.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace monospde;

namespace {

Field random_field(const Grid& g, std::mt19937_64& gen) {
    std::normal_distribution<double> n(0.0, 1.0);
    Field u(g);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = n(gen);
    return u;
}

VectorField random_vector_field(const Grid& g, std::mt19937_64& gen) {
    std::normal_distribution<double> n(0.0, 1.0);
    VectorField v(g);
    for (double& x : v.values()) x = n(gen);
    return v;
}

std::vector<double> to_vector(const Field& u) { return {u.values().begin(), u.values().end()}; }

} // namespace

TEST_CASE("grid geometry") {
    Grid g1(1, 4);
    CHECK(g1.spacing() == 0.25);
    CHECK(g1.node_count() == 3);
    CHECK(g1.site_count() == 4);
    Grid g2(2, 8, 2.0);
    CHECK(g2.spacing() == 0.25);
    CHECK(g2.cell_volume() == 0.0625);
    CHECK(g2.node_count() == 49);
    CHECK(g2.site_count() == 64);
    CHECK(g2.node_coordinate(8, 0) == doctest::Approx(0.5));
    CHECK(g2.node_coordinate(8, 1) == doctest::Approx(0.5));
    CHECK_THROWS_AS(Grid(3, 8), ConfigError);
    CHECK_THROWS_AS(Grid(1, 1), ConfigError);
    CHECK_THROWS_AS(Grid(1, 8, -1.0), ConfigError);
}

TEST_CASE("gradient of a single bump") {
    Grid g(1, 4);
    Field u(g, {0.0, 1.0, 0.0});
    const VectorField d = gradient(u);
    const std::vector<double> expected{0.0, 4.0, -4.0, 0.0};
    for (std::size_t s = 0; s < 4; ++s) CHECK(d.site(s)[0] == expected[s]);
    const FieldNorms n = norms(u);
    CHECK(n.l1 == doctest::Approx(0.25));
    CHECK(n.w11 == doctest::Approx(2.0));
    CHECK(n.l2 == doctest::Approx(0.5));
}

TEST_CASE("divergence is the exact negative adjoint of the gradient") {
    std::mt19937_64 gen(1);
    for (int dim : {1, 2}) {
        for (int cells : {8, 16, 32}) {
            Grid g(dim, cells);
            for (int trial = 0; trial < 5; ++trial) {
                const Field phi = random_field(g, gen);
                const VectorField eta = random_vector_field(g, gen);
                const double lhs = inner(divergence(eta), phi);
                const double rhs = -inner(eta, gradient(phi));
                const double scale = std::sqrt(inner(eta, eta) * inner(gradient(phi), gradient(phi)));
                CHECK(std::abs(lhs - rhs) <= 1e-14 * scale);
            }
        }
    }
}

TEST_CASE("laplacian matches the hand-written stencil") {
    std::mt19937_64 gen(2);
    Grid g1(1, 16);
    const Field u1 = random_field(g1, gen);
    const auto ref1 = oracle::laplacian_1d(to_vector(u1), g1.spacing());
    const Field l1 = laplacian(u1);
    for (std::size_t i = 0; i < ref1.size(); ++i) CHECK(l1[i] == doctest::Approx(ref1[i]).epsilon(1e-12));

    Grid g2(2, 12);
    const Field u2 = random_field(g2, gen);
    const auto ref2 = oracle::laplacian_2d(to_vector(u2), 11, g2.spacing());
    const Field l2 = laplacian(u2);
    for (std::size_t i = 0; i < ref2.size(); ++i) CHECK(l2[i] == doctest::Approx(ref2[i]).epsilon(1e-12));
}

TEST_CASE("divergence of a constant vector field vanishes in the interior") {
    Grid g(1, 8);
    VectorField c(g);
    for (double& x : c.values()) x = 3.0;
    const Field d = divergence(c);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(std::abs(d[i]) < 1e-12);
}

TEST_CASE("sine modes are stencil eigenvectors") {
    for (int j : {1, 3, 7}) {
        Grid g(1, 32);
        const Field u = sample_field(g, [j](double x, double) { return std::sin(j * std::numbers::pi * x); });
        const Field l = laplacian(u);
        const double mu = oracle::stencil_eigenvalue(j, g.spacing());
        for (std::size_t i = 0; i < u.size(); ++i) CHECK(l[i] == doctest::Approx(-mu * u[i]).scale(1.0).epsilon(1e-10));
    }
}

TEST_CASE("implicit solve inverts I - sigma Laplacian") {
    std::mt19937_64 gen(3);
    for (int dim : {1, 2}) {
        Grid g(dim, dim == 1 ? 64 : 24);
        for (double sigma : {1e-4, 1e-2, 1.0}) {
            const Field f = random_field(g, gen);
            ImplicitDiffusionSolver solver(g, sigma);
            const Field w = solver.solve(f);
            Field residual = w - sigma * laplacian(w);
            residual -= f;
            const double rel = std::sqrt(inner(residual, residual) / inner(f, f));
            CAPTURE(dim);
            CAPTURE(sigma);
            CHECK(rel <= (dim == 1 ? 1e-12 : 1e-9));
        }
    }
}

TEST_CASE("implicit solve scales sine modes by the resolvent factor") {
    Grid g(1, 32);
    const double sigma = 0.01;
    const Field u = sample_field(g, [](double x, double) { return std::sin(2 * std::numbers::pi * x); });
    const Field w = laplacian_solve(u, sigma);
    const double factor = 1.0 / (1.0 + sigma * oracle::stencil_eigenvalue(2, g.spacing()));
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(w[i] == doctest::Approx(factor * u[i]).scale(1.0).epsilon(1e-12));
}

TEST_CASE("implicit solve preserves nonnegativity and contracts L2") {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int dim : {1, 2}) {
        Grid g(dim, 16);
        Field f(g);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = u01(gen);
        const Field w = laplacian_solve(f, 0.05);
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i] >= -1e-12);
        CHECK(inner(w, w) <= inner(f, f));
    }
}

TEST_CASE("stencil is second order on smooth functions") {
    auto error_at = [](int cells) {
        Grid g(2, cells);
        const double pi = std::numbers::pi;
        const Field u = sample_field(g, [pi](double x, double y) { return std::sin(pi * x) * std::sin(2 * pi * y); });
        Field l = laplacian(u);
        l += 5.0 * pi * pi * u;
        double m = 0.0;
        for (std::size_t i = 0; i < l.size(); ++i) m = std::max(m, std::abs(l[i]));
        return m;
    };
    const double e1 = error_at(16), e2 = error_at(32), e3 = error_at(64);
    CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.05));
    CHECK(std::log2(e2 / e3) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("field CSV round trip") {
    std::mt19937_64 gen(5);
    for (int dim : {1, 2}) {
        Grid g(dim, 8, 1.5);
        const Field u = random_field(g, gen);
        std::stringstream ss;
        write_field_csv(ss, u);
        const Field v = read_field_csv(ss);
        CHECK(v.grid() == g);
        for (std::size_t i = 0; i < u.size(); ++i) CHECK(v[i] == u[i]);
    }
}

TEST_CASE("field arithmetic") {
    Grid g(1, 4);
    Field a(g, {1.0, 2.0, 3.0});
    Field b(g, {0.5, 0.5, 0.5});
    const Field c = 2.0 * (a - b) + b;
    CHECK(c[0] == 1.5);
    CHECK(c[2] == 5.5);
    CHECK(inner(a, b) == doctest::Approx(0.25 * 3.0));
    a[1] = std::nan("");
    CHECK_FALSE(a.all_finite());
    CHECK(b.all_finite());
}
