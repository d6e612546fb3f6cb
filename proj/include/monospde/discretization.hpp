#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace monospde {

/// Uniform grid on the square [0, L]^n, n in {1, 2}, with homogeneous
/// Dirichlet boundary. Unknowns live on the (c-1)^n interior nodes; discrete
/// gradients live on c^n sites, site (i, j) carrying the forward differences
/// out of node (i, j).
class Grid {
public:
    Grid(int dimension, int cells, double extent = 1.0);

    int dimension() const noexcept { return dimension_; }
    int cells() const noexcept { return cells_; }
    double extent() const noexcept { return extent_; }
    double spacing() const noexcept { return spacing_; }
    /// Quadrature weight h^n of a node or a site.
    double cell_volume() const noexcept { return volume_; }

    std::size_t node_count() const noexcept { return node_count_; }
    std::size_t site_count() const noexcept { return site_count_; }
    int interior_per_axis() const noexcept { return cells_ - 1; }

    /// Coordinate of interior node `index` along `axis`.
    double node_coordinate(std::size_t index, int axis) const;

    bool operator==(const Grid&) const = default;

private:
    int dimension_;
    int cells_;
    double extent_;
    double spacing_;
    double volume_;
    std::size_t node_count_;
    std::size_t site_count_;
};

/// Scalar field on the interior nodes, row-major (x fastest).
class Field {
public:
    explicit Field(const Grid& grid);
    Field(const Grid& grid, std::vector<double> values);

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    Field& operator+=(const Field& other);
    Field& operator-=(const Field& other);
    Field& operator*=(double s);
    bool all_finite() const noexcept;

private:
    Grid grid_;
    std::vector<double> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);

/// Vector field on gradient sites; `n` components per site, interleaved.
class VectorField {
public:
    explicit VectorField(const Grid& grid);
    VectorField(const Grid& grid, std::vector<double> values);

    const Grid& grid() const noexcept { return grid_; }
    std::size_t site_count() const noexcept { return grid_.site_count(); }
    int components() const noexcept { return grid_.dimension(); }
    std::span<double> site(std::size_t s) noexcept {
        return {values_.data() + s * static_cast<std::size_t>(components()),
                static_cast<std::size_t>(components())};
    }
    std::span<const double> site(std::size_t s) const noexcept {
        return {values_.data() + s * static_cast<std::size_t>(components()),
                static_cast<std::size_t>(components())};
    }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    bool all_finite() const noexcept;

private:
    Grid grid_;
    std::vector<double> values_;
};

/// Samples f at interior nodes; f receives (x, y), y = 0 in 1D.
Field sample_field(const Grid& grid, const std::function<double(double, double)>& f);

/// Forward differences with ghost zeros.
VectorField gradient(const Field& u);
void gradient_into(const Field& u, VectorField& out);

/// Negative adjoint of `gradient` in the h^n-weighted inner products:
/// <divergence(eta), phi> = -<eta, gradient(phi)> for every phi.
Field divergence(const VectorField& eta);
void divergence_into(const VectorField& eta, Field& out);

/// divergence(gradient(u)): the (2n+1)-point Dirichlet stencil.
Field laplacian(const Field& u);

/// h^n-weighted inner products, compensated summation.
double inner(const Field& a, const Field& b);
double inner(const VectorField& a, const VectorField& b);

/// Solves (I - sigma * Laplacian) w = f. Direct tridiagonal elimination in 1D;
/// conjugate gradients to relative residual 1e-10 in 2D. The operator is SPD,
/// so a CG breakdown is reported as SolverFailure.
class ImplicitDiffusionSolver {
public:
    ImplicitDiffusionSolver(const Grid& grid, double sigma, double cg_tolerance = 1e-10);

    double sigma() const noexcept { return sigma_; }
    Field solve(const Field& f) const;
    void solve_in_place(Field& f) const;
    /// Iterations used by the last 2D solve (0 in 1D).
    int last_iterations() const noexcept { return last_iterations_; }

private:
    Grid grid_;
    double sigma_;
    double cg_tolerance_;
    // Thomas factors for the constant-coefficient 1D system.
    std::vector<double> c_prime_;
    std::vector<double> inv_pivot_;
    mutable int last_iterations_ = 0;
    mutable std::vector<double> r_, p_, ap_;
};

Field laplacian_solve(const Field& f, double sigma);

struct FieldNorms {
    double l1 = 0.0;
    double l2 = 0.0;
    /// ||grad u||_{L^1}, Euclidean length per site.
    double w11 = 0.0;
};

struct VectorNorms {
    double l1 = 0.0;
    double l2 = 0.0;
};

FieldNorms norms(const Field& u);
VectorNorms norms(const VectorField& eta);

/// Flat CSV: header `# grid n=<n> cells=<c> h=<h>`, then one line per grid
/// row (a single line in 1D), values comma-separated, x fastest.
void write_field_csv(std::ostream& os, const Field& u);
Field read_field_csv(std::istream& is);

} // namespace monospde
