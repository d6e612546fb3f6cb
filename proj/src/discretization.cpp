#include "monospde/discretization.hpp"

#include "monospde/csv.hpp"
#include "monospde/errors.hpp"
#include "monospde/summation.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace monospde {

namespace {

void require_same_grid(const Grid& a, const Grid& b, const char* where) {
    if (!(a == b)) throw std::invalid_argument(std::string(where) + ": grid mismatch");
}

std::size_t ipow(std::size_t base, int exp) {
    std::size_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

} // namespace

Grid::Grid(int dimension, int cells, double extent)
    : dimension_(dimension), cells_(cells), extent_(extent) {
    if (dimension != 1 && dimension != 2) throw ConfigError("dimension", "grid dimension must be 1 or 2");
    if (cells < 2) throw ConfigError("cells", "need at least 2 cells per axis");
    if (!(extent > 0.0) || !std::isfinite(extent)) throw ConfigError("extent", "domain extent must be positive");
    spacing_ = extent / cells;
    volume_ = std::pow(spacing_, dimension);
    node_count_ = ipow(static_cast<std::size_t>(cells - 1), dimension);
    site_count_ = ipow(static_cast<std::size_t>(cells), dimension);
}

double Grid::node_coordinate(std::size_t index, int axis) const {
    const auto m = static_cast<std::size_t>(cells_ - 1);
    const std::size_t i = (axis == 0) ? index % m : index / m;
    return static_cast<double>(i + 1) * spacing_;
}

// ---------------------------------------------------------------------------

Field::Field(const Grid& grid) : grid_(grid), values_(grid.node_count(), 0.0) {}

Field::Field(const Grid& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.node_count()) {
        throw std::invalid_argument("Field: expected " + std::to_string(grid_.node_count()) +
                                    " values, got " + std::to_string(values_.size()));
    }
}

Field& Field::operator+=(const Field& other) {
    require_same_grid(grid_, other.grid_, "Field::operator+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

Field& Field::operator-=(const Field& other) {
    require_same_grid(grid_, other.grid_, "Field::operator-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
}

Field& Field::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

bool Field::all_finite() const noexcept {
    for (double v : values_) if (!std::isfinite(v)) return false;
    return true;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }

VectorField::VectorField(const Grid& grid)
    : grid_(grid), values_(grid.site_count() * static_cast<std::size_t>(grid.dimension()), 0.0) {}

VectorField::VectorField(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.site_count() * static_cast<std::size_t>(grid_.dimension())) {
        throw std::invalid_argument("VectorField: size does not match the gradient lattice");
    }
}

bool VectorField::all_finite() const noexcept {
    for (double v : values_) if (!std::isfinite(v)) return false;
    return true;
}

Field sample_field(const Grid& grid, const std::function<double(double, double)>& f) {
    Field u(grid);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double x = grid.node_coordinate(i, 0);
        const double y = grid.dimension() == 2 ? grid.node_coordinate(i, 1) : 0.0;
        u[i] = f(x, y);
    }
    return u;
}

// ---------------------------------------------------------------------------
// Operators

void gradient_into(const Field& u, VectorField& out) {
    const Grid& g = u.grid();
    require_same_grid(g, out.grid(), "gradient");
    const double inv_h = 1.0 / g.spacing();
    const int c = g.cells();
    auto vals = out.values();
    if (g.dimension() == 1) {
        // Site i sits between full nodes i and i+1; full node I is interior node I-1.
        for (int i = 0; i < c; ++i) {
            const double left = (i == 0) ? 0.0 : u[static_cast<std::size_t>(i - 1)];
            const double right = (i == c - 1) ? 0.0 : u[static_cast<std::size_t>(i)];
            vals[static_cast<std::size_t>(i)] = (right - left) * inv_h;
        }
        return;
    }
    const int m = c - 1;
    auto at = [&](int I, int J) -> double {
        if (I <= 0 || J <= 0 || I >= c || J >= c) return 0.0;
        return u[static_cast<std::size_t>((J - 1) * m + (I - 1))];
    };
    for (int j = 0; j < c; ++j) {
        for (int i = 0; i < c; ++i) {
            const double here = at(i, j);
            const std::size_t s = static_cast<std::size_t>(j * c + i) * 2;
            vals[s] = (at(i + 1, j) - here) * inv_h;
            vals[s + 1] = (at(i, j + 1) - here) * inv_h;
        }
    }
}

VectorField gradient(const Field& u) {
    VectorField out(u.grid());
    gradient_into(u, out);
    return out;
}

void divergence_into(const VectorField& eta, Field& out) {
    const Grid& g = eta.grid();
    require_same_grid(g, out.grid(), "divergence");
    const double inv_h = 1.0 / g.spacing();
    const int c = g.cells();
    auto e = eta.values();
    if (g.dimension() == 1) {
        // Interior node I (full index) receives (eta_I - eta_{I-1}) / h.
        for (int I = 1; I < c; ++I) {
            out[static_cast<std::size_t>(I - 1)] =
                (e[static_cast<std::size_t>(I)] - e[static_cast<std::size_t>(I - 1)]) * inv_h;
        }
        return;
    }
    const int m = c - 1;
    for (int J = 1; J < c; ++J) {
        for (int I = 1; I < c; ++I) {
            const auto s = static_cast<std::size_t>(J * c + I) * 2;
            const auto sw = static_cast<std::size_t>(J * c + I - 1) * 2;
            const auto ss = static_cast<std::size_t>((J - 1) * c + I) * 2;
            out[static_cast<std::size_t>((J - 1) * m + (I - 1))] =
                ((e[s] - e[sw]) + (e[s + 1] - e[ss + 1])) * inv_h;
        }
    }
}

Field divergence(const VectorField& eta) {
    Field out(eta.grid());
    divergence_into(eta, out);
    return out;
}

Field laplacian(const Field& u) { return divergence(gradient(u)); }

double inner(const Field& a, const Field& b) {
    require_same_grid(a.grid(), b.grid(), "inner");
    CompensatedSum s;
    for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
    return s.value() * a.grid().cell_volume();
}

double inner(const VectorField& a, const VectorField& b) {
    require_same_grid(a.grid(), b.grid(), "inner");
    CompensatedSum s;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) s.add(av[i] * bv[i]);
    return s.value() * a.grid().cell_volume();
}

// ---------------------------------------------------------------------------

ImplicitDiffusionSolver::ImplicitDiffusionSolver(const Grid& grid, double sigma, double cg_tolerance)
    : grid_(grid), sigma_(sigma), cg_tolerance_(cg_tolerance) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be nonnegative");
    if (grid.dimension() == 1) {
        const std::size_t n = grid.node_count();
        const double off = -sigma / (grid.spacing() * grid.spacing());
        const double diag = 1.0 - 2.0 * off;
        c_prime_.resize(n);
        inv_pivot_.resize(n);
        double prev_c = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double pivot = diag - (i ? off * prev_c : 0.0);
            inv_pivot_[i] = 1.0 / pivot;
            c_prime_[i] = off * inv_pivot_[i];
            prev_c = c_prime_[i];
        }
    } else {
        r_.resize(grid.node_count());
        p_.resize(grid.node_count());
        ap_.resize(grid.node_count());
    }
}

void ImplicitDiffusionSolver::solve_in_place(Field& f) const {
    require_same_grid(grid_, f.grid(), "ImplicitDiffusionSolver");
    if (sigma_ == 0.0) return;
    const double h2 = grid_.spacing() * grid_.spacing();
    const std::size_t n = f.size();
    if (grid_.dimension() == 1) {
        const double off = -sigma_ / h2;
        f[0] *= inv_pivot_[0];
        for (std::size_t i = 1; i < n; ++i) f[i] = (f[i] - off * f[i - 1]) * inv_pivot_[i];
        for (std::size_t i = n - 1; i-- > 0;) f[i] -= c_prime_[i] * f[i + 1];
        last_iterations_ = 0;
        return;
    }

    const int m = grid_.cells() - 1;
    const double coef = sigma_ / h2;
    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        for (int J = 0; J < m; ++J) {
            for (int I = 0; I < m; ++I) {
                const auto k = static_cast<std::size_t>(J * m + I);
                double nb = 0.0;
                if (I > 0) nb += x[k - 1];
                if (I < m - 1) nb += x[k + 1];
                if (J > 0) nb += x[k - static_cast<std::size_t>(m)];
                if (J < m - 1) nb += x[k + static_cast<std::size_t>(m)];
                y[k] = x[k] + coef * (4.0 * x[k] - nb);
            }
        }
    };

    std::vector<double> x(f.values().begin(), f.values().end());
    double bnorm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) bnorm2 += f[i] * f[i];
    if (bnorm2 == 0.0) { last_iterations_ = 0; return; }

    apply(x, ap_);
    double rr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        r_[i] = f[i] - ap_[i];
        p_[i] = r_[i];
        rr += r_[i] * r_[i];
    }
    const double target = cg_tolerance_ * cg_tolerance_ * bnorm2;
    const int max_iter = static_cast<int>(10 * n);
    int it = 0;
    while (rr > target) {
        if (++it > max_iter) {
            throw SolverFailure("implicit diffusion CG: iteration limit", x, std::sqrt(rr / bnorm2));
        }
        apply(p_, ap_);
        double pap = 0.0;
        for (std::size_t i = 0; i < n; ++i) pap += p_[i] * ap_[i];
        if (!(pap > 0.0)) throw SolverFailure("implicit diffusion CG: breakdown", x, std::sqrt(rr / bnorm2));
        const double a = rr / pap;
        double rr_new = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += a * p_[i];
            r_[i] -= a * ap_[i];
            rr_new += r_[i] * r_[i];
        }
        const double beta = rr_new / rr;
        for (std::size_t i = 0; i < n; ++i) p_[i] = r_[i] + beta * p_[i];
        rr = rr_new;
    }
    last_iterations_ = it;
    std::copy(x.begin(), x.end(), f.values().begin());
}

Field ImplicitDiffusionSolver::solve(const Field& f) const {
    Field w = f;
    solve_in_place(w);
    return w;
}

Field laplacian_solve(const Field& f, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("laplacian_solve: sigma must be positive");
    return ImplicitDiffusionSolver(f.grid(), sigma).solve(f);
}

FieldNorms norms(const Field& u) {
    const double w = u.grid().cell_volume();
    CompensatedSum l1, l2;
    for (std::size_t i = 0; i < u.size(); ++i) {
        l1.add(std::abs(u[i]));
        l2.add(u[i] * u[i]);
    }
    const VectorNorms g = norms(gradient(u));
    return {l1.value() * w, std::sqrt(l2.value() * w), g.l1};
}

VectorNorms norms(const VectorField& eta) {
    const double w = eta.grid().cell_volume();
    CompensatedSum l1, l2;
    for (std::size_t s = 0; s < eta.site_count(); ++s) {
        const auto v = eta.site(s);
        double sq = 0.0;
        for (double c : v) sq += c * c;
        l1.add(std::sqrt(sq));
        l2.add(sq);
    }
    return {l1.value() * w, std::sqrt(l2.value() * w)};
}

// ---------------------------------------------------------------------------
// CSV

void write_field_csv(std::ostream& os, const Field& u) {
    const Grid& g = u.grid();
    os << "# grid n=" << g.dimension() << " cells=" << g.cells() << " h=" << format_double(g.spacing())
       << '\n';
    const auto row = static_cast<std::size_t>(g.interior_per_axis());
    for (std::size_t i = 0; i < u.size(); ++i) {
        os << format_double(u[i]);
        os << (((i + 1) % row == 0) ? '\n' : ',');
    }
}

Field read_field_csv(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw std::runtime_error("field csv: empty input");
    int n = 0, cells = 0;
    double h = 0.0;
    {
        std::istringstream hs(header);
        std::string hash, tag, tn, tc, th;
        hs >> hash >> tag >> tn >> tc >> th;
        if (hash != "#" || tag != "grid" || !tn.starts_with("n=") || !tc.starts_with("cells=") ||
            !th.starts_with("h=")) {
            throw std::runtime_error("field csv: malformed header '" + header + "'");
        }
        n = std::stoi(tn.substr(2));
        cells = std::stoi(tc.substr(6));
        const std::string hv = th.substr(2);
        auto [ptr, ec] = std::from_chars(hv.data(), hv.data() + hv.size(), h);
        if (ec != std::errc{}) throw std::runtime_error("field csv: bad spacing");
    }
    Grid grid(n, cells, h * cells);
    std::vector<double> values;
    values.reserve(grid.node_count());
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::size_t start = 0;
        while (start <= line.size()) {
            const std::size_t end = std::min(line.find(',', start), line.size());
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(line.data() + start, line.data() + end, v);
            if (ec != std::errc{}) throw std::runtime_error("field csv: bad number in '" + line + "'");
            values.push_back(v);
            start = end + 1;
        }
    }
    return Field(grid, std::move(values));
}

} // namespace monospde
