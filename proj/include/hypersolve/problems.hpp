#pragma once

#include "hypersolve/errors.hpp"
#include "hypersolve/grid.hpp"
#include "hypersolve/linalg.hpp"
#include "hypersolve/scheme.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hypersolve {

using Field = std::function<Vector(std::span<const double>)>;
using SpaceTimeField = std::function<Vector(std::span<const double>, double)>;

// ---------------------------------------------------------------------------
// Built-in systems

/// Scalar transport u_t + sum_i c_i u_{x_i} = 0.
inline SymmetricSystem advection_system(const std::vector<double>& speeds)
{
    std::vector<SymMatrix> B;
    for (double c : speeds) B.push_back(SymMatrix{{c}});
    return SymmetricSystem(SymMatrix{{1.0}}, std::move(B));
}

/// Linear acoustics in m dimensions, variables (velocity_1..velocity_m, p).
/// The pressure row is scaled by 1/(rho0 c0^2) to make the system symmetric:
/// A = diag(rho0, ..., rho0, 1/(rho0 c0^2)), B_i couples velocity_i and p.
inline SymmetricSystem acoustics_system(double rho0, double c0, int m = 3)
{
    if (!(rho0 > 0.0) || !(c0 > 0.0)) {
        throw ConfigurationError("acoustics: rho0 and c0 must be positive (got rho0=" + std::to_string(rho0) +
                                 ", c0=" + std::to_string(c0) + ")");
    }
    if (m < 1 || m > 3) throw UsageError("acoustics: dimension must be 1, 2 or 3");
    const int n = m + 1;
    Vector diag = Vector::Constant(n, rho0);
    diag[m] = 1.0 / (rho0 * c0 * c0);
    std::vector<SymMatrix> B;
    for (int i = 0; i < m; ++i) {
        Matrix b = Matrix::Zero(n, n);
        b(i, m) = b(m, i) = 1.0;
        B.emplace_back(b);
    }
    return SymmetricSystem(SymMatrix::diagonal(diag), std::move(B));
}

/// Component order of the elasticity system.
enum ElasticVar { s11 = 0, s22, s33, s12, s13, s23, v1, v2, v3 };

/// Velocity-stress linear elasticity, n = 9, m = 3.
///
/// Variables (s11, s22, s33, s12, s13, s23, v1, v2, v3). The stress rows of the
/// compliance form are kept as written for the normal stresses and multiplied
/// by 2 for the shear stresses, which makes every B_i symmetric:
///   A_normal = I/(2 mu) - lam/(2 mu (3 lam + 2 mu)) * ones,  A_shear = I/mu,
///   A_velocity = rho * I,
/// and B_i has -1 at (stress s_ij, velocity v_j) and its transpose, for each j.
inline SymmetricSystem elasticity_system(double rho, double lam, double mu)
{
    if (!(rho > 0.0) || !(mu > 0.0) || !(3.0 * lam + 2.0 * mu > 0.0)) {
        throw ConfigurationError("elasticity: need rho > 0, mu > 0 and 3 lam + 2 mu > 0 (got rho=" +
                                 std::to_string(rho) + ", lam=" + std::to_string(lam) + ", mu=" + std::to_string(mu) +
                                 ")");
    }
    Matrix A = Matrix::Zero(9, 9);
    const double coupling = lam / (2.0 * mu * (3.0 * lam + 2.0 * mu));
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) A(i, j) = (i == j ? 1.0 / (2.0 * mu) : 0.0) - coupling;
    }
    for (int i = 3; i < 6; ++i) A(i, i) = 1.0 / mu;
    for (int i = 6; i < 9; ++i) A(i, i) = rho;

    // stress_index[i][j]: position of s_ij
    static constexpr int stress_index[3][3] = {{s11, s12, s13}, {s12, s22, s23}, {s13, s23, s33}};
    std::vector<SymMatrix> B;
    for (int axis = 0; axis < 3; ++axis) {
        Matrix b = Matrix::Zero(9, 9);
        for (int j = 0; j < 3; ++j) {
            const int s = stress_index[axis][j];
            b(s, v1 + j) = b(v1 + j, s) = -1.0;
        }
        B.emplace_back(b);
    }
    return SymmetricSystem(SymMatrix(A), std::move(B));
}

/// Boundary rows that select single components of u.
inline Matrix selector_rows(int n, const std::vector<int>& components)
{
    Matrix phi = Matrix::Zero(static_cast<Eigen::Index>(components.size()), n);
    for (std::size_t r = 0; r < components.size(); ++r) phi(static_cast<Eigen::Index>(r), components[r]) = 1.0;
    return phi;
}

/// p = 0 on every face of the acoustics system.
inline BoundarySpec pressure_release_walls(int m)
{
    BoundarySpec spec;
    const Matrix phi = selector_rows(m + 1, {m});
    for (int a = 0; a < m; ++a) spec.faces.push_back({Dissipative{phi}, Dissipative{phi}});
    return spec;
}

/// Zero traction on every face: s_i1 = s_i2 = s_i3 = 0 on the faces normal to axis i.
inline BoundarySpec traction_free_walls()
{
    static constexpr int stress_index[3][3] = {{s11, s12, s13}, {s12, s22, s23}, {s13, s23, s33}};
    BoundarySpec spec;
    for (int a = 0; a < 3; ++a) {
        const Matrix phi = selector_rows(9, {stress_index[a][0], stress_index[a][1], stress_index[a][2]});
        spec.faces.push_back({Dissipative{phi}, Dissipative{phi}});
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Domain of correctness

/// The space-time polyhedron t >= 0, x_i - lmax_i t >= 0, x_i - 1 - lmin_i t <= 0.
struct CorrectnessDomain {
    std::vector<double> lambda_min;
    std::vector<double> lambda_max;

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(lambda_min.size()); }

    [[nodiscard]] bool contains(std::span<const double> x, double t) const
    {
        if (t < 0.0) return false;
        for (int i = 0; i < dim(); ++i) {
            if (x[i] - lambda_max[i] * t < 0.0) return false;
            if (x[i] - 1.0 - lambda_min[i] * t > 0.0) return false;
        }
        return true;
    }

    /// True iff every axis has lambda_min < 0 < lambda_max, which makes the
    /// part of the domain with t > 0 bounded.
    [[nodiscard]] bool compact() const
    {
        for (int i = 0; i < dim(); ++i) {
            if (!(lambda_min[i] < 0.0 && 0.0 < lambda_max[i])) return false;
        }
        return true;
    }

    /// Largest t at which the domain still has points (infinite if not compact).
    [[nodiscard]] double apex_time() const
    {
        if (!compact()) return std::numeric_limits<double>::infinity();
        double t = std::numeric_limits<double>::infinity();
        for (int i = 0; i < dim(); ++i) t = std::min(t, 1.0 / (lambda_max[i] - lambda_min[i]));
        return t;
    }
};

inline CorrectnessDomain correctness_domain(const SymmetricSystem& system)
{
    CorrectnessDomain d;
    for (int a = 0; a < system.m(); ++a) {
        const Vector mu = pencil_eigenvalues(system.A(), system.B(a));
        d.lambda_min.push_back(mu.minCoeff());
        d.lambda_max.push_back(mu.maxCoeff());
    }
    return d;
}

/// Cells whose 2^m corners all lie in the domain at time t.
inline std::vector<bool> cells_in_domain(const Grid& grid, const CorrectnessDomain& domain, double t)
{
    if (t < 0.0) throw UsageError("cells_in_domain: t must be nonnegative");
    if (domain.dim() != grid.dim()) throw UsageError("cells_in_domain: grid/domain dimension mismatch");
    const int m = grid.dim();
    const double h = grid.h();
    std::vector<bool> mask(grid.num_cells());
    for (std::size_t c = 0; c < grid.num_cells(); ++c) {
        const auto idx = grid.multi_index(c);
        bool inside = true;
        for (unsigned corner = 0; corner < (1u << m) && inside; ++corner) {
            std::array<double, Grid::kMaxDim> x{};
            for (int a = 0; a < m; ++a) x[a] = (idx[a] + ((corner >> a) & 1u)) * h;
            inside = domain.contains(std::span<const double>(x.data(), static_cast<std::size_t>(m)), t);
        }
        mask[c] = inside;
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Problem instances

/// Expected numbers of distinct eigenvalues of A and of each axis pencil.
struct SpectraCardinalities {
    int n_A = 0;
    std::vector<int> n_axes;
};

struct ProblemInstance {
    SymmetricSystem system;
    BoundarySpec boundary;
    Field initial;
    double T_final = 0.0;
    std::optional<SpectraCardinalities> cardinalities;
    /// Exact solution when one is known (used as the analytic reference).
    SpaceTimeField exact;
    std::string name;

    [[nodiscard]] int n() const { return system.n(); }
    [[nodiscard]] int m() const { return system.m(); }
};

/// Checks a problem before any compute. Throws ConfigurationError on an
/// invalid boundary or a failed dissipativity certificate; returns warnings
/// (spectral cardinality mismatch, near eigenvalue collisions).
inline std::vector<std::string> validate_problem(const ProblemInstance& p)
{
    std::vector<std::string> warnings;
    const auto transforms = canonical_transforms(p.system);
    auto problems = boundary_problems(p.system, transforms, p.boundary);
    if (!problems.empty()) {
        std::string msg = "invalid boundary specification:";
        for (const auto& s : problems) msg += "\n  " + s;
        throw ConfigurationError(msg);
    }
    const auto report = check_dissipativity(p.system, p.boundary);
    for (const auto& f : report.faces) {
        if (!f.pass) {
            throw ConfigurationError(axis_name(f.axis) + "/" + to_string(f.side) +
                                     ": boundary condition is not dissipative");
        }
    }
    for (const auto& ct : transforms) {
        if (ct.near_collision()) {
            warnings.push_back("axis " + axis_name(ct.axis) + ": pencil eigenvalues within " +
                               std::to_string(ct.min_gap) + " of each other; eigenvectors may be unreliable");
        }
    }
    if (p.cardinalities) {
        const auto a_eig = sym_eigen(p.system.A(), "A");
        const int nA = count_distinct(a_eig.eigenvalues, default_eps0(a_eig.eigenvalues));
        if (nA != p.cardinalities->n_A) {
            warnings.push_back("A has " + std::to_string(nA) + " distinct eigenvalues, metadata says " +
                               std::to_string(p.cardinalities->n_A));
        }
        for (std::size_t a = 0; a < transforms.size() && a < p.cardinalities->n_axes.size(); ++a) {
            const int got = count_distinct(transforms[a].mu, transforms[a].eps0);
            if (got != p.cardinalities->n_axes[a]) {
                warnings.push_back("axis " + axis_name(static_cast<int>(a)) + " pencil has " + std::to_string(got) +
                                   " distinct eigenvalues, metadata says " +
                                   std::to_string(p.cardinalities->n_axes[a]));
            }
        }
        if (p.cardinalities->n_axes.size() != transforms.size()) {
            warnings.push_back("spectral metadata lists " + std::to_string(p.cardinalities->n_axes.size()) +
                               " axes, system has " + std::to_string(transforms.size()));
        }
    }
    return warnings;
}

/// Composite trapezoid rule for the integral of g over [0, x] with
/// ceil(x * per_unit) panels.
inline double trapezoid(const std::function<double(double)>& g, double x, int per_unit)
{
    if (x <= 0.0) return 0.0;
    const int panels = std::max(1, static_cast<int>(std::ceil(x * per_unit - 1e-9)));
    const double dx = x / panels;
    std::vector<double> terms(static_cast<std::size_t>(panels) + 1);
    for (int i = 0; i <= panels; ++i) terms[static_cast<std::size_t>(i)] = g(i * dx);
    terms.front() *= 0.5;
    terms.back() *= 0.5;
    return dx * pairwise_sum(terms);
}

using ScalarField = std::function<double(double, double, double)>;

/// Rewrites p_tt = c0^2 Laplace(p), p = phi and p_t = psi at t = 0, p = 0 on the
/// boundary, as 3-D acoustics with p = 0 walls. The initial x-velocity is
/// -(1/(rho0 c0^2)) * integral_0^x psi, computed by the trapezoid rule with
/// 2^(grid_level+3) panels per unit length.
inline ProblemInstance wave_to_acoustics(ScalarField phi, ScalarField psi, double rho0, double c0, int grid_level,
                                         double T_final)
{
    auto system = acoustics_system(rho0, c0, 3);
    const int per_unit = 1 << (grid_level + 3);
    const double scale = -1.0 / (rho0 * c0 * c0);
    Field initial = [phi, psi, per_unit, scale](std::span<const double> x) {
        const double X = x[0], Y = x[1], Z = x[2];
        const double integral = trapezoid([&](double xi) { return psi(xi, Y, Z); }, X, per_unit);
        Vector v(4);
        v << scale * integral, 0.0, 0.0, phi(X, Y, Z);
        if (!v.allFinite()) throw InputError("wave_to_acoustics: non-finite initial value");
        return v;
    };
    ProblemInstance p{std::move(system), pressure_release_walls(3), std::move(initial), T_final, std::nullopt, {},
                      "wave"};
    return p;
}

/// Standing mode p = sin(pi x) sin(pi y) sin(pi z) cos(sqrt(3) pi c0 t), started
/// from rest, with its exact acoustic solution attached.
inline ProblemInstance standing_mode_problem(double rho0, double c0, int grid_level, double T_final)
{
    using std::numbers::pi;
    ScalarField phi = [](double x, double y, double z) { return std::sin(pi * x) * std::sin(pi * y) * std::sin(pi * z); };
    ScalarField psi = [](double, double, double) { return 0.0; };
    auto p = wave_to_acoustics(phi, psi, rho0, c0, grid_level, T_final);
    const double omega = std::sqrt(3.0) * pi * c0;
    p.exact = [rho0, omega](std::span<const double> x, double t) {
        const double sx = std::sin(pi * x[0]), sy = std::sin(pi * x[1]), sz = std::sin(pi * x[2]);
        const double cx = std::cos(pi * x[0]), cy = std::cos(pi * x[1]), cz = std::cos(pi * x[2]);
        const double amp = -pi * std::sin(omega * t) / (rho0 * omega);
        Vector v(4);
        v << amp * cx * sy * sz, amp * sx * cy * sz, amp * sx * sy * cz, sx * sy * sz * std::cos(omega * t);
        return v;
    };
    p.name = "standing-mode";
    return p;
}

/// u_t + speed * u_x = 0 on [0,1], periodic, u(x,0) = sin(2 pi x).
inline ProblemInstance advection_sine_problem(double speed, double T_final)
{
    using std::numbers::pi;
    ProblemInstance p{advection_system({speed}), BoundarySpec::all_wrap(1),
                      [](std::span<const double> x) { return Vector::Constant(1, std::sin(2.0 * pi * x[0])); },
                      T_final, std::nullopt,
                      [speed](std::span<const double> x, double t) {
                          return Vector::Constant(1, std::sin(2.0 * pi * (x[0] - speed * t)));
                      },
                      "advection"};
    return p;
}

} // namespace hypersolve
