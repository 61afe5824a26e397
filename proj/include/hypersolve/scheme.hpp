#pragma once

#include "hypersolve/errors.hpp"
#include "hypersolve/grid.hpp"
#include "hypersolve/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace hypersolve {

/// A u_t + sum_i B_i u_{x_i} = 0 with A symmetric positive definite and every
/// B_i symmetric.
class SymmetricSystem {
public:
    SymmetricSystem(SymMatrix A, std::vector<SymMatrix> B) : A_(std::move(A)), B_(std::move(B))
    {
        if (B_.empty() || static_cast<int>(B_.size()) > Grid::kMaxDim) {
            throw UsageError("SymmetricSystem: need between 1 and " + std::to_string(Grid::kMaxDim) +
                             " spatial matrices, got " + std::to_string(B_.size()));
        }
        if (A_.size() < 1) throw UsageError("SymmetricSystem: empty A");
        for (std::size_t i = 0; i < B_.size(); ++i) {
            if (B_[i].size() != A_.size()) {
                throw UsageError("SymmetricSystem: B" + std::to_string(i + 1) + " is " +
                                 std::to_string(B_[i].size()) + "x" + std::to_string(B_[i].size()) +
                                 ", A is " + std::to_string(A_.size()) + "x" + std::to_string(A_.size()));
            }
        }
        const auto eig = sym_eigen(A_, "A");
        if (!(eig.eigenvalues.minCoeff() > positive_definite_threshold(eig.eigenvalues))) {
            throw ConfigurationError("SymmetricSystem: A is not positive definite (smallest eigenvalue " +
                                     std::to_string(eig.eigenvalues.minCoeff()) + ")");
        }
    }

    [[nodiscard]] int n() const noexcept { return A_.size(); }
    [[nodiscard]] int m() const noexcept { return static_cast<int>(B_.size()); }
    [[nodiscard]] const SymMatrix& A() const noexcept { return A_; }
    [[nodiscard]] const SymMatrix& B(int axis) const { return B_.at(static_cast<std::size_t>(axis)); }
    [[nodiscard]] const std::vector<SymMatrix>& Bs() const noexcept { return B_; }

private:
    SymMatrix A_;
    std::vector<SymMatrix> B_;
};

/// One canonical transform per axis, in axis order.
inline std::vector<CanonicalTransform> canonical_transforms(const SymmetricSystem& system,
                                                            std::optional<double> eps0 = std::nullopt)
{
    std::vector<CanonicalTransform> out;
    out.reserve(static_cast<std::size_t>(system.m()));
    for (int a = 0; a < system.m(); ++a) out.push_back(canonical_transform(system.A(), system.B(a), eps0, a));
    return out;
}

// ---------------------------------------------------------------------------
// Boundary description

enum class Side { low = 0, high = 1 };

inline const char* to_string(Side s) { return s == Side::low ? "low" : "high"; }

inline std::string axis_name(int axis)
{
    static constexpr const char* names[] = {"x", "y", "z"};
    return axis >= 0 && axis < 3 ? names[axis] : "axis" + std::to_string(axis + 1);
}

/// Periodic continuation: the face reads the cell at the opposite end.
struct CauchyWrap {};

/// Phi u = 0 on the face, Phi given on physical variables.
struct Dissipative {
    Matrix Phi;
};

using FaceCondition = std::variant<CauchyWrap, Dissipative>;

struct BoundarySpec {
    /// faces[axis][side]
    std::vector<std::array<FaceCondition, 2>> faces;

    static BoundarySpec all_wrap(int m)
    {
        return BoundarySpec{std::vector<std::array<FaceCondition, 2>>(
            static_cast<std::size_t>(m), std::array<FaceCondition, 2>{CauchyWrap{}, CauchyWrap{}})};
    }

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(faces.size()); }

    [[nodiscard]] const FaceCondition& face(int axis, Side side) const
    {
        return faces.at(static_cast<std::size_t>(axis))[static_cast<std::size_t>(side)];
    }
    FaceCondition& face(int axis, Side side)
    {
        return faces.at(static_cast<std::size_t>(axis))[static_cast<std::size_t>(side)];
    }

    [[nodiscard]] bool is_wrap(int axis, Side side) const
    {
        return std::holds_alternative<CauchyWrap>(face(axis, side));
    }

    [[nodiscard]] bool all_wrap() const
    {
        for (int a = 0; a < dim(); ++a) {
            if (!is_wrap(a, Side::low) || !is_wrap(a, Side::high)) return false;
        }
        return true;
    }

    [[nodiscard]] bool all_dissipative() const
    {
        for (int a = 0; a < dim(); ++a) {
            if (is_wrap(a, Side::low) || is_wrap(a, Side::high)) return false;
        }
        return true;
    }
};

/// Number of boundary rows a dissipative face must carry: incoming waves are
/// those with positive speed at the low face and negative speed at the high face.
inline int incoming_count(const CanonicalTransform& ct, Side side)
{
    return side == Side::low ? ct.counts.plus : ct.counts.minus;
}

/// Every structural problem with `boundary`, as "axis/side: message" strings.
inline std::vector<std::string> boundary_problems(const SymmetricSystem& system,
                                                  const std::vector<CanonicalTransform>& transforms,
                                                  const BoundarySpec& boundary)
{
    std::vector<std::string> problems;
    if (boundary.dim() != system.m()) {
        problems.push_back("boundary describes " + std::to_string(boundary.dim()) + " axes, system has " +
                           std::to_string(system.m()));
        return problems;
    }
    for (int a = 0; a < system.m(); ++a) {
        if (boundary.is_wrap(a, Side::low) != boundary.is_wrap(a, Side::high)) {
            problems.push_back(axis_name(a) + ": periodic wrap must be used on both sides of an axis");
        }
        for (Side s : {Side::low, Side::high}) {
            const auto* d = std::get_if<Dissipative>(&boundary.face(a, s));
            if (d == nullptr) continue;
            const std::string where = axis_name(a) + "/" + to_string(s);
            if (d->Phi.cols() != system.n()) {
                problems.push_back(where + ": Phi has " + std::to_string(d->Phi.cols()) + " columns, expected " +
                                   std::to_string(system.n()));
            }
            const int expected = incoming_count(transforms[static_cast<std::size_t>(a)], s);
            if (d->Phi.rows() != expected) {
                problems.push_back(where + ": Phi has " + std::to_string(d->Phi.rows()) + " rows but the pencil has " +
                                   std::to_string(expected) + (s == Side::low ? " positive" : " negative") +
                                   " eigenvalues");
            }
        }
    }
    return problems;
}

// ---------------------------------------------------------------------------
// One-dimensional building blocks

enum class EdgePolicy {
    wrap,     ///< the missing edge value comes from the opposite end
    external, ///< left at zero; the caller fills it (boundary_face_solve)
};

/// Upwind face values W_0..W_N for cell values w_0..w_{N-1}: face f takes the
/// cell on its left for positive speed and the cell on its right for negative
/// speed. Zero speed gives zeros.
inline std::vector<double> large_values_1d(std::span<const double> w, int mu_sign, EdgePolicy edge)
{
    const std::size_t N = w.size();
    std::vector<double> W(N + 1, 0.0);
    if (N == 0 || mu_sign == 0) return W;
    if (mu_sign > 0) {
        for (std::size_t f = 1; f <= N; ++f) W[f] = w[f - 1];
        if (edge == EdgePolicy::wrap) W[0] = w[N - 1];
    } else {
        for (std::size_t f = 0; f < N; ++f) W[f] = w[f];
        if (edge == EdgePolicy::wrap) W[N] = w[0];
    }
    return W;
}

/// Tolerance on Courant numbers above 1.
inline constexpr double kCourantSlack = 1e-12;

namespace detail {

/// w - nu (W_hi - W_lo), evaluated so that the downwind term cancels first:
/// at |nu| = 1 the result is exactly the upwind value.
inline double upwind_update(double w, double nu, double W_lo, double W_hi)
{
    return nu >= 0.0 ? (w - nu * W_hi) + nu * W_lo : (w + nu * W_lo) - nu * W_hi;
}

} // namespace detail

/// One explicit upwind step for w_t + mu w_x = 0.
inline std::vector<double> step_1d(std::span<const double> w, double mu, double tau, double h,
                                   std::span<const double> W, bool enforce_courant = true, int axis = 0)
{
    if (W.size() != w.size() + 1) {
        throw UsageError("step_1d: expected " + std::to_string(w.size() + 1) + " large values, got " +
                         std::to_string(W.size()));
    }
    const double nu = mu * tau / h;
    if (enforce_courant && std::abs(nu) > 1.0 + kCourantSlack) {
        std::ostringstream msg;
        msg << "Courant number " << std::abs(nu) << " > 1 on axis " << axis_name(axis) << " for eigenvalue " << mu;
        throw StabilityError(msg.str());
    }
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = detail::upwind_update(w[i], nu, W[i], W[i + 1]);
    return out;
}

// ---------------------------------------------------------------------------
// Boundary faces

/// Solves the boundary system at one face once and reuses the result:
/// incoming invariants = coupling * (outgoing and zero-speed invariants).
class FaceSolver {
public:
    FaceSolver(Side side, const Matrix& Phi, const CanonicalTransform& ct, int axis = 0) : side_(side)
    {
        const int n = ct.size();
        const int sign_in = side == Side::low ? 1 : -1;
        for (int j = 0; j < n; ++j) (ct.sign(j) == sign_in ? incoming_ : fixed_).push_back(j);
        const std::string where = axis_name(axis) + "/" + to_string(side);
        if (Phi.cols() != n || Phi.rows() != static_cast<Eigen::Index>(incoming_.size())) {
            throw ConfigurationError(where + ": Phi is " + std::to_string(Phi.rows()) + "x" +
                                     std::to_string(Phi.cols()) + ", expected " + std::to_string(incoming_.size()) +
                                     "x" + std::to_string(n) + " (one row per incoming wave)");
        }
        const int r = static_cast<int>(incoming_.size());
        if (r == 0) return;
        const Matrix PT = Phi * ct.T;
        Matrix in_block(r, r);
        Matrix fixed_block(r, static_cast<Eigen::Index>(fixed_.size()));
        for (int c = 0; c < r; ++c) in_block.col(c) = PT.col(incoming_[c]);
        for (std::size_t c = 0; c < fixed_.size(); ++c) fixed_block.col(static_cast<Eigen::Index>(c)) = PT.col(fixed_[c]);

        Eigen::JacobiSVD<Matrix> svd(in_block);
        const auto& sv = svd.singularValues();
        const double cond = sv[r - 1] > 0.0 ? sv[0] / sv[r - 1] : std::numeric_limits<double>::infinity();
        if (!(cond <= 1e12)) {
            std::ostringstream msg;
            msg << where << ": boundary system for incoming invariants is singular (condition estimate " << cond
                << ")";
            throw IllPosedBoundaryError(msg.str());
        }
        coupling_ = -in_block.fullPivLu().solve(fixed_block);
    }

    [[nodiscard]] Side side() const noexcept { return side_; }

    /// Face invariants from the invariants of the adjacent interior cell.
    void apply(std::span<const double> v_interior, std::span<double> out) const
    {
        for (std::size_t j = 0; j < v_interior.size(); ++j) out[j] = v_interior[j];
        for (std::size_t r = 0; r < incoming_.size(); ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < fixed_.size(); ++c) {
                s += coupling_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * v_interior[fixed_[c]];
            }
            out[incoming_[r]] = s;
        }
    }

private:
    Side side_;
    std::vector<int> incoming_;
    std::vector<int> fixed_;
    Matrix coupling_;
};

/// Invariant vector on a dissipative face: outgoing and zero-speed components
/// copied from the adjacent cell, incoming components from (Phi T) V = 0.
inline Vector boundary_face_solve(int axis, Side side, const Matrix& Phi, const CanonicalTransform& transform,
                                  const Vector& v_interior)
{
    const FaceSolver solver(side, Phi, transform, axis);
    Vector out(v_interior.size());
    solver.apply(std::span<const double>(v_interior.data(), static_cast<std::size_t>(v_interior.size())),
                 std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
    return out;
}

// ---------------------------------------------------------------------------
// Time step selection

struct CflStep {
    double tau = 0.0;
    std::vector<double> courant_numbers; // per axis, tau * max|mu| / h
};

struct StepPlan {
    double tau = 0.0;
    int L = 0;
    double T_final = 0.0;
    std::vector<double> courant_numbers;
};

/// tau = safety / sum_i (1/tau_i) with tau_i = h / max|mu(axis i)|; axes whose
/// pencil vanishes impose no limit.
inline CflStep cfl_timestep(const std::vector<CanonicalTransform>& transforms, double h, double safety,
                            bool allow_over_cfl = false)
{
    if (!(safety > 0.0) || (!allow_over_cfl && safety > 1.0)) {
        throw UsageError("cfl_timestep: safety factor " + std::to_string(safety) + " outside (0, 1]");
    }
    if (!(h > 0.0)) throw UsageError("cfl_timestep: grid step must be positive");
    double inv_sum = 0.0;
    for (const auto& ct : transforms) {
        const double speed = ct.max_speed();
        if (speed > ct.eps0) inv_sum += speed / h;
    }
    if (inv_sum == 0.0) {
        throw DegenerateSystemError("cfl_timestep: every pencil is zero, the time step is unbounded");
    }
    CflStep out;
    out.tau = safety / inv_sum;
    for (const auto& ct : transforms) out.courant_numbers.push_back(out.tau * ct.max_speed() / h);
    return out;
}

inline CflStep cfl_timestep(const SymmetricSystem& system, double h, double safety, bool allow_over_cfl = false)
{
    return cfl_timestep(canonical_transforms(system), h, safety, allow_over_cfl);
}

/// Number of steps to reach T_final; the last step may be shorter than tau.
inline StepPlan make_step_plan(const CflStep& cfl, double T_final)
{
    if (!(T_final >= 0.0) || !std::isfinite(T_final)) {
        throw UsageError("T_final must be a finite nonnegative number");
    }
    StepPlan plan{cfl.tau, 0, T_final, cfl.courant_numbers};
    if (T_final == 0.0) return plan;
    auto L = static_cast<long long>(std::ceil(T_final / cfl.tau));
    while (L > 1 && static_cast<double>(L - 1) * cfl.tau >= T_final) --L;
    while (static_cast<double>(L) * cfl.tau < T_final) ++L;
    if (L > std::numeric_limits<int>::max()) throw UsageError("step plan: too many time steps");
    plan.L = static_cast<int>(L);
    return plan;
}

// ---------------------------------------------------------------------------
// The multidimensional scheme

struct StepOptions {
    bool enforce_cfl = true;
    bool check_finite = true;
};

/// Precomputed data for the split upwind scheme of one problem: per-axis
/// canonical transforms and boundary face solvers.
///
/// All axes read the same time level (simultaneous splitting):
///   u^{n+1} = u^n - tau/h * sum_i A^{-1} B_i (U_{i,right face} - U_{i,left face})
/// where U = T_i V and V are upwind face values of the invariants T_i^{-1} u.
/// Since A^{-1} B_i T_i = T_i diag(mu_i), the update is carried out in
/// invariant space and mapped back with T_i.
class Scheme {
public:
    Scheme(SymmetricSystem system, BoundarySpec boundary, std::optional<double> eps0 = std::nullopt)
        : system_(std::move(system)), boundary_(std::move(boundary)), transforms_(canonical_transforms(system_, eps0))
    {
        init();
    }

    Scheme(SymmetricSystem system, std::vector<CanonicalTransform> transforms, BoundarySpec boundary)
        : system_(std::move(system)), boundary_(std::move(boundary)), transforms_(std::move(transforms))
    {
        if (static_cast<int>(transforms_.size()) != system_.m()) {
            throw UsageError("Scheme: expected one canonical transform per axis");
        }
        init();
    }

    [[nodiscard]] const SymmetricSystem& system() const noexcept { return system_; }
    [[nodiscard]] const BoundarySpec& boundary() const noexcept { return boundary_; }
    [[nodiscard]] const std::vector<CanonicalTransform>& transforms() const noexcept { return transforms_; }

    /// Courant numbers tau * max|mu_i| / h for each axis.
    [[nodiscard]] std::vector<double> courant_numbers(double tau, double h) const
    {
        std::vector<double> out;
        for (const auto& ct : transforms_) out.push_back(tau * ct.max_speed() / h);
        return out;
    }

    /// Advances u by one step of length tau. `level` only labels diagnostics.
    [[nodiscard]] GridFunction step(const GridFunction& u, double tau, const StepOptions& opts = {},
                                    int level = 0) const
    {
        const Grid& g = u.grid();
        if (g.dim() != system_.m() || u.components() != system_.n()) {
            throw UsageError("step: grid function is " + std::to_string(g.dim()) + "-D with " +
                             std::to_string(u.components()) + " components, system is " +
                             std::to_string(system_.m()) + "-D with n=" + std::to_string(system_.n()));
        }
        const double h = g.h();
        if (opts.enforce_cfl) check_courant(tau, h);

        const int n = system_.n();
        const int N = g.cells_per_axis();
        const std::size_t Nz = static_cast<std::size_t>(N);
        std::vector<double> increment(u.values().size(), 0.0);
        GridFunction out(g, n);

        std::vector<double> v(Nz * n);        // invariants along a line, cell-major
        std::vector<double> V((Nz + 1) * n);  // face values, face-major
        std::vector<double> face_tmp(static_cast<std::size_t>(n));
        std::vector<double> delta(static_cast<std::size_t>(n));

        for (int axis = 0; axis < g.dim(); ++axis) {
            const auto& ct = transforms_[static_cast<std::size_t>(axis)];
            const std::size_t stride = g.stride(axis);
            std::vector<double> nu(static_cast<std::size_t>(n));
            std::vector<int> sgn(static_cast<std::size_t>(n));
            for (int j = 0; j < n; ++j) {
                sgn[j] = ct.sign(j);
                nu[j] = sgn[j] == 0 ? 0.0 : ct.mu[j] * tau / h;
            }
            const bool wrap = boundary_.is_wrap(axis, Side::low);
            const auto& solvers = face_solvers_[static_cast<std::size_t>(axis)];

            for (std::size_t base = 0; base < g.num_cells(); ++base) {
                if (g.multi_index(base)[axis] != 0) continue;

                for (std::size_t i = 0; i < Nz; ++i) {
                    const auto cu = u.cell(base + i * stride);
                    for (int r = 0; r < n; ++r) {
                        double s = 0.0;
                        for (int c = 0; c < n; ++c) s += ct.T_inv(r, c) * cu[c];
                        v[i * n + r] = s;
                    }
                }

                std::fill(V.begin(), V.end(), 0.0);
                for (int j = 0; j < n; ++j) {
                    if (sgn[j] > 0) {
                        for (std::size_t f = 1; f <= Nz; ++f) V[f * n + j] = v[(f - 1) * n + j];
                        if (wrap) V[j] = v[(Nz - 1) * n + j];
                    } else if (sgn[j] < 0) {
                        for (std::size_t f = 0; f < Nz; ++f) V[f * n + j] = v[f * n + j];
                        if (wrap) V[Nz * n + j] = v[j];
                    }
                }
                if (!wrap) {
                    solvers[0]->apply(std::span<const double>(v).first(n), face_tmp);
                    for (int j = 0; j < n; ++j) {
                        if (sgn[j] > 0) V[j] = face_tmp[j];
                    }
                    solvers[1]->apply(std::span<const double>(v).subspan((Nz - 1) * n, n), face_tmp);
                    for (int j = 0; j < n; ++j) {
                        if (sgn[j] < 0) V[Nz * n + j] = face_tmp[j];
                    }
                }

                for (std::size_t i = 0; i < Nz; ++i) {
                    const std::size_t cell = base + i * stride;
                    if (g.dim() == 1) {
                        // single axis: map the updated invariants straight back
                        for (int j = 0; j < n; ++j) {
                            delta[j] = detail::upwind_update(v[i * n + j], nu[j], V[i * n + j], V[(i + 1) * n + j]);
                        }
                        for (int r = 0; r < n; ++r) {
                            double s = 0.0;
                            for (int c = 0; c < n; ++c) s += ct.T(r, c) * delta[c];
                            out(cell, r) = s;
                        }
                    } else {
                        for (int j = 0; j < n; ++j) delta[j] = -nu[j] * (V[(i + 1) * n + j] - V[i * n + j]);
                        for (int r = 0; r < n; ++r) {
                            double s = 0.0;
                            for (int c = 0; c < n; ++c) s += ct.T(r, c) * delta[c];
                            increment[cell * n + r] += s;
                        }
                    }
                }
            }
        }

        if (g.dim() > 1) {
            auto dst = out.values();
            const auto src = u.values();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] + increment[i];
        }
        if (opts.check_finite && !out.all_finite()) {
            throw StabilityError("non-finite values after time level " + std::to_string(level + 1));
        }
        return out;
    }

private:
    void init()
    {
        auto problems = boundary_problems(system_, transforms_, boundary_);
        if (!problems.empty()) {
            std::string msg = "invalid boundary specification:";
            for (const auto& p : problems) msg += "\n  " + p;
            throw ConfigurationError(msg);
        }
        face_solvers_.resize(static_cast<std::size_t>(system_.m()));
        for (int a = 0; a < system_.m(); ++a) {
            for (Side s : {Side::low, Side::high}) {
                if (const auto* d = std::get_if<Dissipative>(&boundary_.face(a, s))) {
                    face_solvers_[static_cast<std::size_t>(a)][static_cast<std::size_t>(s)].emplace(
                        s, d->Phi, transforms_[static_cast<std::size_t>(a)], a);
                }
            }
        }
    }

    void check_courant(double tau, double h) const
    {
        double total = 0.0;
        for (std::size_t a = 0; a < transforms_.size(); ++a) {
            const auto& ct = transforms_[a];
            const double nu = tau * ct.max_speed() / h;
            if (nu > 1.0 + kCourantSlack) {
                std::ostringstream msg;
                msg << "Courant number " << nu << " > 1 on axis " << axis_name(static_cast<int>(a))
                    << " for eigenvalue " << (std::abs(ct.mu[0]) >= std::abs(ct.mu[ct.size() - 1]) ? ct.mu[0] : ct.mu[ct.size() - 1]);
                throw StabilityError(msg.str());
            }
            if (ct.max_speed() > ct.eps0) total += nu;
        }
        if (total > 1.0 + kCourantSlack) {
            std::ostringstream msg;
            msg << "combined stability condition violated: tau * sum(1/tau_i) = " << total << " > 1";
            throw StabilityError(msg.str());
        }
    }

    SymmetricSystem system_;
    BoundarySpec boundary_;
    std::vector<CanonicalTransform> transforms_;
    std::vector<std::array<std::optional<FaceSolver>, 2>> face_solvers_;
};

/// One step of the split scheme; builds a Scheme for the call.
inline GridFunction step_multi(const GridFunction& u, const SymmetricSystem& system,
                               const std::vector<CanonicalTransform>& transforms, const BoundarySpec& boundary,
                               double tau, double h, const StepOptions& opts = {})
{
    if (std::abs(h - u.grid().h()) > 1e-15) throw UsageError("step_multi: h does not match the grid");
    return Scheme(system, transforms, boundary).step(u, tau, opts);
}

// ---------------------------------------------------------------------------
// Time integration and the energy certificate

struct EnergyTrace {
    std::vector<double> times;
    std::vector<double> energies; // h^m * sum <A u, u> per level
};

struct SolveOptions {
    StepOptions step;
    /// Permit safety factors above 1; only meaningful with step.enforce_cfl off.
    bool allow_over_cfl = false;
};

struct SolveResult {
    SpaceTimeGridFunction solution;
    EnergyTrace energy;
    StepPlan plan;
};

/// Marches phi through the steps of `plan`.
inline SolveResult solve_with_plan(const Scheme& scheme, const GridFunction& phi, const StepPlan& plan,
                                   const StepOptions& opts = {})
{
    const Grid& g = phi.grid();
    if (g.dim() != scheme.system().m() || phi.components() != scheme.system().n()) {
        throw UsageError("solve: initial data does not match the system dimensions");
    }
    phi.ensure_finite("initial data");
    SolveResult res{SpaceTimeGridFunction{g, phi.components(), plan.tau, plan.T_final, {}}, {}, plan};
    res.solution.levels.reserve(static_cast<std::size_t>(plan.L) + 1);
    res.solution.levels.push_back(phi);
    res.energy.times.push_back(0.0);
    res.energy.energies.push_back(discrete_energy(phi, scheme.system().A()));
    for (int l = 0; l < plan.L; ++l) {
        const double t0 = std::min(l * plan.tau, plan.T_final);
        const double t1 = l + 1 == plan.L ? plan.T_final : std::min((l + 1) * plan.tau, plan.T_final);
        auto next = scheme.step(res.solution.levels.back(), t1 - t0, opts, l);
        res.energy.times.push_back(t1);
        res.energy.energies.push_back(discrete_energy(next, scheme.system().A()));
        res.solution.levels.push_back(std::move(next));
    }
    return res;
}

/// Marches phi to T_final with the CFL step for `safety`.
inline SolveResult solve(const Scheme& scheme, const GridFunction& phi, double T_final, double safety,
                         const SolveOptions& opts = {})
{
    const auto cfl = cfl_timestep(scheme.transforms(), phi.grid().h(), safety, opts.allow_over_cfl);
    return solve_with_plan(scheme, phi, make_step_plan(cfl, T_final), opts.step);
}

inline SolveResult solve(const SymmetricSystem& system, const BoundarySpec& boundary, const GridFunction& phi,
                         double T_final, double safety, const SolveOptions& opts = {})
{
    return solve(Scheme(system, boundary), phi, T_final, safety, opts);
}

inline constexpr double kEnergyTolerance = 1e-12;

struct EnergyCheck {
    bool pass = true;
    double max_relative_increase = 0.0; // max over l of (E_{l+1} - E_l) / E_l, floored at 0
    int worst_level = -1;               // level l+1 where the largest increase happened
};

/// Passes iff E_{l+1} <= E_l * (1 + 1e-12) for every l.
inline EnergyCheck energy_check(const EnergyTrace& trace)
{
    EnergyCheck out;
    for (std::size_t l = 0; l + 1 < trace.energies.size(); ++l) {
        const double e0 = trace.energies[l];
        const double e1 = trace.energies[l + 1];
        if (!std::isfinite(e1) || e1 > e0 * (1.0 + kEnergyTolerance)) out.pass = false;
        double rel = 0.0;
        if (e0 > 0.0) rel = (e1 - e0) / e0;
        else if (e1 > 0.0 || !std::isfinite(e1)) rel = std::numeric_limits<double>::infinity();
        if (!std::isfinite(e1)) rel = std::numeric_limits<double>::infinity();
        if (rel > out.max_relative_increase) {
            out.max_relative_increase = rel;
            out.worst_level = static_cast<int>(l + 1);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dissipativity

struct FaceCertificate {
    int axis = 0;
    Side side = Side::low;
    bool checked = false; // false for wrapped faces
    bool pass = true;
    Vector form_eigenvalues; // eigenvalues of Z^T B Z on ker(Phi)
    std::optional<Vector> witness;
};

struct DissipativityReport {
    std::vector<FaceCertificate> faces;

    [[nodiscard]] bool pass() const
    {
        for (const auto& f : faces) {
            if (!f.pass) return false;
        }
        return true;
    }
};

/// Orthonormal basis of ker(Phi) (n x (n - rank)).
inline Matrix kernel_basis(const Matrix& Phi, int n)
{
    if (Phi.rows() == 0) return Matrix::Identity(n, n);
    Eigen::JacobiSVD<Matrix> svd(Phi, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double tol = 1e-12 * std::max(1.0, sv.size() ? sv[0] : 0.0) * n;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] > tol) ++rank;
    }
    return svd.matrixV().rightCols(n - rank);
}

/// (B_i u, u) <= 0 on the low face and >= 0 on the high face for every u with
/// Phi u = 0. Checked through the eigenvalues of the form restricted to ker(Phi);
/// a failing face carries the most violating direction as witness.
inline FaceCertificate check_face_dissipativity(const SymMatrix& B, const Matrix& Phi, int axis, Side side)
{
    FaceCertificate cert;
    cert.axis = axis;
    cert.side = side;
    cert.checked = true;
    const int n = B.size();
    const Matrix Z = kernel_basis(Phi, n);
    if (Z.cols() == 0) {
        cert.form_eigenvalues = Vector(0);
        return cert;
    }
    const auto eig = sym_eigen(SymMatrix(Z.transpose() * B.matrix() * Z), "projected boundary form");
    cert.form_eigenvalues = eig.eigenvalues;
    const double eps = 1e-12 * (1.0 + B.max_abs());
    const Eigen::Index last = eig.eigenvalues.size() - 1;
    const bool bad = side == Side::low ? eig.eigenvalues[last] > eps : eig.eigenvalues[0] < -eps;
    if (bad) {
        cert.pass = false;
        Matrix w = Z * eig.eigenvectors.col(side == Side::low ? last : 0);
        detail::normalize_signs(w);
        cert.witness = Vector(w.col(0));
    }
    return cert;
}

inline DissipativityReport check_dissipativity(const SymmetricSystem& system, const BoundarySpec& boundary)
{
    if (boundary.dim() != system.m()) throw UsageError("check_dissipativity: boundary/system dimension mismatch");
    DissipativityReport report;
    for (int a = 0; a < system.m(); ++a) {
        for (Side s : {Side::low, Side::high}) {
            if (const auto* d = std::get_if<Dissipative>(&boundary.face(a, s))) {
                if (d->Phi.cols() != system.n()) {
                    throw ConfigurationError(axis_name(a) + "/" + to_string(s) + ": Phi has wrong column count");
                }
                report.faces.push_back(check_face_dissipativity(system.B(a), d->Phi, a, s));
            } else {
                FaceCertificate skipped;
                skipped.axis = a;
                skipped.side = s;
                report.faces.push_back(skipped);
            }
        }
    }
    return report;
}

} // namespace hypersolve
