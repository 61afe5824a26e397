#pragma once

#include "hypersolve/errors.hpp"
#include "hypersolve/grid.hpp"
#include "hypersolve/interpolation.hpp"
#include "hypersolve/problems.hpp"
#include "hypersolve/scheme.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hypersolve {

// ---------------------------------------------------------------------------
// Distances between solutions

/// Continuous-norm distances are evaluated with the midpoint rule at this many
/// quadrature points per grid cell and axis.
inline constexpr int kQuadratureRefinement = 4;

namespace detail {

/// Distance at one time between two space fields given as out-writing callables.
template <class F, class G>
double field_distance(const F& a, const G& b, int m, int n, int resolution, NormTag tag)
{
    std::vector<double> va(static_cast<std::size_t>(n)), vb(static_cast<std::size_t>(n));
    auto diff = [&](std::span<const double> x, std::span<double> out) {
        a(x, std::span<double>(va));
        b(x, std::span<double>(vb));
        for (int j = 0; j < n; ++j) out[j] = va[j] - vb[j];
    };
    if (tag == NormTag::sup) {
        // sup over the quadrature lattice
        std::size_t total = 1;
        for (int i = 0; i < m; ++i) total *= static_cast<std::size_t>(resolution);
        std::vector<double> d(static_cast<std::size_t>(n));
        std::array<double, Grid::kMaxDim> x{};
        double best = 0.0;
        for (std::size_t p = 0; p < total; ++p) {
            std::size_t rest = p;
            for (int i = 0; i < m; ++i) {
                x[i] = (static_cast<double>(rest % resolution) + 0.5) / resolution;
                rest /= resolution;
            }
            diff(std::span<const double>(x.data(), static_cast<std::size_t>(m)), std::span<double>(d));
            double s = 0.0;
            for (double v : d) s += v * v;
            best = std::max(best, std::sqrt(s));
        }
        return best;
    }
    return quadrature_l2(diff, m, n, resolution);
}

inline void check_distance_norm(NormTag tag)
{
    if (tag != NormTag::sL2 && tag != NormTag::sup) {
        throw UsageError("harness: error norms are sL2 or sup, not " + to_string(tag));
    }
}

} // namespace detail

/// max over the time levels of `u` of the continuous distance between the
/// space interpolant of u and `exact` at that time.
inline double distance_to_exact(const SpaceTimeGridFunction& u, const SpaceTimeField& exact, NormTag tag)
{
    detail::check_distance_norm(tag);
    const int m = u.grid.dim();
    const int n = u.n;
    const int res = kQuadratureRefinement * u.grid.cells_per_axis();
    double worst = 0.0;
    for (int l = 0; l <= u.steps(); ++l) {
        const double t = u.time_of(l);
        const Interpolant ip(u.levels[static_cast<std::size_t>(l)]);
        auto a = [&](std::span<const double> x, std::span<double> out) { ip.evaluate(x, out); };
        auto b = [&](std::span<const double> x, std::span<double> out) {
            const Vector v = exact(x, t);
            for (int j = 0; j < n; ++j) out[j] = v[j];
        };
        worst = std::max(worst, detail::field_distance(a, b, m, n, res, tag));
    }
    return worst;
}

/// The exact solution sampled on the space-time grid of `like`.
inline SpaceTimeGridFunction discretize_exact(const SpaceTimeGridFunction& like, const SpaceTimeField& exact)
{
    SpaceTimeGridFunction out{like.grid, like.n, like.tau, like.T_final, {}};
    for (int l = 0; l <= like.steps(); ++l) {
        const double t = like.time_of(l);
        out.levels.push_back(restrict_to_grid([&](std::span<const double> x) { return exact(x, t); }, like.grid,
                                              like.n));
    }
    return out;
}

/// Distance between two solutions of the same problem on different grids,
/// sampled at the time levels of `coarse` and integrated at the resolution of
/// the finer grid.
inline double distance_between(const SpaceTimeGridFunction& coarse, const SpaceTimeGridFunction& fine, NormTag tag)
{
    detail::check_distance_norm(tag);
    if (coarse.grid.dim() != fine.grid.dim() || coarse.n != fine.n) {
        throw UsageError("distance_between: solutions have different shapes");
    }
    const int m = coarse.grid.dim();
    const int n = coarse.n;
    const int res = kQuadratureRefinement * std::max(coarse.grid.cells_per_axis(), fine.grid.cells_per_axis());
    const SpaceTimeInterpolant fine_ip(fine);
    double worst = 0.0;
    for (int l = 0; l <= coarse.steps(); ++l) {
        const double t = std::min(coarse.time_of(l), fine.T_final);
        const Interpolant ip(coarse.levels[static_cast<std::size_t>(l)]);
        auto a = [&](std::span<const double> x, std::span<double> out) { ip.evaluate(x, out); };
        auto b = [&](std::span<const double> x, std::span<double> out) { fine_ip.evaluate(x, t, out); };
        worst = std::max(worst, detail::field_distance(a, b, m, n, res, tag));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Line fits

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0; // root-mean-square deviation of the points from the line
};

inline LineFit fit_line(std::span<const double> xs, std::span<const double> ys)
{
    if (xs.size() != ys.size() || xs.size() < 2) throw UsageError("fit_line: need at least two points");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

// ---------------------------------------------------------------------------
// Derivative bound sampling

struct DerivativeSample {
    double max_first = 0.0;
    double max_second = 0.0;
};

/// Finite-difference estimates of the largest first and second derivatives of
/// a grid function along each axis (interior stencils only).
inline DerivativeSample sample_derivatives(const GridFunction& u)
{
    const Grid& g = u.grid();
    const int N = g.cells_per_axis();
    const double h = g.h();
    DerivativeSample out;
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
        const auto idx = g.multi_index(c);
        for (int a = 0; a < g.dim(); ++a) {
            const std::size_t s = g.stride(a);
            for (int j = 0; j < u.components(); ++j) {
                if (idx[a] + 1 < N) out.max_first = std::max(out.max_first, std::abs(u(c + s, j) - u(c, j)) / h);
                if (idx[a] > 0 && idx[a] + 1 < N) {
                    out.max_second =
                        std::max(out.max_second, std::abs(u(c + s, j) - 2.0 * u(c, j) + u(c - s, j)) / (h * h));
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convergence studies

enum class ReferenceKind {
    analytic,            ///< scheme error: interpolant vs. interpolated exact grid values
    analytic_continuous, ///< total error: interpolant vs. the exact solution itself
    richardson,          ///< successive refinement: ||u~_k - u~_{k+1}||
};

inline const char* to_string(ReferenceKind r)
{
    switch (r) {
    case ReferenceKind::analytic: return "analytic";
    case ReferenceKind::analytic_continuous: return "analytic_continuous";
    case ReferenceKind::richardson: return "richardson";
    }
    return "?";
}

struct ConvergenceRow {
    int k = 0;
    double h = 0.0;
    double tau = 0.0;
    int steps = 0;
    double error = 0.0;
    double energy_0 = 0.0;
    double energy_T = 0.0;
};

struct ConvergenceReport {
    std::string problem;
    ReferenceKind reference = ReferenceKind::analytic;
    NormTag norm = NormTag::sL2;
    std::vector<ConvergenceRow> rows;
    double order = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
    double constant = std::numeric_limits<double>::quiet_NaN(); // error ~ constant * h^order
    bool exact = false;      // all errors at round-off level; no fit
    bool degenerate = false; // all errors exactly zero; no fit
    std::vector<std::string> warnings;
};

struct ConvergenceOptions {
    NormTag norm = NormTag::sL2;
    ReferenceKind reference = ReferenceKind::analytic;
    double safety = 1.0;
    std::optional<double> derivative_bound; // M_phi
};

/// Errors below this (relative to the initial sup norm) count as exact.
inline constexpr double kExactErrorThreshold = 1e-13;

inline ConvergenceReport convergence_study(const ProblemInstance& problem, std::span<const int> k_range,
                                           const ConvergenceOptions& opts = {})
{
    detail::check_distance_norm(opts.norm);
    if (opts.reference == ReferenceKind::richardson && k_range.size() < 2) {
        throw UsageError("convergence_study: a richardson reference needs at least two levels");
    }
    if (k_range.size() < 3) throw UsageError("convergence_study: need at least three refinement levels");
    for (std::size_t i = 1; i < k_range.size(); ++i) {
        if (k_range[i] <= k_range[i - 1]) throw UsageError("convergence_study: k_range must be strictly ascending");
    }
    if (opts.reference != ReferenceKind::richardson && !problem.exact) {
        throw UsageError("convergence_study: analytic reference requested but the problem has no exact solution");
    }

    ConvergenceReport report;
    report.problem = problem.name;
    report.reference = opts.reference;
    report.norm = opts.norm;
    report.warnings = validate_problem(problem);

    const Scheme scheme(problem.system, problem.boundary);
    auto run = [&](int k) {
        const GridFunction phi = restrict_to_grid(problem.initial, Grid(problem.m(), k), problem.n());
        return solve(scheme, phi, problem.T_final, opts.safety);
    };

    double scale = 0.0;
    std::optional<SolveResult> previous;
    for (std::size_t i = 0; i < k_range.size(); ++i) {
        const int k = k_range[i];
        SolveResult res = previous ? std::move(*previous) : run(k);
        previous.reset();
        ConvergenceRow row;
        row.k = k;
        row.h = res.solution.grid.h();
        row.tau = res.plan.tau;
        row.steps = res.plan.L;
        row.energy_0 = res.energy.energies.front();
        row.energy_T = res.energy.energies.back();
        scale = std::max(scale, grid_norm(res.solution.levels.front(), NormKind::sup()));
        switch (opts.reference) {
        case ReferenceKind::analytic:
            row.error = distance_between(res.solution, discretize_exact(res.solution, problem.exact), opts.norm);
            break;
        case ReferenceKind::analytic_continuous:
            row.error = distance_to_exact(res.solution, problem.exact, opts.norm);
            break;
        case ReferenceKind::richardson: {
            const int next_k = i + 1 < k_range.size() ? k_range[i + 1] : k + 1;
            SolveResult finer = run(next_k);
            row.error = distance_between(res.solution, finer.solution, opts.norm);
            if (i + 1 < k_range.size()) previous = std::move(finer);
            break;
        }
        }
        if (!std::isfinite(row.error)) throw StabilityError("convergence_study: non-finite error at k=" + std::to_string(k));
        if (opts.derivative_bound && i + 1 == k_range.size()) {
            const auto d = sample_derivatives(res.solution.levels.front());
            if (d.max_first > *opts.derivative_bound || d.max_second > *opts.derivative_bound) {
                report.warnings.push_back("initial data derivative estimates (" + std::to_string(d.max_first) + ", " +
                                          std::to_string(d.max_second) + ") exceed the bound M_phi = " +
                                          std::to_string(*opts.derivative_bound));
            }
        }
        report.rows.push_back(row);
    }

    bool all_zero = true;
    bool all_tiny = true;
    for (const auto& r : report.rows) {
        if (r.error != 0.0) all_zero = false;
        if (r.error > kExactErrorThreshold * std::max(1.0, scale)) all_tiny = false;
    }
    if (all_zero) {
        report.degenerate = true;
        report.warnings.push_back("all errors are zero; no order fitted");
        return report;
    }
    if (all_tiny) {
        report.exact = true;
        return report;
    }
    std::vector<double> xs, ys;
    for (const auto& r : report.rows) {
        if (r.error <= 0.0) continue;
        xs.push_back(r.k);
        ys.push_back(std::log2(r.error));
    }
    if (xs.size() >= 2) {
        const auto fit = fit_line(xs, ys);
        report.order = -fit.slope;
        report.residual = fit.residual;
        report.constant = std::exp2(fit.intercept);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Fast Cauchy refinement

struct FastCauchyResult {
    SolveResult solution; // finest solution computed
    int k = 0;            // its refinement level
    double estimate = std::numeric_limits<double>::infinity();
    bool verified = false;
    std::vector<int> ks;           // coarse level of every estimate
    std::vector<double> estimates; // ||u~_k - u~_{k+1}||_sL2
};

struct FastCauchyOptions {
    int k_start = 3;
    int k_max = 10;
    double safety = 1.0;
    NormTag norm = NormTag::sL2;
};

/// Refines until ||u~_{k+1} - u~_k|| <= 2^-target_exponent or k_max is reached.
/// An unreached target is reported with verified = false.
inline FastCauchyResult fast_cauchy_solve(const ProblemInstance& problem, int target_exponent,
                                          const FastCauchyOptions& opts = {})
{
    if (target_exponent < 2) throw UsageError("fast_cauchy_solve: target exponent must be at least 2");
    if (opts.k_start < 0 || opts.k_start >= opts.k_max) {
        throw UsageError("fast_cauchy_solve: need 0 <= k_start < k_max");
    }
    const Scheme scheme(problem.system, problem.boundary);
    auto run = [&](int k) {
        const GridFunction phi = restrict_to_grid(problem.initial, Grid(problem.m(), k), problem.n());
        return solve(scheme, phi, problem.T_final, opts.safety);
    };
    const double target = std::exp2(-target_exponent);

    std::vector<int> ks;
    std::vector<double> estimates;
    SolveResult coarse = run(opts.k_start);
    for (int k = opts.k_start;; ++k) {
        SolveResult fine = run(k + 1);
        const double est = distance_between(coarse.solution, fine.solution, opts.norm);
        ks.push_back(k);
        estimates.push_back(est);
        if (est <= target || k + 1 == opts.k_max) {
            return FastCauchyResult{std::move(fine), k + 1, est, est <= target, std::move(ks), std::move(estimates)};
        }
        coarse = std::move(fine);
    }
}

// ---------------------------------------------------------------------------
// Coefficient perturbation

struct PerturbationRow {
    int j = 0;
    double epsilon = 0.0;
    double deviation = 0.0;
    int rejections = 0;
    bool aborted = false;
};

struct PerturbationReport {
    std::string problem;
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<PerturbationRow> rows;
    double slope = std::numeric_limits<double>::quiet_NaN();    // of log2(deviation) against -j
    double lipschitz = std::numeric_limits<double>::quiet_NaN(); // deviation ~ lipschitz * epsilon
    double residual = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> warnings;
};

struct PerturbationOptions {
    int k = 6;
    std::uint64_t seed = 1;
    double safety = 0.8;
    int max_rejections = 100;
};

namespace detail {

/// Uniform double in [-1, 1) from the top 53 bits of a 64-bit draw; the
/// standard distributions are implementation defined, this is not.
inline double symmetric_unit(std::mt19937_64& rng)
{
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return 2.0 * u - 1.0;
}

inline SymMatrix perturb_matrix(const SymMatrix& m, double eps, std::mt19937_64& rng)
{
    Matrix out = m.matrix();
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) += eps * symmetric_unit(rng);
    }
    return SymMatrix(out);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt)
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

struct PerturbedSolve {
    SolveResult result;
    int rejections = 0;
};

/// Draws a perturbation of size `epsilon` (A kept positive definite by
/// rejection) and marches it with the given step plan.
inline PerturbedSolve perturbed_solve(const ProblemInstance& problem, const GridFunction& phi, const StepPlan& plan,
                                      double epsilon, std::uint64_t seed, int max_rejections)
{
    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt <= max_rejections; ++attempt) {
        const SymMatrix A = detail::perturb_matrix(problem.system.A(), epsilon, rng);
        std::vector<SymMatrix> B;
        for (const auto& b : problem.system.Bs()) B.push_back(detail::perturb_matrix(b, epsilon, rng));
        const auto eig = sym_eigen(A, "perturbed A");
        if (!(eig.eigenvalues.minCoeff() > positive_definite_threshold(eig.eigenvalues))) continue;
        const Scheme scheme(SymmetricSystem(A, std::move(B)), problem.boundary);
        return {solve_with_plan(scheme, phi, plan), attempt};
    }
    throw ConfigurationError("perturbation: A lost positive definiteness after " + std::to_string(max_rejections) +
                             " rejections (epsilon " + std::to_string(epsilon) + ")");
}

/// sL2 grid distance between two solutions on the same space-time grid.
inline double grid_deviation(const SpaceTimeGridFunction& a, const SpaceTimeGridFunction& b)
{
    if (a.levels.size() != b.levels.size()) throw UsageError("grid_deviation: different number of levels");
    double worst = 0.0;
    for (std::size_t l = 0; l < a.levels.size(); ++l) {
        worst = std::max(worst, grid_norm(a.levels[l] - b.levels[l], NormKind::sL2()));
    }
    return worst;
}

inline void require_perturbable(const ProblemInstance& problem)
{
    if (!problem.boundary.all_wrap()) {
        throw UsageError("perturbation_study: only Cauchy (periodic) problems are supported");
    }
    for (const auto& ct : canonical_transforms(problem.system)) {
        if (ct.counts.zero != 0) {
            throw ConfigurationError("perturbation_study: axis " + axis_name(ct.axis) +
                                     " pencil has zero eigenvalues");
        }
    }
}

/// Perturbs A and every B_i by entrywise uniform noise of size 2^-j, re-solves
/// on the same grid with the same step plan and records the sL2 deviation.
/// The noise pattern is drawn once from `seed` and scaled by 2^-j.
inline PerturbationReport perturbation_study(const ProblemInstance& problem, std::span<const int> j_range,
                                             const PerturbationOptions& opts = {})
{
    require_perturbable(problem);
    PerturbationReport report;
    report.problem = problem.name;
    report.k = opts.k;
    report.seed = opts.seed;

    const Scheme base(problem.system, problem.boundary);
    const GridFunction phi = restrict_to_grid(problem.initial, Grid(problem.m(), opts.k), problem.n());
    const auto plan = make_step_plan(cfl_timestep(base.transforms(), phi.grid().h(), opts.safety), problem.T_final);
    const auto reference = solve_with_plan(base, phi, plan);

    std::vector<int> js(j_range.begin(), j_range.end());
    std::sort(js.begin(), js.end());
    for (int j : js) {
        PerturbationRow row;
        row.j = j;
        row.epsilon = std::exp2(-j);
        try {
            // same noise pattern for every j (common random numbers): only the
            // magnitude changes, so the fitted slope is not swamped by draw-to-draw
            // variation of the constant
            const auto p = perturbed_solve(problem, phi, plan, row.epsilon, detail::mix_seed(opts.seed, 0),
                                           opts.max_rejections);
            row.rejections = p.rejections;
            row.deviation = grid_deviation(p.result.solution, reference.solution);
        } catch (const ConfigurationError& e) {
            row.aborted = true;
            row.deviation = std::numeric_limits<double>::quiet_NaN();
            report.warnings.push_back("j=" + std::to_string(j) + ": " + e.what());
        }
        report.rows.push_back(row);
    }

    std::vector<double> xs, ys;
    for (const auto& r : report.rows) {
        if (r.aborted || !(r.deviation > 0.0)) continue;
        xs.push_back(-r.j);
        ys.push_back(std::log2(r.deviation));
    }
    if (xs.size() >= 2) {
        const auto fit = fit_line(xs, ys);
        report.slope = fit.slope;
        report.residual = fit.residual;
        double acc = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) acc += ys[i] - xs[i];
        report.lipschitz = std::exp2(acc / static_cast<double>(xs.size()));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Energy audit

struct EnergyAudit {
    EnergyCheck check;
    EnergyTrace trace;
    StepPlan plan;
};

inline EnergyAudit energy_audit(const ProblemInstance& problem, int k, double safety, const SolveOptions& opts = {})
{
    const GridFunction phi = restrict_to_grid(problem.initial, Grid(problem.m(), k), problem.n());
    auto res = solve(Scheme(problem.system, problem.boundary), phi, problem.T_final, safety, opts);
    return {energy_check(res.energy), std::move(res.energy), res.plan};
}

// ---------------------------------------------------------------------------
// Report serialization

namespace detail {

inline std::string fmt_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// Columns: level,tau,h,error,energy_0,energy_T,order_fit,residual
inline void write_convergence_csv(std::ostream& os, const ConvergenceReport& r)
{
    os << "level,tau,h,error,energy_0,energy_T,order_fit,residual\n";
    for (const auto& row : r.rows) {
        os << row.k << ',' << detail::fmt_double(row.tau) << ',' << detail::fmt_double(row.h) << ','
           << detail::fmt_double(row.error) << ',' << detail::fmt_double(row.energy_0) << ','
           << detail::fmt_double(row.energy_T) << ',' << detail::fmt_double(r.order) << ','
           << detail::fmt_double(r.residual) << '\n';
    }
}

inline void write_convergence_summary(std::ostream& os, const ConvergenceReport& r)
{
    os << "convergence study: " << (r.problem.empty() ? "problem" : r.problem) << '\n'
       << "  reference: " << to_string(r.reference) << ", norm: " << to_string(r.norm) << '\n';
    for (const auto& row : r.rows) {
        os << "  k=" << row.k << "  h=" << detail::fmt_double(row.h) << "  steps=" << row.steps
           << "  error=" << detail::fmt_double(row.error) << '\n';
    }
    if (r.degenerate) os << "  degenerate: all errors zero\n";
    else if (r.exact) os << "  exact: errors at round-off level, order not fitted\n";
    else {
        os << "  fitted order: " << detail::fmt_double(r.order) << "  (rms residual " << detail::fmt_double(r.residual)
           << ")\n";
    }
    for (const auto& w : r.warnings) os << "  warning: " << w << '\n';
}

/// Columns: j,epsilon,deviation,rejections,slope_fit,lipschitz
inline void write_perturbation_csv(std::ostream& os, const PerturbationReport& r)
{
    os << "j,epsilon,deviation,rejections,slope_fit,lipschitz\n";
    for (const auto& row : r.rows) {
        os << row.j << ',' << detail::fmt_double(row.epsilon) << ',' << detail::fmt_double(row.deviation) << ','
           << row.rejections << ',' << detail::fmt_double(r.slope) << ',' << detail::fmt_double(r.lipschitz) << '\n';
    }
}

/// Columns: level,t,energy
inline void write_energy_csv(std::ostream& os, const EnergyTrace& trace)
{
    os << "level,t,energy\n";
    for (std::size_t l = 0; l < trace.energies.size(); ++l) {
        os << l << ',' << detail::fmt_double(trace.times[l]) << ',' << detail::fmt_double(trace.energies[l]) << '\n';
    }
}

} // namespace hypersolve
