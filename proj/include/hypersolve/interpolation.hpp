#pragma once

#include "hypersolve/errors.hpp"
#include "hypersolve/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace hypersolve {

namespace detail {

/// Linear interpolation weights along one axis: value = (1-w) * f[i] + w * f[i+1].
/// Outside the outermost centres the nearest centre is used with weight 0.
struct AxisStencil {
    int lo = 0;
    int hi = 0;
    double w = 0.0;
};

inline AxisStencil axis_stencil(double x, const Grid& grid)
{
    const int N = grid.cells_per_axis();
    const double s = x / grid.h() - 0.5;
    if (s <= 0.0) return {0, 0, 0.0};
    if (s >= N - 1) return {N - 1, N - 1, 0.0};
    const int i = static_cast<int>(std::floor(s));
    return {i, i + 1, s - i};
}

inline void check_in_cube(std::span<const double> x, int m)
{
    if (static_cast<int>(x.size()) < m) {
        throw UsageError("interpolate: point has " + std::to_string(x.size()) + " coordinates, expected " +
                         std::to_string(m));
    }
    for (int a = 0; a < m; ++a) {
        if (!(x[a] >= 0.0 && x[a] <= 1.0)) {
            throw UsageError("interpolate: coordinate " + std::to_string(a) + " = " + std::to_string(x[a]) +
                             " lies outside [0,1]");
        }
    }
}

/// Accumulates weight * (multilinear interpolant of u at x) into out.
inline void accumulate_multilinear(const GridFunction& u, std::span<const double> x, double weight,
                                   std::span<double> out)
{
    const Grid& g = u.grid();
    const int m = g.dim();
    const int n = u.components();
    std::array<AxisStencil, Grid::kMaxDim> st{};
    for (int a = 0; a < m; ++a) st[a] = axis_stencil(x[a], g);
    for (unsigned corner = 0; corner < (1u << m); ++corner) {
        double cw = weight;
        std::array<int, Grid::kMaxDim> idx{};
        for (int a = 0; a < m; ++a) {
            const bool upper = (corner >> a) & 1u;
            cw *= upper ? st[a].w : 1.0 - st[a].w;
            idx[a] = upper ? st[a].hi : st[a].lo;
        }
        if (cw == 0.0) continue;
        const auto v = u.cell(g.flat_index(idx));
        for (int j = 0; j < n; ++j) out[j] += cw * v[j];
    }
}

} // namespace detail

/// Multilinear interpolant of a grid function, defined on all of [0,1]^m.
/// Between cell centres it is the tensor-product linear formula; in the
/// half-cell margin next to the boundary it is constant along the normal axis.
///
/// Holds a reference: the grid function must outlive the interpolant.
class Interpolant {
public:
    explicit Interpolant(const GridFunction& u) : u_(&u) {}
    explicit Interpolant(GridFunction&&) = delete;

    [[nodiscard]] int dim() const noexcept { return u_->grid().dim(); }
    [[nodiscard]] int components() const noexcept { return u_->components(); }

    void evaluate(std::span<const double> x, std::span<double> out) const
    {
        detail::check_in_cube(x, dim());
        std::fill(out.begin(), out.begin() + components(), 0.0);
        detail::accumulate_multilinear(*u_, x, 1.0, out);
    }

    [[nodiscard]] Vector operator()(std::span<const double> x) const
    {
        Vector out(components());
        evaluate(x, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
        return out;
    }

private:
    const GridFunction* u_;
};

inline Interpolant interpolate(const GridFunction& u) { return Interpolant(u); }

/// Interpolant of a space-time grid function: multilinear in space, linear in
/// time between consecutive levels. Holds a reference to its source.
class SpaceTimeInterpolant {
public:
    explicit SpaceTimeInterpolant(const SpaceTimeGridFunction& u) : u_(&u) { u.validate(); }
    explicit SpaceTimeInterpolant(SpaceTimeGridFunction&&) = delete;

    [[nodiscard]] int dim() const noexcept { return u_->grid.dim(); }
    [[nodiscard]] int components() const noexcept { return u_->n; }

    void evaluate(std::span<const double> x, double t, std::span<double> out) const
    {
        const double T = u_->T_final;
        if (!(t >= 0.0 && t <= T)) {
            throw UsageError("interpolate_spacetime: t = " + std::to_string(t) + " outside [0, " +
                             std::to_string(T) + "]");
        }
        detail::check_in_cube(x, dim());
        std::fill(out.begin(), out.begin() + components(), 0.0);
        const int L = u_->steps();
        if (L == 0) {
            detail::accumulate_multilinear(u_->levels[0], x, 1.0, out);
            return;
        }
        int l = std::min(static_cast<int>(std::floor(t / u_->tau)), L - 1);
        while (l > 0 && u_->time_of(l) > t) --l;
        const double t0 = u_->time_of(l);
        const double t1 = u_->time_of(l + 1);
        const double theta = t1 > t0 ? std::clamp((t - t0) / (t1 - t0), 0.0, 1.0) : 0.0;
        if (theta != 1.0) detail::accumulate_multilinear(u_->levels[l], x, 1.0 - theta, out);
        if (theta != 0.0) detail::accumulate_multilinear(u_->levels[l + 1], x, theta, out);
    }

    [[nodiscard]] Vector operator()(std::span<const double> x, double t) const
    {
        Vector out(components());
        evaluate(x, t, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
        return out;
    }

private:
    const SpaceTimeGridFunction* u_;
};

inline SpaceTimeInterpolant interpolate_spacetime(const SpaceTimeGridFunction& u)
{
    return SpaceTimeInterpolant(u);
}

/// L2 norm over [0,1]^m of `g` by the composite midpoint rule with `resolution`
/// points per axis. `g(x, out)` writes n components.
template <class G>
double quadrature_l2(const G& g, int m, int n, int resolution)
{
    const std::size_t per_axis = static_cast<std::size_t>(resolution);
    std::size_t total = 1;
    for (int a = 0; a < m; ++a) total *= per_axis;
    std::vector<double> terms(total);
    std::vector<double> val(static_cast<std::size_t>(n));
    std::array<double, Grid::kMaxDim> x{};
    for (std::size_t p = 0; p < total; ++p) {
        std::size_t rest = p;
        for (int a = 0; a < m; ++a) {
            x[a] = (static_cast<double>(rest % per_axis) + 0.5) / resolution;
            rest /= per_axis;
        }
        g(std::span<const double>(x.data(), static_cast<std::size_t>(m)), std::span<double>(val));
        double s = 0.0;
        for (double v : val) s += v * v;
        terms[p] = s;
    }
    return std::sqrt(pairwise_sum(terms) / static_cast<double>(total));
}

struct InterpolationErrorRow {
    int k = 0;
    double h = 0.0;
    double sup_error = 0.0;
};

/// Sup error of interpolate(restrict(f)) against f for each k, sampled on a
/// fixed lattice of the interior box [h/2, 1-h/2]^m (the region covered by
/// inter-centre cells).
template <class F>
std::vector<InterpolationErrorRow> interpolation_error_estimate(const F& f, int m, int n,
                                                                std::span<const int> k_range)
{
    const int samples = m == 1 ? 1025 : (m == 2 ? 129 : 33);
    std::vector<InterpolationErrorRow> rows;
    for (int k : k_range) {
        const Grid grid(m, k);
        const auto u = restrict_to_grid(f, grid, n);
        const Interpolant interp(u);
        const double lo = 0.5 * grid.h();
        const double hi = 1.0 - lo;
        std::size_t total = 1;
        for (int a = 0; a < m; ++a) total *= static_cast<std::size_t>(samples);
        double worst = 0.0;
        std::array<double, Grid::kMaxDim> x{};
        Vector approx(n);
        for (std::size_t p = 0; p < total; ++p) {
            std::size_t rest = p;
            for (int a = 0; a < m; ++a) {
                const double s = static_cast<double>(rest % samples) / (samples - 1);
                x[a] = lo + s * (hi - lo);
                rest /= samples;
            }
            const std::span<const double> xs(x.data(), static_cast<std::size_t>(m));
            interp.evaluate(xs, std::span<double>(approx.data(), static_cast<std::size_t>(n)));
            const auto exact = f(xs);
            for (int j = 0; j < n; ++j) worst = std::max(worst, std::abs(approx[j] - exact[j]));
        }
        rows.push_back({k, grid.h(), worst});
    }
    return rows;
}

} // namespace hypersolve
