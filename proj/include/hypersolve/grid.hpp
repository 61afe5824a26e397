#pragma once

#include "hypersolve/errors.hpp"
#include "hypersolve/linalg.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace hypersolve {

/// Uniform dyadic cell-centred grid on the unit cube [0,1]^m with 2^k cells per
/// axis. Cells are addressed by a flat index in which axis 0 varies fastest.
class Grid {
public:
    static constexpr int kMaxDim = 3;

    Grid(int m, int k) : m_(m), k_(k)
    {
        if (m < 1 || m > kMaxDim) {
            throw UsageError("Grid: space dimension " + std::to_string(m) + " outside 1.." +
                             std::to_string(kMaxDim));
        }
        if (k < 0 || k * m > 30) {
            throw UsageError("Grid: refinement level " + std::to_string(k) + " unsupported for m=" +
                             std::to_string(m));
        }
    }

    [[nodiscard]] int dim() const noexcept { return m_; }
    [[nodiscard]] int level() const noexcept { return k_; }
    [[nodiscard]] int cells_per_axis() const noexcept { return 1 << k_; }
    [[nodiscard]] double h() const noexcept { return std::ldexp(1.0, -k_); }
    [[nodiscard]] std::size_t num_cells() const noexcept
    {
        return std::size_t{1} << static_cast<unsigned>(k_ * m_);
    }

    /// Distance in the flat index between neighbours along `axis`.
    [[nodiscard]] std::size_t stride(int axis) const noexcept
    {
        return std::size_t{1} << static_cast<unsigned>(k_ * axis);
    }

    [[nodiscard]] std::array<int, kMaxDim> multi_index(std::size_t cell) const noexcept
    {
        std::array<int, kMaxDim> idx{};
        const std::size_t mask = static_cast<std::size_t>(cells_per_axis()) - 1;
        for (int a = 0; a < m_; ++a) {
            idx[a] = static_cast<int>((cell >> static_cast<unsigned>(k_ * a)) & mask);
        }
        return idx;
    }

    [[nodiscard]] std::size_t flat_index(const std::array<int, kMaxDim>& idx) const noexcept
    {
        std::size_t cell = 0;
        for (int a = m_ - 1; a >= 0; --a) {
            cell = (cell << static_cast<unsigned>(k_)) | static_cast<std::size_t>(idx[a]);
        }
        return cell;
    }

    [[nodiscard]] double center_coordinate(int i) const noexcept { return (i + 0.5) * h(); }

    [[nodiscard]] std::array<double, kMaxDim> center(std::size_t cell) const noexcept
    {
        const auto idx = multi_index(cell);
        std::array<double, kMaxDim> x{};
        for (int a = 0; a < m_; ++a) x[a] = center_coordinate(idx[a]);
        return x;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int m_ = 1;
    int k_ = 0;
};

/// Values of an n-component field at the cell centres of a grid. Storage is
/// cell-major: values[cell * n + component].
class GridFunction {
public:
    GridFunction(Grid grid, int n) : grid_(grid), n_(n), values_(grid.num_cells() * static_cast<std::size_t>(n), 0.0)
    {
        if (n < 1) throw UsageError("GridFunction: component count must be positive");
    }

    GridFunction(Grid grid, int n, std::vector<double> values) : grid_(grid), n_(n), values_(std::move(values))
    {
        if (n < 1) throw UsageError("GridFunction: component count must be positive");
        if (values_.size() != grid.num_cells() * static_cast<std::size_t>(n)) {
            throw UsageError("GridFunction: expected " + std::to_string(grid.num_cells() * n) +
                             " values, got " + std::to_string(values_.size()));
        }
        ensure_finite("construction");
    }

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] int components() const noexcept { return n_; }
    [[nodiscard]] std::size_t num_cells() const noexcept { return grid_.num_cells(); }

    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }

    [[nodiscard]] std::span<const double> cell(std::size_t c) const noexcept
    {
        return std::span<const double>(values_).subspan(c * n_, n_);
    }
    [[nodiscard]] std::span<double> cell(std::size_t c) noexcept
    {
        return std::span<double>(values_).subspan(c * n_, n_);
    }

    [[nodiscard]] double operator()(std::size_t c, int comp) const noexcept { return values_[c * n_ + comp]; }
    [[nodiscard]] double& operator()(std::size_t c, int comp) noexcept { return values_[c * n_ + comp]; }

    [[nodiscard]] bool all_finite() const noexcept
    {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    void ensure_finite(std::string_view where) const
    {
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                throw InputError("GridFunction: non-finite value at cell " + std::to_string(i / n_) +
                                 ", component " + std::to_string(i % n_) + " (" + std::string(where) + ")");
            }
        }
    }

    GridFunction& operator+=(const GridFunction& other)
    {
        check_compatible(other);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
        return *this;
    }
    GridFunction& operator-=(const GridFunction& other)
    {
        check_compatible(other);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
        return *this;
    }
    GridFunction& operator*=(double s)
    {
        for (double& v : values_) v *= s;
        return *this;
    }
    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(double s, GridFunction a) { return a *= s; }

private:
    void check_compatible(const GridFunction& other) const
    {
        if (!(grid_ == other.grid_) || n_ != other.n_) {
            throw UsageError("GridFunction: incompatible grid functions");
        }
    }

    Grid grid_;
    int n_;
    std::vector<double> values_;
};

/// A grid function on every time level of a uniform time grid. Level l sits at
/// t = min(l * tau, T_final); the final step may be shorter than tau.
struct SpaceTimeGridFunction {
    Grid grid;
    int n = 1;
    double tau = 0.0;
    double T_final = 0.0;
    std::vector<GridFunction> levels;

    [[nodiscard]] int steps() const noexcept { return static_cast<int>(levels.size()) - 1; }

    [[nodiscard]] double time_of(int l) const noexcept
    {
        return l == steps() ? T_final : std::min(l * tau, T_final);
    }

    void validate() const
    {
        if (levels.empty()) throw UsageError("SpaceTimeGridFunction: no time levels");
        for (const auto& lv : levels) {
            if (!(lv.grid() == grid) || lv.components() != n) {
                throw UsageError("SpaceTimeGridFunction: levels disagree on grid or component count");
            }
        }
    }
};

enum class NormTag { sup, L2, sL2, A_L2, A_sL2 };

/// Which norm to measure; A-weighted variants carry their weight matrix.
class NormKind {
public:
    static NormKind sup() { return NormKind(NormTag::sup, std::nullopt); }
    static NormKind L2() { return NormKind(NormTag::L2, std::nullopt); }
    static NormKind sL2() { return NormKind(NormTag::sL2, std::nullopt); }
    static NormKind A_L2(SymMatrix a) { return NormKind(NormTag::A_L2, std::move(a)); }
    static NormKind A_sL2(SymMatrix a) { return NormKind(NormTag::A_sL2, std::move(a)); }

    [[nodiscard]] NormTag tag() const noexcept { return tag_; }
    [[nodiscard]] const std::optional<SymMatrix>& weight() const noexcept { return weight_; }
    [[nodiscard]] bool weighted() const noexcept { return tag_ == NormTag::A_L2 || tag_ == NormTag::A_sL2; }

private:
    NormKind(NormTag tag, std::optional<SymMatrix> w) : tag_(tag), weight_(std::move(w)) {}

    NormTag tag_;
    std::optional<SymMatrix> weight_;
};

inline std::string to_string(NormTag tag)
{
    switch (tag) {
    case NormTag::sup: return "sup";
    case NormTag::L2: return "L2";
    case NormTag::sL2: return "sL2";
    case NormTag::A_L2: return "A_L2";
    case NormTag::A_sL2: return "A_sL2";
    }
    return "?";
}

/// Pairwise (tree) summation with a fixed shape, so results only depend on
/// the input order.
inline double pairwise_sum(std::span<const double> xs)
{
    constexpr std::size_t kBlock = 8;
    if (xs.size() <= kBlock) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

/// Samples `f` at every cell centre. `f` maps a point (span of m coordinates)
/// to something indexable with at least n entries.
template <class F>
GridFunction restrict_to_grid(const F& f, const Grid& grid, int n)
{
    GridFunction out(grid, n);
    for (std::size_t c = 0; c < grid.num_cells(); ++c) {
        const auto x = grid.center(c);
        const auto value = f(std::span<const double>(x.data(), static_cast<std::size_t>(grid.dim())));
        for (int j = 0; j < n; ++j) {
            const double v = value[j];
            if (!std::isfinite(v)) {
                std::ostringstream msg;
                msg << "restrict: non-finite value for component " << j << " at (";
                for (int a = 0; a < grid.dim(); ++a) msg << (a ? ", " : "") << x[a];
                msg << ")";
                throw InputError(msg.str());
            }
            out(c, j) = v;
        }
    }
    return out;
}

namespace detail {

inline void check_weight(const SymMatrix& w, int n)
{
    if (w.size() != n) {
        throw UsageError("norm weight is " + std::to_string(w.size()) + "x" + std::to_string(w.size()) +
                         " but the grid function has " + std::to_string(n) + " components");
    }
    const auto eig = sym_eigen(w, "norm weight");
    if (eig.eigenvalues.size() > 0 && eig.eigenvalues.minCoeff() < -default_eps0(eig.eigenvalues)) {
        throw ConfigurationError("norm weight is not positive semidefinite");
    }
}

/// h^m * sum over cells of <W u, u> (or <u, u> when W is absent).
inline double weighted_energy(const GridFunction& u, const Matrix* weight)
{
    const int n = u.components();
    std::vector<double> per_cell(u.num_cells());
    for (std::size_t c = 0; c < u.num_cells(); ++c) {
        const auto v = u.cell(c);
        double s = 0.0;
        if (weight == nullptr) {
            for (int j = 0; j < n; ++j) s += v[j] * v[j];
        } else {
            for (int i = 0; i < n; ++i) {
                double row = 0.0;
                for (int j = 0; j < n; ++j) row += (*weight)(i, j) * v[j];
                s += row * v[i];
            }
        }
        per_cell[c] = s;
    }
    const double cell_volume = std::pow(u.grid().h(), u.grid().dim());
    return cell_volume * pairwise_sum(per_cell);
}

inline double sup_norm(const GridFunction& u)
{
    double best = 0.0;
    for (std::size_t c = 0; c < u.num_cells(); ++c) {
        double s = 0.0;
        for (double v : u.cell(c)) s += v * v;
        best = std::max(best, std::sqrt(s));
    }
    return best;
}

} // namespace detail

/// Discrete energy h^m * sum <A u, u>.
inline double discrete_energy(const GridFunction& u, const SymMatrix& A)
{
    return detail::weighted_energy(u, &A.matrix());
}

/// Norm of a single-level grid function. The sL2 tags reduce to their L2
/// counterparts on one level.
inline double grid_norm(const GridFunction& u, const NormKind& kind)
{
    if (kind.weighted()) detail::check_weight(*kind.weight(), u.components());
    switch (kind.tag()) {
    case NormTag::sup: return detail::sup_norm(u);
    case NormTag::L2:
    case NormTag::sL2: return std::sqrt(detail::weighted_energy(u, nullptr));
    case NormTag::A_L2:
    case NormTag::A_sL2: return std::sqrt(std::max(0.0, detail::weighted_energy(u, &kind.weight()->matrix())));
    }
    return 0.0;
}

/// sL2: max over levels of the per-level L2 norm; sup: max over levels of the
/// per-level sup norm.
inline double spacetime_norm(const SpaceTimeGridFunction& u, const NormKind& kind)
{
    if (kind.tag() == NormTag::L2 || kind.tag() == NormTag::A_L2) {
        throw UsageError("spacetime_norm: use the sL2 family (sup, sL2, A_sL2) for space-time functions, not " +
                         to_string(kind.tag()));
    }
    u.validate();
    double best = 0.0;
    for (const auto& level : u.levels) best = std::max(best, grid_norm(level, kind));
    return best;
}

// Binary dump: "HSGF", u32 version, u32 m, u32 k, u32 n, u32 L, f64 tau, then
// L+1 levels of num_cells * n float64 values in cell-major layout, all
// little-endian.
inline constexpr std::uint32_t kDumpVersion = 1;

namespace detail {

template <class T>
void write_le(std::ostream& os, T value)
{
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    auto bits = std::bit_cast<U>(value);
    char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        bytes[i] = static_cast<char>(bits & 0xffu);
        bits >>= 8;
    }
    os.write(bytes, sizeof(U));
}

template <class T>
T read_le(std::istream& is)
{
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    unsigned char bytes[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw InputError("dump: truncated input");
    U bits = 0;
    for (std::size_t i = sizeof(U); i-- > 0;) bits = (bits << 8) | bytes[i];
    return std::bit_cast<T>(bits);
}

} // namespace detail

inline void write_dump(std::ostream& os, const SpaceTimeGridFunction& u)
{
    u.validate();
    os.write("HSGF", 4);
    detail::write_le<std::uint32_t>(os, kDumpVersion);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(u.grid.dim()));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(u.grid.level()));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(u.n));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(u.steps()));
    detail::write_le<double>(os, u.tau);
    for (const auto& level : u.levels) {
        for (double v : level.values()) detail::write_le<double>(os, v);
    }
}

/// Reads a dump written by write_dump. T_final is not stored and is set to
/// L * tau.
inline SpaceTimeGridFunction read_dump(std::istream& is)
{
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "HSGF") throw InputError("dump: bad magic");
    const auto version = detail::read_le<std::uint32_t>(is);
    if (version != kDumpVersion) throw InputError("dump: unsupported version " + std::to_string(version));
    const auto m = detail::read_le<std::uint32_t>(is);
    const auto k = detail::read_le<std::uint32_t>(is);
    const auto n = detail::read_le<std::uint32_t>(is);
    const auto steps = detail::read_le<std::uint32_t>(is);
    const auto tau = detail::read_le<double>(is);
    SpaceTimeGridFunction u{Grid(static_cast<int>(m), static_cast<int>(k)), static_cast<int>(n), tau,
                            steps * tau, {}};
    u.levels.reserve(steps + 1);
    for (std::uint32_t l = 0; l <= steps; ++l) {
        std::vector<double> vals(u.grid.num_cells() * n);
        for (double& v : vals) v = detail::read_le<double>(is);
        u.levels.emplace_back(u.grid, static_cast<int>(n), std::move(vals));
    }
    return u;
}

} // namespace hypersolve
