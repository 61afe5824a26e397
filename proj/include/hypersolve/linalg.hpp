#pragma once

#include "hypersolve/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hypersolve {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Largest absolute entry, 0 for empty matrices.
inline double max_abs(const Matrix& m)
{
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Largest |m(i,j) - m(j,i)|; callers use it to reject badly asymmetric input
/// before it is silently symmetrized.
inline double asymmetry(const Matrix& m)
{
    if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
    return max_abs(m - m.transpose());
}

/// Dense real symmetric matrix. Construction symmetrizes, so entries(i,j) and
/// entries(j,i) are bit-identical afterwards.
class SymMatrix {
public:
    SymMatrix() = default;

    explicit SymMatrix(const Matrix& m)
    {
        if (m.rows() != m.cols()) {
            throw UsageError("SymMatrix: matrix is " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()) + ", expected square");
        }
        entries_ = 0.5 * (m + m.transpose());
    }

    SymMatrix(std::initializer_list<std::initializer_list<double>> rows)
    {
        const auto n = static_cast<Eigen::Index>(rows.size());
        Matrix m(n, n);
        Eigen::Index i = 0;
        for (const auto& row : rows) {
            if (static_cast<Eigen::Index>(row.size()) != n) {
                throw UsageError("SymMatrix: ragged initializer rows");
            }
            Eigen::Index j = 0;
            for (double v : row) m(i, j++) = v;
            ++i;
        }
        *this = SymMatrix(m);
    }

    static SymMatrix identity(int n) { return SymMatrix(Matrix::Identity(n, n)); }
    static SymMatrix zero(int n) { return SymMatrix(Matrix::Zero(n, n)); }
    static SymMatrix diagonal(const Vector& d) { return SymMatrix(Matrix(d.asDiagonal())); }

    [[nodiscard]] int size() const noexcept { return static_cast<int>(entries_.rows()); }
    [[nodiscard]] const Matrix& matrix() const noexcept { return entries_; }
    [[nodiscard]] double operator()(int i, int j) const { return entries_(i, j); }
    [[nodiscard]] double max_abs() const { return hypersolve::max_abs(entries_); }

    friend SymMatrix operator*(double s, const SymMatrix& a) { return SymMatrix(s * a.entries_); }
    friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b)
    {
        return SymMatrix(a.entries_ + b.entries_);
    }

private:
    Matrix entries_;
};

struct SpectralDecomposition {
    Vector eigenvalues;  // ascending
    Matrix eigenvectors; // orthonormal columns
};

namespace detail {

/// Flip each column so that its first entry with magnitude above `tol` is
/// nonnegative; makes eigenvector output reproducible across runs.
inline void normalize_signs(Matrix& q, double tol = 1e-12)
{
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
        for (Eigen::Index r = 0; r < q.rows(); ++r) {
            if (std::abs(q(r, c)) > tol) {
                if (q(r, c) < 0.0) q.col(c) *= -1.0;
                break;
            }
        }
    }
}

} // namespace detail

/// Eigen-decomposition of a symmetric matrix with ascending eigenvalues and a
/// fixed eigenvector sign convention.
inline SpectralDecomposition sym_eigen(const SymMatrix& m, std::string_view name = "matrix")
{
    if (m.size() == 0) return {Vector(0), Matrix(0, 0)};
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix());
    if (solver.info() != Eigen::Success) {
        throw EigenSolverError("symmetric eigensolver did not converge for " + std::string(name) +
                               " (" + std::to_string(m.size()) + "x" + std::to_string(m.size()) + ")");
    }
    SpectralDecomposition out{solver.eigenvalues(), solver.eigenvectors()};
    detail::normalize_signs(out.eigenvectors);
    return out;
}

/// Default sign-classification band for pencil eigenvalues.
inline double default_eps0(const Vector& mu)
{
    const double scale = mu.size() == 0 ? 0.0 : mu.cwiseAbs().maxCoeff();
    return 1e-12 * (1.0 + scale);
}

/// Number of distinct values after clustering neighbours closer than `eps`.
/// `values` must be sorted ascending.
inline int count_distinct(const Vector& values, double eps)
{
    if (values.size() == 0) return 0;
    int count = 1;
    for (Eigen::Index i = 1; i < values.size(); ++i) {
        if (values[i] - values[i - 1] > eps) ++count;
    }
    return count;
}

/// Smallest gap between distinct eigenvalue clusters (gaps at or below `eps`
/// count as exact multiplicity). Infinity when there is only one cluster.
inline double min_cluster_gap(const Vector& values, double eps)
{
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 1; i < values.size(); ++i) {
        const double d = values[i] - values[i - 1];
        if (d > eps) gap = std::min(gap, d);
    }
    return gap;
}

/// Eigenvalue clusters closer than this are reported as a near collision.
inline constexpr double kEigenGapWarning = 1e-8;

struct SignCounts {
    int plus = 0;
    int zero = 0;
    int minus = 0;

    friend bool operator==(const SignCounts&, const SignCounts&) = default;
};

/// Change of variables u = T v that turns the one-dimensional system
/// A u_t + B u_x = 0 into decoupled transport equations v_t + diag(mu) v_x = 0.
///
/// T = L D K with L the eigenbasis of A, D = Lambda^{-1/2} and K the eigenbasis
/// of D L^T B L D. The components of v are the Riemann invariants of the axis.
struct CanonicalTransform {
    int axis = 0;
    Matrix T;
    Matrix T_inv;
    Vector mu; // ascending
    SignCounts counts;
    double eps0 = 0.0;
    double min_gap = std::numeric_limits<double>::infinity();

    [[nodiscard]] int size() const noexcept { return static_cast<int>(mu.size()); }

    /// +1, 0 or -1 for invariant j under the eps0 band.
    [[nodiscard]] int sign(int j) const
    {
        if (mu[j] > eps0) return 1;
        if (mu[j] < -eps0) return -1;
        return 0;
    }

    [[nodiscard]] std::vector<int> indices_with_sign(int s) const
    {
        std::vector<int> idx;
        for (int j = 0; j < size(); ++j) {
            if (sign(j) == s) idx.push_back(j);
        }
        return idx;
    }

    [[nodiscard]] double max_speed() const { return mu.size() == 0 ? 0.0 : mu.cwiseAbs().maxCoeff(); }
    [[nodiscard]] bool near_collision() const { return min_gap < kEigenGapWarning; }
};

inline double positive_definite_threshold(const Vector& eigenvalues)
{
    return default_eps0(eigenvalues);
}

/// Builds the canonical transform of the pencil (A, B). `eps0` defaults to
/// 1e-12 * (1 + max|mu|).
inline CanonicalTransform canonical_transform(const SymMatrix& A, const SymMatrix& B,
                                              std::optional<double> eps0 = std::nullopt, int axis = 0)
{
    if (A.size() != B.size()) {
        throw UsageError("canonical_transform: A is " + std::to_string(A.size()) + "x" +
                         std::to_string(A.size()) + " but B is " + std::to_string(B.size()) + "x" +
                         std::to_string(B.size()));
    }
    const auto a_eig = sym_eigen(A, "A");
    if (A.size() > 0) {
        const double lam_min = a_eig.eigenvalues.minCoeff();
        if (!(lam_min > positive_definite_threshold(a_eig.eigenvalues))) {
            throw ConfigurationError("A is not positive definite (smallest eigenvalue " +
                                     std::to_string(lam_min) + ")");
        }
    }
    const Matrix& L = a_eig.eigenvectors;
    const Vector d = a_eig.eigenvalues.cwiseSqrt().cwiseInverse();
    const Vector d_inv = a_eig.eigenvalues.cwiseSqrt();

    const Matrix S = d.asDiagonal() * (L.transpose() * B.matrix() * L) * d.asDiagonal();
    const auto s_eig = sym_eigen(SymMatrix(S), "D L^T B L D (axis " + std::to_string(axis + 1) + ")");
    const Matrix& K = s_eig.eigenvectors;

    CanonicalTransform ct;
    ct.axis = axis;
    ct.T = L * d.asDiagonal() * K;
    ct.T_inv = K.transpose() * d_inv.asDiagonal() * L.transpose();
    ct.mu = s_eig.eigenvalues;
    ct.eps0 = eps0.value_or(default_eps0(ct.mu));
    for (int j = 0; j < ct.size(); ++j) {
        switch (ct.sign(j)) {
        case 1: ++ct.counts.plus; break;
        case -1: ++ct.counts.minus; break;
        default: ++ct.counts.zero; break;
        }
    }
    ct.min_gap = min_cluster_gap(ct.mu, ct.eps0);
    return ct;
}

/// Roots of det(mu A - B), ascending.
inline Vector pencil_eigenvalues(const SymMatrix& A, const SymMatrix& B)
{
    return canonical_transform(A, B).mu;
}

} // namespace hypersolve
