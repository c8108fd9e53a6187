#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

namespace zerolocus {

/// Default relative tolerance for numerical rank decisions.
inline constexpr double kDefaultRankTol = 1e-8;

/// Dense row-major matrix of doubles.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t n);
    /// Matrix whose columns are the given vectors (all of equal length).
    static DenseMatrix from_columns(const std::vector<std::vector<double>>& columns, std::size_t rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
    std::vector<double> column(std::size_t c) const;

    std::span<const double> data() const noexcept { return data_; }

    DenseMatrix transposed() const;
    bool all_finite() const noexcept;
    double frobenius_norm() const noexcept;
    /// Maximum absolute row sum.
    double inf_norm() const noexcept;
    double max_abs() const noexcept;
    bool is_symmetric(double rel_tol) const noexcept;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
std::vector<double> operator*(const DenseMatrix& a, std::span<const double> x);
/// Aᵀ·A, accumulated in a fixed order.
DenseMatrix gram(const DenseMatrix& a);

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double norm2(std::span<const double> a) noexcept;
double norm_inf(std::span<const double> a) noexcept;

/// Eigen-decomposition of a symmetric matrix.
struct Spectrum {
    std::vector<double> eigenvalues;          // ascending
    std::optional<DenseMatrix> eigenvectors;  // column k pairs with eigenvalues[k]
};

/// Cyclic Jacobi eigensolver. Sweeps until the off-diagonal Frobenius norm
/// drops below 1e-12·‖A‖_F. Each eigenvector's largest-magnitude component
/// is made positive.
Spectrum eig_sym(const DenseMatrix& a, bool want_vectors = true);

struct SingularSystem {
    std::vector<double> values;  // min(rows, cols) entries, descending
    DenseMatrix right;           // cols × cols orthogonal, column k pairs with values[k] (k < values.size())
    DenseMatrix left;            // rows × min(rows, cols); zero column where the singular value is 0
};

/// Singular values and right-singular basis by one-sided (Hestenes) Jacobi.
SingularSystem singular_values(const DenseMatrix& a);

/// Number of singular values strictly above rel_tol·s₁; 0 when s₁ = 0.
std::size_t numerical_rank(std::span<const double> singular_values, double rel_tol = kDefaultRankTol);

/// Orthonormal basis of ker(A), one vector per column.
DenseMatrix nullspace_basis(const DenseMatrix& a, double rel_tol = kDefaultRankTol);

/// Forward substitution. Throws SingularSystemError on a zero diagonal entry.
std::vector<double> solve_lower_triangular(const DenseMatrix& lower, std::span<const double> rhs);

}  // namespace zerolocus
