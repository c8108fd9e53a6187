#include "zerolocus/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "zerolocus/errors.hpp"

namespace zerolocus {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxSweeps = 100;

void normalize_sign(std::span<double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::abs(v[i]) > std::abs(v[best])) best = i;
    }
    if (!v.empty() && v[best] < 0.0) {
        for (double& x : v) x = -x;
    }
}

}  // namespace

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        require(r.size() == cols_, "DenseMatrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::from_columns(const std::vector<std::vector<double>>& columns, std::size_t rows) {
    DenseMatrix m(rows, columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        require(columns[c].size() == rows, "DenseMatrix::from_columns: column length mismatch");
        for (std::size_t r = 0; r < rows; ++r) m(r, c) = columns[c][r];
    }
    return m;
}

std::vector<double> DenseMatrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

bool DenseMatrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double DenseMatrix::frobenius_norm() const noexcept { return norm2(data_); }

double DenseMatrix::inf_norm() const noexcept {
    double best = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
        double s = 0.0;
        for (double x : row(r)) s += std::abs(x);
        best = std::max(best, s);
    }
    return best;
}

double DenseMatrix::max_abs() const noexcept { return norm_inf(data_); }

bool DenseMatrix::is_symmetric(double rel_tol) const noexcept {
    if (!square()) return false;
    const double scale = std::max(max_abs(), std::numeric_limits<double>::min());
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = r + 1; c < cols_; ++c)
            if (std::abs((*this)(r, c) - (*this)(c, r)) > rel_tol * scale) return false;
    return true;
}

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.rows(), "matrix product: inner dimensions differ");
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto src = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
        }
    }
    return out;
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "matrix difference: shape mismatch");
    DenseMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) - b(i, j);
    return out;
}

std::vector<double> operator*(const DenseMatrix& a, std::span<const double> x) {
    require(a.cols() == x.size(), "matrix-vector product: dimension mismatch");
    std::vector<double> out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
    return out;
}

DenseMatrix gram(const DenseMatrix& a) {
    const std::size_t n = a.cols();
    DenseMatrix g(n, n);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto row = a.row(r);
        for (std::size_t i = 0; i < n; ++i) {
            if (row[i] == 0.0) continue;
            for (std::size_t j = i; j < n; ++j) g(i, j) += row[i] * row[j];
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
    return g;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) noexcept {
    // Scaled accumulation keeps tiny and huge entries from under/overflowing.
    double scale = 0.0;
    double ssq = 1.0;
    for (double x : a) {
        if (x == 0.0) continue;
        const double ax = std::abs(x);
        if (scale < ax) {
            ssq = 1.0 + ssq * (scale / ax) * (scale / ax);
            scale = ax;
        } else {
            ssq += (ax / scale) * (ax / scale);
        }
    }
    return scale * std::sqrt(ssq);
}

double norm_inf(std::span<const double> a) noexcept {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

Spectrum eig_sym(const DenseMatrix& input, bool want_vectors) {
    require(input.square(), "eig_sym: matrix is not square");
    require(input.rows() >= 1, "eig_sym: empty matrix");
    require(input.all_finite(), "eig_sym: non-finite entry");
    require(input.is_symmetric(1e-12), "eig_sym: matrix is not symmetric");

    const std::size_t n = input.rows();
    DenseMatrix a = input;
    // Start from the exactly symmetric part.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (a(i, j) + a(j, i));
    DenseMatrix v = DenseMatrix::identity(n);

    const double frob = a.frobenius_norm();
    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    int sweep = 0;
    for (; sweep < kMaxSweeps; ++sweep) {
        if (frob == 0.0 || off_norm() <= 1e-12 * frob) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double diff = a(q, q) - a(p, p);
                double t;
                if (std::abs(apq) < kEps * kEps * std::abs(diff)) {
                    t = apq / diff;
                } else {
                    const double theta = diff / (2.0 * apq);
                    t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    if (theta < 0.0) t = -t;
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                a(p, p) -= t * apq;
                a(q, q) += t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = a(p, k) = c * akp - s * akq;
                    a(k, q) = a(q, k) = s * akp + c * akq;
                }
                if (want_vectors) {
                    for (std::size_t k = 0; k < n; ++k) {
                        const double vkp = v(k, p);
                        const double vkq = v(k, q);
                        v(k, p) = c * vkp - s * vkq;
                        v(k, q) = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    if (sweep == kMaxSweeps && off_norm() > 1e-12 * frob) {
        throw NumericalError("eig_no_convergence", "eig_sym: Jacobi sweeps did not converge");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    Spectrum out;
    out.eigenvalues.reserve(n);
    for (std::size_t k : order) out.eigenvalues.push_back(a(k, k));
    if (want_vectors) {
        DenseMatrix sorted(n, n);
        std::vector<double> col(n);
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t r = 0; r < n; ++r) col[r] = v(r, order[k]);
            normalize_sign(col);
            for (std::size_t r = 0; r < n; ++r) sorted(r, k) = col[r];
        }
        out.eigenvectors = std::move(sorted);
    }
    return out;
}

SingularSystem singular_values(const DenseMatrix& a) {
    require(a.all_finite(), "singular_values: non-finite entry");
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();

    // Column-major working copies: w holds A·V, vcols holds V.
    std::vector<std::vector<double>> w(n, std::vector<double>(m));
    std::vector<std::vector<double>> vcols(n, std::vector<double>(n, 0.0));
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t r = 0; r < m; ++r) w[c][r] = a(r, c);
        vcols[c][c] = 1.0;
    }

    // Columns below this norm are numerically zero; rotating them only shuffles noise.
    const double negligible = 64.0 * kEps * a.frobenius_norm();

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double alpha = dot(w[i], w[i]);
                const double beta = dot(w[j], w[j]);
                const double gamma = dot(w[i], w[j]);
                if (std::sqrt(alpha) <= negligible || std::sqrt(beta) <= negligible) continue;
                if (std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                double t = 1.0 / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                if (zeta < 0.0) t = -t;
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t r = 0; r < m; ++r) {
                    const double wi = w[i][r];
                    const double wj = w[j][r];
                    w[i][r] = c * wi - s * wj;
                    w[j][r] = s * wi + c * wj;
                }
                for (std::size_t r = 0; r < n; ++r) {
                    const double vi = vcols[i][r];
                    const double vj = vcols[j][r];
                    vcols[i][r] = c * vi - s * vj;
                    vcols[j][r] = s * vi + c * vj;
                }
            }
        }
        if (!rotated) break;
    }

    std::vector<double> norms(n);
    for (std::size_t c = 0; c < n; ++c) norms[c] = norm2(w[c]);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return norms[i] > norms[j]; });

    const std::size_t k = std::min(m, n);
    SingularSystem out;
    out.values.resize(k);
    out.right = DenseMatrix(n, n);
    out.left = DenseMatrix(m, k);
    for (std::size_t idx = 0; idx < n; ++idx) {
        const std::size_t c = order[idx];
        normalize_sign(vcols[c]);
        for (std::size_t r = 0; r < n; ++r) out.right(r, idx) = vcols[c][r];
        if (idx < k) {
            out.values[idx] = norms[c];
            if (norms[c] > 0.0) {
                // Recompute A·v after the sign flip so U stays paired with V.
                const auto av = a * std::span<const double>(vcols[c]);
                for (std::size_t r = 0; r < m; ++r) out.left(r, idx) = av[r] / norms[c];
            }
        }
    }
    return out;
}

std::size_t numerical_rank(std::span<const double> s, double rel_tol) {
    require(rel_tol > 0.0, "numerical_rank: rel_tol must be positive");
    require(std::is_sorted(s.begin(), s.end(), std::greater<>()), "numerical_rank: singular values not descending");
    if (s.empty() || s.front() == 0.0) return 0;
    const double cut = rel_tol * s.front();
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [cut](double x) { return x > cut; }));
}

DenseMatrix nullspace_basis(const DenseMatrix& a, double rel_tol) {
    const SingularSystem svd = singular_values(a);
    const std::size_t rank = numerical_rank(svd.values, rel_tol);
    const std::size_t n = a.cols();
    DenseMatrix basis(n, n - rank);
    for (std::size_t k = rank; k < n; ++k)
        for (std::size_t r = 0; r < n; ++r) basis(r, k - rank) = svd.right(r, k);
    return basis;
}

std::vector<double> solve_lower_triangular(const DenseMatrix& lower, std::span<const double> rhs) {
    require(lower.square(), "solve_lower_triangular: matrix is not square");
    require(lower.rows() == rhs.size(), "solve_lower_triangular: rhs length mismatch");
    const std::size_t n = lower.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            require(lower(i, j) == 0.0, "solve_lower_triangular: matrix is not lower triangular");

    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double diag = lower(i, i);
        if (diag == 0.0) {
            throw SingularSystemError("solve_lower_triangular: zero diagonal entry at row " + std::to_string(i));
        }
        double s = rhs[i];
        for (std::size_t j = 0; j < i; ++j) s -= lower(i, j) * x[j];
        x[i] = s / diag;
    }
    return x;
}

}  // namespace zerolocus
