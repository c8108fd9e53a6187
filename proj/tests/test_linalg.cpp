#include <cmath>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "zerolocus/errors.hpp"
#include "zerolocus/linalg.hpp"

using namespace zerolocus;
using zerolocus::testing::random_matrix;
using zerolocus::testing::random_symmetric;

namespace {

double eig_residual(const DenseMatrix& a, const Spectrum& s) {
    double worst = 0.0;
    const DenseMatrix& v = *s.eigenvectors;
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const auto col = v.column(k);
        const auto av = a * std::span<const double>(col);
        for (std::size_t i = 0; i < a.rows(); ++i) worst = std::max(worst, std::abs(av[i] - s.eigenvalues[k] * col[i]));
    }
    return worst;
}

double orthonormality_error(const DenseMatrix& cols) {
    const DenseMatrix g = gram(cols);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) worst = std::max(worst, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
    return worst;
}

}  // namespace

TEST_CASE("eig_sym on hand-checkable matrices") {
    auto id = eig_sym(DenseMatrix::identity(3));
    CHECK(id.eigenvalues == std::vector<double>{1.0, 1.0, 1.0});

    auto diag = eig_sym(DenseMatrix{{-2, 0, 0}, {0, 0, 0}, {0, 0, 5}});
    CHECK(diag.eigenvalues == std::vector<double>{-2.0, 0.0, 5.0});

    // det([[2-λ,1],[1,2-λ]]) = (λ-1)(λ-3)
    const DenseMatrix two{{2, 1}, {1, 2}};
    auto s = eig_sym(two);
    CHECK(s.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.eigenvalues[1] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(eig_residual(two, s) <= 1e-12);
}

TEST_CASE("eig_sym rejects bad input") {
    CHECK_THROWS_AS(eig_sym(DenseMatrix(2, 3)), ContractViolation);
    CHECK_THROWS_AS(eig_sym(DenseMatrix{{1, 2}, {0, 1}}), ContractViolation);
    CHECK_THROWS_AS(eig_sym(DenseMatrix(0, 0)), ContractViolation);
}

TEST_CASE("eig_sym properties on random symmetric matrices") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = zerolocus::testing::pick(rng, 1, 40);
        const DenseMatrix a = random_symmetric(rng, n);
        const Spectrum s = eig_sym(a);
        CHECK(std::is_sorted(s.eigenvalues.begin(), s.eigenvalues.end()));
        CHECK(eig_residual(a, s) <= 1e-9 * (1.0 + a.inf_norm()));
        CHECK(orthonormality_error(*s.eigenvectors) <= 1e-10);

        double trace = 0.0, sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) trace += a(i, i);
        for (double l : s.eigenvalues) sum += l;
        CHECK(std::abs(sum - trace) <= 1e-9 * (1.0 + std::abs(trace)));

        // V·diag(λ)·Vᵀ reconstructs A.
        const DenseMatrix& v = *s.eigenvectors;
        DenseMatrix scaled = v;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) scaled(r, c) *= s.eigenvalues[c];
        const DenseMatrix diff = scaled * v.transposed() - a;
        CHECK(diff.frobenius_norm() <= 1e-8 * a.frobenius_norm());
    }
}

TEST_CASE("singular_values examples") {
    auto z = singular_values(DenseMatrix(2, 3));
    CHECK(z.values == std::vector<double>{0.0, 0.0});

    auto id = singular_values(DenseMatrix::identity(4));
    CHECK(id.values == std::vector<double>{1.0, 1.0, 1.0, 1.0});

    auto tall = singular_values(DenseMatrix{{3, 0}, {0, 4}, {0, 0}});
    REQUIRE(tall.values.size() == 2);
    CHECK(tall.values[0] == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(tall.values[1] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("singular_values satisfy the AᵀA eigen relation") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = zerolocus::testing::pick(rng, 1, 12);
        const std::size_t n = zerolocus::testing::pick(rng, 1, 30);
        const DenseMatrix a = random_matrix(rng, m, n);
        const auto svd = singular_values(a);
        REQUIRE(svd.values.size() == std::min(m, n));
        CHECK(std::is_sorted(svd.values.begin(), svd.values.end(), std::greater<>()));
        CHECK(orthonormality_error(svd.right) <= 1e-10);
        const DenseMatrix ata = gram(a);
        const double s1 = svd.values.front();
        for (std::size_t k = 0; k < svd.values.size(); ++k) {
            const auto v = svd.right.column(k);
            const auto w = ata * std::span<const double>(v);
            double err = 0.0;
            for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(w[i] - svd.values[k] * svd.values[k] * v[i]));
            CHECK(err <= 1e-9 * (1.0 + s1 * s1));
        }
    }
}

TEST_CASE("numerical_rank thresholds relative to the largest value") {
    CHECK(numerical_rank(std::vector<double>{5, 3, 1e-14}, 1e-10) == 2);
    CHECK(numerical_rank(std::vector<double>{0, 0}, 1e-3) == 0);
    CHECK(numerical_rank(std::vector<double>{1, 1e-9, 1e-12}, 1e-10) == 2);
    CHECK_THROWS_AS(numerical_rank(std::vector<double>{1, 2}, 1e-10), ContractViolation);
    CHECK_THROWS_AS(numerical_rank(std::vector<double>{1}, 0.0), ContractViolation);
}

TEST_CASE("nullspace_basis examples") {
    CHECK(nullspace_basis(DenseMatrix::identity(4)).cols() == 0);

    const DenseMatrix zero(2, 3);
    const DenseMatrix zb = nullspace_basis(zero);
    CHECK(zb.cols() == 3);
    CHECK(orthonormality_error(zb) <= 1e-12);

    const DenseMatrix ones{{1, 1}};
    const DenseMatrix ob = nullspace_basis(ones);
    REQUIRE(ob.cols() == 1);
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(std::abs(ob(0, 0)) - r) <= 1e-14);
    CHECK(ob(1, 0) == doctest::Approx(-ob(0, 0)).epsilon(1e-14));
}

TEST_CASE("nullspace_basis size plus rank equals column count") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = zerolocus::testing::pick(rng, 1, 8);
        const std::size_t n = zerolocus::testing::pick(rng, 1, 20);
        const std::size_t k = zerolocus::testing::pick(rng, 1, std::min(m, n));
        // Rank-k product.
        const DenseMatrix a = random_matrix(rng, m, k) * random_matrix(rng, k, n);
        const auto svd = singular_values(a);
        const std::size_t rank = numerical_rank(svd.values, kDefaultRankTol);
        const DenseMatrix basis = nullspace_basis(a);
        CHECK(rank == k);
        CHECK(basis.cols() + rank == n);
        if (basis.cols() > 0) CHECK(orthonormality_error(basis) <= 1e-10);
        for (std::size_t c = 0; c < basis.cols(); ++c) {
            const auto v = basis.column(c);
            CHECK(norm_inf(a * std::span<const double>(v)) <= kDefaultRankTol * (1.0 + svd.values.front()));
        }
    }
}

TEST_CASE("solve_lower_triangular") {
    CHECK(solve_lower_triangular(DenseMatrix::identity(2), std::vector<double>{7, -1}) == std::vector<double>{7, -1});
    // 2·x₁ = 2, x₁ + x₂ = 3
    CHECK(solve_lower_triangular(DenseMatrix{{2, 0}, {1, 1}}, std::vector<double>{2, 3}) == std::vector<double>{1, 2});
    CHECK_THROWS_AS(solve_lower_triangular(DenseMatrix{{1, 0}, {1, 0}}, std::vector<double>{1, 1}), SingularSystemError);
    CHECK_THROWS_AS(solve_lower_triangular(DenseMatrix{{1, 1}, {0, 1}}, std::vector<double>{1, 1}), ContractViolation);

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = zerolocus::testing::pick(rng, 1, 30);
        DenseMatrix l = random_matrix(rng, n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) l(i, j) = 0.0;
            l(i, i) = 2.0 + std::abs(l(i, i)) + static_cast<double>(i);
        }
        std::vector<double> x(n);
        std::uniform_real_distribution<double> u(-1, 1);
        for (double& v : x) v = u(rng);
        const auto b = l * std::span<const double>(x);
        const auto solved = solve_lower_triangular(l, b);
        std::vector<double> diff(n);
        for (std::size_t i = 0; i < n; ++i) diff[i] = solved[i] - x[i];
        CHECK(norm2(diff) <= 1e-10 * norm2(x));
        const auto back = l * std::span<const double>(solved);
        for (std::size_t i = 0; i < n; ++i) diff[i] = back[i] - b[i];
        CHECK(norm2(diff) <= 1e-12 * norm2(b));
    }
}
