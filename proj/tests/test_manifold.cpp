#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "zerolocus/calculus.hpp"
#include "zerolocus/construct.hpp"
#include "zerolocus/manifold.hpp"

using namespace zerolocus;
using zerolocus::testing::pick;
using zerolocus::testing::random_dataset;

namespace {

// p = 1, widths (2), d = 2: n = 7.
struct SmallFit {
    Dataset data{{{0.0}, {1.0}}, {{1.0}, {2.0}}};
    ExactFitCertificate cert = exact_fit_shallow(data, 2, Activation::smoolu());
};

ParamVector shifted(const ParamVector& theta, std::span<const double> dir, double t) {
    ParamVector out = theta;
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += t * dir[j];
    return out;
}

}  // namespace

TEST_CASE("classify_spectrum") {
    CHECK(classify_spectrum(std::vector<double>{-1, 0, 1}, 1e-8) == SpectrumCounts{1, 1, 1});
    CHECK(classify_spectrum(std::vector<double>(4, 0.0), 1e-8) == SpectrumCounts{0, 4, 0});
    CHECK(classify_spectrum(std::vector<double>{-1e-9, 1e-9}, 1e-8) == SpectrumCounts{0, 2, 0});
    CHECK_THROWS_AS(classify_spectrum(std::vector<double>{1, 0}, 1e-8), ContractViolation);
    CHECK_THROWS_AS(classify_spectrum(std::vector<double>{0, 1}, 0.0), ContractViolation);
}

TEST_CASE("spectrum at the n=7 exact fit") {
    const SmallFit fit;
    REQUIRE(param_count(fit.cert.spec) == 7);
    REQUIRE(loss(fit.cert.spec, fit.cert.params, fit.data) <= 1e-16);
    const SpectrumReport report = hessian_spectrum_at(fit.cert.spec, fit.cert.params, fit.data);
    CHECK(report.n == 7);
    CHECK(report.d == 2);
    CHECK(report.finite_difference.counts == SpectrumCounts{0, 5, 2});
    CHECK(report.gauss_newton.counts == SpectrumCounts{0, 5, 2});
    CHECK(report.finite_difference.eigenvalues.front() >= -1e-6 * report.finite_difference.eigenvalues.back());
    CHECK(report.max_deviation <= 1e-5 * report.gauss_newton.eigenvalues.back());
}

TEST_CASE("manifold_dimension") {
    const SmallFit fit;
    CHECK(manifold_dimension(fit.cert.spec, fit.cert.params, fit.data) == 5);

    // ℓ = 2, d = 3, widths (5, 5): n = 62, codimension 6.
    std::mt19937_64 rng(8);
    const Dataset data = random_dataset(rng, 3, 3, 2);
    const DeepFitCertificate deep = embed_deep(exact_fit_shallow(data, 6, Activation::smoolu()), data, {5, 5});
    REQUIRE(param_count(deep.spec) == 62);
    CHECK(manifold_dimension(deep.spec, deep.params, data) == 56);

    // A repeated point duplicates a row of J.
    std::mt19937_64 rng2(3);
    const Dataset unique = random_dataset(rng2, 4, 2, 1);
    const ExactFitCertificate cert = exact_fit_shallow(unique, 5, Activation::smoolu());
    Dataset doubled = unique;
    doubled.inputs.push_back(unique.inputs[1]);
    doubled.labels.push_back(unique.labels[1]);
    const std::size_t n = param_count(cert.spec);
    CHECK(manifold_dimension(cert.spec, cert.params, doubled) == n - (doubled.size() - 1));

    ParamVector off = fit.cert.params;
    off[6] += 1e-3;
    CHECK_THROWS_AS(manifold_dimension(fit.cert.spec, off, fit.data), NotOnManifoldError);
    try {
        manifold_dimension(fit.cert.spec, off, fit.data);
    } catch (const NotOnManifoldError& e) {
        CHECK(e.code() == "not_on_manifold");
        CHECK(e.kind() == ErrorKind::numerical);
        CHECK(e.loss_value() > 1e-16);
    }
}

TEST_CASE("tangent_basis") {
    const SmallFit fit;
    const MlpSpec& spec = fit.cert.spec;
    const ParamVector& theta = fit.cert.params;
    const DenseMatrix basis = tangent_basis(spec, theta, fit.data);
    REQUIRE(basis.cols() == 5);
    const DenseMatrix jac = jacobian_residuals(spec, theta, fit.data);
    const double s1 = singular_values(jac).values.front();
    const double h = 1e-5;
    for (std::size_t k = 0; k < basis.cols(); ++k) {
        const auto v = basis.column(k);
        CHECK(norm_inf(jac * std::span<const double>(v)) <= kDefaultRankTol * (1 + s1));
        const auto rp = residuals(spec, shifted(theta, v, h), fit.data);
        const auto rm = residuals(spec, shifted(theta, v, -h), fit.data);
        for (std::size_t i = 0; i < rp.size(); ++i) CHECK(std::abs((rp[i] - rm[i]) / (2 * h)) <= 1e-6);
    }
}

TEST_CASE("tangent and normal loss growth") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const Dataset data = random_dataset(rng, pick(rng, 2, 5), pick(rng, 1, 3), 1);
        const ExactFitCertificate cert = exact_fit_shallow(data, data.size(), Activation::smoolu());
        const MlpSpec& spec = cert.spec;
        const ParamVector& theta = cert.params;
        const DenseMatrix jac = jacobian_residuals(spec, theta, data);
        const SingularSystem svd = singular_values(jac);
        const DenseMatrix basis = tangent_basis(spec, theta, data);
        CAPTURE(trial);

        // Tangent: loss(θ + t·v)/t² shrinks at least 10× per decade of t.
        std::vector<double> v(theta.size(), 0.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t k = 0; k < basis.cols(); ++k) {
            const double c = normal(rng);
            for (std::size_t j = 0; j < v.size(); ++j) v[j] += c * basis(j, k);
        }
        const double len = norm2(v);
        for (double& x : v) x /= len;
        double previous = -1.0;
        for (double t : {1e-2, 1e-3, 1e-4}) {
            const double ratio = loss(spec, shifted(theta, v, t), data) / (t * t);
            if (previous >= 0.0) CHECK(ratio <= 0.1 * previous + 1e-24);
            previous = ratio;
        }

        // Normal: along a right singular vector with value s, loss ≈ s²t².
        for (std::size_t k = 0; k < data.size(); ++k) {
            const auto u = svd.right.column(k);
            const double s = svd.values[k];
            const double t = 1e-4;
            const double value = loss(spec, shifted(theta, u, t), data);
            CHECK(value == doctest::Approx(s * s * t * t).epsilon(0.2));
        }
    }
}

TEST_CASE("correct_to_manifold") {
    const SmallFit fit;
    const MlpSpec& spec = fit.cert.spec;
    const Correction same = correct_to_manifold(spec, fit.cert.params, fit.data);
    CHECK(same.iterations == 0);
    CHECK(same.params == fit.cert.params);

    const DenseMatrix jac = jacobian_residuals(spec, fit.cert.params, fit.data);
    for (std::size_t row = 0; row < jac.rows(); ++row) {
        std::vector<double> dir(jac.row(row).begin(), jac.row(row).end());
        const double len = norm2(dir);
        for (double& x : dir) x /= len;
        const Correction c = correct_to_manifold(spec, shifted(fit.cert.params, dir, 1e-3), fit.data);
        CHECK(c.iterations >= 1);
        CHECK(c.iterations <= 10);
        CHECK(c.residual_inf <= 1e-12);
        CHECK(norm_inf(residuals(spec, c.params, fit.data)) <= 1e-12);
    }

    // Duplicate point: J is rank deficient but the system stays consistent.
    Dataset doubled = fit.data;
    doubled.inputs.push_back(fit.data.inputs[0]);
    doubled.labels.push_back(fit.data.labels[0]);
    ParamVector moved = fit.cert.params;
    moved[6] += 1e-3;
    const Correction dup = correct_to_manifold(spec, moved, doubled);
    CHECK(dup.residual_inf <= 1e-12);

    // Dead hidden layer: only the output bias moves, distinct labels stay unfit.
    bool failed = false;
    try {
        correct_to_manifold(spec, ParamVector::zeros(spec), fit.data);
    } catch (const NumericalError& e) {
        CHECK(std::string(e.code()) == "corrector_failure");
        failed = true;
    }
    CHECK(failed);
}

TEST_CASE("walk_manifold") {
    const SmallFit fit;
    const MlpSpec& spec = fit.cert.spec;

    WalkOptions zero;
    zero.steps = 0;
    const ManifoldPath empty = walk_manifold(spec, fit.cert.params, fit.data, zero);
    CHECK(empty.points.size() == 1);
    CHECK(empty.points[0] == fit.cert.params);
    CHECK(empty.arc_length() == 0.0);

    const ManifoldPath path = walk_manifold(spec, fit.cert.params, fit.data);
    CHECK(path.completed);
    CHECK(path.failure.empty());
    CHECK(path.points.size() == 101);
    CHECK(path.max_loss() <= 1e-16);
    CHECK(path.no_backtrack);
    CHECK(path.arc_length() >= 0.5 * 100 * 1e-2);
    CHECK(path.displacement() >= 0.3);

    // Data labels stay fixed while held-out outputs move.
    const std::vector<double> probe{0.5};
    const double start = forward(spec, path.points.front(), probe)[0];
    double drift = 0.0;
    for (const ParamVector& theta : path.points) {
        for (std::size_t i = 0; i < fit.data.size(); ++i)
            CHECK(std::abs(forward(spec, theta, fit.data.inputs[i])[0] - fit.data.labels[i][0]) <= 1e-7);
        drift = std::max(drift, std::abs(forward(spec, theta, probe)[0] - start));
    }
    CHECK(drift > 1e-3);

    ParamVector off = fit.cert.params;
    off[0] += 1e-2;
    CHECK_THROWS_AS(walk_manifold(spec, off, fit.data), NotOnManifoldError);
    WalkOptions bad;
    bad.step_size = 0.0;
    CHECK_THROWS_AS(walk_manifold(spec, fit.cert.params, fit.data, bad), ContractViolation);
}
