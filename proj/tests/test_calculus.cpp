#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "zerolocus/calculus.hpp"
#include "zerolocus/construct.hpp"

using namespace zerolocus;
using zerolocus::testing::pick;
using zerolocus::testing::random_dataset;

namespace {

struct Triple {
    MlpSpec spec;
    ParamVector theta;
    Dataset data;
};

// Random small instance with n <= 100.
Triple random_triple(std::mt19937_64& rng, std::uint64_t seed) {
    for (;;) {
        const std::size_t p = pick(rng, 1, 3);
        const std::size_t l = pick(rng, 1, 2);
        std::vector<std::size_t> widths{pick(rng, 1, 6)};
        if (pick(rng, 0, 1) == 1) widths.push_back(pick(rng, 1, 5));
        const Activation act = pick(rng, 0, 2) == 0 ? Activation::smoothed_relu(0.5) : Activation::smoolu();
        MlpSpec spec{p, widths, l, act};
        if (param_count(spec) > 100) continue;
        Dataset data = random_dataset(rng, pick(rng, 1, 6), p, l, -2.0, 2.0);
        return {spec, init_params(spec, seed, 1.5), std::move(data)};
    }
}

}  // namespace

TEST_CASE("residuals and losses") {
    const MlpSpec spec{1, {2}, 1};
    const Dataset zeros{{{0.5}, {1.5}}, {{0.0}, {0.0}}};
    CHECK(residuals(spec, ParamVector::zeros(spec), zeros) == std::vector<double>{0.0, 0.0});

    const Dataset one{{{0.5}}, {{2.0}}};
    const ParamVector theta(std::vector<double>{1, 1, 0, 0, 1, 1, 0});
    const double f = forward(spec, theta, std::vector<double>{0.5})[0];
    CHECK(residuals(spec, theta, one)[0] == f - 2.0);

    CHECK(loss_of_residuals(std::vector<double>{0, 0}) == 0.0);
    CHECK(loss_of_residuals(std::vector<double>{1, -2}, 2.0) == 5.0);
    CHECK(loss_of_residuals(std::vector<double>{1, -2}, 1.0) == 3.0);
    CHECK(loss_of_residuals(std::vector<double>{1, -2}, 3.0) == doctest::Approx(9.0));
    CHECK_THROWS_AS(loss_of_residuals(std::vector<double>{1}, 0.5), ContractViolation);
    CHECK_THROWS_AS(residuals(MlpSpec{2, {2}, 1}, ParamVector::zeros(spec), one), ContractViolation);
}

TEST_CASE("residual ordering is point-major") {
    const MlpSpec spec{1, {1}, 2};
    const Dataset data{{{1.0}, {2.0}}, {{1.0, 2.0}, {3.0, 4.0}}};
    CHECK(residuals(spec, ParamVector::zeros(spec), data) == std::vector<double>{-1, -2, -3, -4});
}

TEST_CASE("gradient of a net whose hidden unit sits in the linear regime") {
    // Smoothed ReLU with knee 0.1 is z − 0.05 for z >= 0.1, so with x >= 0.1
    // f = w₂(w₁x + b₁ − 0.05) + b₂ and ∂f/∂(w₁,b₁,w₂,b₂) = (w₂x, w₂, w₁x+b₁−0.05, 1).
    const MlpSpec spec{1, {1}, 1, Activation::smoothed_relu(0.1)};
    const double w1 = 0.8, b1 = 0.3, w2 = -1.2, b2 = 0.4;
    const ParamVector theta(std::vector<double>{w1, b1, w2, b2});
    const Dataset data{{{0.5}, {1.0}, {2.0}}, {{0.1}, {-0.2}, {0.7}}};
    std::vector<double> expected(4, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double x = data.inputs[i][0];
        const double h = w1 * x + b1 - 0.05;
        const double r = w2 * h + b2 - data.labels[i][0];
        expected[0] += 2 * r * w2 * x;
        expected[1] += 2 * r * w2;
        expected[2] += 2 * r * h;
        expected[3] += 2 * r;
    }
    const auto g = grad_loss(spec, theta, data);
    for (std::size_t j = 0; j < 4; ++j) CHECK(g[j] == doctest::Approx(expected[j]).epsilon(1e-13));

    // Duplicating the first point doubles its contribution.
    Dataset doubled = data;
    doubled.inputs.push_back(data.inputs[0]);
    doubled.labels.push_back(data.labels[0]);
    const Dataset first{{data.inputs[0]}, {data.labels[0]}};
    const auto g1 = grad_loss(spec, theta, first);
    const auto g2 = grad_loss(spec, theta, doubled);
    for (std::size_t j = 0; j < 4; ++j) CHECK(g2[j] == doctest::Approx(g[j] + g1[j]).epsilon(1e-13));
}

TEST_CASE("dead hidden units leave only output-bias columns in J") {
    const MlpSpec spec{2, {3}, 2};
    ParamVector theta = init_params(spec, 2, 1.0);
    const auto layers = layer_layout(spec);
    for (std::size_t u = 0; u < 3; ++u) {
        theta[layers[0].weight(u, 0)] = 0.1;
        theta[layers[0].weight(u, 1)] = -0.1;
        theta[layers[0].bias(u)] = -5.0;  // pre-activation < −1 on the data below
    }
    const Dataset data{{{1.0, 1.0}, {-2.0, 3.0}}, {{0.0, 1.0}, {2.0, 3.0}}};
    const DenseMatrix jac = jacobian_residuals(spec, theta, data);
    REQUIRE(jac.rows() == 4);
    for (std::size_t r = 0; r < jac.rows(); ++r) {
        for (std::size_t c = 0; c < jac.cols(); ++c) {
            const bool own_bias = c == layers[1].bias(r % 2);
            CHECK(jac(r, c) == (own_bias ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("grad_check and 2Jᵀr on random triples") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const Triple t = random_triple(rng, trial);
        CHECK(grad_check(t.spec, t.theta, t.data) <= 1e-6);

        const auto g = grad_loss(t.spec, t.theta, t.data);
        const auto r = residuals(t.spec, t.theta, t.data);
        const DenseMatrix jac = jacobian_residuals(t.spec, t.theta, t.data);
        const auto jtr = jac.transposed() * std::span<const double>(r);
        double err = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) err = std::max(err, std::abs(g[j] - 2 * jtr[j]));
        CHECK(err <= 1e-10 * std::max(1.0, norm_inf(g)));
    }
}

TEST_CASE("grad_check negative controls") {
    const MlpSpec spec{1, {2}, 1};
    const Dataset zeros{{{0.5}, {1.5}}, {{0.0}, {0.0}}};
    CHECK(grad_check(spec, ParamVector::zeros(spec), zeros) == 0.0);

    std::mt19937_64 rng(7);
    const Triple t = random_triple(rng, 3);
    const double corrupted = grad_check(t.spec, t.theta, t.data, [&](const ParamVector& th) {
        auto g = grad_loss(t.spec, th, t.data);
        g[0] += 0.1 * (1.0 + std::abs(g[0]));
        return g;
    });
    CHECK(corrupted >= 1e-2);
}

TEST_CASE("loss and gradient do not depend on dataset order") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const Triple t = random_triple(rng, 100 + trial);
        Dataset shuffled = t.data;
        std::vector<std::size_t> perm(t.data.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < perm.size(); ++i) {
            shuffled.inputs[i] = t.data.inputs[perm[i]];
            shuffled.labels[i] = t.data.labels[perm[i]];
        }
        const double l1 = loss(t.spec, t.theta, t.data);
        CHECK(std::abs(loss(t.spec, t.theta, shuffled) - l1) <= 1e-12 * std::max(1.0, l1));
        const auto g1 = grad_loss(t.spec, t.theta, t.data);
        const auto g2 = grad_loss(t.spec, t.theta, shuffled);
        for (std::size_t j = 0; j < g1.size(); ++j) CHECK(std::abs(g1[j] - g2[j]) <= 1e-12 * std::max(1.0, norm_inf(g1)));
    }
}

TEST_CASE("squared and absolute losses vanish together") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const Triple t = random_triple(rng, 300 + trial);
        const double l2 = loss(t.spec, t.theta, t.data, 2.0);
        const double l1 = loss(t.spec, t.theta, t.data, 1.0);
        CHECK(l2 >= 0.0);
        CHECK((l2 == 0.0) == (l1 == 0.0));
    }
    const MlpSpec spec{1, {2}, 1};
    const Dataset zeros{{{0.5}, {1.5}}, {{0.0}, {0.0}}};
    CHECK(loss(spec, ParamVector::zeros(spec), zeros, 1.0) == 0.0);
    CHECK(loss(spec, ParamVector::zeros(spec), zeros, 2.0) == 0.0);
}

TEST_CASE("finite-difference Hessian") {
    // One linear parameter: with w₁=1, b₁=k/2 and x >= k/2 the hidden unit
    // outputs exactly x, so ∂²L/∂w₂² = 2·Σx_i².
    const MlpSpec spec{1, {1}, 1, Activation::smoothed_relu(0.1)};
    const ParamVector theta(std::vector<double>{1.0, 0.05, 0.3, -0.2});
    const Dataset data{{{0.5}, {1.0}, {2.0}}, {{1.0}, {0.0}, {-1.0}}};
    const DenseMatrix h = hessian_loss(spec, theta, data);
    CHECK(h(2, 2) == doctest::Approx(2.0 * (0.25 + 1.0 + 4.0)).epsilon(1e-7));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(h(i, j) == h(j, i));
}

TEST_CASE("FD Hessian matches 2JᵀJ at a zero-loss point") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 5; ++trial) {
        const Dataset data = random_dataset(rng, pick(rng, 1, 6), pick(rng, 1, 3), 1);
        const auto cert = exact_fit_shallow(data, data.size(), Activation::smoolu(), {.seed = 40u + trial});
        REQUIRE(loss(cert.spec, cert.params, data) <= 1e-16);
        const DenseMatrix fd = hessian_loss(cert.spec, cert.params, data);
        const DenseMatrix gn = gauss_newton_hessian(cert.spec, cert.params, data);
        CHECK((fd - gn).frobenius_norm() <= 1e-5 * (1.0 + gn.frobenius_norm()));
    }
}

TEST_CASE("train_gd") {
    const MlpSpec spec{1, {8}, 1};
    std::mt19937_64 rng(2);
    const Dataset data = random_dataset(rng, 3, 1, 1, -1.0, 1.0);

    SUBCASE("already at an exact fit") {
        const auto cert = exact_fit_shallow(data, 8, Activation::smoolu());
        const auto res = train_gd(spec, cert.params, data, {.learning_rate = 0.1, .max_iters = 50, .target_loss = 1e-12});
        CHECK(res.converged);
        CHECK(res.iterations == 0);
        CHECK(res.trace.size() == 1);
    }
    SUBCASE("zero learning rate leaves θ unchanged") {
        const ParamVector theta0 = init_params(spec, 5, 1.0);
        const auto res = train_gd(spec, theta0, data, {.learning_rate = 0.0, .max_iters = 20, .target_loss = 0.0});
        CHECK(res.params == theta0);
        CHECK(res.trace.size() == 21);
        CHECK_FALSE(res.converged);
    }
    SUBCASE("divergence is reported with the iteration index") {
        const ParamVector theta0 = init_params(spec, 5, 1.0);
        try {
            train_gd(spec, theta0, data, {.learning_rate = 1e3, .max_iters = 1000, .target_loss = 0.0});
            FAIL("expected divergence");
        } catch (const DivergenceError& e) {
            CHECK(e.iteration() > 0);
            CHECK(e.iteration() <= 1000);
        }
    }
    SUBCASE("loss decreases with a small learning rate") {
        const ParamVector theta0 = init_params(spec, 5, 1.0);
        const auto res = train_gd(spec, theta0, data, {.learning_rate = 1e-2, .max_iters = 2000, .target_loss = 0.0});
        CHECK(res.trace.size() <= 2001);
        CHECK(res.trace.back() < res.trace.front());
    }
}
