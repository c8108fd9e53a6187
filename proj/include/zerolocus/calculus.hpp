#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "zerolocus/errors.hpp"
#include "zerolocus/linalg.hpp"
#include "zerolocus/network.hpp"

namespace zerolocus {

/// Loss above this (or non-finite) aborts training.
inline constexpr double kDivergenceThreshold = 1e12;

/// H(θ): entry i·ℓ + k is forward(θ, x_i)_k − (y_i)_k.
std::vector<double> residuals(const MlpSpec& spec, const ParamVector& theta, const Dataset& data);

/// Σ |r|^a over residual entries. a = 2 is the squared loss, a = 1 the absolute loss.
double loss_of_residuals(std::span<const double> r, double exponent = 2.0);
double loss(const MlpSpec& spec, const ParamVector& theta, const Dataset& data, double exponent = 2.0);

/// Analytic gradient of the squared loss by reverse accumulation.
std::vector<double> grad_loss(const MlpSpec& spec, const ParamVector& theta, const Dataset& data);

/// ℓd × n derivative of H, one reverse sweep per row.
DenseMatrix jacobian_residuals(const MlpSpec& spec, const ParamVector& theta, const Dataset& data);

/// Hessian of the squared loss by central differences of grad_loss,
/// step 6e-6·(1+|θ_i|), symmetrized.
DenseMatrix hessian_loss(const MlpSpec& spec, const ParamVector& theta, const Dataset& data);

/// 2·JᵀJ, the exact Hessian wherever all residuals vanish.
DenseMatrix gauss_newton_hessian(const DenseMatrix& jacobian);
DenseMatrix gauss_newton_hessian(const MlpSpec& spec, const ParamVector& theta, const Dataset& data);

using GradientFn = std::function<std::vector<double>(const ParamVector&)>;

/// Max over coordinates of |g_an − g_fd| / max(|g_fd|, |g_an|, 1e-8), with
/// g_fd from central differences of the loss (step 1e-6·(1+|θ_i|)),
/// evaluated in quad (or long double) precision.
double grad_check(const MlpSpec& spec, const ParamVector& theta, const Dataset& data);
/// Same check against a caller-supplied gradient.
double grad_check(const MlpSpec& spec, const ParamVector& theta, const Dataset& data, const GradientFn& gradient);

class DivergenceError : public NumericalError {
public:
    DivergenceError(std::size_t iteration, double loss_value);
    std::size_t iteration() const noexcept { return iteration_; }
    double loss_value() const noexcept { return loss_; }

private:
    std::size_t iteration_;
    double loss_;
};

struct TrainOptions {
    double learning_rate = 1e-2;
    std::size_t max_iters = 1000;
    double target_loss = 1e-8;
};

struct TrainResult {
    ParamVector params;
    std::vector<double> trace;  // loss before each update, plus the final loss
    std::size_t iterations = 0; // updates applied
    bool converged = false;
};

/// Plain gradient descent θ ← θ − lr·∇L. Throws DivergenceError when the
/// loss exceeds kDivergenceThreshold or becomes non-finite.
TrainResult train_gd(const MlpSpec& spec, const ParamVector& theta0, const Dataset& data, const TrainOptions& options);

}  // namespace zerolocus
