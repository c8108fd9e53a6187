#include "zerolocus/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#if ZEROLOCUS_HAVE_QUADMATH
#include <quadmath.h>
#endif

namespace zerolocus {

namespace {

void check_dims(const MlpSpec& spec, const ParamVector& theta, const Dataset& data) {
    spec.validate();
    data.validate_shape();
    require(data.input_dim() == spec.input_dim, "dataset input dimension does not match the network");
    require(data.output_dim() == spec.output_dim, "dataset label dimension does not match the network");
    require(theta.size() == param_count(spec), "parameter vector length does not match the network");
}

// Adds seedᵀ·∂(output)/∂θ into grad, walking the layers backwards.
void accumulate_vjp(const MlpSpec& spec, const std::vector<LayerSlice>& layers, const ParamVector& theta,
                    const ForwardTrace& trace, std::span<const double> seed, std::span<double> grad) {
    std::vector<double> delta(seed.begin(), seed.end());
    for (std::size_t t = layers.size(); t-- > 0;) {
        const LayerSlice& layer = layers[t];
        const std::vector<double>& in = trace.post[t];
        for (std::size_t u = 0; u < layer.out; ++u) {
            const double du = delta[u];
            if (du == 0.0) continue;
            for (std::size_t i = 0; i < layer.in; ++i) grad[layer.weight(u, i)] += du * in[i];
            grad[layer.bias(u)] += du;
        }
        if (t == 0) break;
        std::vector<double> back(layer.in, 0.0);
        for (std::size_t u = 0; u < layer.out; ++u) {
            const double du = delta[u];
            if (du == 0.0) continue;
            for (std::size_t i = 0; i < layer.in; ++i) back[i] += theta[layer.weight(u, i)] * du;
        }
        const std::vector<double>& pre = trace.pre[t - 1];
        for (std::size_t i = 0; i < layer.in; ++i) back[i] *= spec.activation.derivative(pre[i]);
        delta = std::move(back);
    }
}

// Extended-precision loss for the finite-difference reference in
// grad_check. Kept separate from forward() so the check does not reuse the
// code path it verifies. Quad precision where available: at L ~ 30 the
// long double rounding of L alone is ~1e-12 after dividing by 2h.
#if ZEROLOCUS_HAVE_QUADMATH
__extension__ typedef __float128 Wide;
Wide wide_exp(Wide x) { return expq(x); }
Wide wide_abs(Wide x) { return fabsq(x); }
#else
using Wide = long double;
Wide wide_exp(Wide x) { return std::exp(x); }
Wide wide_abs(Wide x) { return std::abs(x); }
#endif

Wide activation_extended(const Activation& act, Wide x) {
    if (!(x > 0)) return 0;
    if (act.kind() == Activation::Kind::smoolu) {
        if (x < Wide(1e-300)) return 0;
        return x * wide_exp(-1 / x);
    }
    const Wide k = act.knee_width();
    return x < k ? x * x / (2 * k) : x - k / 2;
}

Wide loss_extended(const MlpSpec& spec, const std::vector<Wide>& theta, const Dataset& data) {
    const auto layers = layer_layout(spec);
    Wide total = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::vector<Wide> in(data.inputs[i].begin(), data.inputs[i].end());
        for (std::size_t t = 0; t < layers.size(); ++t) {
            const LayerSlice& layer = layers[t];
            std::vector<Wide> out(layer.out);
            for (std::size_t u = 0; u < layer.out; ++u) {
                Wide z = theta[layer.bias(u)];
                for (std::size_t j = 0; j < layer.in; ++j) z += theta[layer.weight(u, j)] * in[j];
                out[u] = t + 1 < layers.size() ? activation_extended(spec.activation, z) : z;
            }
            in = std::move(out);
        }
        for (std::size_t k = 0; k < in.size(); ++k) {
            const Wide r = in[k] - Wide(data.labels[i][k]);
            total += r * r;
        }
    }
    return total;
}

}  // namespace

std::vector<double> residuals(const MlpSpec& spec, const ParamVector& theta, const Dataset& data) {
    check_dims(spec, theta, data);
    const std::size_t l = spec.output_dim;
    std::vector<double> r(data.size() * l);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto out = forward(spec, theta, data.inputs[i]);
        for (std::size_t k = 0; k < l; ++k) r[i * l + k] = out[k] - data.labels[i][k];
    }
    return r;
}

double loss_of_residuals(std::span<const double> r, double exponent) {
    require(exponent >= 1.0, "loss: exponent must be >= 1");
    double s = 0.0;
    if (exponent == 2.0) {
        for (double x : r) s += x * x;
    } else if (exponent == 1.0) {
        for (double x : r) s += std::abs(x);
    } else {
        for (double x : r) s += std::pow(std::abs(x), exponent);
    }
    return s;
}

double loss(const MlpSpec& spec, const ParamVector& theta, const Dataset& data, double exponent) {
    require(exponent >= 1.0, "loss: exponent must be >= 1");
    return loss_of_residuals(residuals(spec, theta, data), exponent);
}

std::vector<double> grad_loss(const MlpSpec& spec, const ParamVector& theta, const Dataset& data) {
    check_dims(spec, theta, data);
    const auto layers = layer_layout(spec);
    const std::size_t l = spec.output_dim;
    std::vector<double> grad(theta.size(), 0.0);
    std::vector<double> seed(l);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const ForwardTrace trace = forward_trace(spec, theta, data.inputs[i]);
        const auto out = trace.output();
        for (std::size_t k = 0; k < l; ++k) seed[k] = 2.0 * (out[k] - data.labels[i][k]);
        accumulate_vjp(spec, layers, theta, trace, seed, grad);
    }
    return grad;
}

DenseMatrix jacobian_residuals(const MlpSpec& spec, const ParamVector& theta, const Dataset& data) {
    check_dims(spec, theta, data);
    const auto layers = layer_layout(spec);
    const std::size_t l = spec.output_dim;
    DenseMatrix jac(data.size() * l, theta.size());
    std::vector<double> seed(l, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const ForwardTrace trace = forward_trace(spec, theta, data.inputs[i]);
        for (std::size_t k = 0; k < l; ++k) {
            seed.assign(l, 0.0);
            seed[k] = 1.0;
            accumulate_vjp(spec, layers, theta, trace, seed, jac.row(i * l + k));
        }
    }
    return jac;
}

DenseMatrix hessian_loss(const MlpSpec& spec, const ParamVector& theta, const Dataset& data) {
    check_dims(spec, theta, data);
    const std::size_t n = theta.size();
    DenseMatrix h(n, n);
    ParamVector probe = theta;
    for (std::size_t j = 0; j < n; ++j) {
        const double step = 6e-6 * (1.0 + std::abs(theta[j]));
        probe[j] = theta[j] + step;
        const auto gp = grad_loss(spec, probe, data);
        probe[j] = theta[j] - step;
        const auto gm = grad_loss(spec, probe, data);
        probe[j] = theta[j];
        // Divide by the steps actually represented in floating point.
        const double width = (theta[j] + step) - (theta[j] - step);
        for (std::size_t i = 0; i < n; ++i) h(i, j) = (gp[i] - gm[i]) / width;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) h(i, j) = h(j, i) = 0.5 * (h(i, j) + h(j, i));
    return h;
}

DenseMatrix gauss_newton_hessian(const DenseMatrix& jacobian) {
    DenseMatrix g = gram(jacobian);
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (double& x : g.row(i)) x *= 2.0;
    return g;
}

DenseMatrix gauss_newton_hessian(const MlpSpec& spec, const ParamVector& theta, const Dataset& data) {
    return gauss_newton_hessian(jacobian_residuals(spec, theta, data));
}

double grad_check(const MlpSpec& spec, const ParamVector& theta, const Dataset& data) {
    return grad_check(spec, theta, data, [&](const ParamVector& t) { return grad_loss(spec, t, data); });
}

double grad_check(const MlpSpec& spec, const ParamVector& theta, const Dataset& data, const GradientFn& gradient) {
    check_dims(spec, theta, data);
    const auto analytic = gradient(theta);
    require(analytic.size() == theta.size(), "grad_check: gradient length mismatch");
    std::vector<Wide> probe(theta.values().begin(), theta.values().end());
    double worst = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const Wide step = Wide(1e-6) * (1 + wide_abs(theta[j]));
        probe[j] = Wide(theta[j]) + step;
        const Wide lp = loss_extended(spec, probe, data);
        probe[j] = Wide(theta[j]) - step;
        const Wide lm = loss_extended(spec, probe, data);
        probe[j] = theta[j];
        const double fd = static_cast<double>((lp - lm) / (2 * step));
        const double denom = std::max({std::abs(fd), std::abs(analytic[j]), 1e-8});
        worst = std::max(worst, std::abs(fd - analytic[j]) / denom);
    }
    return worst;
}

namespace {

std::string divergence_message(std::size_t iteration, double loss_value) {
    std::ostringstream out;
    out.precision(17);
    out << "gradient descent diverged at iteration " << iteration << " (loss " << loss_value << ")";
    return out.str();
}

}  // namespace

DivergenceError::DivergenceError(std::size_t iteration, double loss_value)
    : NumericalError("divergence", divergence_message(iteration, loss_value)), iteration_(iteration), loss_(loss_value) {}

TrainResult train_gd(const MlpSpec& spec, const ParamVector& theta0, const Dataset& data, const TrainOptions& options) {
    check_dims(spec, theta0, data);
    require(options.learning_rate >= 0.0 && std::isfinite(options.learning_rate), "train_gd: learning rate must be >= 0");

    TrainResult result;
    result.params = theta0;
    for (std::size_t iter = 0;; ++iter) {
        const double value = loss(spec, result.params, data);
        result.trace.push_back(value);
        if (!std::isfinite(value) || value > kDivergenceThreshold) throw DivergenceError(iter, value);
        if (value <= options.target_loss) {
            result.converged = true;
            break;
        }
        if (iter == options.max_iters) break;
        const auto g = grad_loss(spec, result.params, data);
        for (std::size_t j = 0; j < g.size(); ++j) result.params[j] -= options.learning_rate * g[j];
        result.iterations = iter + 1;
    }
    return result;
}

}  // namespace zerolocus
