#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace zerolocus {

/// Smooth rectified activation: identically zero on (-inf, 0], strictly
/// increasing on (0, inf).
class Activation {
public:
    enum class Kind { smoolu, smoothed_relu };

    /// x·exp(-1/x) for x > 0, 0 otherwise.
    static Activation smoolu() { return Activation(Kind::smoolu, 0.0); }

    /// ReLU with the corner replaced by a quadratic on (0, k):
    ///   x <= 0      -> 0
    ///   0 < x < k   -> x² / (2k)
    ///   x >= k      -> x - k/2
    /// so value k/2 and slope 1 at the knee; C¹ everywhere.
    static Activation smoothed_relu(double knee_width);

    /// Parses "smoolu" or "smoothed-relu:<k>".
    static Activation parse(const std::string& tag);

    Kind kind() const noexcept { return kind_; }
    double knee_width() const noexcept { return knee_; }
    std::string tag() const;

    double operator()(double x) const noexcept;
    double derivative(double x) const noexcept;

    friend bool operator==(const Activation&, const Activation&) = default;

private:
    Activation(Kind kind, double knee) : kind_(kind), knee_(knee) {}
    Kind kind_;
    double knee_;
};

inline double activation_eval(const Activation& act, double x) noexcept { return act(x); }
inline double activation_deriv(const Activation& act, double x) noexcept { return act.derivative(x); }

/// Grid check: zero at sampled x <= 0 and strictly increasing on 512
/// log-spaced points in [1e-6, 1e3]. Leading grid points where σ underflows
/// to exactly 0 are accepted.
bool is_rectified(const std::function<double(double)>& sigma);
bool is_rectified(const Activation& act);

struct MlpSpec {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden_widths{1};
    std::size_t output_dim = 1;
    Activation activation = Activation::smoolu();

    void validate() const;
    std::size_t depth() const noexcept { return hidden_widths.size(); }
    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Offsets of one affine layer inside the flat parameter vector. Weights are
/// stored row-major (row = receiving unit) and precede the biases.
struct LayerSlice {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;

    std::size_t weight(std::size_t unit, std::size_t input) const noexcept {
        return weight_offset + unit * in + input;
    }
    std::size_t bias(std::size_t unit) const noexcept { return bias_offset + unit; }
};

/// One slice per affine map; the last one is the (linear) output layer.
std::vector<LayerSlice> layer_layout(const MlpSpec& spec);

std::size_t param_count(const MlpSpec& spec);

/// Flat parameter point θ ∈ ℝⁿ.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
    static ParamVector zeros(const MlpSpec& spec) { return ParamVector(std::vector<double>(param_count(spec), 0.0)); }

    std::size_t size() const noexcept { return values_.size(); }
    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    std::vector<double> values_;
};

/// d pairs (x_i, y_i) with pairwise distinct inputs.
struct Dataset {
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> labels;

    std::size_t size() const noexcept { return inputs.size(); }
    std::size_t input_dim() const noexcept { return inputs.empty() ? 0 : inputs.front().size(); }
    std::size_t output_dim() const noexcept { return labels.empty() ? 0 : labels.front().size(); }

    /// Shapes consistent, d >= 1, entries finite.
    void validate_shape() const;
    bool inputs_distinct() const;
    /// validate_shape() plus pairwise-distinct inputs.
    void validate() const;
};

/// Pre-activations and outputs of every layer for one input.
struct ForwardTrace {
    std::vector<std::vector<double>> pre;   // per hidden layer, then output layer
    std::vector<std::vector<double>> post;  // post[0] = x, post[t] = σ(pre[t-1]) for hidden layers
    std::span<const double> output() const noexcept { return pre.back(); }
};

ForwardTrace forward_trace(const MlpSpec& spec, const ParamVector& theta, std::span<const double> x);
std::vector<double> forward(const MlpSpec& spec, const ParamVector& theta, std::span<const double> x);

/// Independent N(0, (scale/√fan_in)²) entries, deterministic in the seed.
ParamVector init_params(const MlpSpec& spec, std::uint64_t seed, double scale);

}  // namespace zerolocus
