#include "zerolocus/network.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "zerolocus/errors.hpp"

namespace zerolocus {

namespace {

// Below this exp(-1/x) is 0 in double precision; 1/x itself may overflow.
constexpr double kSmooluFloor = 1e-300;

}  // namespace

Activation Activation::smoothed_relu(double knee_width) {
    require(std::isfinite(knee_width) && knee_width > 0.0, "smoothed_relu: knee width must be positive");
    return Activation(Kind::smoothed_relu, knee_width);
}

Activation Activation::parse(const std::string& tag) {
    if (tag == "smoolu") return smoolu();
    const std::string prefix = "smoothed-relu:";
    if (tag.rfind(prefix, 0) == 0) {
        std::istringstream in(tag.substr(prefix.size()));
        double k = 0.0;
        if (in >> k && in.eof()) return smoothed_relu(k);
    }
    throw Error(ErrorKind::usage, "bad_activation", "unknown activation tag '" + tag + "'");
}

std::string Activation::tag() const {
    if (kind_ == Kind::smoolu) return "smoolu";
    std::ostringstream out;
    out.precision(17);
    out << "smoothed-relu:" << knee_;
    return out.str();
}

double Activation::operator()(double x) const noexcept {
    if (!(x > 0.0)) return 0.0;
    switch (kind_) {
        case Kind::smoolu:
            if (x < kSmooluFloor) return 0.0;
            return x * std::exp(-1.0 / x);
        case Kind::smoothed_relu:
            if (x < knee_) return x * x / (2.0 * knee_);
            return x - 0.5 * knee_;
    }
    return 0.0;
}

double Activation::derivative(double x) const noexcept {
    if (!(x > 0.0)) return 0.0;
    switch (kind_) {
        case Kind::smoolu: {
            if (x < kSmooluFloor) return 0.0;
            const double inv = 1.0 / x;
            return std::exp(-inv) * (1.0 + inv);
        }
        case Kind::smoothed_relu:
            return x < knee_ ? x / knee_ : 1.0;
    }
    return 0.0;
}

bool is_rectified(const std::function<double(double)>& sigma) {
    constexpr int kGrid = 512;
    const double lo = std::log(1e-6);
    const double hi = std::log(1e3);
    double previous = sigma(0.0);
    if (previous != 0.0) return false;
    for (int i = 0; i < kGrid; ++i) {
        const double x = std::exp(lo + (hi - lo) * i / (kGrid - 1));
        if (sigma(-x) != 0.0) return false;
        const double value = sigma(x);
        // A leading run of exact zeros is underflow (smooLU is 0 in double
        // precision below x ≈ 1/708); once positive, values must strictly grow.
        if (!(value > previous) && !(value == 0.0 && previous == 0.0)) return false;
        previous = value;
    }
    return previous > 0.0;
}

bool is_rectified(const Activation& act) {
    return is_rectified([&act](double x) { return act(x); });
}

void MlpSpec::validate() const {
    require(input_dim >= 1, "MlpSpec: input dimension must be >= 1");
    require(!hidden_widths.empty(), "MlpSpec: at least one hidden layer required");
    for (std::size_t w : hidden_widths) require(w >= 1, "MlpSpec: hidden widths must be >= 1");
    require(output_dim >= 1, "MlpSpec: output dimension must be >= 1");
}

std::vector<LayerSlice> layer_layout(const MlpSpec& spec) {
    spec.validate();
    std::vector<LayerSlice> layers;
    layers.reserve(spec.hidden_widths.size() + 1);
    std::size_t offset = 0;
    std::size_t fan_in = spec.input_dim;
    auto push = [&](std::size_t out) {
        LayerSlice s{fan_in, out, offset, offset + fan_in * out};
        offset = s.bias_offset + out;
        layers.push_back(s);
        fan_in = out;
    };
    for (std::size_t w : spec.hidden_widths) push(w);
    push(spec.output_dim);
    return layers;
}

std::size_t param_count(const MlpSpec& spec) {
    const auto layers = layer_layout(spec);
    return layers.back().bias_offset + layers.back().out;
}

void Dataset::validate_shape() const {
    require(!inputs.empty(), "Dataset: at least one data point required");
    require(inputs.size() == labels.size(), "Dataset: input and label counts differ");
    const std::size_t p = input_dim();
    const std::size_t l = output_dim();
    require(p >= 1 && l >= 1, "Dataset: empty input or label vectors");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        require(inputs[i].size() == p, "Dataset: ragged inputs");
        require(labels[i].size() == l, "Dataset: ragged labels");
        for (double v : inputs[i]) require(std::isfinite(v), "Dataset: non-finite input");
        for (double v : labels[i]) require(std::isfinite(v), "Dataset: non-finite label");
    }
}

bool Dataset::inputs_distinct() const {
    for (std::size_t i = 0; i < inputs.size(); ++i)
        for (std::size_t j = i + 1; j < inputs.size(); ++j)
            if (inputs[i] == inputs[j]) return false;
    return true;
}

void Dataset::validate() const {
    validate_shape();
    require(inputs_distinct(), "Dataset: inputs are not pairwise distinct");
}

ForwardTrace forward_trace(const MlpSpec& spec, const ParamVector& theta, std::span<const double> x) {
    const auto layers = layer_layout(spec);
    require(theta.size() == layers.back().bias_offset + layers.back().out, "forward: parameter count mismatch");
    require(x.size() == spec.input_dim, "forward: input dimension mismatch");

    ForwardTrace trace;
    trace.pre.reserve(layers.size());
    trace.post.reserve(layers.size());
    trace.post.emplace_back(x.begin(), x.end());
    for (std::size_t t = 0; t < layers.size(); ++t) {
        const LayerSlice& layer = layers[t];
        const std::vector<double>& in = trace.post.back();
        std::vector<double> z(layer.out);
        for (std::size_t u = 0; u < layer.out; ++u) {
            double s = 0.0;
            for (std::size_t i = 0; i < layer.in; ++i) s += theta[layer.weight(u, i)] * in[i];
            z[u] = s + theta[layer.bias(u)];
        }
        const bool hidden = t + 1 < layers.size();
        if (hidden) {
            std::vector<double> o(layer.out);
            for (std::size_t u = 0; u < layer.out; ++u) o[u] = spec.activation(z[u]);
            trace.pre.push_back(std::move(z));
            trace.post.push_back(std::move(o));
        } else {
            trace.pre.push_back(std::move(z));
        }
    }
    return trace;
}

std::vector<double> forward(const MlpSpec& spec, const ParamVector& theta, std::span<const double> x) {
    ForwardTrace trace = forward_trace(spec, theta, x);
    return std::move(trace.pre.back());
}

ParamVector init_params(const MlpSpec& spec, std::uint64_t seed, double scale) {
    require(scale > 0.0, "init_params: scale must be positive");
    std::mt19937_64 rng(seed);
    std::vector<double> values(param_count(spec));
    for (const LayerSlice& layer : layer_layout(spec)) {
        std::normal_distribution<double> dist(0.0, scale / std::sqrt(static_cast<double>(layer.in)));
        for (std::size_t k = layer.weight_offset; k < layer.bias_offset + layer.out; ++k) values[k] = dist(rng);
    }
    return ParamVector(std::move(values));
}

}  // namespace zerolocus
