#include "zerolocus/construct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "zerolocus/calculus.hpp"
#include "zerolocus/errors.hpp"

namespace zerolocus {

namespace {

// s_min / s_max of J, read off the eigenvalues of J·Jᵀ.
double jacobian_conditioning(const DenseMatrix& jac) {
    if (jac.rows() == 0) return 1.0;
    const DenseMatrix jjt = gram(jac.transposed());
    const Spectrum spec = eig_sym(jjt, false);
    const double top = spec.eigenvalues.back();
    if (top <= 0.0) return 0.0;
    return std::sqrt(std::max(spec.eigenvalues.front(), 0.0) / top);
}

Dataset single_output(const Dataset& data, std::size_t coordinate) {
    Dataset out;
    out.inputs = data.inputs;
    out.labels.reserve(data.size());
    for (const auto& y : data.labels) out.labels.push_back({y[coordinate]});
    return out;
}

std::vector<double> column_of(const Dataset& data, std::size_t coordinate) {
    std::vector<double> out;
    out.reserve(data.size());
    for (const auto& y : data.labels) out.push_back(y[coordinate]);
    return out;
}

double max_abs_residual(std::span<const double> r) { return norm_inf(r); }

std::string certificate_failure_message(double max_residual, double min_diagonal, double max_entry) {
    std::ostringstream out;
    out.precision(6);
    out << "exact fit could not be certified: max residual " << max_residual << ", min diag(A) " << min_diagonal
        << ", max |A| " << max_entry;
    return out.str();
}

// Fits a single output coordinate, searching over projection draws and gap
// scales for the best-conditioned candidate that fits to selection_residual.
InterpolantBlock search_block(const Dataset& single, const Activation& activation, const FitOptions& options,
                              std::uint64_t seed) {
    const std::size_t d = single.size();
    const MlpSpec local{single.input_dim(), {d}, 1, activation};
    const std::vector<double> labels = column_of(single, 0);
    const std::size_t draws = std::max<std::size_t>(1, options.projection_draws);
    require(!options.gap_scales.empty(), "exact fit: no gap scales to try");

    bool have_best = false;
    bool best_selected = false;
    InterpolantBlock best;
    double best_residual = 0.0;

    for (std::size_t draw = 0; draw < draws; ++draw) {
        const ProjectionChoice projection = choose_projection(single, seed + 7919 * draw, options.max_attempts);
        for (double scale : options.gap_scales) {
            InterpolantBlock block;
            try {
                block = interpolant_block(single.inputs, labels, projection, scale, activation);
            } catch (const SingularSystemError&) {
                continue;
            }
            const ParamVector theta = assemble_shallow(local, {block});
            const auto r = residuals(local, theta, single);
            const double res = max_abs_residual(r);
            if (!std::isfinite(res)) continue;
            const bool selected = res <= options.selection_residual;
            if (selected) block.conditioning = jacobian_conditioning(jacobian_residuals(local, theta, single));
            const bool better = !have_best || (selected && !best_selected) ||
                                (selected && best_selected && block.conditioning > best.conditioning) ||
                                (!selected && !best_selected && res < best_residual);
            if (better) {
                best = std::move(block);
                best_residual = res;
                best_selected = selected;
                have_best = true;
            }
        }
    }
    if (!have_best) throw SingularSystemError("exact fit: every candidate triangular system was singular");
    if (!best_selected) {
        const ParamVector theta = assemble_shallow(local, {best});
        best.conditioning = jacobian_conditioning(jacobian_residuals(local, theta, single));
    }
    return best;
}

// The unscaled projection a block was built from.
ProjectionChoice projection_of(const InterpolantBlock& block, const std::vector<std::vector<double>>& inputs) {
    ProjectionChoice proj;
    proj.direction = block.direction;
    for (double& v : proj.direction) v /= block.gap_scale;
    proj.order = block.order;
    proj.projected.resize(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) proj.projected[i] = dot(proj.direction, inputs[i]);
    proj.anchor = proj.projected[proj.order.front()] - 1.0;
    return proj;
}

void fill_certificate(ExactFitCertificate& cert, const Dataset& data) {
    const auto r = residuals(cert.spec, cert.params, data);
    cert.residuals.resize(r.size());
    std::transform(r.begin(), r.end(), cert.residuals.begin(), [](double x) { return std::abs(x); });
    cert.max_residual = max_abs_residual(r);
    cert.min_diagonal = std::numeric_limits<double>::infinity();
    cert.max_entry = 0.0;
    for (const auto& block : cert.blocks) {
        for (double v : block.diagonal) cert.min_diagonal = std::min(cert.min_diagonal, v);
        cert.max_entry = std::max(cert.max_entry, block.max_entry);
    }
    cert.conditioning = jacobian_conditioning(jacobian_residuals(cert.spec, cert.params, data));
}

void check_certificate(const ExactFitCertificate& cert, double tolerance) {
    if (!(cert.max_residual <= tolerance)) {
        throw NumericalError("certificate_failure",
                             certificate_failure_message(cert.max_residual, cert.min_diagonal, cert.max_entry));
    }
}

void check_fit_inputs(const Dataset& data, std::size_t width, const Activation& activation) {
    data.validate();
    require(is_rectified(activation), "exact fit: activation is not rectified");
    require(width >= data.output_dim() * data.size(), "exact fit: hidden width must be at least l*d");
}

}  // namespace

double ProjectionChoice::min_gap() const {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < order.size(); ++k) gap = std::min(gap, projected[order[k]] - projected[order[k - 1]]);
    return gap;
}

ProjectionChoice choose_projection(const Dataset& data, std::uint64_t seed, std::size_t max_attempts) {
    data.validate();
    const std::size_t p = data.input_dim();
    const std::size_t d = data.size();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    auto project = [&](const std::vector<double>& a) {
        std::vector<double> t(d);
        for (std::size_t i = 0; i < d; ++i) t[i] = dot(a, data.inputs[i]);
        return t;
    };
    auto sorted_order = [&](const std::vector<double>& t) {
        std::vector<std::size_t> order(d);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return t[i] < t[j]; });
        return order;
    };
    auto distinct = [&](const std::vector<double>& t, const std::vector<std::size_t>& order) {
        for (std::size_t k = 1; k < d; ++k)
            if (!(t[order[k]] > t[order[k - 1]])) return false;
        return true;
    };

    for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
        std::vector<double> a(p);
        for (double& v : a) v = normal(rng);
        const double len = norm2(a);
        if (len == 0.0) continue;
        for (double& v : a) v /= len;

        std::vector<double> t = project(a);
        std::vector<std::size_t> order = sorted_order(t);
        if (!distinct(t, order)) continue;

        if (d > 1) {
            double gap = std::numeric_limits<double>::infinity();
            for (std::size_t k = 1; k < d; ++k) gap = std::min(gap, t[order[k]] - t[order[k - 1]]);
            for (double& v : a) v /= gap;
            t = project(a);
            order = sorted_order(t);
            if (!distinct(t, order)) continue;
        }

        ProjectionChoice out;
        out.direction = std::move(a);
        out.projected = std::move(t);
        out.order = std::move(order);
        out.anchor = out.projected[out.order.front()] - 1.0;
        out.attempts = attempt;
        return out;
    }
    throw NumericalError("projection_failure", "choose_projection: no direction with distinct projections found");
}

std::vector<double> FitOptions::default_gap_scales() {
    std::vector<double> scales;
    for (int k = 0; k <= 16; ++k) scales.push_back(std::exp2(0.5 * k));
    return scales;
}

InterpolantBlock interpolant_block(const std::vector<std::vector<double>>& inputs, const std::vector<double>& labels,
                                   const ProjectionChoice& projection, double gap_scale, const Activation& activation) {
    const std::size_t d = inputs.size();
    require(labels.size() == d, "interpolant_block: label count mismatch");
    require(projection.order.size() == d, "interpolant_block: projection does not match the dataset");
    require(gap_scale > 0.0, "interpolant_block: gap scale must be positive");

    InterpolantBlock block;
    block.gap_scale = gap_scale;
    block.order = projection.order;
    block.direction = projection.direction;
    for (double& v : block.direction) v *= gap_scale;

    std::vector<double> t(d);
    for (std::size_t k = 0; k < d; ++k) t[k] = dot(block.direction, inputs[block.order[k]]);

    // Anchor a·x₀ = a·x₁ − 1 in unscaled units.
    block.thresholds.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double previous = k == 0 ? t[0] - gap_scale : t[k - 1];
        block.thresholds[k] = 0.5 * (previous + t[k]);
    }

    DenseMatrix a(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) a(i, j) = activation(t[i] - block.thresholds[j]);
    block.max_entry = a.max_abs();
    block.diagonal.resize(d);
    for (std::size_t k = 0; k < d; ++k) block.diagonal[k] = a(k, k);

    std::vector<double> rhs(d);
    for (std::size_t k = 0; k < d; ++k) rhs[k] = labels[block.order[k]];
    block.output_weights = solve_lower_triangular(a, rhs);
    return block;
}

ParamVector assemble_shallow(const MlpSpec& spec, const std::vector<InterpolantBlock>& blocks) {
    require(spec.depth() == 1, "assemble_shallow: spec must have one hidden layer");
    require(blocks.size() == spec.output_dim, "assemble_shallow: one block per output coordinate required");
    const auto layers = layer_layout(spec);
    const LayerSlice& hidden = layers[0];
    const LayerSlice& output = layers[1];
    ParamVector theta = ParamVector::zeros(spec);
    std::size_t unit = 0;
    for (std::size_t c = 0; c < blocks.size(); ++c) {
        const InterpolantBlock& block = blocks[c];
        require(block.direction.size() == spec.input_dim, "assemble_shallow: direction length mismatch");
        require(unit + block.thresholds.size() <= hidden.out, "assemble_shallow: hidden layer too narrow");
        for (std::size_t k = 0; k < block.thresholds.size(); ++k, ++unit) {
            for (std::size_t i = 0; i < spec.input_dim; ++i) theta[hidden.weight(unit, i)] = block.direction[i];
            theta[hidden.bias(unit)] = -block.thresholds[k];
            theta[output.weight(c, unit)] = block.output_weights[k];
        }
    }
    return theta;
}

ExactFitCertificate exact_fit_shallow(const Dataset& data, std::size_t width, const Activation& activation,
                                      const FitOptions& options) {
    check_fit_inputs(data, width, activation);
    ExactFitCertificate cert;
    cert.spec = MlpSpec{data.input_dim(), {width}, data.output_dim(), activation};
    for (std::size_t c = 0; c < data.output_dim(); ++c) {
        cert.blocks.push_back(search_block(single_output(data, c), activation, options, options.seed + 104729 * c));
    }
    cert.params = assemble_shallow(cert.spec, cert.blocks);
    fill_certificate(cert, data);
    check_certificate(cert, options.certificate_residual);
    return cert;
}

ExactFitCertificate exact_fit_with_projection(const Dataset& data, std::size_t width, const Activation& activation,
                                              const ProjectionChoice& projection, double gap_scale) {
    check_fit_inputs(data, width, activation);
    ExactFitCertificate cert;
    cert.spec = MlpSpec{data.input_dim(), {width}, data.output_dim(), activation};
    for (std::size_t c = 0; c < data.output_dim(); ++c) {
        cert.blocks.push_back(interpolant_block(data.inputs, column_of(data, c), projection, gap_scale, activation));
    }
    cert.params = assemble_shallow(cert.spec, cert.blocks);
    fill_certificate(cert, data);
    for (auto& block : cert.blocks) block.conditioning = cert.conditioning;
    check_certificate(cert, FitOptions{}.certificate_residual);
    return cert;
}

DeepFitCertificate embed_deep(const ExactFitCertificate& shallow, const Dataset& data,
                              const std::vector<std::size_t>& hidden_widths, const FitOptions& options) {
    data.validate();
    require(!hidden_widths.empty(), "embed_deep: at least one hidden layer required");
    require(shallow.spec.depth() == 1 && !shallow.blocks.empty(), "embed_deep: expects a one-hidden-layer certificate");
    require(shallow.spec.input_dim == data.input_dim() && shallow.spec.output_dim == data.output_dim(),
            "embed_deep: certificate does not match the dataset");
    const std::size_t d = data.size();
    const std::size_t l = data.output_dim();
    const std::size_t depth = hidden_widths.size();
    // One hidden layer keeps the block-diagonal layout; deeper nets share the
    // last layer's d units across outputs (same A, one m per coordinate).
    const std::size_t needed = depth == 1 ? l * d : d;
    require(hidden_widths.back() >= needed, "embed_deep: last hidden layer too narrow");

    const Activation& activation = shallow.spec.activation;
    DeepFitCertificate cert;
    cert.spec = MlpSpec{data.input_dim(), hidden_widths, l, activation};

    if (depth == 1) {
        const InterpolantBlock& block = shallow.blocks.front();
        static_cast<ExactFitCertificate&>(cert) = exact_fit_with_projection(
            data, hidden_widths[0], activation, projection_of(block, data.inputs), block.gap_scale);
        return cert;
    }

    const auto layers = layer_layout(cert.spec);
    ParamVector theta = ParamVector::zeros(cert.spec);

    // Layer 1: row 0 carries a·x plus a bias that leaves a margin of 2T
    // (σ(x) >= x − 1 for smooLU, so T−1 pass-throughs keep it above T+1).
    const std::vector<double>& a = shallow.blocks.front().direction;
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& x : data.inputs) lowest = std::min(lowest, dot(a, x));
    const double knee = activation.kind() == Activation::Kind::smoothed_relu ? activation.knee_width() : 1.0;
    const double margin = 2.0 * static_cast<double>(depth) * std::max(1.0, knee);
    cert.first_layer_bias = margin - lowest;
    for (std::size_t i = 0; i < data.input_dim(); ++i) theta[layers[0].weight(0, i)] = a[i];
    theta[layers[0].bias(0)] = cert.first_layer_bias;
    for (std::size_t t = 1; t + 1 < depth; ++t) theta[layers[t].weight(0, 0)] = 1.0;

    // Carry the scalars through layers 1..T−1.
    std::vector<std::vector<double>> carried(d);
    for (std::size_t i = 0; i < d; ++i) {
        const ForwardTrace trace = forward_trace(cert.spec, theta, data.inputs[i]);
        for (std::size_t t = 1; t < depth; ++t) carried[i].push_back(trace.post[t][0]);
    }
    cert.carried_values.assign(depth - 1, std::vector<double>(d));
    for (std::size_t t = 0; t + 1 < depth; ++t) {
        for (std::size_t i = 0; i < d; ++i) cert.carried_values[t][i] = carried[i][t];
        std::vector<double> sorted = cert.carried_values[t];
        std::sort(sorted.begin(), sorted.end());
        if (!(sorted.front() > 0.0)) cert.carried_positive = false;
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) cert.carried_distinct = false;
    }
    if (!cert.carried_positive || !cert.carried_distinct) {
        throw NumericalError("embedding_failure", "embed_deep: pass-through values lost positivity or distinctness");
    }

    // Layer T: re-solve the interpolation on the carried scalars s_i.
    Dataset scalar;
    scalar.labels = data.labels;
    for (std::size_t i = 0; i < d; ++i) scalar.inputs.push_back({cert.carried_values.back()[i]});
    const LayerSlice& last = layers[depth - 1];
    const LayerSlice& output = layers[depth];
    const InterpolantBlock lead = search_block(single_output(scalar, 0), activation, options, options.seed);
    const ProjectionChoice carried_projection = projection_of(lead, scalar.inputs);
    for (std::size_t k = 0; k < d; ++k) {
        theta[last.weight(k, 0)] = lead.direction[0];
        theta[last.bias(k)] = -lead.thresholds[k];
    }
    for (std::size_t c = 0; c < l; ++c) {
        InterpolantBlock block = c == 0 ? lead
                                        : interpolant_block(scalar.inputs, column_of(scalar, c), carried_projection,
                                                            lead.gap_scale, activation);
        for (std::size_t k = 0; k < d; ++k) theta[output.weight(c, k)] = block.output_weights[k];
        cert.blocks.push_back(std::move(block));
    }
    cert.params = std::move(theta);
    fill_certificate(cert, data);
    check_certificate(cert, options.certificate_residual);
    return cert;
}

Dataset perturb_labels(const Dataset& data, double epsilon, std::uint64_t seed) {
    require(epsilon >= 0.0 && std::isfinite(epsilon), "perturb_labels: epsilon must be >= 0");
    data.validate_shape();
    Dataset out = data;
    if (epsilon == 0.0) return out;

    const std::size_t dim = data.size() * data.output_dim();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> r(dim);
    double len = 0.0;
    while (len == 0.0) {
        for (double& v : r) v = normal(rng);
        len = norm2(r);
    }
    const double radius = epsilon * std::pow(uniform(rng), 1.0 / static_cast<double>(dim));
    const std::size_t l = data.output_dim();
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t k = 0; k < l; ++k) out.labels[i][k] += radius * r[i * l + k] / len;
    return out;
}

}  // namespace zerolocus
