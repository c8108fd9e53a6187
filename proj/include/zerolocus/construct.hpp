#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "zerolocus/linalg.hpp"
#include "zerolocus/network.hpp"

namespace zerolocus {

/// A direction a with pairwise distinct projections a·x_i, scaled so the
/// smallest gap between consecutive sorted projections is 1.
struct ProjectionChoice {
    std::vector<double> direction;     // a
    std::vector<double> projected;     // a·x_i in dataset order
    std::vector<std::size_t> order;    // order[k] = index of the k-th smallest projection
    double anchor = 0.0;               // a·x₀ = a·x_{order[0]} − 1
    std::size_t attempts = 0;

    double min_gap() const;
};

/// Draws random unit directions until the projections are distinct, then
/// normalizes the minimum gap to 1. Throws NumericalError("projection_failure")
/// after max_attempts draws.
ProjectionChoice choose_projection(const Dataset& data, std::uint64_t seed, std::size_t max_attempts = 64);

/// One group of d hidden units interpolating one output coordinate:
/// unit k computes σ(a·x − b_k) and contributes m_k·σ(...) to the output.
struct InterpolantBlock {
    std::vector<double> direction;       // a, already multiplied by gap_scale
    std::vector<double> thresholds;      // b_k = (t_{k−1} + t_k)/2 over sorted projections t
    std::vector<double> output_weights;  // m = A⁻¹·y (sorted order)
    std::vector<std::size_t> order;      // data index served by unit k
    std::vector<double> diagonal;        // A_kk = σ(gap_k / 2)
    double max_entry = 0.0;              // max |A_ij|
    double gap_scale = 1.0;
    double conditioning = 0.0;           // s_min / s_max of the block's residual Jacobian
};

struct ExactFitCertificate {
    MlpSpec spec;
    ParamVector params;
    std::vector<InterpolantBlock> blocks;  // one per output coordinate
    std::vector<double> residuals;         // |f(x_i)_k − (y_i)_k| in residual order
    double max_residual = 0.0;
    double min_diagonal = 0.0;
    double max_entry = 0.0;
    double conditioning = 0.0;             // s_min / s_max of the full residual Jacobian
};

struct FitOptions {
    std::uint64_t seed = 0;
    std::size_t max_attempts = 64;        // per projection draw
    std::size_t projection_draws = 8;     // candidate directions (inputs with p > 1)
    std::vector<double> gap_scales = default_gap_scales();
    /// Candidates must fit to this before conditioning is compared.
    double selection_residual = 1e-10;
    /// The emitted certificate must fit to this.
    double certificate_residual = 1e-8;

    /// 2^(k/2) for k = 0..16.
    static std::vector<double> default_gap_scales();
};

/// Builds one block from a fixed projection and gap scale (ℓ = 1 labels are
/// taken from `labels`). The hand-checkable building step of exact_fit_shallow.
InterpolantBlock interpolant_block(const std::vector<std::vector<double>>& inputs, const std::vector<double>& labels,
                                   const ProjectionChoice& projection, double gap_scale, const Activation& activation);

/// Places blocks side by side in a one-hidden-layer network of the given width.
ParamVector assemble_shallow(const MlpSpec& spec, const std::vector<InterpolantBlock>& blocks);

/// Exact interpolation by one hidden layer of width h >= ℓ·d. Output
/// coordinate c uses hidden units [c·d, (c+1)·d); other units and the output
/// biases are zero. Throws SingularSystemError or
/// NumericalError("certificate_failure") when the fit cannot be certified.
ExactFitCertificate exact_fit_shallow(const Dataset& data, std::size_t width, const Activation& activation,
                                      const FitOptions& options = {});

/// Same construction with the projection and gap scale fixed by the caller.
ExactFitCertificate exact_fit_with_projection(const Dataset& data, std::size_t width, const Activation& activation,
                                              const ProjectionChoice& projection, double gap_scale);

struct DeepFitCertificate : ExactFitCertificate {
    double first_layer_bias = 0.0;
    /// Node-0 value per intermediate hidden layer (layers 1..T-1) for each data point.
    std::vector<std::vector<double>> carried_values;
    bool carried_positive = true;
    bool carried_distinct = true;
};

/// Embeds a shallow exact fit into a net with hidden widths (h_1..h_T).
/// Layer 1 row 0 is the shallow direction with a bias that keeps every
/// a·x_i + bias positive; layers 2..T-1 pass node 0 through with weight 1;
/// layer T re-solves the interpolation on the carried scalars with units
/// 0..d-1 shared by all outputs, so h_T >= d suffices. T = 1 reuses the
/// shallow layout and needs h_1 >= ℓ·d.
DeepFitCertificate embed_deep(const ExactFitCertificate& shallow, const Dataset& data,
                              const std::vector<std::size_t>& hidden_widths, const FitOptions& options = {});

/// ỹ_i = y_i + r_i with r uniform in the open ball of radius ε in ℝ^{ℓd}.
Dataset perturb_labels(const Dataset& data, double epsilon, std::uint64_t seed);

}  // namespace zerolocus
