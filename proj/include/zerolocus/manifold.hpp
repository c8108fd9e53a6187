#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "zerolocus/errors.hpp"
#include "zerolocus/linalg.hpp"
#include "zerolocus/network.hpp"

namespace zerolocus {

/// Loss at or below which a point counts as lying on M = L⁻¹(0).
inline constexpr double kZeroLossGate = 1e-16;
/// Relative zero thresholds for spectrum classification.
inline constexpr double kFdZeroTol = 1e-6;
inline constexpr double kGaussNewtonZeroTol = 1e-10;

struct SpectrumCounts {
    std::size_t negative = 0;
    std::size_t zero = 0;
    std::size_t positive = 0;
    friend bool operator==(const SpectrumCounts&, const SpectrumCounts&) = default;
};

/// λ < −tol → negative, |λ| <= tol → zero, λ > tol → positive.
SpectrumCounts classify_spectrum(std::span<const double> eigenvalues, double tol_zero);

class NotOnManifoldError : public Error {
public:
    explicit NotOnManifoldError(double loss_value);
    double loss_value() const noexcept { return loss_; }

private:
    double loss_;
};

/// n − rank(J). Throws NotOnManifoldError when loss(θ) > gate.
std::size_t manifold_dimension(const MlpSpec& spec, const ParamVector& theta, const Dataset& data,
                               double rel_tol = kDefaultRankTol, double gate = kZeroLossGate);

/// Orthonormal basis of ker J(θ), one vector per column.
DenseMatrix tangent_basis(const MlpSpec& spec, const ParamVector& theta, const Dataset& data,
                          double rel_tol = kDefaultRankTol, double gate = kZeroLossGate);

struct CorrectorOptions {
    double tol = 1e-12;          // target ‖H(θ)‖∞
    std::size_t max_iters = 50;
    double pinv_cutoff = 1e-10;  // singular values below cutoff·s₁ are dropped
};

struct Correction {
    ParamVector params;
    std::size_t iterations = 0;
    double residual_inf = 0.0;
};

/// Gauss–Newton minimum-norm iteration θ ← θ − J⁺H(θ) until ‖H‖∞ <= tol.
/// Throws NumericalError("corrector_failure") on rank collapse or when
/// max_iters is exhausted.
Correction correct_to_manifold(const MlpSpec& spec, const ParamVector& theta, const Dataset& data,
                               const CorrectorOptions& options = {});

struct WalkOptions {
    std::size_t steps = 100;
    double step_size = 1e-2;
    double loss_tol = kZeroLossGate;
    double rel_tol = kDefaultRankTol;
    CorrectorOptions corrector{};
};

struct ManifoldPath {
    std::vector<ParamVector> points;              // points[0] is the base point
    std::vector<double> losses;
    std::vector<double> step_lengths;             // ‖θ_k − θ_{k−1}‖, k >= 1
    std::vector<std::size_t> corrector_iterations;
    bool completed = true;
    bool no_backtrack = true;                     // every new point is >= step/2 from the last two
    std::string failure;

    double arc_length() const;
    double displacement() const;
    double max_loss() const;
};

/// Predictor–corrector walk along M. The first step follows the first
/// tangent basis vector; later steps follow the previous direction projected
/// onto the current tangent space. A corrector failure truncates the path.
ManifoldPath walk_manifold(const MlpSpec& spec, const ParamVector& theta0, const Dataset& data,
                           const WalkOptions& options = {});

struct ClassifiedSpectrum {
    std::vector<double> eigenvalues;  // ascending
    double tol_zero = 0.0;
    SpectrumCounts counts;
};

struct SpectrumReport {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t l = 0;
    double loss = 0.0;
    ClassifiedSpectrum finite_difference;  // tol 1e-6·max|λ|
    ClassifiedSpectrum gauss_newton;       // 2JᵀJ, tol 1e-10·max|λ|
    double max_deviation = 0.0;            // max_k |λ_k(FD) − λ_k(GN)|
};

ClassifiedSpectrum classify_matrix(const DenseMatrix& symmetric, double relative_tol);

SpectrumReport hessian_spectrum_at(const MlpSpec& spec, const ParamVector& theta, const Dataset& data);

}  // namespace zerolocus
