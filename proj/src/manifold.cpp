#include "zerolocus/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "zerolocus/calculus.hpp"

namespace zerolocus {

namespace {

std::string loss_message(double loss_value) {
    std::ostringstream out;
    out.precision(6);
    out << "point is not on the zero-loss set (loss " << loss_value << ")";
    return out.str();
}

void check_gate(const MlpSpec& spec, const ParamVector& theta, const Dataset& data, double gate) {
    const double value = loss(spec, theta, data);
    if (!(value <= gate)) throw NotOnManifoldError(value);
}

double distance(const ParamVector& a, const ParamVector& b) {
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    return norm2(diff);
}

}  // namespace

NotOnManifoldError::NotOnManifoldError(double loss_value)
    : Error(ErrorKind::numerical, "not_on_manifold", loss_message(loss_value)), loss_(loss_value) {}

SpectrumCounts classify_spectrum(std::span<const double> eigenvalues, double tol_zero) {
    require(tol_zero > 0.0, "classify_spectrum: tolerance must be positive");
    require(std::is_sorted(eigenvalues.begin(), eigenvalues.end()), "classify_spectrum: eigenvalues not ascending");
    SpectrumCounts counts;
    for (double lambda : eigenvalues) {
        if (lambda < -tol_zero) {
            ++counts.negative;
        } else if (lambda > tol_zero) {
            ++counts.positive;
        } else {
            ++counts.zero;
        }
    }
    return counts;
}

std::size_t manifold_dimension(const MlpSpec& spec, const ParamVector& theta, const Dataset& data, double rel_tol,
                               double gate) {
    check_gate(spec, theta, data, gate);
    const SingularSystem svd = singular_values(jacobian_residuals(spec, theta, data));
    return theta.size() - numerical_rank(svd.values, rel_tol);
}

DenseMatrix tangent_basis(const MlpSpec& spec, const ParamVector& theta, const Dataset& data, double rel_tol,
                          double gate) {
    check_gate(spec, theta, data, gate);
    return nullspace_basis(jacobian_residuals(spec, theta, data), rel_tol);
}

Correction correct_to_manifold(const MlpSpec& spec, const ParamVector& theta, const Dataset& data,
                               const CorrectorOptions& options) {
    require(options.tol > 0.0 && options.pinv_cutoff > 0.0, "correct_to_manifold: tolerances must be positive");
    Correction out{theta, 0, 0.0};
    for (;;) {
        const auto r = residuals(spec, out.params, data);
        out.residual_inf = norm_inf(r);
        if (!std::isfinite(out.residual_inf)) {
            throw NumericalError("corrector_failure", "correct_to_manifold: residual became non-finite");
        }
        if (out.residual_inf <= options.tol) return out;
        if (out.iterations == options.max_iters) {
            std::ostringstream msg;
            msg.precision(6);
            msg << "correct_to_manifold: no convergence after " << options.max_iters << " iterations (|H|_inf "
                << out.residual_inf << ")";
            throw NumericalError("corrector_failure", msg.str());
        }

        // Thin SVD through Jᵀ = U' S V'ᵀ, i.e. J = V' S U'ᵀ.
        const DenseMatrix jac = jacobian_residuals(spec, out.params, data);
        const SingularSystem svd = singular_values(jac.transposed());
        if (svd.values.empty() || !(svd.values.front() > 0.0)) {
            throw NumericalError("corrector_failure", "correct_to_manifold: residual Jacobian vanished");
        }
        const double cut = options.pinv_cutoff * svd.values.front();
        std::vector<double> step(theta.size(), 0.0);
        for (std::size_t k = 0; k < svd.values.size(); ++k) {
            const double s = svd.values[k];
            if (!(s > cut)) break;
            double coeff = 0.0;
            for (std::size_t i = 0; i < r.size(); ++i) coeff += svd.right(i, k) * r[i];
            coeff /= s;
            for (std::size_t j = 0; j < step.size(); ++j) step[j] += coeff * svd.left(j, k);
        }
        for (std::size_t j = 0; j < step.size(); ++j) out.params[j] -= step[j];
        ++out.iterations;
    }
}

double ManifoldPath::arc_length() const {
    double s = 0.0;
    for (double step : step_lengths) s += step;
    return s;
}

double ManifoldPath::displacement() const {
    if (points.size() < 2) return 0.0;
    return distance(points.back(), points.front());
}

double ManifoldPath::max_loss() const {
    double m = 0.0;
    for (double v : losses) m = std::max(m, v);
    return m;
}

ManifoldPath walk_manifold(const MlpSpec& spec, const ParamVector& theta0, const Dataset& data,
                           const WalkOptions& options) {
    require(options.step_size > 0.0, "walk_manifold: step size must be positive");
    check_gate(spec, theta0, data, options.loss_tol);

    ManifoldPath path;
    path.points.push_back(theta0);
    path.losses.push_back(loss(spec, theta0, data));
    path.corrector_iterations.push_back(0);

    const std::size_t n = theta0.size();
    std::vector<double> previous_dir;
    for (std::size_t step = 0; step < options.steps; ++step) {
        const ParamVector& here = path.points.back();
        const DenseMatrix basis = nullspace_basis(jacobian_residuals(spec, here, data), options.rel_tol);
        if (basis.cols() == 0) {
            path.completed = false;
            path.failure = "tangent space is zero-dimensional";
            break;
        }

        std::vector<double> dir(n, 0.0);
        bool continued = false;
        if (!previous_dir.empty()) {
            // Project the previous direction onto the current tangent space.
            for (std::size_t k = 0; k < basis.cols(); ++k) {
                double c = 0.0;
                for (std::size_t j = 0; j < n; ++j) c += basis(j, k) * previous_dir[j];
                for (std::size_t j = 0; j < n; ++j) dir[j] += c * basis(j, k);
            }
            const double len = norm2(dir);
            if (len > 0.5) {
                for (double& v : dir) v /= len;
                continued = true;
            }
        }
        if (!continued) {
            dir = basis.column(0);
            if (!previous_dir.empty() && dot(dir, previous_dir) < 0.0) {
                for (double& v : dir) v = -v;
            }
        }

        ParamVector predicted = here;
        for (std::size_t j = 0; j < n; ++j) predicted[j] += options.step_size * dir[j];

        Correction corrected;
        try {
            corrected = correct_to_manifold(spec, predicted, data, options.corrector);
        } catch (const NumericalError& e) {
            path.completed = false;
            path.failure = e.what();
            break;
        }
        const double value = loss(spec, corrected.params, data);
        if (!(value <= options.loss_tol)) {
            path.completed = false;
            path.failure = loss_message(value);
            break;
        }

        const double moved = distance(corrected.params, here);
        if (moved < 0.5 * options.step_size) path.no_backtrack = false;
        if (path.points.size() >= 2 && distance(corrected.params, path.points[path.points.size() - 2]) < 0.5 * options.step_size) {
            path.no_backtrack = false;
        }

        previous_dir.assign(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) previous_dir[j] = (corrected.params[j] - here[j]) / moved;

        path.step_lengths.push_back(moved);
        path.losses.push_back(value);
        path.corrector_iterations.push_back(corrected.iterations);
        path.points.push_back(std::move(corrected.params));
    }
    return path;
}

ClassifiedSpectrum classify_matrix(const DenseMatrix& symmetric, double relative_tol) {
    ClassifiedSpectrum out;
    out.eigenvalues = eig_sym(symmetric, false).eigenvalues;
    double top = 0.0;
    for (double v : out.eigenvalues) top = std::max(top, std::abs(v));
    out.tol_zero = top > 0.0 ? relative_tol * top : std::numeric_limits<double>::min();
    out.counts = classify_spectrum(out.eigenvalues, out.tol_zero);
    return out;
}

SpectrumReport hessian_spectrum_at(const MlpSpec& spec, const ParamVector& theta, const Dataset& data) {
    SpectrumReport report;
    report.n = theta.size();
    report.d = data.size();
    report.l = data.output_dim();
    report.loss = loss(spec, theta, data);
    report.finite_difference = classify_matrix(hessian_loss(spec, theta, data), kFdZeroTol);
    report.gauss_newton = classify_matrix(gauss_newton_hessian(spec, theta, data), kGaussNewtonZeroTol);
    for (std::size_t k = 0; k < report.n; ++k) {
        report.max_deviation = std::max(
            report.max_deviation, std::abs(report.finite_difference.eigenvalues[k] - report.gauss_newton.eigenvalues[k]));
    }
    return report;
}

}  // namespace zerolocus
