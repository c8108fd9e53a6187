#include "zerolocus/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"

#ifndef ZEROLOCUS_VERSION
#define ZEROLOCUS_VERSION "unknown"
#endif

namespace zerolocus {

namespace {

using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

[[noreturn]] void usage_error(const std::string& code, const std::string& what) {
    throw Error(ErrorKind::usage, code, what);
}

Json make_report(const std::string& command, const ExperimentConfig& config, Json payload, double seconds) {
    return Json{{"format", kReportFormat},
                {"version", kFormatVersion},
                {"command", command},
                {"tool_version", ZEROLOCUS_VERSION},
                {"config", config_to_json(config)},
                {"timing", {{"wall_seconds", seconds}}},
                {"payload", std::move(payload)}};
}

std::string counts_text(const SpectrumCounts& c) {
    return std::to_string(c.negative) + "/" + std::to_string(c.zero) + "/" + std::to_string(c.positive);
}

Json summary(std::size_t n, const Dataset& data, double loss_value, const Json& counts, const Json& dimension,
             bool pass) {
    return Json{{"n", n},
                {"d", data.size()},
                {"l", data.output_dim()},
                {"loss", loss_value},
                {"counts", counts},
                {"dimension", dimension},
                {"pass", pass}};
}

Dataset load_dataset(const ExperimentConfig& config) {
    if (config.data.empty()) usage_error("missing_data", "--data is required");
    return dataset_from_json(read_json_file(config.data));
}

ParamFile load_params(const ExperimentConfig& config, const Dataset& data) {
    if (config.params.empty()) usage_error("missing_params", "--params is required");
    ParamFile file = params_from_json(read_json_file(config.params));
    if (file.spec.input_dim != data.input_dim() || file.spec.output_dim != data.output_dim()) {
        usage_error("shape_mismatch", "parameter file does not match the dataset dimensions");
    }
    return file;
}

Json error_json(const Error& e) {
    return Json{{"code", e.code()}, {"kind", error_kind_name(e.kind())}, {"message", e.what()}};
}

CommandResult finish(const std::string& command, const ExperimentConfig& config, Json payload,
                     Clock::time_point start, const std::string& file, int exit_code,
                     std::vector<fs::path> written = {}) {
    CommandResult result;
    result.exit_code = exit_code;
    result.report = make_report(command, config, std::move(payload), seconds_since(start));
    const fs::path path = config.out / file;
    write_json_file(path, result.report);
    written.push_back(path);
    result.written = std::move(written);
    return result;
}

double max_probe_drift(const MlpSpec& spec, const ManifoldPath& path, const std::vector<std::vector<double>>& probes) {
    double drift = 0.0;
    for (const auto& x : probes) {
        const auto base = forward(spec, path.points.front(), x);
        for (const ParamVector& theta : path.points) {
            const auto y = forward(spec, theta, x);
            for (std::size_t k = 0; k < y.size(); ++k) drift = std::max(drift, std::abs(y[k] - base[k]));
        }
    }
    return drift;
}

}  // namespace

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::contract:
        case ErrorKind::usage:
        case ErrorKind::schema:
            return kExitUsage;
        case ErrorKind::numerical:
            return kExitNumerical;
        case ErrorKind::io:
            return kExitIo;
    }
    return kExitNumerical;
}

void ExperimentConfig::validate() const {
    auto check = [](bool ok, const std::string& what) {
        if (!ok) throw Error(ErrorKind::usage, "bad_config", what);
    };
    check(input_dim >= 1 && output_dim >= 1 && points >= 1, "counts must be >= 1");
    for (std::size_t w : widths) check(w >= 1, "widths must be >= 1");
    check(!teacher_widths.empty(), "teacher widths must not be empty");
    for (std::size_t w : teacher_widths) check(w >= 1, "teacher widths must be >= 1");
    check(labels == "uniform" || labels == "teacher", "labels must be 'uniform' or 'teacher'");
    check(format == "text" || format == "csv", "format must be 'text' or 'csv'");
    check(rank_tol > 0 && gate > 0 && corrector_tol > 0 && certificate_residual > 0 && correct_below > 0,
          "tolerances must be positive");
    check(epsilon >= 0 && std::isfinite(epsilon), "epsilon must be >= 0");
    check(learning_rate >= 0 && std::isfinite(learning_rate), "learning rate must be >= 0");
    check(target_loss >= 0, "target loss must be >= 0");
    check(init_scale > 0, "init scale must be positive");
    check(step_size > 0, "step size must be positive");
}

Json config_to_json(const ExperimentConfig& c) {
    std::vector<std::string> reports;
    for (const auto& r : c.reports) reports.push_back(r.string());
    return Json{{"seed", c.seed},
                {"out", c.out.string()},
                {"input_dim", c.input_dim},
                {"output_dim", c.output_dim},
                {"points", c.points},
                {"widths", c.widths},
                {"activation", c.activation},
                {"labels", c.labels},
                {"teacher_widths", c.teacher_widths},
                {"data", c.data.string()},
                {"params", c.params.string()},
                {"reports", reports},
                {"rank_tol", c.rank_tol},
                {"gate", c.gate},
                {"corrector_tol", c.corrector_tol},
                {"certificate_residual", c.certificate_residual},
                {"correct_below", c.correct_below},
                {"epsilon", c.epsilon},
                {"learning_rate", c.learning_rate},
                {"iters", c.iters},
                {"target_loss", c.target_loss},
                {"init_scale", c.init_scale},
                {"correct", c.correct},
                {"steps", c.steps},
                {"step_size", c.step_size},
                {"probes", c.probes},
                {"format", c.format}};
}

CommandResult cmd_gen_data(const ExperimentConfig& config) {
    config.validate();
    const Activation act = Activation::parse(config.activation);
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    Dataset data;
    while (data.size() < config.points) {
        std::vector<double> x(config.input_dim);
        for (double& v : x) v = normal(rng);
        if (std::find(data.inputs.begin(), data.inputs.end(), x) != data.inputs.end()) continue;
        data.inputs.push_back(std::move(x));
    }
    Json generator{{"inputs", "standard-normal"}, {"labels", config.labels}, {"seed", config.seed}};
    if (config.labels == "uniform") {
        std::uniform_real_distribution<double> uniform(-1.0, 1.0);
        for (std::size_t i = 0; i < data.size(); ++i) {
            std::vector<double> y(config.output_dim);
            for (double& v : y) v = uniform(rng);
            data.labels.push_back(std::move(y));
        }
    } else {
        const MlpSpec teacher{config.input_dim, config.teacher_widths, config.output_dim, act};
        const ParamVector theta = init_params(teacher, rng(), 1.0);
        for (const auto& x : data.inputs) data.labels.push_back(forward(teacher, theta, x));
        generator["teacher"] = spec_to_json(teacher);
    }

    Json doc = dataset_to_json(data);
    doc["generator"] = std::move(generator);
    CommandResult result;
    result.report = doc;
    const fs::path path = config.out / "dataset.json";
    write_json_file(path, doc);
    result.written.push_back(path);
    return result;
}

CommandResult cmd_fit_exact(const ExperimentConfig& config) {
    const auto start = Clock::now();
    config.validate();
    const Activation act = Activation::parse(config.activation);
    Dataset data = load_dataset(config);
    const std::size_t d = data.size();
    const std::size_t l = data.output_dim();
    const std::vector<std::size_t> widths = config.widths.empty() ? std::vector<std::size_t>{l * d} : config.widths;
    if (widths.size() == 1 && widths[0] < l * d) {
        usage_error("width_too_small", "one hidden layer needs width >= l*d = " + std::to_string(l * d));
    }
    if (widths.size() > 1 && widths.back() < d) {
        usage_error("width_too_small", "the last hidden layer needs width >= d = " + std::to_string(d));
    }
    data.validate();

    std::vector<fs::path> written;
    Json payload{{"tolerances", {{"certificate_residual", config.certificate_residual}}}};
    if (config.epsilon > 0.0) {
        data = perturb_labels(data, config.epsilon, config.seed);
        const fs::path perturbed = config.out / "dataset.perturbed.json";
        write_json_file(perturbed, dataset_to_json(data));
        written.push_back(perturbed);
        payload["perturbation"] = {{"epsilon", config.epsilon}, {"dataset", perturbed.string()}};
    }

    FitOptions options;
    options.seed = config.seed;
    options.certificate_residual = config.certificate_residual;
    ExactFitCertificate cert;
    try {
        const ExactFitCertificate shallow = exact_fit_shallow(data, widths.size() == 1 ? widths[0] : l * d, act, options);
        if (widths.size() == 1) {
            cert = shallow;
        } else {
            const DeepFitCertificate deep = embed_deep(shallow, data, widths, options);
            payload["deep"] = {{"first_layer_bias", deep.first_layer_bias},
                               {"carried_positive", deep.carried_positive},
                               {"carried_distinct", deep.carried_distinct},
                               {"carried_values", deep.carried_values}};
            cert = deep;
        }
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::numerical) throw;
        payload["status"] = "certificate_failure";
        payload["error"] = error_json(e);
        payload["summary"] = summary(0, data, std::nan(""), nullptr, nullptr, false);
        return finish("fit-exact", config, std::move(payload), start, "fit-exact.report.json", kExitNumerical,
                      std::move(written));
    }

    const fs::path params = config.out / "params.json";
    write_json_file(params, params_to_json(cert.spec, cert.params));
    written.push_back(params);
    const double value = loss(cert.spec, cert.params, data);
    payload["status"] = "ok";
    payload["params"] = params.string();
    payload["loss"] = value;
    payload["certificate"] = certificate_to_json(cert);
    payload["summary"] = summary(cert.params.size(), data, value, nullptr, nullptr, true);
    return finish("fit-exact", config, std::move(payload), start, "fit-exact.report.json", kExitOk, std::move(written));
}

CommandResult cmd_train(const ExperimentConfig& config) {
    const auto start = Clock::now();
    config.validate();
    const Activation act = Activation::parse(config.activation);
    const Dataset data = load_dataset(config);
    const std::size_t ld = data.size() * data.output_dim();
    const std::vector<std::size_t> widths = config.widths.empty() ? std::vector<std::size_t>{2 * ld} : config.widths;
    const MlpSpec spec{data.input_dim(), widths, data.output_dim(), act};
    spec.validate();
    const ParamVector theta0 = init_params(spec, config.seed, config.init_scale);

    Json payload{{"tolerances",
                  {{"target_loss", config.target_loss},
                   {"gate", config.gate},
                   {"correct_below", config.correct_below},
                   {"corrector_tol", config.corrector_tol},
                   {"divergence_threshold", kDivergenceThreshold}}},
                 {"learning_rate", config.learning_rate},
                 {"max_iters", config.iters}};
    TrainResult trained;
    try {
        trained = train_gd(spec, theta0, data, TrainOptions{config.learning_rate, config.iters, config.target_loss});
    } catch (const DivergenceError& e) {
        payload["status"] = "diverged";
        payload["error"] = error_json(e);
        payload["diverged_at"] = e.iteration();
        payload["summary"] = summary(theta0.size(), data, e.loss_value(), nullptr, nullptr, false);
        return finish("train", config, std::move(payload), start, "train.report.json", kExitNumerical);
    }

    ParamVector theta = trained.params;
    double value = trained.trace.back();
    if (config.correct && value > config.gate && value <= config.correct_below) {
        try {
            CorrectorOptions copt;
            copt.tol = config.corrector_tol;
            const Correction c = correct_to_manifold(spec, theta, data, copt);
            theta = c.params;
            value = loss(spec, theta, data);
            payload["correction"] = {{"iterations", c.iterations}, {"residual_inf", c.residual_inf}};
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::numerical) throw;
            payload["correction"] = {{"error", error_json(e)}};
        }
    }

    const fs::path params = config.out / "params.json";
    write_json_file(params, params_to_json(spec, theta));
    payload["status"] = trained.converged ? "converged" : "not_converged";
    payload["converged"] = trained.converged;
    payload["iterations"] = trained.iterations;
    payload["params"] = params.string();
    payload["final_loss"] = value;
    payload["trace"] = trained.trace;
    payload["summary"] = summary(theta.size(), data, value, nullptr, nullptr, trained.converged);
    return finish("train", config, std::move(payload), start, "train.report.json", kExitOk, {params});
}

CommandResult cmd_analyze(const ExperimentConfig& config) {
    const auto start = Clock::now();
    config.validate();
    const Dataset data = load_dataset(config);
    ParamFile file = load_params(config, data);
    const MlpSpec& spec = file.spec;
    ParamVector theta = file.theta;
    const std::size_t n = theta.size();
    const std::size_t ld = data.size() * data.output_dim();

    Json payload{{"tolerances",
                  {{"rank_tol", config.rank_tol},
                   {"gate", config.gate},
                   {"fd_zero_tol", kFdZeroTol},
                   {"gauss_newton_zero_tol", kGaussNewtonZeroTol},
                   {"correct_below", config.correct_below},
                   {"corrector_tol", config.corrector_tol}}}};
    double value = loss(spec, theta, data);
    if (config.correct && value > config.gate && value <= config.correct_below) {
        try {
            CorrectorOptions copt;
            copt.tol = config.corrector_tol;
            const Correction c = correct_to_manifold(spec, theta, data, copt);
            theta = c.params;
            payload["correction"] = {{"iterations", c.iterations}, {"residual_inf", c.residual_inf}, {"loss_before", value}};
            value = loss(spec, theta, data);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::numerical) throw;
            payload["correction"] = {{"error", error_json(e)}};
        }
    }

    const SpectrumReport spectrum = hessian_spectrum_at(spec, theta, data);
    const std::size_t rank = numerical_rank(singular_values(jacobian_residuals(spec, theta, data)).values, config.rank_tol);
    const bool on_manifold = value <= config.gate;
    const bool expectable = n >= ld;
    const SpectrumCounts expected{0, expectable ? n - ld : 0, ld};

    payload["n"] = n;
    payload["d"] = data.size();
    payload["l"] = data.output_dim();
    payload["loss"] = value;
    payload["on_manifold"] = on_manifold;
    payload["rank"] = rank;
    payload["expected_counts"] = expectable ? counts_to_json(expected) : Json(nullptr);
    payload["expected_dimension"] = expectable ? Json(n - ld) : Json(nullptr);
    payload["finite_difference"] = spectrum_to_json(spectrum.finite_difference);
    payload["gauss_newton"] = spectrum_to_json(spectrum.gauss_newton);
    payload["max_deviation"] = spectrum.max_deviation;

    bool pass = false;
    Json dimension = nullptr;
    if (on_manifold) {
        const std::size_t dim = manifold_dimension(spec, theta, data, config.rank_tol, config.gate);
        dimension = dim;
        pass = expectable && spectrum.gauss_newton.counts == expected && dim == n - ld;
        payload["status"] = pass ? "pass" : "fail";
        payload["fd_agrees"] = expectable && spectrum.finite_difference.counts == expected;
    } else {
        payload["status"] = "not_on_manifold";
    }
    payload["dimension"] = dimension;
    payload["pass"] = pass;
    payload["summary"] = summary(n, data, value, counts_text(spectrum.gauss_newton.counts), dimension, pass);
    return finish("analyze", config, std::move(payload), start, "analyze.report.json", kExitOk);
}

CommandResult cmd_walk(const ExperimentConfig& config) {
    const auto start = Clock::now();
    config.validate();
    const Dataset data = load_dataset(config);
    const ParamFile file = load_params(config, data);
    const MlpSpec& spec = file.spec;

    WalkOptions options;
    options.steps = config.steps;
    options.step_size = config.step_size;
    options.loss_tol = config.gate;
    options.rel_tol = config.rank_tol;
    options.corrector.tol = config.corrector_tol;
    const ManifoldPath path = walk_manifold(spec, file.theta, data, options);

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> probes(config.probes, std::vector<double>(spec.input_dim));
    for (auto& x : probes)
        for (double& v : x) v = normal(rng);
    double label_error = 0.0;
    for (const ParamVector& theta : path.points) label_error = std::max(label_error, norm_inf(residuals(spec, theta, data)));

    const fs::path end = config.out / "walk-end.params.json";
    write_json_file(end, params_to_json(spec, path.points.back()));

    const bool ok = path.completed && path.max_loss() <= config.gate;
    Json payload{{"tolerances",
                  {{"gate", config.gate}, {"rank_tol", config.rank_tol}, {"corrector_tol", config.corrector_tol},
                   {"pinv_cutoff", options.corrector.pinv_cutoff}}},
                 {"status", path.completed ? "completed" : "truncated"},
                 {"completed", path.completed},
                 {"failure", path.failure},
                 {"steps_requested", config.steps},
                 {"steps_taken", path.points.size() - 1},
                 {"step_size", config.step_size},
                 {"arc_length", path.arc_length()},
                 {"displacement", path.displacement()},
                 {"max_loss", path.max_loss()},
                 {"label_error", label_error},
                 {"probe_drift", max_probe_drift(spec, path, probes)},
                 {"probes", probes},
                 {"no_backtrack", path.no_backtrack},
                 {"end_params", end.string()},
                 {"losses", path.losses},
                 {"step_lengths", path.step_lengths},
                 {"corrector_iterations", path.corrector_iterations}};
    payload["summary"] = summary(file.theta.size(), data, path.max_loss(), nullptr, nullptr, ok);
    return finish("walk", config, std::move(payload), start, "walk.report.json",
                  path.completed ? kExitOk : kExitNumerical, {end});
}

namespace {

struct Row {
    std::string file, command, status, n, d, l, loss, loss_full, counts, dimension, pass;
};

std::string number_or_dash(const Json& v) {
    if (v.is_null()) return "-";
    if (v.is_number_unsigned() || v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

std::string format_double(const Json& v, const char* fmt) {
    if (!v.is_number()) return "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v.get<double>());
    return buf;
}

Row row_from_report(const fs::path& path) {
    const Json doc = read_json_file(path);
    expect_format(doc, kReportFormat);
    if (!doc.contains("payload") || !doc["payload"].contains("summary")) {
        throw Error(ErrorKind::schema, "schema_mismatch", "report has no payload summary");
    }
    const Json& p = doc["payload"];
    const Json& s = p["summary"];
    for (const char* key : {"n", "d", "l", "loss", "counts", "dimension", "pass"}) {
        if (!s.contains(key)) throw Error(ErrorKind::schema, "schema_mismatch", std::string("summary lacks '") + key + "'");
    }
    if (!s["pass"].is_boolean()) throw Error(ErrorKind::schema, "schema_mismatch", "summary 'pass' is not a boolean");
    Row row;
    row.file = path.string();
    row.command = doc.value("command", "?");
    row.status = p.value("status", "?");
    row.n = number_or_dash(s["n"]);
    row.d = number_or_dash(s["d"]);
    row.l = number_or_dash(s["l"]);
    row.loss = format_double(s["loss"], "%.3e");
    row.loss_full = format_double(s["loss"], "%.17g");
    row.counts = number_or_dash(s["counts"]);
    row.dimension = number_or_dash(s["dimension"]);
    row.pass = s["pass"].get<bool>() ? "PASS" : "FAIL";
    return row;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

}  // namespace

CommandResult cmd_report(const ExperimentConfig& config, std::ostream& out, std::ostream& err, bool color) {
    config.validate();
    std::vector<Row> rows;
    bool skipped = false;
    bool failed = false;
    for (const fs::path& path : config.reports) {
        try {
            rows.push_back(row_from_report(path));
            failed = failed || rows.back().pass == "FAIL";
        } catch (const Error& e) {
            skipped = true;
            err << "skipped " << path.string() << ": " << e.code() << ": " << e.what() << '\n';
        }
    }

    const std::vector<std::string> header{"report", "command", "status", "n", "d", "l", "loss", "counts", "dimension", "pass"};
    auto cells = [](const Row& r, bool full) {
        return std::vector<std::string>{r.file, r.command, r.status, r.n, r.d, r.l, full ? r.loss_full : r.loss,
                                        r.counts, r.dimension, r.pass};
    };

    std::ostringstream csv;
    auto csv_line = [&csv](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) csv << (i ? "," : "") << csv_field(fields[i]);
        csv << '\n';
    };
    csv_line(header);
    for (const Row& r : rows) csv_line(cells(r, true));

    const fs::path csv_path = config.out / "summary.csv";
    {
        std::error_code ec;
        fs::create_directories(config.out, ec);
        std::ofstream file(csv_path);
        if (!file) throw Error(ErrorKind::io, "io_error", "cannot write '" + csv_path.string() + "'");
        file << csv.str();
    }

    if (config.format == "csv") {
        out << csv.str();
    } else {
        std::vector<std::size_t> width(header.size());
        for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
        for (const Row& r : rows) {
            const auto c = cells(r, false);
            for (std::size_t i = 0; i < c.size(); ++i) width[i] = std::max(width[i], c[i].size());
        }
        auto line = [&](const std::vector<std::string>& c) {
            for (std::size_t i = 0; i < c.size(); ++i) {
                // Text columns left-aligned, numeric ones right-aligned.
                const bool left = i < 3 || i == 7;
                const std::string pad(width[i] - c[i].size(), ' ');
                std::string cell = c[i];
                if (color && i + 1 == c.size() && (cell == "PASS" || cell == "FAIL")) {
                    cell = (cell == "PASS" ? "\033[32m" : "\033[31m") + cell + "\033[0m";
                }
                out << (i ? "  " : "") << (left ? cell + pad : pad + cell);
            }
            out << '\n';
        };
        line(header);
        for (const Row& r : rows) line(cells(r, false));
    }

    CommandResult result;
    result.written.push_back(csv_path);
    result.exit_code = skipped ? kExitUsage : failed ? kExitNumerical : kExitOk;
    return result;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    auto fail = [&err](const std::string& code, const std::string& kind, const std::string& message) {
        err << "error: " << Json{{"code", code}, {"kind", kind}, {"message", message}}.dump() << '\n';
    };

    ExperimentConfig config;
    CLI::App app{"Numerical lab for the zero-loss set of overparameterized MLPs", "zerolocus"};
    app.set_version_flag("--version", ZEROLOCUS_VERSION);
    app.set_config("--config", "", "TOML config file (sections per verb)");
    app.add_option("--seed", config.seed, "RNG seed");
    app.add_option("--out", config.out, "Output directory");
    app.add_flag("--plain", config.plain, "Plain table output (no color)");
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "Synthesize a dataset")->fallthrough();
    gen->add_option("-d,--points", config.points, "Number of data points");
    gen->add_option("-p,--input-dim", config.input_dim, "Input dimension");
    gen->add_option("-l,--output-dim", config.output_dim, "Label dimension");
    gen->add_option("--labels", config.labels, "uniform or teacher")->check(CLI::IsMember({"uniform", "teacher"}));
    gen->add_option("--teacher-widths", config.teacher_widths, "Teacher hidden widths")->delimiter(',');
    gen->add_option("--activation", config.activation, "smoolu or smoothed-relu:<k>");

    auto* fit = app.add_subcommand("fit-exact", "Exact interpolation by construction")->fallthrough();
    fit->add_option("--data", config.data, "Dataset file");
    fit->add_option("--widths", config.widths, "Hidden widths, e.g. 8 or 4,4,8")->delimiter(',');
    fit->add_option("--activation", config.activation, "smoolu or smoothed-relu:<k>");
    fit->add_option("--epsilon", config.epsilon, "Perturb labels within this radius first");
    fit->add_option("--certificate-residual", config.certificate_residual, "Max residual to certify");

    auto* train = app.add_subcommand("train", "Plain gradient descent")->fallthrough();
    train->add_option("--data", config.data, "Dataset file");
    train->add_option("--widths", config.widths, "Hidden widths")->delimiter(',');
    train->add_option("--activation", config.activation, "smoolu or smoothed-relu:<k>");
    train->add_option("--lr", config.learning_rate, "Learning rate");
    train->add_option("--iters", config.iters, "Maximum updates");
    train->add_option("--target", config.target_loss, "Stop at this loss");
    train->add_option("--init-scale", config.init_scale, "Initialization scale");
    train->add_flag("--correct", config.correct, "Apply the Gauss-Newton corrector near M");
    train->add_option("--correct-below", config.correct_below, "Correct only when loss is at most this");
    train->add_option("--corrector-tol", config.corrector_tol, "Corrector target |H|_inf");
    train->add_option("--gate", config.gate, "Zero-loss gate");

    auto* analyze = app.add_subcommand("analyze", "Spectrum and manifold dimension at a point")->fallthrough();
    analyze->add_option("--data", config.data, "Dataset file");
    analyze->add_option("--params", config.params, "Parameter file");
    analyze->add_option("--rank-tol", config.rank_tol, "Relative rank tolerance");
    analyze->add_option("--gate", config.gate, "Zero-loss gate");
    analyze->add_flag("--correct", config.correct, "Apply the Gauss-Newton corrector near M");
    analyze->add_option("--correct-below", config.correct_below, "Correct only when loss is at most this");
    analyze->add_option("--corrector-tol", config.corrector_tol, "Corrector target |H|_inf");

    auto* walk = app.add_subcommand("walk", "Predictor-corrector walk along M")->fallthrough();
    walk->add_option("--data", config.data, "Dataset file");
    walk->add_option("--params", config.params, "Parameter file");
    walk->add_option("--steps", config.steps, "Number of steps");
    walk->add_option("--step-size", config.step_size, "Tangent step length");
    walk->add_option("--probes", config.probes, "Held-out probe inputs");
    walk->add_option("--rank-tol", config.rank_tol, "Relative rank tolerance");
    walk->add_option("--gate", config.gate, "Zero-loss gate");
    walk->add_option("--corrector-tol", config.corrector_tol, "Corrector target |H|_inf");

    auto* report = app.add_subcommand("report", "Aggregate report files into a table")->fallthrough();
    report->add_option("reports", config.reports, "Report files");
    report->add_option("--format", config.format, "text or csv")->check(CLI::IsMember({"text", "csv"}));

    std::vector<const char*> argv{"zerolocus"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << ZEROLOCUS_VERSION << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        fail("usage_error", "usage", e.what());
        return kExitUsage;
    }

    try {
        CommandResult result;
        if (gen->parsed()) {
            result = cmd_gen_data(config);
        } else if (fit->parsed()) {
            result = cmd_fit_exact(config);
        } else if (train->parsed()) {
            result = cmd_train(config);
        } else if (analyze->parsed()) {
            result = cmd_analyze(config);
        } else if (walk->parsed()) {
            result = cmd_walk(config);
        } else {
            const bool color = !config.plain && std::getenv("NO_COLOR") == nullptr && &out == &std::cout &&
                               isatty(STDOUT_FILENO);
            result = cmd_report(config, out, err, color);
        }
        if (!report->parsed()) {
            for (const auto& path : result.written) out << "wrote " << path.string() << '\n';
            if (result.report.contains("payload")) {
                const Json& payload = result.report["payload"];
                out << "status " << payload.value("status", "?") << '\n';
                if (payload.contains("error")) fail(payload["error"]["code"], payload["error"]["kind"], payload["error"]["message"]);
            }
        }
        return result.exit_code;
    } catch (const Error& e) {
        fail(e.code(), error_kind_name(e.kind()), e.what());
        return exit_code_for(e.kind());
    } catch (const fs::filesystem_error& e) {
        fail("io_error", "io", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        fail("internal_error", "numerical", e.what());
        return kExitNumerical;
    }
}

}  // namespace zerolocus
