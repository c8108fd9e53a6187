#include "zerolocus/io.hpp"

#include <fstream>
#include <sstream>

namespace zerolocus {

namespace {

[[noreturn]] void schema_error(const std::string& what) { throw Error(ErrorKind::schema, "schema_mismatch", what); }

const Json& field(const Json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key)) schema_error(std::string("missing field '") + key + "'");
    return doc.at(key);
}

template <typename T>
T field_as(const Json& doc, const char* key) {
    try {
        return field(doc, key).get<T>();
    } catch (const nlohmann::json::exception&) {
        schema_error(std::string("field '") + key + "' has the wrong type");
    }
}

}  // namespace

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "io_error", "cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::schema, "bad_json", "'" + path.string() + "': " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& doc) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::io, "io_error", "cannot create '" + path.parent_path().string() + "'");
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "io_error", "cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::io, "io_error", "write to '" + path.string() + "' failed");
}

void expect_format(const Json& doc, const char* format) {
    if (field_as<std::string>(doc, "format") != format) schema_error(std::string("expected a ") + format + " file");
    if (field_as<int>(doc, "version") != kFormatVersion) schema_error("unsupported format version");
}

Json spec_to_json(const MlpSpec& spec) {
    return Json{{"input_dim", spec.input_dim},
                {"hidden_widths", spec.hidden_widths},
                {"output_dim", spec.output_dim},
                {"activation", spec.activation.tag()}};
}

MlpSpec spec_from_json(const Json& doc) {
    MlpSpec spec;
    spec.input_dim = field_as<std::size_t>(doc, "input_dim");
    spec.hidden_widths = field_as<std::vector<std::size_t>>(doc, "hidden_widths");
    spec.output_dim = field_as<std::size_t>(doc, "output_dim");
    try {
        spec.activation = Activation::parse(field_as<std::string>(doc, "activation"));
        spec.validate();
    } catch (const Error& e) {
        schema_error(e.what());
    }
    return spec;
}

Json dataset_to_json(const Dataset& data) {
    return Json{{"format", kDatasetFormat},
                {"version", kFormatVersion},
                {"d", data.size()},
                {"p", data.input_dim()},
                {"l", data.output_dim()},
                {"inputs", data.inputs},
                {"labels", data.labels}};
}

Dataset dataset_from_json(const Json& doc) {
    expect_format(doc, kDatasetFormat);
    Dataset data;
    data.inputs = field_as<std::vector<std::vector<double>>>(doc, "inputs");
    data.labels = field_as<std::vector<std::vector<double>>>(doc, "labels");
    try {
        data.validate_shape();
    } catch (const Error& e) {
        schema_error(e.what());
    }
    if (field_as<std::size_t>(doc, "d") != data.size() || field_as<std::size_t>(doc, "p") != data.input_dim() ||
        field_as<std::size_t>(doc, "l") != data.output_dim()) {
        schema_error("dataset header does not match its records");
    }
    return data;
}

Json params_to_json(const MlpSpec& spec, const ParamVector& theta) {
    return Json{{"format", kParamsFormat},
                {"version", kFormatVersion},
                {"spec", spec_to_json(spec)},
                {"n", theta.size()},
                {"theta", std::vector<double>(theta.values().begin(), theta.values().end())}};
}

ParamFile params_from_json(const Json& doc) {
    expect_format(doc, kParamsFormat);
    ParamFile file{spec_from_json(field(doc, "spec")), ParamVector(field_as<std::vector<double>>(doc, "theta"))};
    if (file.theta.size() != param_count(file.spec)) schema_error("parameter count does not match the spec");
    return file;
}

Json counts_to_json(const SpectrumCounts& counts) {
    return Json{{"negative", counts.negative}, {"zero", counts.zero}, {"positive", counts.positive}};
}

Json spectrum_to_json(const ClassifiedSpectrum& spectrum) {
    return Json{{"tol_zero", spectrum.tol_zero},
                {"counts", counts_to_json(spectrum.counts)},
                {"eigenvalues", spectrum.eigenvalues}};
}

Json certificate_to_json(const ExactFitCertificate& cert) {
    Json blocks = Json::array();
    for (const InterpolantBlock& block : cert.blocks) {
        blocks.push_back(Json{{"direction", block.direction},
                              {"thresholds", block.thresholds},
                              {"output_weights", block.output_weights},
                              {"order", block.order},
                              {"diagonal", block.diagonal},
                              {"max_entry", block.max_entry},
                              {"gap_scale", block.gap_scale},
                              {"conditioning", block.conditioning}});
    }
    return Json{{"spec", spec_to_json(cert.spec)},
                {"n", cert.params.size()},
                {"max_residual", cert.max_residual},
                {"min_diagonal", cert.min_diagonal},
                {"max_entry", cert.max_entry},
                {"conditioning", cert.conditioning},
                {"residuals", cert.residuals},
                {"blocks", std::move(blocks)}};
}

}  // namespace zerolocus
