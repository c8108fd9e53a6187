#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "zerolocus/calculus.hpp"
#include "zerolocus/construct.hpp"
#include "zerolocus/manifold.hpp"
#include "zerolocus/network.hpp"

namespace zerolocus {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kDatasetFormat = "zerolocus-dataset";
inline constexpr const char* kParamsFormat = "zerolocus-params";
inline constexpr const char* kReportFormat = "zerolocus-report";

/// Parses a JSON file. Missing or unreadable files throw Error(io, "io_error");
/// malformed JSON throws Error(schema, "bad_json").
Json read_json_file(const std::filesystem::path& path);

/// Writes `doc` followed by a newline, creating parent directories.
void write_json_file(const std::filesystem::path& path, const Json& doc);

/// Throws Error(schema, "schema_mismatch") unless doc carries the given
/// format tag and a supported version.
void expect_format(const Json& doc, const char* format);

Json spec_to_json(const MlpSpec& spec);
MlpSpec spec_from_json(const Json& doc);

Json dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const Json& doc);

struct ParamFile {
    MlpSpec spec;
    ParamVector theta;
};

Json params_to_json(const MlpSpec& spec, const ParamVector& theta);
ParamFile params_from_json(const Json& doc);

Json certificate_to_json(const ExactFitCertificate& cert);
Json spectrum_to_json(const ClassifiedSpectrum& spectrum);
Json counts_to_json(const SpectrumCounts& counts);

}  // namespace zerolocus
