#pragma once

// File formats: vector CSV, the collection directory layout
// (manifest.json + y_<id>.csv + fs_<id>.csv), prediction directories, JSON
// configuration of models/samplers/norms and JSON bound reports.

#include "kerbound/bounds.hpp"
#include "kerbound/core.hpp"
#include "kerbound/forward.hpp"
#include "kerbound/sampling.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kerbound::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// One vector per row, comma separated, no header, LF line endings.
std::string vectors_to_csv(const Matrix& columns);
void write_vectors_csv(const fs::path& path, const Matrix& columns);
/// Reads rows as columns of the result; all rows must have equal length
/// (or `expected_length` when given). An empty file yields zero columns.
Matrix read_vectors_csv(const fs::path& path, std::optional<Index> expected_length = std::nullopt);

/// Writes through a temporary file in the same directory and renames.
void write_file_atomic(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);

json norm_to_json(const NormSpec& norm);
NormSpec norm_from_json(const json& j);

/// Writes the collection directory; `norm` is recorded in the manifest.
void write_collection(const fs::path& dir, const FeasibleSetCollection& c, const NormSpec& norm);

struct LoadedCollection {
  FeasibleSetCollection collection;
  NormSpec norm;
};
LoadedCollection read_collection(const fs::path& dir);

/// pred_<id>.csv, one row each.
void write_predictions(const fs::path& dir, const PredictionMap& predictions);
/// Reads one prediction per id of `c` (sets with no members may be absent).
PredictionMap read_predictions(const fs::path& dir, const FeasibleSetCollection& c);

NoiseSpec noise_from_json(const json& j);
json noise_to_json(const NoiseSpec& n);
/// `base` resolves relative matrix_file paths.
ForwardModel model_from_json(const json& j, const fs::path& base = {});
json model_to_json(const ForwardModel& m);
SamplerSpec sampler_from_json(const json& j, Index d1);
json sampler_to_json(const SamplerSpec& s);

/// Command configuration for `sample`.
struct RunConfig {
  ForwardModel model;
  SamplerSpec sampler;
  NormSpec norm;
  std::optional<MeasurementGenerator> generator;
  std::vector<Vector> measurements;
};
RunConfig run_config_from_json(const json& j, const fs::path& base = {});

json report_to_json(const BoundReport& r);

/// `id,n_k,half_kersize_single,<loss columns>` (column names are the map names).
std::string per_measurement_csv(const BoundReport& r, bool with_counts, const std::string& loss_suffix);

}  // namespace kerbound::io
