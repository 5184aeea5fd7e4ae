#include "kerbound/io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace kerbound::io {

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw DataError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw DataError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid value for '") + key + "': " + e.what());
  }
}

template <typename T>
T get_required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw DataError(where + " is missing '" + key + "'");
  return get_or<T>(j, key, T{});
}

Vector vector_from_json(const json& j, Index length, const std::string& what) {
  if (j.is_number()) return Vector::Constant(length, j.get<double>());
  if (!j.is_array()) throw DataError(what + " must be a number or an array");
  if (static_cast<Index>(j.size()) != length)
    throw DataError(what + " must have " + std::to_string(length) + " entries, got " + std::to_string(j.size()));
  Vector v(length);
  for (Index i = 0; i < length; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number()) throw DataError(what + " entries must be numbers");
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw DataError("matrix must be a non-empty array of rows");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw DataError("matrix rows must be arrays of equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw DataError("matrix entries must be numbers");
      m(static_cast<Index>(r), static_cast<Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json a = json::array();
  for (Index r = 0; r < m.rows(); ++r) a.push_back(vector_to_json(m.row(r).transpose()));
  return a;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string vectors_to_csv(const Matrix& columns) {
  std::string out;
  for (Index c = 0; c < columns.cols(); ++c) {
    for (Index r = 0; r < columns.rows(); ++r) {
      if (r > 0) out += ',';
      out += format_double(columns(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_vectors_csv(const fs::path& path, const Matrix& columns) { write_file_atomic(path, vectors_to_csv(columns)); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Matrix read_vectors_csv(const fs::path& path, std::optional<Index> expected_length) {
  const std::string text = read_file(path);
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      std::string_view field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      double v = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || res.ec != std::errc{} || res.ptr != field.data() + field.size() || !std::isfinite(v))
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": invalid number '" + std::string(field) + "'");
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": row length differs from the first row");
    rows.push_back(std::move(row));
  }
  const Index len = rows.empty() ? expected_length.value_or(0) : static_cast<Index>(rows.front().size());
  if (expected_length && len != *expected_length)
    throw DataError(path.string() + ": vectors have length " + std::to_string(len) + ", expected " +
                    std::to_string(*expected_length));
  Matrix m(len, static_cast<Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c)
    for (Index r = 0; r < len; ++r) m(r, static_cast<Index>(c)) = rows[c][static_cast<std::size_t>(r)];
  return m;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

json norm_to_json(const NormSpec& norm) {
  json j;
  j["p"] = norm.p;
  if (norm.inner == InnerNorm::linf)
    j["q"] = "inf";
  else
    j["q"] = norm.inner == InnerNorm::l1 ? 1 : 2;
  json mask = json::array();
  for (auto m : norm.mask) mask.push_back(static_cast<int>(m));
  j["mask"] = mask;
  return j;
}

NormSpec norm_from_json(const json& j) {
  check_keys(j, {"p", "q", "mask"}, "norm");
  NormSpec n;
  n.p = get_or<double>(j, "p", 2.0);
  if (j.contains("q")) {
    const json& q = j.at("q");
    if (q.is_string())
      n.inner = inner_norm_from_exponent(q.get<std::string>());
    else if (q.is_number())
      n.inner = inner_norm_from_exponent(q.get<double>() == 1.0 ? "1" : (q.get<double>() == 2.0 ? "2" : "?"));
    else
      throw DataError("norm.q must be 1, 2 or \"inf\"");
  }
  if (j.contains("mask")) {
    if (!j.at("mask").is_array()) throw DataError("norm.mask must be an array of 0/1");
    for (const auto& m : j.at("mask")) {
      if (!m.is_number_integer() || (m.get<int>() != 0 && m.get<int>() != 1))
        throw DataError("norm.mask entries must be 0 or 1");
      n.mask.push_back(static_cast<std::uint8_t>(m.get<int>()));
    }
  }
  return n;
}

void write_collection(const fs::path& dir, const FeasibleSetCollection& c, const NormSpec& norm) {
  c.validate();
  fs::create_directories(dir);
  json manifest;
  manifest["version"] = 1;
  manifest["d1"] = c.d1;
  manifest["d2"] = c.d2;
  manifest["norm"] = norm_to_json(norm);
  json entries = json::array();
  for (const auto& e : c.entries) {
    const std::string y_name = "y_" + e.id + ".csv";
    const std::string fs_name = "fs_" + e.id + ".csv";
    write_vectors_csv(dir / y_name, e.measurement);
    write_vectors_csv(dir / fs_name, e.members);
    entries.push_back({{"id", e.id}, {"measurement", y_name}, {"feasible", fs_name}, {"count", e.size()}});
  }
  manifest["entries"] = entries;
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

LoadedCollection read_collection(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw DataError("manifest.json is not valid JSON: " + std::string(e.what()));
  }
  check_keys(manifest, {"version", "d1", "d2", "norm", "entries"}, "manifest.json");
  if (get_required<int>(manifest, "version", "manifest.json") != 1) throw DataError("unsupported manifest version");
  LoadedCollection out;
  auto& c = out.collection;
  c.d1 = get_required<Index>(manifest, "d1", "manifest.json");
  c.d2 = get_required<Index>(manifest, "d2", "manifest.json");
  if (c.d1 < 1 || c.d2 < 1) throw DataError("manifest dimensions must be positive");
  out.norm = manifest.contains("norm") ? norm_from_json(manifest.at("norm")) : NormSpec{};
  if (!manifest.contains("entries") || !manifest.at("entries").is_array())
    throw DataError("manifest.json needs an 'entries' array");
  for (const auto& entry : manifest.at("entries")) {
    check_keys(entry, {"id", "measurement", "feasible", "count"}, "manifest entry");
    FeasibleSet set;
    set.id = get_required<std::string>(entry, "id", "manifest entry");
    const Matrix y = read_vectors_csv(dir / get_required<std::string>(entry, "measurement", "manifest entry"), c.d2);
    if (y.cols() != 1) throw DataError("measurement file for '" + set.id + "' must hold exactly one vector");
    set.measurement = y.col(0);
    set.members = read_vectors_csv(dir / get_required<std::string>(entry, "feasible", "manifest entry"), c.d1);
    if (entry.contains("count") && get_or<Index>(entry, "count", -1) != set.size())
      throw DataError("feasible set '" + set.id + "' has " + std::to_string(set.size()) +
                      " members but the manifest records " + std::to_string(get_or<Index>(entry, "count", -1)));
    c.entries.push_back(std::move(set));
  }
  c.validate();
  out.norm.validate(c.d1);
  return out;
}

void write_predictions(const fs::path& dir, const PredictionMap& predictions) {
  fs::create_directories(dir);
  for (const auto& [id, v] : predictions) write_vectors_csv(dir / ("pred_" + id + ".csv"), v);
}

PredictionMap read_predictions(const fs::path& dir, const FeasibleSetCollection& c) {
  if (!fs::is_directory(dir)) throw DataError("prediction directory '" + dir.string() + "' does not exist");
  PredictionMap out;
  for (const auto& e : c.entries) {
    const fs::path file = dir / ("pred_" + e.id + ".csv");
    if (!fs::exists(file)) {
      if (e.size() == 0) continue;
      throw DataError("missing prediction " + file.string());
    }
    const Matrix m = read_vectors_csv(file, c.d1);
    if (m.cols() != 1) throw DataError(file.string() + " must hold exactly one vector");
    out[e.id] = m.col(0);
  }
  return out;
}

NoiseSpec noise_from_json(const json& j) {
  check_keys(j, {"kind", "eps_additive", "eps_multiplicative", "ball"}, "noise");
  NoiseSpec n;
  n.kind = noise_kind_from_string(get_or<std::string>(j, "kind", "additive"));
  n.eps_additive = get_or<double>(j, "eps_additive", 0.0);
  n.eps_multiplicative = get_or<double>(j, "eps_multiplicative", 0.0);
  const std::string ball = get_or<std::string>(j, "ball", "inf");
  if (ball == "inf")
    n.ball = NoiseBall::linf;
  else if (ball == "l2")
    n.ball = NoiseBall::l2;
  else
    throw DataError("noise.ball must be \"inf\" or \"l2\"");
  return n;
}

json noise_to_json(const NoiseSpec& n) {
  return {{"kind", to_string(n.kind)},
          {"eps_additive", n.eps_additive},
          {"eps_multiplicative", n.eps_multiplicative},
          {"ball", n.ball == NoiseBall::l2 ? "l2" : "inf"}};
}

ForwardModel model_from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw DataError("model must be a JSON object");
  const std::string type = get_required<std::string>(j, "type", "model");
  const NoiseSpec noise = j.contains("noise") ? noise_from_json(j.at("noise")) : NoiseSpec{};
  ModelVariant variant;
  if (type == "linear_additive") {
    check_keys(j, {"type", "matrix", "matrix_file", "noise", "bounds"}, "linear_additive model");
    if (j.contains("matrix") == j.contains("matrix_file"))
      throw DataError("linear_additive model needs exactly one of 'matrix' or 'matrix_file'");
    Matrix a;
    if (j.contains("matrix")) {
      a = matrix_from_json(j.at("matrix"));
    } else {
      fs::path file = get_required<std::string>(j, "matrix_file", "model");
      if (file.is_relative() && !base.empty()) file = base / file;
      a = read_vectors_csv(file).transpose();
    }
    variant = LinearModel{a};
  } else if (type == "downsample_additive") {
    check_keys(j, {"type", "bands", "height", "width", "factor", "r_max", "noise", "bounds"}, "downsample_additive model");
    DownsampleModel m;
    m.bands = get_or<Index>(j, "bands", 1);
    m.height = get_required<Index>(j, "height", "model");
    m.width = get_required<Index>(j, "width", "model");
    m.factor = get_or<Index>(j, "factor", 2);
    m.r_max = get_or<double>(j, "r_max", 1.0);
    variant = m;
  } else if (type == "microscopy") {
    check_keys(j, {"type", "pixels_x", "pixels_y", "pixel_size", "psf_sigma0", "psf_z0", "c_max", "h_max", "exposure",
                   "noise", "bounds"},
               "microscopy model");
    MicroscopyModel m;
    m.pixels_x = get_or<Index>(j, "pixels_x", m.pixels_x);
    m.pixels_y = get_or<Index>(j, "pixels_y", m.pixels_y);
    m.pixel_size = get_or<double>(j, "pixel_size", m.pixel_size);
    m.psf_sigma0 = get_or<double>(j, "psf_sigma0", m.psf_sigma0);
    m.psf_z0 = get_or<double>(j, "psf_z0", m.psf_z0);
    m.c_max = get_or<double>(j, "c_max", m.c_max);
    m.h_max = get_or<double>(j, "h_max", m.h_max);
    m.exposure = get_or<double>(j, "exposure", m.exposure);
    variant = m;
  } else {
    throw DataError("unknown model type '" + type + "'");
  }
  std::optional<SignalBounds> bounds;
  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    check_keys(b, {"lo", "hi"}, "bounds");
    const SignalBounds defaults = ForwardModel::default_bounds(variant);
    const Index d1 = defaults.lo.size();
    bounds = SignalBounds{b.contains("lo") ? vector_from_json(b.at("lo"), d1, "bounds.lo") : defaults.lo,
                          b.contains("hi") ? vector_from_json(b.at("hi"), d1, "bounds.hi") : defaults.hi};
  }
  try {
    return ForwardModel(variant, noise, bounds);
  } catch (const UsageError& e) {
    throw DataError(std::string("invalid model: ") + e.what());
  }
}

json model_to_json(const ForwardModel& m) {
  json j;
  j["type"] = m.type_name();
  if (const auto* lin = std::get_if<LinearModel>(&m.variant())) {
    j["matrix"] = matrix_to_json(lin->matrix);
  } else if (const auto* ds = std::get_if<DownsampleModel>(&m.variant())) {
    j["bands"] = ds->bands;
    j["height"] = ds->height;
    j["width"] = ds->width;
    j["factor"] = ds->factor;
    j["r_max"] = ds->r_max;
  } else if (const auto* mic = std::get_if<MicroscopyModel>(&m.variant())) {
    j["pixels_x"] = mic->pixels_x;
    j["pixels_y"] = mic->pixels_y;
    j["pixel_size"] = mic->pixel_size;
    j["psf_sigma0"] = mic->psf_sigma0;
    j["psf_z0"] = mic->psf_z0;
    j["c_max"] = mic->c_max;
    j["h_max"] = mic->h_max;
    j["exposure"] = mic->exposure;
  }
  j["noise"] = noise_to_json(m.noise());
  j["bounds"] = {{"lo", vector_to_json(m.bounds().lo)}, {"hi", vector_to_json(m.bounds().hi)}};
  return j;
}

SamplerSpec sampler_from_json(const json& j, Index d1) {
  check_keys(j, {"kind", "n_max", "seed", "budget", "step_scale", "grid_resolution", "burn_in", "thinning"}, "sampler");
  SamplerSpec s;
  s.kind = sampler_kind_from_string(get_or<std::string>(j, "kind", "rejection"));
  s.n_max = get_or<Index>(j, "n_max", s.n_max);
  s.seed = get_or<std::uint64_t>(j, "seed", 0);
  s.budget = get_or<Index>(j, "budget", std::max<Index>(s.budget, s.n_max));
  s.burn_in = get_or<Index>(j, "burn_in", 0);
  s.thinning = get_or<Index>(j, "thinning", 1);
  if (j.contains("step_scale")) s.step_scale = vector_from_json(j.at("step_scale"), d1, "sampler.step_scale");
  if (j.contains("grid_resolution")) {
    const Vector r = vector_from_json(j.at("grid_resolution"), d1, "sampler.grid_resolution");
    for (Index i = 0; i < d1; ++i) s.grid_resolution.push_back(static_cast<Index>(r(i)));
  }
  return s;
}

json sampler_to_json(const SamplerSpec& s) {
  json j{{"kind", to_string(s.kind)}, {"n_max", s.n_max},     {"seed", s.seed},
         {"budget", s.budget},         {"burn_in", s.burn_in}, {"thinning", s.thinning}};
  if (s.step_scale.size() > 0) j["step_scale"] = vector_to_json(s.step_scale);
  if (!s.grid_resolution.empty()) j["grid_resolution"] = s.grid_resolution;
  return j;
}

RunConfig run_config_from_json(const json& j, const fs::path& base) {
  check_keys(j, {"model", "sampler", "norm", "measurements"}, "config");
  if (!j.contains("model")) throw DataError("config is missing 'model'");
  ForwardModel model = model_from_json(j.at("model"), base);
  SamplerSpec sampler = j.contains("sampler") ? sampler_from_json(j.at("sampler"), model.signal_dim()) : SamplerSpec{};
  NormSpec norm = j.contains("norm") ? norm_from_json(j.at("norm")) : NormSpec{};
  RunConfig cfg{std::move(model), std::move(sampler), std::move(norm), std::nullopt, {}};
  if (j.contains("measurements")) {
    const json& m = j.at("measurements");
    check_keys(m, {"generate", "file"}, "measurements");
    if (m.contains("generate") == m.contains("file"))
      throw DataError("measurements needs exactly one of 'generate' or 'file'");
    if (m.contains("generate")) {
      const json& g = m.at("generate");
      check_keys(g, {"count", "seed"}, "measurements.generate");
      cfg.generator = MeasurementGenerator{get_required<Index>(g, "count", "measurements.generate"),
                                           get_or<std::uint64_t>(g, "seed", 0)};
    } else {
      fs::path file = get_required<std::string>(m, "file", "measurements");
      if (file.is_relative() && !base.empty()) file = base / file;
      const Matrix ys = read_vectors_csv(file, cfg.model.measurement_dim());
      for (Index c = 0; c < ys.cols(); ++c) cfg.measurements.push_back(ys.col(c));
    }
  }
  return cfg;
}

json report_to_json(const BoundReport& r) {
  json j;
  j["version"] = 1;
  j["norm"] = norm_to_json(r.norm);
  j["K"] = r.measurements;
  j["uniform"] = r.uniform;
  j["kersize"] = r.kersize;
  j["half_kersize"] = r.half_kersize;
  j["losses"] = r.losses;
  j["theta_loss"] = r.theta_loss;
  j["lower_ok"] = r.lower_ok;
  j["lower_ok_all"] = r.lower_ok_all;
  j["theta_upper_ok"] = r.theta_upper_ok;
  j["theta_upper_certified"] = r.theta_upper_certified;
  j["guarantee"] = r.uniform ? "equal-size feasible sets: lower bound holds for every map, theta attains the optimum"
                             : "unequal feasible-set sizes: lower bound stated for measurable maps only, theta upper "
                               "bound not certified";
  json per = json::array();
  for (const auto& m : r.per_measurement) {
    json e{{"id", m.id}, {"n_k", m.n_k}, {"contribution", m.contribution}, {"half_kersize_single", m.half_kersize_single}};
    json losses = json::object();
    for (const auto& [name, v] : m.losses) losses[name] = std::isfinite(v) ? json(v) : json(nullptr);
    e["losses"] = losses;
    per.push_back(e);
  }
  j["per_measurement"] = per;
  return j;
}

std::string per_measurement_csv(const BoundReport& r, bool with_counts, const std::string& loss_suffix) {
  std::vector<std::string> names;
  if (!r.per_measurement.empty())
    for (const auto& [name, v] : r.per_measurement.front().losses) names.push_back(name);
  std::string out = with_counts ? "id,n_k,half_kersize_single" : "id,half_kersize_single";
  for (const auto& n : names) out += "," + n + loss_suffix;
  out += '\n';
  for (const auto& m : r.per_measurement) {
    out += m.id;
    if (with_counts) out += "," + std::to_string(m.n_k);
    out += "," + format_double(m.half_kersize_single);
    for (const auto& n : names) {
      const auto it = m.losses.find(n);
      out += ",";
      if (it != m.losses.end() && std::isfinite(it->second)) out += format_double(it->second);
    }
    out += '\n';
  }
  return out;
}

}  // namespace kerbound::io
