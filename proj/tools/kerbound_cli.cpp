// kerbound: feasible-set sampling, kernel-size bounds and bound checks from
// the command line. Exit codes: 0 ok, 1 usage, 2 data, 3 bound violation
// under --strict.

#include "kerbound/bounds.hpp"
#include "kerbound/demo.hpp"
#include "kerbound/io.hpp"
#include "kerbound/sampling.hpp"
#include "kerbound/symmetric.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

using namespace kerbound;
namespace fs = std::filesystem;
using io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitViolation = 3;

struct NormFlags {
  std::optional<double> p;
  std::optional<std::string> q;
  std::optional<std::string> mask;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--p", p, "loss exponent p > 0");
    cmd->add_option("--q", q, "inner norm exponent: 1, 2 or inf");
    cmd->add_option("--mask", mask, "comma separated 0-based coordinates kept by the norm");
  }

  NormSpec resolve(NormSpec base, Index d1) const {
    if (p) base.p = *p;
    if (q) base.inner = inner_norm_from_exponent(*q);
    if (mask) {
      base.mask.assign(static_cast<std::size_t>(d1), 0);
      std::stringstream ss(*mask);
      std::string item;
      while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        long idx = -1;
        try {
          idx = std::stol(item, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != item.size() || idx < 0 || idx >= d1)
          throw UsageError("--mask entry '" + item + "' is not a coordinate index below " + std::to_string(d1));
        base.mask[static_cast<std::size_t>(idx)] = 1;
      }
    }
    base.validate(d1);
    return base;
  }
};

json read_json(const fs::path& path) {
  try {
    return json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + " is not valid JSON: " + e.what());
  }
}

std::string print_num(double v) { return io::format_double(v); }

// Report with kernel sizes only (no reconstruction maps).
BoundReport kersize_report(const FeasibleSetCollection& c, const NormSpec& norm) {
  const KersizeResult k = kersize(c, norm);
  BoundReport r;
  r.norm = norm;
  r.measurements = c.size();
  r.uniform = c.uniform();
  r.kersize = k.kersize;
  r.half_kersize = k.half();
  r.theta_upper_certified = r.uniform;
  r.theta_loss = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < c.entries.size(); ++i) {
    MeasurementBound m;
    m.id = c.entries[i].id;
    m.n_k = c.entries[i].size();
    m.contribution = k.contributions[i];
    m.half_kersize_single = 0.5 * std::pow(m.contribution, 1.0 / norm.p);
    r.per_measurement.push_back(std::move(m));
  }
  return r;
}

json kersize_json(const BoundReport& r) {
  json j = io::report_to_json(r);
  j.erase("theta_loss");
  j.erase("theta_upper_ok");
  j.erase("lower_ok");
  j.erase("lower_ok_all");
  return j;
}

void print_summary(const FeasibleSetCollection& c) {
  const auto counts = c.counts();
  Index lo = counts.empty() ? 0 : counts.front(), hi = lo, total = 0;
  for (Index n : counts) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
    total += n;
  }
  std::cout << "K " << c.size() << "\n"
            << "N(k) min " << lo << " max " << hi << " total " << total << (c.uniform() ? " (uniform)" : "")
            << "\n";
}

int run_sample(const fs::path& config_path, const fs::path& out, std::optional<Index> n_max,
               std::optional<std::uint64_t> seed, std::optional<Index> uniform) {
  io::RunConfig cfg = io::run_config_from_json(read_json(config_path), config_path.parent_path());
  if (n_max) {
    cfg.sampler.n_max = *n_max;
    cfg.sampler.budget = std::max(cfg.sampler.budget, *n_max);
  }
  if (seed) {
    cfg.sampler.seed = *seed;
    if (cfg.generator) cfg.generator->seed = *seed;
  }
  cfg.norm.validate(cfg.model.signal_dim());
  BuildResult built;
  if (cfg.generator) {
    built = build_feasible_sets(cfg.model, *cfg.generator, cfg.sampler);
  } else {
    if (cfg.measurements.empty()) throw UsageError("config provides no measurements");
    built = build_feasible_sets(cfg.model, cfg.measurements, cfg.sampler);
  }
  for (const auto& w : built.warnings) std::cerr << "warning: " << w << "\n";
  FeasibleSetCollection c = uniform ? enforce_uniform(built.collection, *uniform) : built.collection;
  io::write_collection(out, c, cfg.norm);
  print_summary(c);
  if (std::all_of(c.entries.begin(), c.entries.end(), [](const FeasibleSet& e) { return e.size() <= 1; }))
    std::cerr << "warning: every feasible set has at most one member, the kernel size is zero\n";
  return kExitOk;
}

int run_kersize(const fs::path& dir, const NormFlags& flags, fs::path out) {
  const auto loaded = io::read_collection(dir);
  const NormSpec norm = flags.resolve(loaded.norm, loaded.collection.d1);
  const BoundReport r = kersize_report(loaded.collection, norm);
  if (out.empty()) out = dir;
  io::write_file_atomic(out / "bounds.json", kersize_json(r).dump(2) + "\n");
  io::write_file_atomic(out / "per_measurement.csv", io::per_measurement_csv(r, true, ""));
  std::cout << "kersize " << print_num(r.kersize) << "\n"
            << "half_kersize " << print_num(r.half_kersize) << "\n";
  if (!r.uniform) std::cerr << "note: feasible sets differ in size, only the lower bound is certified\n";
  return kExitOk;
}

int run_loss(const fs::path& dir, const fs::path& pred_dir, std::string name, const NormFlags& flags, fs::path out) {
  const auto loaded = io::read_collection(dir);
  const NormSpec norm = flags.resolve(loaded.norm, loaded.collection.d1);
  const PredictionMap pred = io::read_predictions(pred_dir, loaded.collection);
  const double value = loss(dataset_from_collection(loaded.collection), pred, norm);
  if (name.empty()) name = fs::path(pred_dir).lexically_normal().filename().string();
  if (name.empty()) name = "predictions";
  if (out.empty()) out = dir;
  json j = fs::exists(out / "bounds.json") ? read_json(out / "bounds.json") : json{{"version", 1}};
  if (!j.contains("losses") || !j["losses"].is_object()) j["losses"] = json::object();
  j["losses"][name] = value;
  j["norm"] = io::norm_to_json(norm);
  io::write_file_atomic(out / "bounds.json", j.dump(2) + "\n");
  std::cout << "loss " << name << " " << print_num(value) << "\n";
  return kExitOk;
}

int run_validate(const fs::path& dir, const std::vector<std::string>& pred_dirs, const NormFlags& flags, bool strict,
                 const std::optional<std::string>& model_path, fs::path out) {
  const auto loaded = io::read_collection(dir);
  const auto& c = loaded.collection;
  const NormSpec norm = flags.resolve(loaded.norm, c.d1);

  Index infeasible = 0;
  if (model_path) {
    const fs::path mp(*model_path);
    const json j = read_json(mp);
    const ForwardModel model = io::model_from_json(j.contains("model") ? j.at("model") : j, mp.parent_path());
    if (model.signal_dim() != c.d1 || model.measurement_dim() != c.d2)
      throw DataError("model dimensions do not match the collection");
    for (const auto& e : c.entries)
      for (Index n = 0; n < e.size(); ++n)
        if (!model.feasible(e.members.col(n), e.measurement)) {
          ++infeasible;
          std::cerr << "infeasible member " << n << " of set '" << e.id << "'\n";
        }
  }

  std::map<std::string, PredictionMap> maps{{"median", median_map(c)}, {"zero", zero_map(c)}};
  for (const auto& p : pred_dirs) {
    std::string name = fs::path(p).lexically_normal().filename().string();
    if (name.empty() || name == "." || maps.count(name) || name == kThetaName) name = "pred" + std::to_string(maps.size());
    maps[name] = io::read_predictions(p, c);
  }
  const BoundReport r = verify_bounds(c, maps, norm);
  if (out.empty()) out = dir;
  json j = io::report_to_json(r);
  if (model_path) j["infeasible_members"] = infeasible;
  io::write_file_atomic(out / "bounds.json", j.dump(2) + "\n");
  io::write_file_atomic(out / "scatter.csv", io::per_measurement_csv(r, false, "_loss"));

  std::cout << "kersize " << print_num(r.kersize) << "\n"
            << "half_kersize " << print_num(r.half_kersize) << "\n";
  std::cout << "theta loss " << print_num(r.theta_loss) << (r.theta_upper_ok ? "" : "  ABOVE KERSIZE") << "\n";
  for (const auto& [name, v] : r.losses)
    std::cout << name << " loss " << print_num(v) << (r.lower_ok.at(name) ? "" : "  BELOW HALF KERSIZE") << "\n";
  if (!r.uniform) std::cerr << "note: feasible sets differ in size, the theta upper bound is not certified\n";

  const bool violated = !r.lower_ok_all || infeasible > 0;
  if (violated) std::cerr << "bound check failed" << (infeasible > 0 ? " (infeasible members present)" : "") << "\n";
  return violated && strict ? kExitViolation : kExitOk;
}

int run_skersize(const fs::path& dir, const std::optional<std::string>& matrix_path,
                 const std::optional<std::string>& model_path, double eps, const std::string& mode_name,
                 const NormFlags& flags, fs::path out) {
  if (matrix_path.has_value() == model_path.has_value()) throw UsageError("give exactly one of --matrix or --model");
  const auto loaded = io::read_collection(dir);
  const auto& c = loaded.collection;
  std::optional<ForwardModel> model;
  if (matrix_path) {
    const Matrix a = io::read_vectors_csv(*matrix_path).transpose();
    model.emplace(LinearModel{a}, NoiseSpec::additive(eps));
  } else {
    const fs::path mp(*model_path);
    const json j = read_json(mp);
    model.emplace(io::model_from_json(j.contains("model") ? j.at("model") : j, mp.parent_path()));
  }
  if (model->signal_dim() != c.d1 || model->measurement_dim() != c.d2)
    throw DataError("model dimensions do not match the dataset");
  const NormSpec norm = flags.resolve(loaded.norm, c.d1);
  const ProjectionMode mode = projection_mode_from_string(mode_name);
  const PairedDataset pairs = dataset_from_collection(c);
  const SkersizeResult r = skersize(pairs, *model, mode, norm);

  if (out.empty()) out = dir / "symmetric";
  std::string v = "id,v_norm\n";
  std::vector<Index> seen(c.entries.size(), 0);
  for (Index i = 0; i < pairs.size(); ++i) {
    const auto g = static_cast<std::size_t>(pairs.groups[static_cast<std::size_t>(i)]);
    std::string id = pairs.group_ids[g];
    if (c.entries[g].size() > 1) id += "_" + std::to_string(seen[g]);
    ++seen[g];
    v += id + "," + print_num(r.v_norms[static_cast<std::size_t>(i)]) + "\n";
  }
  io::write_file_atomic(out / "v_norms.csv", v);
  io::write_collection(out / "symmetrized", collection_from_dataset(r.symmetrized), norm);
  Index violations = 0;
  for (bool b : r.noise_violations) violations += b ? 1 : 0;
  const json j{{"version", 1},
               {"skersize", r.skersize},
               {"two_skersize", 2.0 * r.skersize},
               {"pairs", pairs.size()},
               {"mode", to_string(mode)},
               {"norm", io::norm_to_json(norm)},
               {"noise_violations", violations},
               {"outside_bounds", r.outside_bounds}};
  io::write_file_atomic(out / "skersize.json", j.dump(2) + "\n");
  std::cout << "skersize " << print_num(r.skersize) << "\n";
  if (violations > 0) std::cerr << "warning: " << violations << " reflected noise vectors leave the noise set\n";
  if (r.outside_bounds > 0)
    std::cerr << "warning: " << r.outside_bounds << " reflected signals leave the signal bounds\n";
  return kExitOk;
}

int run_demo(const std::string& name, const fs::path& out, std::uint64_t seed, std::optional<Index> k,
             std::optional<Index> n_max, bool strict) {
  if (name == "microscopy") {
    MicroscopyDemoOptions o;
    o.seed = seed;
    if (k) o.measurements = *k;
    if (n_max) o.members = *n_max;
    const MicroscopyDemoResult r = run_microscopy_demo(o);
    write_microscopy_demo(out, r);
    std::cout << r.table_csv();
    bool ok = true;
    for (const auto& s : r.setups) ok = ok && s.report.lower_ok_all;
    std::cout << (ok ? "all losses are above half the kernel size\n" : "lower bound violated\n");
    return ok || !strict ? kExitOk : kExitViolation;
  }
  if (name == "superres") {
    SuperresDemoOptions o;
    o.seed = seed;
    if (k) o.images = *k;
    const SuperresDemoResult r = run_superres_demo(o);
    write_superres_demo(out, r);
    std::cout << r.table_csv();
    std::cout << (r.lower_ok() ? "all losses are above the symmetric kernel size\n" : "lower bound violated\n");
    return r.lower_ok() || !strict ? kExitOk : kExitViolation;
  }
  throw UsageError("unknown demo '" + name + "' (expected microscopy or superres)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel-size accuracy bounds for inverse problems"};
  app.require_subcommand(1);

  NormFlags norm_flags;
  std::string out;
  std::string dir;
  bool strict = false;
  std::optional<Index> n_max;
  std::optional<std::uint64_t> seed;

  std::string config;
  std::optional<Index> uniform;
  auto* sample = app.add_subcommand("sample", "sample feasible sets into a collection directory");
  sample->add_option("--config", config, "run configuration (JSON)")->required();
  sample->add_option("--out", out, "collection directory")->required();
  sample->add_option("--n-max", n_max, "cap on members per feasible set");
  sample->add_option("--seed", seed, "random seed");
  sample->add_option("--uniform", uniform, "truncate every set to this many members");

  auto* kersize_cmd = app.add_subcommand("kersize", "average kernel size of a collection");
  kersize_cmd->add_option("collection", dir, "collection directory")->required();
  kersize_cmd->add_option("--out", out, "report directory (default: the collection)");
  norm_flags.add_to(kersize_cmd);

  std::string pred_dir, name;
  auto* loss_cmd = app.add_subcommand("loss", "empirical loss of a prediction directory");
  loss_cmd->add_option("collection", dir, "collection directory")->required();
  loss_cmd->add_option("predictions", pred_dir, "directory of pred_<id>.csv files")->required();
  loss_cmd->add_option("--name", name, "name recorded in bounds.json (default: directory name)");
  loss_cmd->add_option("--out", out, "report directory (default: the collection)");
  norm_flags.add_to(loss_cmd);

  std::vector<std::string> pred_dirs;
  std::optional<std::string> model_path;
  auto* validate = app.add_subcommand("validate", "check the kernel-size bounds against reconstruction maps");
  validate->add_option("collection", dir, "collection directory")->required();
  validate->add_option("predictions", pred_dirs, "prediction directories");
  validate->add_option("--model", model_path, "model JSON used to re-check member feasibility");
  validate->add_flag("--strict", strict, "exit 3 if a bound is violated");
  validate->add_option("--out", out, "report directory (default: the collection)");
  norm_flags.add_to(validate);

  std::optional<std::string> matrix_path;
  double eps = 0.0;
  std::string mode = "signal";
  auto* skersize_cmd = app.add_subcommand("skersize", "symmetric kernel size of a paired dataset");
  skersize_cmd->add_option("dataset", dir, "collection directory holding the pairs")->required();
  skersize_cmd->add_option("--matrix", matrix_path, "forward matrix CSV (one row per line)");
  skersize_cmd->add_option("--eps", eps, "additive noise radius used with --matrix")->check(CLI::NonNegativeNumber);
  skersize_cmd->add_option("--model", model_path, "model JSON");
  skersize_cmd->add_option("--mode", mode, "signal or joint");
  skersize_cmd->add_option("--out", out, "output directory (default: <dataset>/symmetric)");
  norm_flags.add_to(skersize_cmd);

  std::string demo_name;
  std::uint64_t demo_seed = 0;
  std::optional<Index> demo_k;
  auto* demo = app.add_subcommand("demo", "run a synthetic end-to-end study");
  demo->add_option("name", demo_name, "microscopy or superres")->required();
  demo->add_option("--out", out, "output directory")->required();
  demo->add_option("--seed", demo_seed, "random seed");
  demo->add_option("--k", demo_k, "measurements per setup (microscopy) or images (superres)");
  demo->add_option("--n-max", n_max, "members per feasible set (microscopy)");
  demo->add_flag("--strict", strict, "exit 3 if a bound is violated");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sample) return run_sample(config, out, n_max, seed, uniform);
    if (*kersize_cmd) return run_kersize(dir, norm_flags, out);
    if (*loss_cmd) return run_loss(dir, pred_dir, name, norm_flags, out);
    if (*validate) return run_validate(dir, pred_dirs, norm_flags, strict, model_path, out);
    if (*skersize_cmd) return run_skersize(dir, matrix_path, model_path, eps, mode, norm_flags, out);
    if (*demo) return run_demo(demo_name, out, demo_seed, demo_k, n_max, strict);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnsupportedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
