#include "kerbound/demo.hpp"

#include "kerbound/io.hpp"
#include "kerbound/resize.hpp"

#include <cmath>

namespace kerbound {

namespace {

NormSpec lateral_norm() { return NormSpec{InnerNorm::l2, {1, 1, 0, 0, 0}, 2.0}; }

std::string csv_row(std::initializer_list<std::string> fields) {
  std::string out;
  for (const auto& f : fields) {
    if (!out.empty()) out += ',';
    out += f;
  }
  return out + '\n';
}

std::string num(double v) { return io::format_double(v); }

}  // namespace

std::vector<MicroscopySetup> MicroscopyDemoOptions::default_setups() {
  return {{1.0, 2000.0}, {3.0, 1000.0}, {6.0, 500.0}, {10.0, 250.0}};
}

ForwardModel microscopy_demo_model(const MicroscopySetup& setup) {
  MicroscopyModel m;
  m.c_max = 1.1 * setup.background;
  m.h_max = 1.1 * setup.emission;
  const double extent = static_cast<double>(m.pixels_x) * m.pixel_size;
  Vector lo(5), hi(5);
  lo << 0.3 * extent, 0.3 * extent, -m.psf_z0, 0.9 * setup.background, 0.9 * setup.emission;
  hi << 0.7 * extent, 0.7 * extent, m.psf_z0, 1.1 * setup.background, 1.1 * setup.emission;
  return ForwardModel(m, NoiseSpec::mixed(0.05, 1.0), SignalBounds{lo, hi});
}

SamplerSpec microscopy_demo_sampler(const MicroscopySetup& setup, Index members, std::uint64_t seed) {
  SamplerSpec s;
  s.kind = SamplerKind::random_walk;
  s.n_max = members;
  s.seed = seed;
  s.thinning = 5;
  s.burn_in = 50;
  s.budget = members * 400;
  // Wider lateral steps for dimmer emitters, whose feasible sets are larger.
  const double lateral = 4.0 * std::sqrt(2000.0 / setup.emission);
  s.step_scale = Vector(5);
  s.step_scale << lateral, lateral, 20.0, 0.02 * setup.background, 0.01 * setup.emission;
  return s;
}

MicroscopyDemoResult run_microscopy_demo(const MicroscopyDemoOptions& options) {
  if (options.measurements < 1 || options.members < 1) throw UsageError("demo needs K >= 1 and N >= 1");
  if (options.setups.empty()) throw UsageError("demo needs at least one setup");
  MicroscopyDemoResult out;
  out.norm = lateral_norm();
  for (std::size_t s = 0; s < options.setups.size(); ++s) {
    MicroscopySetupResult r;
    r.setup = options.setups[s];
    const ForwardModel model = microscopy_demo_model(r.setup);
    const SamplerSpec sampler = microscopy_demo_sampler(r.setup, options.members, options.seed + s);
    r.build = build_feasible_sets(model, MeasurementGenerator{options.measurements, options.seed + s}, sampler);
    std::map<std::string, PredictionMap> maps{{"mean", mean_map(r.build.collection)},
                                              {"median", median_map(r.build.collection)}};
    r.report = verify_bounds(r.build.collection, maps, out.norm);

    PairedDataset truth;
    truth.d1 = 5;
    truth.d2 = r.build.collection.d2;
    truth.signals.resize(5, static_cast<Index>(r.build.ground_truth.size()));
    truth.measurements.resize(truth.d2, truth.signals.cols());
    for (std::size_t k = 0; k < r.build.ground_truth.size(); ++k) {
      truth.signals.col(static_cast<Index>(k)) = r.build.ground_truth[k];
      truth.measurements.col(static_cast<Index>(k)) = r.build.collection.entries[k].measurement;
      truth.groups.push_back(static_cast<Index>(k));
      truth.group_ids.push_back(r.build.collection.entries[k].id);
    }
    r.ground_truth_mean_loss = loss(truth, maps.at("mean"), out.norm);
    out.setups.push_back(std::move(r));
  }
  return out;
}

std::string MicroscopyDemoResult::table_csv() const {
  std::string out = "setup,background,emission,K,N,half_kersize,kersize,mean_loss,median_loss,theta_loss,"
                    "mean_loss_ground_truth\n";
  for (std::size_t s = 0; s < setups.size(); ++s) {
    const auto& r = setups[s];
    const auto counts = r.build.collection.counts();
    out += csv_row({std::to_string(s + 1), num(r.setup.background), num(r.setup.emission),
                    std::to_string(r.build.collection.size()), std::to_string(counts.empty() ? 0 : counts.front()),
                    num(r.report.half_kersize), num(r.report.kersize), num(r.report.losses.at("mean")),
                    num(r.report.losses.at("median")), num(r.report.theta_loss), num(r.ground_truth_mean_loss)});
  }
  return out;
}

std::string MicroscopyDemoResult::scatter_csv() const {
  std::string out = "setup,id,n_k,half_kersize_single,kersize_single,mean_loss,median_loss\n";
  for (std::size_t s = 0; s < setups.size(); ++s) {
    for (const auto& m : setups[s].report.per_measurement) {
      out += csv_row({std::to_string(s + 1), m.id, std::to_string(m.n_k), num(m.half_kersize_single),
                      num(2.0 * m.half_kersize_single), num(m.losses.at("mean")), num(m.losses.at("median"))});
    }
  }
  return out;
}

void write_microscopy_demo(const std::filesystem::path& dir, const MicroscopyDemoResult& result) {
  for (std::size_t s = 0; s < result.setups.size(); ++s) {
    const auto sub = dir / ("setup_" + std::to_string(s + 1));
    const auto& r = result.setups[s];
    io::write_collection(sub / "collection", r.build.collection, result.norm);
    io::write_file_atomic(sub / "bounds.json", io::report_to_json(r.report).dump(2) + "\n");
    io::write_file_atomic(sub / "scatter.csv", io::per_measurement_csv(r.report, false, "_loss"));
  }
  io::write_file_atomic(dir / "table.csv", result.table_csv());
  io::write_file_atomic(dir / "scatter.csv", result.scatter_csv());
}

Vector synthetic_image(Index bands, Index height, Index width, Rng& rng) {
  Vector img(bands * height * width);
  // A few broad blobs shared by all bands with per-band weights, plus a ramp.
  constexpr int kBlobs = 4;
  double cx[kBlobs], cy[kBlobs], rad[kBlobs];
  for (int b = 0; b < kBlobs; ++b) {
    cx[b] = rng.uniform(0.0, static_cast<double>(width));
    cy[b] = rng.uniform(0.0, static_cast<double>(height));
    rad[b] = rng.uniform(0.15, 0.4) * static_cast<double>(std::min(height, width));
  }
  for (Index band = 0; band < bands; ++band) {
    double w[kBlobs];
    for (double& wi : w) wi = rng.uniform(0.0, 1.0);
    const double gx = rng.uniform(-0.5, 0.5), gy = rng.uniform(-0.5, 0.5);
    for (Index r = 0; r < height; ++r) {
      for (Index c = 0; c < width; ++c) {
        const double u = (static_cast<double>(c) + 0.5) / static_cast<double>(width) - 0.5;
        const double v = (static_cast<double>(r) + 0.5) / static_cast<double>(height) - 0.5;
        double val = 0.5 + 0.3 * (gx * u + gy * v);
        for (int b = 0; b < kBlobs; ++b) {
          const double dx = static_cast<double>(c) - cx[b], dy = static_cast<double>(r) - cy[b];
          val += 0.25 * (w[b] - 0.5) * std::exp(-(dx * dx + dy * dy) / (2.0 * rad[b] * rad[b]));
        }
        img(band * height * width + r * width + c) = std::clamp(val, 0.0, 1.0);
      }
    }
  }
  return img;
}

SuperresDemoResult run_superres_demo(const SuperresDemoOptions& o) {
  if (o.images < 1) throw UsageError("demo needs at least one image");
  DownsampleModel dm{o.bands, o.height, o.width, o.factor, 1.0};
  ForwardModel model(dm, NoiseSpec::additive(o.eps));
  Rng rng(o.seed, 0);
  Matrix signals(model.signal_dim(), o.images);
  Matrix measurements(model.measurement_dim(), o.images);
  for (Index m = 0; m < o.images; ++m) {
    const Vector x = synthetic_image(o.bands, o.height, o.width, rng);
    signals.col(m) = x;
    measurements.col(m) = model.apply(x, sample_noise(model.noise(), model.measurement_dim(), rng));
  }
  PairedDataset pairs = paired_dataset(signals, measurements);
  const NormSpec norm = NormSpec::euclidean(2.0);
  SkersizeResult sym = skersize(pairs, model, kernel_projection(model, ProjectionMode::signal_only), norm);

  const Index lh = dm.low_height(), lw = dm.low_width();
  PredictionMap bilinear, bicubic;
  for (Index m = 0; m < o.images; ++m) {
    const std::string& id = pairs.group_ids[static_cast<std::size_t>(m)];
    bilinear[id] = upscale_bilinear(measurements.col(m), o.bands, lh, lw, o.factor);
    bicubic[id] = upscale_bicubic(measurements.col(m), o.bands, lh, lw, o.factor);
  }
  const FeasibleSetCollection sym_sets = collection_from_dataset(sym.symmetrized);
  const std::vector<std::pair<std::string, PredictionMap>> maps{
      {"bilinear", bilinear}, {"bicubic", bicubic}, {"zero", zero_map(sym_sets)}, {kThetaName, mean_map(sym_sets)}};

  SuperresDemoResult out{norm, model, pairs, std::move(sym), {}};
  for (const auto& [name, pred] : maps)
    out.methods.push_back({name, loss(out.pairs, pred, norm), loss(out.sym.symmetrized, pred, norm)});
  return out;
}

bool SuperresDemoResult::lower_ok() const {
  for (const auto& m : methods)
    if (!leq_tol(sym.skersize, m.loss_symmetrized)) return false;
  return true;
}

std::string SuperresDemoResult::table_csv() const {
  std::string out = "method,loss_original,loss_symmetrized,skersize,two_skersize,lower_ok,within_two_skersize\n";
  for (const auto& m : methods) {
    out += csv_row({m.name, num(m.loss_original), num(m.loss_symmetrized), num(sym.skersize), num(2.0 * sym.skersize),
                    leq_tol(sym.skersize, m.loss_symmetrized) ? "true" : "false",
                    leq_tol(m.loss_symmetrized, 2.0 * sym.skersize) ? "true" : "false"});
  }
  return out;
}

void write_superres_demo(const std::filesystem::path& dir, const SuperresDemoResult& result) {
  io::write_collection(dir / "pairs", collection_from_dataset(result.pairs), result.norm);
  io::write_collection(dir / "symmetrized", collection_from_dataset(result.sym.symmetrized), result.norm);
  std::string v = "id,v_norm\n";
  for (std::size_t i = 0; i < result.sym.v_norms.size(); ++i)
    v += result.pairs.group_ids[i] + "," + num(result.sym.v_norms[i]) + "\n";
  io::write_file_atomic(dir / "v_norms.csv", v);
  io::write_file_atomic(dir / "table.csv", result.table_csv());
  io::json j{{"skersize", result.sym.skersize},
             {"pairs", result.pairs.size()},
             {"outside_bounds", result.sym.outside_bounds},
             {"lower_ok", result.lower_ok()},
             {"model", io::model_to_json(result.model)}};
  io::write_file_atomic(dir / "report.json", j.dump(2) + "\n");
}

}  // namespace kerbound
