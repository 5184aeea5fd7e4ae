#pragma once

// End-to-end pipelines on synthetic data: a localisation-microscopy study
// over imaging setups of decreasing quality, and a super-resolution study
// with the downsampling model and interpolation upscalers.

#include "kerbound/bounds.hpp"
#include "kerbound/forward.hpp"
#include "kerbound/sampling.hpp"
#include "kerbound/symmetric.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kerbound {

/// One imaging setup: nominal background flux and emission rate.
struct MicroscopySetup {
  double background = 1.0;
  double emission = 2000.0;
};

struct MicroscopyDemoOptions {
  Index measurements = 10;  // K per setup
  Index members = 200;      // N per set
  std::uint64_t seed = 0;
  std::vector<MicroscopySetup> setups = default_setups();

  static std::vector<MicroscopySetup> default_setups();
};

struct MicroscopySetupResult {
  MicroscopySetup setup;
  BuildResult build;
  BoundReport report;
  double ground_truth_mean_loss = 0.0;  // RMSE of the mean estimate against the generating signals
};

struct MicroscopyDemoResult {
  NormSpec norm;
  std::vector<MicroscopySetupResult> setups;

  /// setup,background,emission,K,N,half_kersize,kersize,mean_loss,median_loss,theta_loss
  std::string table_csv() const;
  /// setup,id,n_k,half_kersize_single,kersize_single,mean_loss,median_loss
  std::string scatter_csv() const;
};

/// Model of one setup: mixed noise, positions restricted to the sensor
/// centre, background and emission within 10% of their nominal values.
ForwardModel microscopy_demo_model(const MicroscopySetup& setup);
SamplerSpec microscopy_demo_sampler(const MicroscopySetup& setup, Index members, std::uint64_t seed);

MicroscopyDemoResult run_microscopy_demo(const MicroscopyDemoOptions& options);
void write_microscopy_demo(const std::filesystem::path& dir, const MicroscopyDemoResult& result);

struct SuperresDemoOptions {
  Index images = 40;
  Index bands = 3;
  Index height = 16;
  Index width = 16;
  Index factor = 4;
  double eps = 0.01;
  std::uint64_t seed = 0;
};

/// Smooth random multi-band image with values in [0, 1].
Vector synthetic_image(Index bands, Index height, Index width, Rng& rng);

struct SuperresMethod {
  std::string name;
  double loss_original = 0.0;     // on the sampled pairs
  double loss_symmetrized = 0.0;  // on the pairs plus their reflections
};

struct SuperresDemoResult {
  NormSpec norm;
  ForwardModel model;
  PairedDataset pairs;
  SkersizeResult sym;
  std::vector<SuperresMethod> methods;

  bool lower_ok() const;
  /// method,loss_original,loss_symmetrized,skersize,two_skersize,lower_ok,within_two_skersize
  std::string table_csv() const;
};

SuperresDemoResult run_superres_demo(const SuperresDemoOptions& options);
void write_superres_demo(const std::filesystem::path& dir, const SuperresDemoResult& result);

}  // namespace kerbound
