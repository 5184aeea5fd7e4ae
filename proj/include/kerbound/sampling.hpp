#pragma once

// Feasible-set approximation: draw candidate signals, keep those the forward
// model can map to the measurement with admissible noise.

#include "kerbound/core.hpp"
#include "kerbound/forward.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace kerbound {

/// Seeded generator; independent streams are derived from (seed, stream).
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  Vector uniform_box(const Vector& lo, const Vector& hi);

 private:
  std::mt19937_64 engine_;
};

enum class SamplerKind { grid, rejection, random_walk };

std::string to_string(SamplerKind k);
SamplerKind sampler_kind_from_string(const std::string& s);

struct SamplerSpec {
  SamplerKind kind = SamplerKind::rejection;
  Index n_max = 100;
  std::uint64_t seed = 0;
  Index budget = 100000;
  Vector step_scale;                  // random_walk: half-width of the uniform proposal per coordinate
  std::vector<Index> grid_resolution; // grid: lattice points per coordinate
  Index burn_in = 0;                  // random_walk: accepted moves discarded before recording
  Index thinning = 1;                 // random_walk: record every thinning-th accepted move

  void validate(Index d1) const;
};

struct SampleResult {
  Matrix members;  // d1 x N
  Index proposals = 0;
  std::optional<std::string> warning;
};

/// Samples up to n_max feasible signals for measurement y. If an anchor is
/// given it is recorded first and a random walk starts from it. `stream`
/// selects the RNG stream so that sets built in parallel stay reproducible.
SampleResult sample_feasible(const ForwardModel& model, const Vector& y, const SamplerSpec& sampler,
                             const std::optional<Vector>& anchor = std::nullopt, std::uint64_t stream = 0);

/// Draws e uniformly from the noise set.
Vector sample_noise(const NoiseSpec& noise, Index d2, Rng& rng);

struct MeasurementGenerator {
  Index count = 1;
  std::uint64_t seed = 0;
};

struct BuildResult {
  FeasibleSetCollection collection;
  PairedDataset dataset;
  std::vector<Vector> ground_truth;  // generator mode only
  std::vector<std::string> warnings;
};

/// Zero-padded measurement id for position k of K.
std::string measurement_id(std::size_t k, std::size_t count);

/// One feasible set per given measurement.
BuildResult build_feasible_sets(const ForwardModel& model, const std::vector<Vector>& measurements,
                                const SamplerSpec& sampler);

/// Generates y_k = F(x_k, e_k) with x_k, e_k uniform, then samples a
/// feasible set per y_k that starts with x_k.
BuildResult build_feasible_sets(const ForwardModel& model, const MeasurementGenerator& generator,
                                const SamplerSpec& sampler);

/// Truncates every set to its first n members.
FeasibleSetCollection enforce_uniform(const FeasibleSetCollection& c, Index n);

}  // namespace kerbound
