#include "kerbound/sampling.hpp"

#include <cmath>
#include <numbers>

namespace kerbound {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Matrix to_matrix(const std::vector<Vector>& cols, Index rows) {
  Matrix m(rows, static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) m.col(static_cast<Index>(i)) = cols[i];
  return m;
}

double lattice_point(double lo, double hi, Index i, Index resolution) {
  if (resolution == 1) return 0.5 * (lo + hi);
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(state)), static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state)), static_cast<std::uint32_t>(splitmix64(state))};
  engine_.seed(seq);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // Box-Muller; 1 - u keeps the logarithm finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vector Rng::uniform_box(const Vector& lo, const Vector& hi) {
  Vector x(lo.size());
  for (Index i = 0; i < lo.size(); ++i) x(i) = uniform(lo(i), hi(i));
  return x;
}

std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::grid: return "grid";
    case SamplerKind::rejection: return "rejection";
    case SamplerKind::random_walk: return "random_walk";
  }
  return "rejection";
}

SamplerKind sampler_kind_from_string(const std::string& s) {
  if (s == "grid") return SamplerKind::grid;
  if (s == "rejection") return SamplerKind::rejection;
  if (s == "random_walk") return SamplerKind::random_walk;
  throw UsageError("unknown sampler kind '" + s + "'");
}

void SamplerSpec::validate(Index d1) const {
  if (n_max < 1) throw UsageError("n_max must be at least 1");
  if (budget < n_max) throw UsageError("budget must be at least n_max");
  if (burn_in < 0 || thinning < 1) throw UsageError("burn_in must be >= 0 and thinning >= 1");
  if (kind == SamplerKind::random_walk) {
    if (step_scale.size() != d1) throw UsageError("random_walk needs step_scale of length " + std::to_string(d1));
    if ((step_scale.array() < 0.0).any() || !step_scale.allFinite())
      throw UsageError("step_scale must be finite and nonnegative");
  }
  if (kind == SamplerKind::grid) {
    if (static_cast<Index>(grid_resolution.size()) != d1)
      throw UsageError("grid sampler needs grid_resolution of length " + std::to_string(d1));
    for (Index r : grid_resolution)
      if (r < 1) throw UsageError("grid_resolution entries must be >= 1");
  }
}

Vector sample_noise(const NoiseSpec& noise, Index d2, Rng& rng) {
  const Index d3 = noise.dimension(d2);
  Vector e(d3);
  switch (noise.kind) {
    case NoiseKind::additive:
      if (noise.ball == NoiseBall::l2) {
        for (Index i = 0; i < d3; ++i) e(i) = rng.normal();
        const double n = e.norm();
        const double radius = noise.eps_additive * std::pow(rng.uniform(), 1.0 / static_cast<double>(d3));
        return n > 0.0 ? Vector(e * (radius / n)) : Vector(Vector::Zero(d3));
      }
      for (Index i = 0; i < d3; ++i) e(i) = rng.uniform(-noise.eps_additive, noise.eps_additive);
      return e;
    case NoiseKind::multiplicative:
      for (Index i = 0; i < d3; ++i) e(i) = rng.uniform(-noise.eps_multiplicative, noise.eps_multiplicative);
      return e;
    case NoiseKind::mixed:
      for (Index i = 0; i < d2; ++i) e(i) = rng.uniform(-noise.eps_multiplicative, noise.eps_multiplicative);
      for (Index i = d2; i < d3; ++i) e(i) = rng.uniform(-noise.eps_additive, noise.eps_additive);
      return e;
  }
  return e;
}

SampleResult sample_feasible(const ForwardModel& model, const Vector& y, const SamplerSpec& sampler,
                             const std::optional<Vector>& anchor, std::uint64_t stream) {
  const Index d1 = model.signal_dim();
  sampler.validate(d1);
  if (y.size() != model.measurement_dim())
    throw UsageError("measurement has length " + std::to_string(y.size()) + ", expected " +
                     std::to_string(model.measurement_dim()));
  if (!y.allFinite()) throw DataError("measurement has non-finite entries");

  const SignalBounds& box = model.bounds();
  Rng rng(sampler.seed, stream);
  std::vector<Vector> accepted;
  const auto cap = static_cast<std::size_t>(sampler.n_max);
  Index proposals = 0;

  std::optional<Vector> state;
  if (anchor) {
    if (anchor->size() != d1) throw UsageError("anchor has the wrong dimension");
    if (!model.feasible(*anchor, y)) throw DataError("anchor signal is not feasible for its measurement");
    accepted.push_back(*anchor);
    state = *anchor;
  }

  switch (sampler.kind) {
    case SamplerKind::grid: {
      std::vector<Index> idx(static_cast<std::size_t>(d1), 0);
      bool done = d1 == 0;
      while (!done && accepted.size() < cap && proposals < sampler.budget) {
        Vector x(d1);
        for (Index i = 0; i < d1; ++i)
          x(i) = lattice_point(box.lo(i), box.hi(i), idx[static_cast<std::size_t>(i)],
                               sampler.grid_resolution[static_cast<std::size_t>(i)]);
        ++proposals;
        if (model.feasible(x, y)) accepted.push_back(std::move(x));
        // Odometer increment, last coordinate fastest.
        Index i = d1 - 1;
        for (; i >= 0; --i) {
          auto& c = idx[static_cast<std::size_t>(i)];
          if (++c < sampler.grid_resolution[static_cast<std::size_t>(i)]) break;
          c = 0;
        }
        done = i < 0;
      }
      break;
    }
    case SamplerKind::rejection:
    case SamplerKind::random_walk: {
      const bool walk = sampler.kind == SamplerKind::random_walk;
      while (accepted.size() < cap && proposals < sampler.budget && !(walk && state)) {
        Vector x = rng.uniform_box(box.lo, box.hi);
        ++proposals;
        if (model.feasible(x, y)) {
          accepted.push_back(x);
          if (walk) state = std::move(x);
        }
      }
      if (!walk || !state) break;
      Index moves = 0;
      while (accepted.size() < cap && proposals < sampler.budget) {
        Vector x = *state;
        for (Index i = 0; i < d1; ++i) x(i) += rng.uniform(-sampler.step_scale(i), sampler.step_scale(i));
        ++proposals;
        if (!box.contains(x) || !model.feasible(x, y)) continue;
        state = x;
        ++moves;
        if (moves > sampler.burn_in && (moves - sampler.burn_in) % sampler.thinning == 0)
          accepted.push_back(std::move(x));
      }
      break;
    }
  }

  SampleResult result;
  result.members = to_matrix(accepted, d1);
  result.proposals = proposals;
  if (accepted.empty())
    result.warning = "no feasible signal found within a budget of " + std::to_string(sampler.budget) + " proposals";
  else if (accepted.size() < cap && sampler.kind != SamplerKind::grid)
    result.warning = "budget exhausted after " + std::to_string(accepted.size()) + " of " +
                     std::to_string(sampler.n_max) + " members";
  return result;
}

std::string measurement_id(std::size_t k, std::size_t count) {
  std::size_t width = 4;
  for (std::size_t c = count, digits = 0; c > 0; c /= 10) width = std::max(width, ++digits);
  std::string s = std::to_string(k);
  return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

namespace {

BuildResult build(const ForwardModel& model, const std::vector<Vector>& measurements,
                  const std::vector<Vector>* anchors, const SamplerSpec& sampler) {
  if (measurements.empty()) throw UsageError("at least one measurement is required");
  sampler.validate(model.signal_dim());
  const std::size_t k_count = measurements.size();
  std::vector<SampleResult> results(k_count);
  parallel_for(k_count, [&](std::size_t k) {
    std::optional<Vector> anchor;
    if (anchors) anchor = (*anchors)[k];
    results[k] = sample_feasible(model, measurements[k], sampler, anchor, k);
  });

  BuildResult out;
  out.collection.d1 = model.signal_dim();
  out.collection.d2 = model.measurement_dim();
  for (std::size_t k = 0; k < k_count; ++k) {
    FeasibleSet set;
    set.id = measurement_id(k, k_count);
    set.measurement = measurements[k];
    set.members = std::move(results[k].members);
    if (results[k].warning) out.warnings.push_back("measurement " + set.id + ": " + *results[k].warning);
    out.collection.entries.push_back(std::move(set));
  }
  out.dataset = dataset_from_collection(out.collection);
  return out;
}

}  // namespace

BuildResult build_feasible_sets(const ForwardModel& model, const std::vector<Vector>& measurements,
                                const SamplerSpec& sampler) {
  return build(model, measurements, nullptr, sampler);
}

BuildResult build_feasible_sets(const ForwardModel& model, const MeasurementGenerator& generator,
                                const SamplerSpec& sampler) {
  if (generator.count < 1) throw UsageError("generator count K must be at least 1");
  std::vector<Vector> truth, measurements;
  for (Index k = 0; k < generator.count; ++k) {
    // Stream offset keeps generation independent of the sampler streams.
    Rng rng(generator.seed, 0x100000000ULL + static_cast<std::uint64_t>(k));
    Vector x = rng.uniform_box(model.bounds().lo, model.bounds().hi);
    const Vector e = sample_noise(model.noise(), model.measurement_dim(), rng);
    measurements.push_back(model.apply(x, e));
    truth.push_back(std::move(x));
  }
  BuildResult out = build(model, measurements, &truth, sampler);
  out.ground_truth = std::move(truth);
  return out;
}

FeasibleSetCollection enforce_uniform(const FeasibleSetCollection& c, Index n) {
  if (n < 1) throw UsageError("uniform size must be positive");
  FeasibleSetCollection out = c;
  for (std::size_t k = 0; k < out.entries.size(); ++k) {
    auto& e = out.entries[k];
    if (e.size() < n)
      throw DataError("feasible set " + std::to_string(k + 1) + " ('" + e.id + "') has " + std::to_string(e.size()) +
                      " members, fewer than " + std::to_string(n));
    e.members.conservativeResize(Eigen::NoChange, n);
  }
  return out;
}

}  // namespace kerbound
