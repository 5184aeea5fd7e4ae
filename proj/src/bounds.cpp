#include "kerbound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kerbound {

namespace {

constexpr Index kChunkRows = 64;
constexpr double kStepTolerance = 1e-10;
constexpr int kMaxIterations = 10000;

// Rows of `members` selected by the mask; the norm on the result needs no mask.
Matrix masked_rows(const Matrix& members, const NormSpec& norm) {
  if (norm.mask.empty()) return members;
  Index kept = 0;
  for (Index i = 0; i < members.rows(); ++i) kept += norm.selects(i) ? 1 : 0;
  Matrix out(kept, members.cols());
  for (Index i = 0, r = 0; i < members.rows(); ++i)
    if (norm.selects(i)) out.row(r++) = members.row(i);
  return out;
}

// ||a - b||^p on compact (already masked) columns.
double pair_cost(const Matrix& x, Index a, Index b, InnerNorm inner, double p) {
  switch (inner) {
    case InnerNorm::l2: {
      const double sq = (x.col(a) - x.col(b)).squaredNorm();
      return p == 2.0 ? sq : std::pow(std::sqrt(sq), p);
    }
    case InnerNorm::l1: return pow_p((x.col(a) - x.col(b)).lpNorm<1>(), p);
    case InnerNorm::linf:
      return x.rows() == 0 ? 0.0 : pow_p((x.col(a) - x.col(b)).lpNorm<Eigen::Infinity>(), p);
  }
  return 0.0;
}

// Sum over n in [begin, end), n' > n of the pair cost.
double upper_triangle_chunk(const Matrix& x, Index begin, Index end, InnerNorm inner, double p) {
  CompensatedSum acc;
  const Index n = x.cols();
  for (Index a = begin; a < end; ++a)
    for (Index b = a + 1; b < n; ++b) acc += pair_cost(x, a, b, inner, p);
  return acc.value();
}

struct Chunk {
  std::size_t set;
  Index begin;
  Index end;
};

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Vector coordinate_median(const Matrix& x) {
  Vector med(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(x.cols()));
    for (Index n = 0; n < x.cols(); ++n) row.push_back(x(i, n));
    med(i) = median_of(std::move(row));
  }
  return med;
}

// Weiszfeld iteration for the geometric median of the columns of x. Weights
// are capped at 1/eps so an iterate landing on a data point stays finite.
Vector weiszfeld(const Matrix& x) {
  const Index n = x.cols();
  Vector z = x.rowwise().mean();
  const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  const double eps = 1e-12 * scale;
  for (int it = 0; it < kMaxIterations; ++it) {
    Vector num = Vector::Zero(x.rows());
    double den = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double w = 1.0 / std::max(eps, (x.col(j) - z).norm());
      num += w * x.col(j);
      den += w;
    }
    const Vector next = num / den;
    const double step = (next - z).norm();
    z = next;
    if (step <= kStepTolerance * scale) break;
  }
  // Weiszfeld only approaches a data-point minimiser sublinearly; test the
  // nearest member with the optimality condition of the geometric median.
  Index nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < n; ++j) {
    const double d = (x.col(j) - z).norm();
    if (d < best) best = d, nearest = j;
  }
  const Vector c = x.col(nearest);
  Vector pull = Vector::Zero(x.rows());
  double multiplicity = 0.0;
  for (Index j = 0; j < n; ++j) {
    const double d = (x.col(j) - c).norm();
    if (d <= eps)
      multiplicity += 1.0;
    else
      pull += (x.col(j) - c) / d;
  }
  if (pull.norm() <= multiplicity) return c;
  return z;
}

double compact_objective(const Matrix& x, const Vector& z, InnerNorm inner, double p) {
  CompensatedSum acc;
  const NormSpec plain{inner, {}, p};
  for (Index j = 0; j < x.cols(); ++j) acc += pow_p(masked_norm(x.col(j) - z, plain), p);
  return acc.value() / static_cast<double>(x.cols());
}

Vector norm_subgradient(const Vector& r, InnerNorm inner) {
  Vector g = Vector::Zero(r.size());
  switch (inner) {
    case InnerNorm::l1:
      for (Index i = 0; i < r.size(); ++i) g(i) = r(i) > 0 ? 1.0 : (r(i) < 0 ? -1.0 : 0.0);
      break;
    case InnerNorm::l2: {
      const double n = r.norm();
      if (n > 0) g = r / n;
      break;
    }
    case InnerNorm::linf: {
      Index i = 0;
      if (r.size() > 0 && r.cwiseAbs().maxCoeff(&i) > 0) g(i) = r(i) > 0 ? 1.0 : -1.0;
      break;
    }
  }
  return g;
}

// Normalised subgradient descent with diminishing steps on the convex mean
// objective; returns the best iterate, seeded with the best of mean, median
// and every member so the result never does worse than a member.
Vector subgradient_minimiser(const Matrix& x, InnerNorm inner, double p) {
  Vector best = x.rowwise().mean();
  double best_value = compact_objective(x, best, inner, p);
  auto consider = [&](const Vector& z) {
    const double v = compact_objective(x, z, inner, p);
    if (v < best_value) best_value = v, best = z;
  };
  consider(coordinate_median(x));
  for (Index j = 0; j < x.cols(); ++j) consider(x.col(j));

  double radius = 0.0;
  for (Index j = 0; j < x.cols(); ++j) radius = std::max(radius, (x.col(j) - best).norm());
  if (radius == 0.0) return best;

  Vector z = best;
  for (int it = 0; it < kMaxIterations; ++it) {
    Vector g = Vector::Zero(x.rows());
    for (Index j = 0; j < x.cols(); ++j) {
      const Vector r = z - x.col(j);
      const double d = masked_norm(r, NormSpec{inner, {}, p});
      if (d == 0.0) continue;
      g += p * std::pow(d, p - 1.0) * norm_subgradient(r, inner);
    }
    const double gn = g.norm();
    if (gn == 0.0) break;
    const double step = radius / std::sqrt(static_cast<double>(it) + 1.0) / 10.0;
    if (step <= kStepTolerance * std::max(1.0, radius)) break;
    z -= step * g / gn;
    consider(z);
  }
  return best;
}

}  // namespace

double set_contribution(const Matrix& members, const NormSpec& norm) {
  const Index n = members.cols();
  if (n == 0) return 0.0;
  norm.validate(members.rows());
  const Matrix x = masked_rows(members, norm);
  CompensatedSum acc;
  for (Index b = 0; b < n; b += kChunkRows) acc += upper_triangle_chunk(x, b, std::min(n, b + kChunkRows), norm.inner, norm.p);
  return 2.0 * acc.value() / (static_cast<double>(n) * static_cast<double>(n));
}

KersizeResult kersize(const FeasibleSetCollection& c, const NormSpec& norm) {
  if (c.entries.empty()) throw UsageError("kersize needs at least one feasible set");
  norm.validate(c.d1);
  std::vector<Matrix> compact;
  std::vector<Chunk> chunks;
  compact.reserve(c.entries.size());
  for (std::size_t k = 0; k < c.entries.size(); ++k) {
    const Matrix& m = c.entries[k].members;
    if (m.cols() > 0 && m.rows() != c.d1) throw UsageError("feasible set '" + c.entries[k].id + "' has wrong dimension");
    compact.push_back(masked_rows(m, norm));
    for (Index b = 0; b < m.cols(); b += kChunkRows) chunks.push_back({k, b, std::min(m.cols(), b + kChunkRows)});
  }
  std::vector<double> partial(chunks.size(), 0.0);
  parallel_for(chunks.size(), [&](std::size_t i) {
    const Chunk& ch = chunks[i];
    partial[i] = upper_triangle_chunk(compact[ch.set], ch.begin, ch.end, norm.inner, norm.p);
  });

  KersizeResult r;
  r.contributions.assign(c.entries.size(), 0.0);
  std::vector<CompensatedSum> per_set(c.entries.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) per_set[chunks[i].set] += partial[i];
  CompensatedSum total;
  for (std::size_t k = 0; k < c.entries.size(); ++k) {
    const auto n = static_cast<double>(c.entries[k].size());
    r.contributions[k] = n == 0 ? 0.0 : 2.0 * per_set[k].value() / (n * n);
    total += r.contributions[k];
  }
  r.kersize = std::pow(total.value() / static_cast<double>(c.entries.size()), 1.0 / norm.p);
  return r;
}

double map_objective(const Matrix& members, const Vector& z, const NormSpec& norm) {
  if (members.cols() == 0) throw UsageError("objective of an empty set");
  CompensatedSum acc;
  for (Index j = 0; j < members.cols(); ++j) acc += pow_p(p_dist(members.col(j), z, norm), norm.p);
  return acc.value() / static_cast<double>(members.cols());
}

Vector optimal_map_value(const Matrix& members, const NormSpec& norm) {
  if (members.cols() == 0) throw UsageError("optimal map value needs at least one member");
  norm.validate(members.rows());
  if (norm.p < 1.0) throw UnsupportedError("the optimal map is only computed for p >= 1 (convex objective)");
  Vector z = members.rowwise().mean();
  if (members.cols() == 1) return members.col(0);
  if (norm.p == 2.0 && norm.inner == InnerNorm::l2) return z;

  const Matrix x = masked_rows(members, norm);
  Vector compact_z;
  if (norm.p == 1.0 && norm.inner == InnerNorm::l2)
    compact_z = weiszfeld(x);
  else if (norm.p == 1.0 && norm.inner == InnerNorm::l1)
    compact_z = coordinate_median(x);
  else
    compact_z = subgradient_minimiser(x, norm.inner, norm.p);

  for (Index i = 0, r = 0; i < z.size(); ++i)
    if (norm.selects(i)) z(i) = compact_z(r++);
  return z;
}

PredictionMap theta_map(const FeasibleSetCollection& c, const NormSpec& norm) {
  PredictionMap out;
  std::vector<Vector> values(c.entries.size());
  parallel_for(c.entries.size(), [&](std::size_t k) {
    const auto& e = c.entries[k];
    values[k] = e.size() == 0 ? Vector(Vector::Zero(c.d1)) : optimal_map_value(e.members, norm);
  });
  for (std::size_t k = 0; k < c.entries.size(); ++k) out[c.entries[k].id] = std::move(values[k]);
  return out;
}

PredictionMap mean_map(const FeasibleSetCollection& c) {
  PredictionMap out;
  for (const auto& e : c.entries)
    out[e.id] = e.size() == 0 ? Vector(Vector::Zero(c.d1)) : Vector(e.members.rowwise().mean());
  return out;
}

PredictionMap median_map(const FeasibleSetCollection& c) {
  PredictionMap out;
  for (const auto& e : c.entries) out[e.id] = e.size() == 0 ? Vector(Vector::Zero(c.d1)) : coordinate_median(e.members);
  return out;
}

PredictionMap zero_map(const FeasibleSetCollection& c) {
  PredictionMap out;
  for (const auto& e : c.entries) out[e.id] = Vector::Zero(c.d1);
  return out;
}

BoundReport verify_bounds(const FeasibleSetCollection& c, const std::map<std::string, PredictionMap>& maps,
                          const NormSpec& norm) {
  c.validate();
  norm.validate(c.d1);
  BoundReport report;
  report.norm = norm;
  report.measurements = c.size();
  report.uniform = c.uniform();
  report.theta_upper_certified = report.uniform;

  const KersizeResult ks = kersize(c, norm);
  report.kersize = ks.kersize;
  report.half_kersize = ks.half();

  const PairedDataset dataset = dataset_from_collection(c);
  for (const auto& [name, predictions] : maps) {
    if (name == kThetaName) throw UsageError("map name 'theta' is reserved");
    report.losses[name] = loss(dataset, predictions, norm);
  }
  report.theta = theta_map(c, norm);
  report.theta_loss = loss(dataset, report.theta, norm);

  report.lower_ok[kThetaName] = leq_tol(report.half_kersize, report.theta_loss);
  for (const auto& [name, value] : report.losses) report.lower_ok[name] = leq_tol(report.half_kersize, value);
  report.lower_ok_all = std::all_of(report.lower_ok.begin(), report.lower_ok.end(), [](const auto& kv) { return kv.second; });
  report.theta_upper_ok = leq_tol(report.theta_loss, report.kersize);

  for (std::size_t k = 0; k < c.entries.size(); ++k) {
    const auto& e = c.entries[k];
    MeasurementBound mb;
    mb.id = e.id;
    mb.n_k = e.size();
    mb.contribution = ks.contributions[k];
    mb.half_kersize_single = 0.5 * std::pow(mb.contribution, 1.0 / norm.p);
    auto single = [&](const PredictionMap& predictions) {
      if (e.size() == 0) return std::numeric_limits<double>::quiet_NaN();
      const auto it = predictions.find(e.id);
      if (it == predictions.end()) throw DataError("no prediction for measurement '" + e.id + "'");
      return std::pow(map_objective(e.members, it->second, norm), 1.0 / norm.p);
    };
    mb.losses[kThetaName] = single(report.theta);
    for (const auto& [name, predictions] : maps) mb.losses[name] = single(predictions);
    report.per_measurement.push_back(std::move(mb));
  }
  return report;
}

}  // namespace kerbound
