#include "kerbound/symmetric.hpp"

#include <cmath>

namespace kerbound {

std::string to_string(ProjectionMode m) { return m == ProjectionMode::joint ? "joint" : "signal"; }

ProjectionMode projection_mode_from_string(const std::string& s) {
  if (s == "signal" || s == "signal_only") return ProjectionMode::signal_only;
  if (s == "joint") return ProjectionMode::joint;
  throw UsageError("unknown projection mode '" + s + "' (expected signal or joint)");
}

Vector KernelProjector::apply(const Vector& v) const {
  if (v.size() != dim())
    throw UsageError("projector expects length " + std::to_string(dim()) + ", got " + std::to_string(v.size()));
  if (blocks == 1) return matrix * v;
  const Index n = matrix.rows();
  Vector out(v.size());
  for (Index b = 0; b < blocks; ++b) out.segment(b * n, n).noalias() = matrix * v.segment(b * n, n);
  return out;
}

KernelProjector kernel_projection(const Matrix& a, ProjectionMode mode, double tol) {
  if (!a.allFinite()) throw UsageError("kernel_projection: matrix has non-finite entries");
  KernelProjector p;
  p.mode = mode;
  p.signal_dim = a.cols();
  if (mode == ProjectionMode::signal_only) {
    p.svd_tol = tol < 0.0 ? default_svd_tolerance(a) : tol;
    const Matrix pinv = pseudoinverse(a, p.svd_tol);
    p.matrix = Matrix::Identity(a.cols(), a.cols()) - pinv * a;
  } else {
    Matrix b(a.rows(), a.cols() + a.rows());
    b << a, Matrix::Identity(a.rows(), a.rows());
    p.svd_tol = tol < 0.0 ? default_svd_tolerance(b) : tol;
    const Matrix pinv = pseudoinverse(b, p.svd_tol);
    p.matrix = Matrix::Identity(b.cols(), b.cols()) - pinv * b;
  }
  // Symmetrise away rounding so the projector is exactly symmetric.
  p.matrix = (0.5 * (p.matrix + p.matrix.transpose())).eval();
  return p;
}

KernelProjector kernel_projection(const ForwardModel& model, ProjectionMode mode, double tol) {
  if (!model.is_linear_additive())
    throw UnsupportedError("the symmetric kernel size needs a forward model of the form A x + e");
  if (const auto* ds = std::get_if<DownsampleModel>(&model.variant()); ds && mode == ProjectionMode::signal_only) {
    KernelProjector p = kernel_projection(Matrix(model.band_operator()), mode, tol);
    p.blocks = ds->bands;
    p.signal_dim = model.signal_dim();
    return p;
  }
  return kernel_projection(model.dense_matrix(), mode, tol);
}

Reflection reflect(const Vector& x, const Vector& e, const KernelProjector& proj, const NoiseSpec& noise) {
  Reflection r;
  if (proj.mode == ProjectionMode::signal_only) {
    if (x.size() != proj.dim()) throw UsageError("reflect: signal dimension does not match the projector");
    r.x = x - 2.0 * proj.apply(x);
    r.e = e;
    return r;
  }
  const Index d1 = proj.signal_dim;
  if (x.size() != d1 || x.size() + e.size() != proj.dim())
    throw UsageError("reflect: (signal, noise) dimension does not match the joint projector");
  Vector joint(proj.dim());
  joint << x, e;
  const Vector reflected = joint - 2.0 * proj.apply(joint);
  r.x = reflected.head(d1);
  r.e = reflected.tail(e.size());
  r.noise_violation = !noise.contains(r.e);
  return r;
}

SkersizeResult skersize(const PairedDataset& pairs, const ForwardModel& model, const KernelProjector& proj,
                        const NormSpec& norm) {
  if (!model.is_linear_additive())
    throw UnsupportedError("the symmetric kernel size needs a forward model of the form A x + e");
  const Index m = pairs.size();
  if (m == 0) throw DataError("skersize of an empty dataset is undefined");
  if (pairs.d1 != model.signal_dim() || pairs.d2 != model.measurement_dim())
    throw UsageError("dataset dimensions do not match the forward model");
  norm.validate(pairs.d1);

  SkersizeResult out;
  out.v_norms.resize(static_cast<std::size_t>(m));
  std::vector<std::uint8_t> violations(static_cast<std::size_t>(m), 0);
  Matrix reflected(pairs.d1, m);
  std::vector<std::uint8_t> infeasible(static_cast<std::size_t>(m), 0);

  parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
    const auto col = static_cast<Index>(i);
    const Vector x = pairs.signals.col(col);
    const Vector y = pairs.measurements.col(col);
    if (!model.feasible(x, y)) {
      infeasible[i] = 1;
      return;
    }
    Vector v;
    if (proj.mode == ProjectionMode::signal_only) {
      v = proj.apply(x);
      reflected.col(col) = x - 2.0 * v;
    } else {
      const Reflection r = reflect(x, y - model.noiseless(x), proj, model.noise());
      v = 0.5 * (x - r.x);
      reflected.col(col) = r.x;
      violations[i] = r.noise_violation ? 1 : 0;
    }
    out.v_norms[i] = masked_norm(v, norm);
  });
  for (Index i = 0; i < m; ++i)
    if (infeasible[static_cast<std::size_t>(i)])
      throw DataError("pair " + std::to_string(i) + " is not feasible: its measurement is not A x + e with e in the noise set");

  out.noise_violations.assign(violations.begin(), violations.end());

  CompensatedSum acc;
  for (double v : out.v_norms) acc += pow_p(v, norm.p);
  out.skersize = std::pow(acc.value() / static_cast<double>(m), 1.0 / norm.p);

  PairedDataset& s = out.symmetrized;
  s.d1 = pairs.d1;
  s.d2 = pairs.d2;
  s.group_ids = pairs.group_ids;
  s.signals.resize(pairs.d1, 2 * m);
  s.measurements.resize(pairs.d2, 2 * m);
  s.groups.reserve(static_cast<std::size_t>(2 * m));
  for (Index i = 0; i < m; ++i) {
    const auto g = pairs.groups[static_cast<std::size_t>(i)];
    s.signals.col(2 * i) = pairs.signals.col(i);
    s.signals.col(2 * i + 1) = reflected.col(i);
    s.measurements.col(2 * i) = pairs.measurements.col(i);
    s.measurements.col(2 * i + 1) = pairs.measurements.col(i);
    s.groups.push_back(g);
    s.groups.push_back(g);
    if (!model.bounds().contains(reflected.col(i))) ++out.outside_bounds;
  }
  return out;
}

SkersizeResult skersize(const PairedDataset& pairs, const ForwardModel& model, ProjectionMode mode,
                        const NormSpec& norm) {
  return skersize(pairs, model, kernel_projection(model, mode), norm);
}

FeasibleSetCollection collection_from_dataset(const PairedDataset& d) {
  FeasibleSetCollection c;
  c.d1 = d.d1;
  c.d2 = d.d2;
  std::vector<std::vector<Index>> cols(d.group_ids.size());
  for (Index i = 0; i < d.size(); ++i) cols[static_cast<std::size_t>(d.groups[static_cast<std::size_t>(i)])].push_back(i);
  for (std::size_t g = 0; g < d.group_ids.size(); ++g) {
    FeasibleSet set;
    set.id = d.group_ids[g];
    set.members.resize(d.d1, static_cast<Index>(cols[g].size()));
    for (std::size_t j = 0; j < cols[g].size(); ++j) set.members.col(static_cast<Index>(j)) = d.signals.col(cols[g][j]);
    if (!cols[g].empty())
      set.measurement = d.measurements.col(cols[g].front());
    else
      throw DataError("group '" + set.id + "' has no pairs and hence no measurement");
    c.entries.push_back(std::move(set));
  }
  return c;
}

}  // namespace kerbound
