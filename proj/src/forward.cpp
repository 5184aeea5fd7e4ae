#include "kerbound/forward.hpp"

#include <cmath>

namespace kerbound {

namespace {

double tolerance(double eps, double scale) { return eps + kFeasibilitySlack * std::max(1.0, scale); }

// Standard normal mass of [a, b], evaluated through upper tails so that
// intervals far from the centre keep their relative accuracy.
double normal_mass(double a, double b) {
  const double k = 1.0 / std::sqrt(2.0);
  if (a >= 0.0) return 0.5 * (std::erfc(a * k) - std::erfc(b * k));
  if (b <= 0.0) return 0.5 * (std::erfc(-b * k) - std::erfc(-a * k));
  return 1.0 - 0.5 * (std::erfc(-a * k) + std::erfc(b * k));
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::additive: return "additive";
    case NoiseKind::multiplicative: return "multiplicative";
    case NoiseKind::mixed: return "mixed";
  }
  return "additive";
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "additive") return NoiseKind::additive;
  if (s == "multiplicative") return NoiseKind::multiplicative;
  if (s == "mixed") return NoiseKind::mixed;
  throw UsageError("unknown noise kind '" + s + "'");
}

void NoiseSpec::validate() const {
  if (!(eps_additive >= 0.0) || !(eps_multiplicative >= 0.0) || !std::isfinite(eps_additive) ||
      !std::isfinite(eps_multiplicative))
    throw UsageError("noise radii must be finite and nonnegative");
  if (kind == NoiseKind::additive && eps_multiplicative != 0.0)
    throw UsageError("additive noise must have eps_multiplicative = 0");
  if (kind == NoiseKind::multiplicative && eps_additive != 0.0)
    throw UsageError("multiplicative noise must have eps_additive = 0");
  if (ball == NoiseBall::l2 && kind != NoiseKind::additive)
    throw UnsupportedError("the l2 noise ball is only available for additive noise");
}

bool NoiseSpec::contains(const Vector& e) const {
  auto in_box = [](const auto& v, double eps) {
    return v.size() == 0 || v.template lpNorm<Eigen::Infinity>() <= tolerance(eps, eps);
  };
  switch (kind) {
    case NoiseKind::additive:
      if (ball == NoiseBall::l2) return e.norm() <= tolerance(eps_additive, eps_additive);
      return in_box(e, eps_additive);
    case NoiseKind::multiplicative: return in_box(e, eps_multiplicative);
    case NoiseKind::mixed: {
      if (e.size() % 2 != 0) return false;
      const Index half = e.size() / 2;
      return in_box(e.head(half), eps_multiplicative) && in_box(e.tail(half), eps_additive);
    }
  }
  return false;
}

bool SignalBounds::contains(const Vector& x) const {
  if (x.size() != lo.size()) return false;
  return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

Vector microscopy_intensity(const MicroscopyModel& m, const Vector& theta) {
  if (theta.size() != 5) throw UsageError("microscopy signal must be (x, y, z, C, h)");
  const double x = theta(0), y = theta(1), z = theta(2), c = theta(3), h = theta(4);
  const double s = m.pixel_size;
  const double sigma = m.sigma(z);
  // The PSF is separable, so one CDF difference per column and per row.
  Vector wx(m.pixels_x), wy(m.pixels_y);
  for (Index px = 0; px < m.pixels_x; ++px) {
    const double left = static_cast<double>(px) * s;
    wx(px) = normal_mass((left - x) / sigma, (left + s - x) / sigma);
  }
  for (Index py = 0; py < m.pixels_y; ++py) {
    const double top = static_cast<double>(py) * s;
    wy(py) = normal_mass((top - y) / sigma, (top + s - y) / sigma);
  }
  const double t = m.exposure;
  Vector mu(m.pixels_x * m.pixels_y);
  for (Index py = 0; py < m.pixels_y; ++py)
    for (Index px = 0; px < m.pixels_x; ++px) mu(py * m.pixels_x + px) = c * t + h * t * wx(px) * wy(py);
  return mu;
}

ForwardModel::ForwardModel(ModelVariant variant, NoiseSpec noise, std::optional<SignalBounds> bounds)
    : variant_(std::move(variant)), noise_(noise) {
  noise_.validate();
  std::visit(overloaded{
                 [&](const LinearModel& m) {
                   if (m.matrix.size() == 0) throw UsageError("linear model needs a non-empty matrix");
                   if (!m.matrix.allFinite()) throw UsageError("linear model matrix has non-finite entries");
                   d1_ = m.matrix.cols();
                   d2_ = m.matrix.rows();
                 },
                 [&](const DownsampleModel& m) {
                   if (m.bands < 1) throw UsageError("downsample model needs at least one band");
                   if (m.factor < 2) throw UsageError("downsampling factor must be an integer >= 2");
                   if (m.height < 1 || m.width < 1 || m.height % m.factor != 0 || m.width % m.factor != 0)
                     throw UsageError("image dimensions must be positive multiples of the factor");
                   if (!(m.r_max > 0.0)) throw UsageError("r_max must be positive");
                   band_operator_ = downsample_band_operator(m.height, m.width, m.factor);
                   d1_ = m.bands * m.height * m.width;
                   d2_ = m.bands * m.low_height() * m.low_width();
                 },
                 [&](const MicroscopyModel& m) {
                   if (m.pixels_x < 1 || m.pixels_y < 1) throw UsageError("microscopy sensor needs pixels");
                   for (double v : {m.pixel_size, m.psf_sigma0, m.psf_z0, m.c_max, m.h_max, m.exposure})
                     if (!(v > 0.0) || !std::isfinite(v))
                       throw UsageError("microscopy physical parameters must be positive");
                   d1_ = 5;
                   d2_ = m.pixels_x * m.pixels_y;
                 },
             },
             variant_);
  bounds_ = bounds ? *bounds : default_bounds(variant_);
  if (bounds_.lo.size() != d1_ || bounds_.hi.size() != d1_)
    throw UsageError("signal bounds must have length " + std::to_string(d1_));
  if (!bounds_.lo.allFinite() || !bounds_.hi.allFinite() || (bounds_.lo.array() > bounds_.hi.array()).any())
    throw UsageError("signal bounds must be finite with lo <= hi");
}

SignalBounds ForwardModel::default_bounds(const ModelVariant& variant) {
  return std::visit(
      overloaded{
          [](const LinearModel& m) {
            const Index d = m.matrix.cols();
            return SignalBounds{Vector::Constant(d, -1.0), Vector::Constant(d, 1.0)};
          },
          [](const DownsampleModel& m) {
            const Index d = m.bands * m.height * m.width;
            return SignalBounds{Vector::Zero(d), Vector::Constant(d, m.r_max)};
          },
          [](const MicroscopyModel& m) {
            Vector lo(5), hi(5);
            lo << 0.0, 0.0, -m.psf_z0, 0.0, 0.0;
            hi << static_cast<double>(m.pixels_x) * m.pixel_size, static_cast<double>(m.pixels_y) * m.pixel_size,
                m.psf_z0, m.c_max, m.h_max;
            return SignalBounds{lo, hi};
          },
      },
      variant);
}

std::string ForwardModel::type_name() const {
  return std::visit(overloaded{
                        [](const LinearModel&) { return std::string("linear_additive"); },
                        [](const DownsampleModel&) { return std::string("downsample_additive"); },
                        [](const MicroscopyModel&) { return std::string("microscopy"); },
                    },
                    variant_);
}

bool ForwardModel::is_linear_additive() const {
  return noise_.kind == NoiseKind::additive && !std::holds_alternative<MicroscopyModel>(variant_);
}

Vector ForwardModel::noiseless(const Vector& x) const {
  if (x.size() != d1_)
    throw UsageError("signal has length " + std::to_string(x.size()) + ", expected " + std::to_string(d1_));
  return std::visit(overloaded{
                        [&](const LinearModel& m) -> Vector { return m.matrix * x; },
                        [&](const DownsampleModel& m) -> Vector {
                          const Index in_size = m.height * m.width;
                          const Index out_size = m.low_height() * m.low_width();
                          Vector y(d2_);
                          for (Index b = 0; b < m.bands; ++b)
                            y.segment(b * out_size, out_size) = band_operator_ * x.segment(b * in_size, in_size);
                          return y;
                        },
                        [&](const MicroscopyModel& m) -> Vector { return microscopy_intensity(m, x); },
                    },
                    variant_);
}

Vector ForwardModel::apply(const Vector& x, const Vector& e) const {
  if (e.size() != noise_dim())
    throw UsageError("noise has length " + std::to_string(e.size()) + ", expected " + std::to_string(noise_dim()));
  if (!noise_.contains(e)) throw DataError("noise vector lies outside the noise set");
  const Vector g = noiseless(x);
  switch (noise_.kind) {
    case NoiseKind::additive: return g + e;
    case NoiseKind::multiplicative: return g.cwiseProduct(e);
    case NoiseKind::mixed:
      return (g.array() * (1.0 + e.head(d2_).array()) + e.tail(d2_).array()).matrix();
  }
  return g;
}

bool ForwardModel::feasible(const Vector& x, const Vector& y) const {
  if (y.size() != d2_)
    throw UsageError("measurement has length " + std::to_string(y.size()) + ", expected " + std::to_string(d2_));
  const Vector g = noiseless(x);
  switch (noise_.kind) {
    case NoiseKind::additive: {
      const Vector r = y - g;
      if (noise_.ball == NoiseBall::l2) return r.norm() <= tolerance(noise_.eps_additive, y.norm());
      for (Index i = 0; i < d2_; ++i)
        if (std::abs(r(i)) > tolerance(noise_.eps_additive, std::abs(y(i)))) return false;
      return true;
    }
    case NoiseKind::multiplicative:
      for (Index i = 0; i < d2_; ++i)
        if (std::abs(y(i)) > tolerance(std::abs(g(i)) * noise_.eps_multiplicative, std::abs(y(i)))) return false;
      return true;
    case NoiseKind::mixed:
      for (Index i = 0; i < d2_; ++i) {
        const double bound = std::abs(g(i)) * noise_.eps_multiplicative + noise_.eps_additive;
        if (std::abs(y(i) - g(i)) > tolerance(bound, std::abs(y(i)))) return false;
      }
      return true;
  }
  return false;
}

Matrix ForwardModel::dense_matrix() const {
  return std::visit(overloaded{
                        [](const LinearModel& m) -> Matrix { return m.matrix; },
                        [&](const DownsampleModel& m) -> Matrix {
                          const Matrix band = Matrix(band_operator_);
                          Matrix a = Matrix::Zero(d2_, d1_);
                          for (Index b = 0; b < m.bands; ++b)
                            a.block(b * band.rows(), b * band.cols(), band.rows(), band.cols()) = band;
                          return a;
                        },
                        [](const MicroscopyModel&) -> Matrix {
                          throw UnsupportedError("the microscopy model is not linear");
                        },
                    },
                    variant_);
}

}  // namespace kerbound
