#pragma once

// Forward models F(x, e) = compose(G(x), e) with bounded noise sets, and the
// closed-form feasibility predicates "exists e in E with F(x, e) = y".

#include "kerbound/core.hpp"
#include "kerbound/resize.hpp"

#include <optional>
#include <string>
#include <variant>

namespace kerbound {

enum class NoiseKind { additive, multiplicative, mixed };

/// Shape of the noise ball; the l2 ball is only meaningful for additive noise.
enum class NoiseBall { linf, l2 };

std::string to_string(NoiseKind k);
NoiseKind noise_kind_from_string(const std::string& s);

/// Noise set E. Additive noise lives in B(0, eps_additive); multiplicative
/// noise in B(0, eps_multiplicative); mixed noise is the product of both
/// balls and has twice the measurement dimension (gain part first).
struct NoiseSpec {
  NoiseKind kind = NoiseKind::additive;
  double eps_additive = 0.0;
  double eps_multiplicative = 0.0;
  NoiseBall ball = NoiseBall::linf;

  static NoiseSpec additive(double eps, NoiseBall ball = NoiseBall::linf) {
    return {NoiseKind::additive, eps, 0.0, ball};
  }
  static NoiseSpec multiplicative(double eps) { return {NoiseKind::multiplicative, 0.0, eps, NoiseBall::linf}; }
  static NoiseSpec mixed(double eps_mult, double eps_add) {
    return {NoiseKind::mixed, eps_add, eps_mult, NoiseBall::linf};
  }

  void validate() const;
  Index dimension(Index d2) const { return kind == NoiseKind::mixed ? 2 * d2 : d2; }
  /// Membership e in E (with the floating-point slack used for feasibility).
  bool contains(const Vector& e) const;
};

/// y = A x (+ noise).
struct LinearModel {
  Matrix matrix;
};

/// Band-wise antialiased downsampling of a bands x height x width image.
struct DownsampleModel {
  Index bands = 1;
  Index height = 0;
  Index width = 0;
  Index factor = 2;
  double r_max = 1.0;

  Index low_height() const { return height / factor; }
  Index low_width() const { return width / factor; }
};

/// Single-emitter localisation microscopy; the signal is (x, y, z, C, h)
/// with positions in nm, C the background flux and h the emission rate.
struct MicroscopyModel {
  Index pixels_x = 11;
  Index pixels_y = 11;
  double pixel_size = 100.0;
  double psf_sigma0 = 130.0;
  double psf_z0 = 400.0;
  double c_max = 10.0;
  double h_max = 2000.0;
  double exposure = 1.0;

  double sigma(double z) const { return psf_sigma0 * std::sqrt(1.0 + (z / psf_z0) * (z / psf_z0)); }
};

using ModelVariant = std::variant<LinearModel, DownsampleModel, MicroscopyModel>;

/// Box describing the signal set M1.
struct SignalBounds {
  Vector lo;
  Vector hi;

  bool contains(const Vector& x) const;
};

/// Expected pixel intensities of the pixel-integrated Gaussian PSF,
/// flattened row-major (index py * pixels_x + px).
Vector microscopy_intensity(const MicroscopyModel& model, const Vector& theta);

class ForwardModel {
 public:
  /// Validates the description; an empty `bounds` selects the model's
  /// default signal box.
  ForwardModel(ModelVariant variant, NoiseSpec noise, std::optional<SignalBounds> bounds = std::nullopt);

  static SignalBounds default_bounds(const ModelVariant& variant);

  const ModelVariant& variant() const { return variant_; }
  const NoiseSpec& noise() const { return noise_; }
  const SignalBounds& bounds() const { return bounds_; }
  std::string type_name() const;

  Index signal_dim() const { return d1_; }
  Index measurement_dim() const { return d2_; }
  Index noise_dim() const { return noise_.dimension(d2_); }

  /// True for F(x, e) = A x + e with an explicit matrix or the downsampler.
  bool is_linear_additive() const;

  /// G(x).
  Vector noiseless(const Vector& x) const;

  /// F(x, e); throws DataError if e is not in E.
  Vector apply(const Vector& x, const Vector& e) const;

  /// Whether some e in E gives F(x, e) = y.
  bool feasible(const Vector& x, const Vector& y) const;

  /// Per-band operator of the downsampling model (empty otherwise).
  const SparseMatrix& band_operator() const { return band_operator_; }

  /// Dense matrix of a linear model. For the downsampler this is the
  /// block-diagonal operator and is only sensible for small images.
  Matrix dense_matrix() const;

 private:
  ModelVariant variant_;
  NoiseSpec noise_;
  SignalBounds bounds_;
  Index d1_ = 0;
  Index d2_ = 0;
  SparseMatrix band_operator_;
};

/// Relative slack applied to every feasibility comparison so that
/// measurements produced by apply() on the boundary of E stay feasible.
inline constexpr double kFeasibilitySlack = 1e-12;

}  // namespace kerbound
