#include "kerbound/resize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unsupported/Eigen/KroneckerProduct>

namespace kerbound {

namespace {

Index clamp_index(Index j, Index n) { return std::clamp<Index>(j, 0, n - 1); }

void check_image(const Vector& image, Index bands, Index height, Index width) {
  if (bands < 1 || height < 1 || width < 1) throw UsageError("image dimensions must be positive");
  if (image.size() != bands * height * width)
    throw UsageError("image has " + std::to_string(image.size()) + " values, expected " +
                     std::to_string(bands * height * width));
}

// Separable 1-D interpolation weights for upscaling, returned as a dense
// (n_in * factor) x n_in matrix.
template <typename Kernel>
Matrix upscale_matrix_1d(Index n_in, Index factor, Index radius, Kernel kernel) {
  const Index n_out = n_in * factor;
  Matrix r = Matrix::Zero(n_out, n_in);
  for (Index i = 0; i < n_out; ++i) {
    const double src = (static_cast<double>(i) + 0.5) / static_cast<double>(factor) - 0.5;
    const auto base = static_cast<Index>(std::floor(src));
    const double t = src - static_cast<double>(base);
    for (Index k = -radius + 1; k <= radius; ++k) {
      const double w = kernel(static_cast<double>(k) - t);
      if (w != 0.0) r(i, clamp_index(base + k, n_in)) += w;
    }
  }
  return r;
}

double cubic_keys(double s) {
  constexpr double a = -0.75;
  s = std::abs(s);
  if (s <= 1.0) return ((a + 2.0) * s - (a + 3.0)) * s * s + 1.0;
  if (s < 2.0) return ((a * s - 5.0 * a) * s + 8.0 * a) * s - 4.0 * a;
  return 0.0;
}

Vector apply_separable(const Vector& image, Index bands, Index height, Index width, const Matrix& rows,
                       const Matrix& cols) {
  const Index oh = rows.rows();
  const Index ow = cols.rows();
  Vector out(bands * oh * ow);
  for (Index b = 0; b < bands; ++b) {
    // Row-major band viewed as a height x width matrix.
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> in(
        image.data() + b * height * width, height, width);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> res(
        out.data() + b * oh * ow, oh, ow);
    res.noalias() = rows * in * cols.transpose();
  }
  return out;
}

}  // namespace

SparseMatrix resample_matrix_1d(Index n_in, Index factor) {
  if (factor < 2) throw UsageError("downsampling factor must be an integer >= 2");
  if (n_in % factor != 0)
    throw UsageError("dimension " + std::to_string(n_in) + " is not divisible by factor " + std::to_string(factor));
  const Index n_out = n_in / factor;
  const auto f = static_cast<double>(factor);
  std::vector<Eigen::Triplet<double>> triplets;
  for (Index i = 0; i < n_out; ++i) {
    const double centre = (static_cast<double>(i) + 0.5) * f - 0.5;
    const auto first = static_cast<Index>(std::floor(centre - f)) + 1;
    const auto last = static_cast<Index>(std::ceil(centre + f)) - 1;
    std::vector<std::pair<Index, double>> taps;
    double total = 0.0;
    for (Index j = first; j <= last; ++j) {
      const double w = 1.0 - std::abs(static_cast<double>(j) - centre) / f;
      if (w <= 0.0) continue;
      taps.emplace_back(clamp_index(j, n_in), w);
      total += w;
    }
    for (const auto& [j, w] : taps) triplets.emplace_back(i, j, w / total);
  }
  SparseMatrix r(n_out, n_in);
  r.setFromTriplets(triplets.begin(), triplets.end());  // duplicates from clamping are summed
  return r;
}

SparseMatrix downsample_band_operator(Index height, Index width, Index factor) {
  const SparseMatrix rows = resample_matrix_1d(height, factor);
  const SparseMatrix cols = resample_matrix_1d(width, factor);
  // Row-major flattening r*W + c makes the 2-D operator rows (x) cols.
  SparseMatrix a = Eigen::kroneckerProduct(rows, cols).eval();
  a.makeCompressed();
  return a;
}

Vector downsample_image(const Vector& image, Index bands, Index height, Index width, Index factor) {
  check_image(image, bands, height, width);
  const Matrix rows = Matrix(resample_matrix_1d(height, factor));
  const Matrix cols = Matrix(resample_matrix_1d(width, factor));
  return apply_separable(image, bands, height, width, rows, cols);
}

Vector upscale_bilinear(const Vector& image, Index bands, Index height, Index width, Index factor) {
  check_image(image, bands, height, width);
  if (factor < 1) throw UsageError("upscaling factor must be positive");
  auto tent = [](double s) { return std::max(0.0, 1.0 - std::abs(s)); };
  const Matrix rows = upscale_matrix_1d(height, factor, 1, tent);
  const Matrix cols = upscale_matrix_1d(width, factor, 1, tent);
  return apply_separable(image, bands, height, width, rows, cols);
}

Vector upscale_bicubic(const Vector& image, Index bands, Index height, Index width, Index factor) {
  check_image(image, bands, height, width);
  if (factor < 1) throw UsageError("upscaling factor must be positive");
  const Matrix rows = upscale_matrix_1d(height, factor, 2, cubic_keys);
  const Matrix cols = upscale_matrix_1d(width, factor, 2, cubic_keys);
  return apply_separable(image, bands, height, width, rows, cols);
}

}  // namespace kerbound
