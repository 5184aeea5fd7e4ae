#pragma once

// Image resampling on band-major, row-major flattened images: the
// antialiased downsampling operator used by the super-resolution forward
// model and the interpolation upscalers used as reference inverse maps.

#include "kerbound/core.hpp"

#include <Eigen/SparseCore>

namespace kerbound {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// 1-D antialiased bilinear (triangle kernel of half-width `factor`)
/// decimation matrix of shape (n_in / factor) x n_in. Rows sum to one and
/// out-of-range taps are clamped to the edge sample.
SparseMatrix resample_matrix_1d(Index n_in, Index factor);

/// Downsampling operator for one band of a height x width image, i.e. the
/// Kronecker product of the row and column decimation matrices.
SparseMatrix downsample_band_operator(Index height, Index width, Index factor);

/// Applies the band operator to every band of a flattened image.
Vector downsample_image(const Vector& image, Index bands, Index height, Index width, Index factor);

/// Bilinear upscaling by an integer factor (half-pixel centres, clamped
/// borders). Input is the low-resolution image of size bands*height*width.
Vector upscale_bilinear(const Vector& image, Index bands, Index height, Index width, Index factor);

/// Bicubic upscaling (Keys kernel, a = -0.75, clamped borders).
Vector upscale_bicubic(const Vector& image, Index bands, Index height, Index width, Index factor);

}  // namespace kerbound
