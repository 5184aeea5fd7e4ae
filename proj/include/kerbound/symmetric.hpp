#pragma once

// Symmetric kernel size for linear forward models with additive noise:
// Moore-Penrose pseudoinverse, orthogonal projection onto the kernel,
// reflection through the kernel and dataset symmetrisation.

#include "kerbound/core.hpp"
#include "kerbound/forward.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

namespace kerbound {

/// Relative rank cutoff max(rows, cols) * machine epsilon.
template <typename Derived>
double default_svd_tolerance(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  return static_cast<double>(std::max(a.rows(), a.cols())) * static_cast<double>(std::numeric_limits<Scalar>::epsilon());
}

/// Moore-Penrose pseudoinverse via SVD. Singular values at or below
/// tol * sigma_max are treated as zero; a negative tol selects the default.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> pseudoinverse(
    const Eigen::MatrixBase<Derived>& a, double tol = -1.0) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (a.size() == 0) return Mat::Zero(a.cols(), a.rows());
  if (!a.allFinite()) throw UsageError("pseudoinverse: matrix has non-finite entries");
  if (tol < 0.0) tol = default_svd_tolerance(a);
  const Eigen::BDCSVD<Mat> svd(a.eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Scalar cutoff = static_cast<Scalar>(tol) * (s.size() > 0 ? s(0) : Scalar(0));
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv(s.size());
  for (Index i = 0; i < s.size(); ++i) inv(i) = (s(i) > cutoff && s(i) > Scalar(0)) ? Scalar(1) / s(i) : Scalar(0);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

enum class ProjectionMode { signal_only, joint };

std::string to_string(ProjectionMode m);
ProjectionMode projection_mode_from_string(const std::string& s);

/// Orthogonal projector onto a kernel. The full operator is block diagonal
/// with `blocks` copies of `matrix` (one per image band for the downsampler).
struct KernelProjector {
  Matrix matrix;
  ProjectionMode mode = ProjectionMode::signal_only;
  double svd_tol = 0.0;
  Index blocks = 1;
  Index signal_dim = 0;  // d1 of the full signal

  Index dim() const { return matrix.rows() * blocks; }
  Vector apply(const Vector& v) const;
};

/// P = I - A^+ A (signal_only) or I - B^+ B with B = [A | I] (joint).
KernelProjector kernel_projection(const Matrix& a, ProjectionMode mode, double tol = -1.0);

/// Projector for a linear-additive forward model; the downsampler is
/// handled band by band in signal_only mode.
KernelProjector kernel_projection(const ForwardModel& model, ProjectionMode mode, double tol = -1.0);

struct Reflection {
  Vector x;
  Vector e;
  bool noise_violation = false;
};

/// (x, e) - 2 P (x, e), or x - 2 P x with e unchanged in signal_only mode.
/// The violation flag is set when the reflected noise leaves `noise`.
Reflection reflect(const Vector& x, const Vector& e, const KernelProjector& proj, const NoiseSpec& noise);

struct SkersizeResult {
  double skersize = 0.0;
  PairedDataset symmetrized;          // original and reflected pair interleaved
  std::vector<double> v_norms;        // ||v_m|| per input pair
  std::vector<bool> noise_violations;  // joint mode only
  Index outside_bounds = 0;           // reflected signals outside the signal box
};

/// ((1/M') sum_m ||v_m||^p)^(1/p) with v_m the kernel component of pair m,
/// and the dataset extended by each pair's reflection.
SkersizeResult skersize(const PairedDataset& pairs, const ForwardModel& model, const KernelProjector& proj,
                        const NormSpec& norm);

SkersizeResult skersize(const PairedDataset& pairs, const ForwardModel& model, ProjectionMode mode,
                        const NormSpec& norm);

/// Groups a paired dataset back into feasible sets (one per group, members in
/// dataset order).
FeasibleSetCollection collection_from_dataset(const PairedDataset& d);

}  // namespace kerbound
