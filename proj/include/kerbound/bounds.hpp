#pragma once

// Average kernel size of a feasible-set collection, the per-measurement
// minimiser theta that attains the optimal loss, and the report that checks
// the lower/upper bound inequalities for a set of reconstruction maps.

#include "kerbound/core.hpp"

#include <map>
#include <string>
#include <vector>

namespace kerbound {

struct KersizeResult {
  double kersize = 0.0;
  std::vector<double> contributions;  // v_k per set

  double half() const { return 0.5 * kersize; }
};

/// v = (1/N^2) sum over ordered member pairs of ||x_n - x_n'||^p; zero for an
/// empty set. Pairs are visited once and doubled; the sum is compensated and
/// reduced in a fixed chunk order.
double set_contribution(const Matrix& members, const NormSpec& norm);

/// ((1/K) sum_k v_k)^(1/p).
KersizeResult kersize(const FeasibleSetCollection& c, const NormSpec& norm);

/// argmin_z (1/N) sum_n ||x_n - z||^p. Closed form for p = 2 with the l2
/// inner norm, Weiszfeld iteration for p = 1 with l2, coordinate medians for
/// p = 1 with l1 and subgradient descent otherwise. Unmasked coordinates take
/// the member mean. Throws UnsupportedError for p < 1.
Vector optimal_map_value(const Matrix& members, const NormSpec& norm);

/// Mean objective (1/N) sum_n ||x_n - z||^p.
double map_objective(const Matrix& members, const Vector& z, const NormSpec& norm);

/// Built-in reconstruction maps evaluated on the collection's own members.
/// Empty sets map to the zero vector.
PredictionMap theta_map(const FeasibleSetCollection& c, const NormSpec& norm);
PredictionMap mean_map(const FeasibleSetCollection& c);
PredictionMap median_map(const FeasibleSetCollection& c);
PredictionMap zero_map(const FeasibleSetCollection& c);

/// Relative tolerance of every bound inequality, scaled by max(1, value).
inline constexpr double kBoundTolerance = 1e-9;

inline bool leq_tol(double lhs, double rhs) { return lhs <= rhs + kBoundTolerance * std::max(1.0, std::abs(rhs)); }

struct MeasurementBound {
  std::string id;
  Index n_k = 0;
  double contribution = 0.0;
  double half_kersize_single = 0.0;    // 0.5 * v_k^(1/p)
  std::map<std::string, double> losses;  // loss of each map on this set alone
};

struct BoundReport {
  NormSpec norm;
  Index measurements = 0;
  bool uniform = true;
  double kersize = 0.0;
  double half_kersize = 0.0;
  std::map<std::string, double> losses;
  double theta_loss = 0.0;
  std::map<std::string, bool> lower_ok;
  bool lower_ok_all = true;
  bool theta_upper_ok = true;
  /// The theta upper bound is only a theorem when all sets have equal size.
  bool theta_upper_certified = true;
  std::vector<MeasurementBound> per_measurement;
  PredictionMap theta;
};

inline constexpr const char* kThetaName = "theta";

/// Evaluates kersize, the loss of each named map and of theta, and the
/// inequality flags half_kersize <= loss and loss(theta) <= kersize.
BoundReport verify_bounds(const FeasibleSetCollection& c, const std::map<std::string, PredictionMap>& maps,
                          const NormSpec& norm);

}  // namespace kerbound
