#pragma once

// Domain types shared by every module: signals, measurements, the evaluation
// pseudo-norm, feasible-set collections and paired datasets.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace kerbound {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Bad arguments or inconsistent dimensions (CLI exit code 1).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent data (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration the library deliberately does not handle.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class InnerNorm { l1, l2, linf };

InnerNorm inner_norm_from_exponent(const std::string& q);
std::string to_string(InnerNorm q);

/// Pseudo-norm on signal space: an l1/l2/linf norm restricted to the
/// coordinates selected by `mask`, together with the loss exponent p.
///
/// An empty mask selects every coordinate.
struct NormSpec {
  InnerNorm inner = InnerNorm::l2;
  std::vector<std::uint8_t> mask;
  double p = 2.0;

  static NormSpec euclidean(double p = 2.0) { return NormSpec{InnerNorm::l2, {}, p}; }

  bool selects(Index i) const { return mask.empty() || mask[static_cast<std::size_t>(i)] != 0; }
  bool full_mask() const;

  /// Throws UsageError unless p > 0 and the mask fits dimension d1 with at
  /// least one selected coordinate.
  void validate(Index d1) const;
};

/// Masked norm of a single vector expression.
template <typename Derived>
double masked_norm(const Eigen::MatrixBase<Derived>& v, const NormSpec& norm) {
  if (norm.mask.empty()) {
    switch (norm.inner) {
      case InnerNorm::l1: return v.template lpNorm<1>();
      case InnerNorm::l2: return v.norm();
      case InnerNorm::linf: return v.size() == 0 ? 0.0 : v.template lpNorm<Eigen::Infinity>();
    }
  }
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (!norm.selects(i)) continue;
    const double a = std::abs(static_cast<double>(v(i)));
    switch (norm.inner) {
      case InnerNorm::l1: acc += a; break;
      case InnerNorm::l2: acc += a * a; break;
      case InnerNorm::linf: acc = std::max(acc, a); break;
    }
  }
  return norm.inner == InnerNorm::l2 ? std::sqrt(acc) : acc;
}

/// Distance between two signals under the masked pseudo-norm.
template <typename DerivedA, typename DerivedB>
double p_dist(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
              const NormSpec& norm) {
  if (a.size() != b.size()) throw UsageError("p_dist: dimension mismatch");
  if (!norm.mask.empty() && static_cast<Index>(norm.mask.size()) != a.size())
    throw UsageError("p_dist: mask length does not match signal dimension");
  return masked_norm(a - b, norm);
}

/// t^p with the common exponents evaluated without std::pow.
inline double pow_p(double t, double p) {
  if (p == 2.0) return t * t;
  if (p == 1.0) return t;
  return std::pow(t, p);
}

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// One measurement and the sampled members of its feasible set.
/// Members are stored column-wise (d1 x N).
struct FeasibleSet {
  std::string id;
  Vector measurement;
  Matrix members;

  Index size() const { return members.cols(); }
};

struct FeasibleSetCollection {
  Index d1 = 0;
  Index d2 = 0;
  std::vector<FeasibleSet> entries;

  Index size() const { return static_cast<Index>(entries.size()); }
  std::vector<Index> counts() const;
  /// True iff every set has the same number of members.
  bool uniform() const;
  /// Throws DataError if dimensions, ids or values are inconsistent.
  void validate() const;
};

/// Flat list of (signal, measurement) pairs; pairs that share a group share
/// the measurement and are answered by one prediction.
struct PairedDataset {
  Index d1 = 0;
  Index d2 = 0;
  Matrix signals;        // d1 x M
  Matrix measurements;   // d2 x M
  std::vector<Index> groups;
  std::vector<std::string> group_ids;

  Index size() const { return signals.cols(); }
};

/// Predictions of an approximate inverse map, keyed by measurement id.
using PredictionMap = std::map<std::string, Vector>;

PairedDataset dataset_from_collection(const FeasibleSetCollection& c);

/// Dataset of independent pairs (column m of each matrix), one group per
/// pair with ids from `ids` or "0000", "0001", ... when empty.
PairedDataset paired_dataset(const Matrix& signals, const Matrix& measurements, std::vector<std::string> ids = {});

/// Empirical reconstruction loss ((1/M) sum_m ||x_m - phi(y_m)||^p)^(1/p).
double loss(const PairedDataset& dataset, const PredictionMap& predictions, const NormSpec& norm);

/// Number of worker threads; honours KERSIZE_THREADS, defaults to the
/// hardware concurrency.
std::size_t thread_count();

/// Runs fn(i) for i in [0, n) on up to thread_count() threads. Work items
/// must write to disjoint outputs.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace kerbound
