#include "kerbound/core.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

namespace kerbound {

InnerNorm inner_norm_from_exponent(const std::string& q) {
  if (q == "1") return InnerNorm::l1;
  if (q == "2") return InnerNorm::l2;
  if (q == "inf" || q == "Inf" || q == "infinity") return InnerNorm::linf;
  throw UsageError("inner norm exponent must be one of 1, 2, inf (got '" + q + "')");
}

std::string to_string(InnerNorm q) {
  switch (q) {
    case InnerNorm::l1: return "1";
    case InnerNorm::l2: return "2";
    case InnerNorm::linf: return "inf";
  }
  return "2";
}

bool NormSpec::full_mask() const {
  return std::all_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
}

void NormSpec::validate(Index d1) const {
  if (!(p > 0.0) || !std::isfinite(p)) throw UsageError("loss exponent p must be positive and finite");
  if (mask.empty()) return;
  if (static_cast<Index>(mask.size()) != d1)
    throw UsageError("mask has length " + std::to_string(mask.size()) + ", signal dimension is " +
                     std::to_string(d1));
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }))
    throw UsageError("mask selects no coordinate");
}

std::vector<Index> FeasibleSetCollection::counts() const {
  std::vector<Index> n;
  n.reserve(entries.size());
  for (const auto& e : entries) n.push_back(e.size());
  return n;
}

bool FeasibleSetCollection::uniform() const {
  if (entries.empty()) return true;
  const Index n0 = entries.front().size();
  return std::all_of(entries.begin(), entries.end(), [n0](const FeasibleSet& e) { return e.size() == n0; });
}

void FeasibleSetCollection::validate() const {
  if (entries.empty()) throw DataError("collection has no measurements");
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (e.id.empty()) throw DataError("feasible set with empty id");
    if (!seen.insert(e.id).second) throw DataError("duplicate measurement id '" + e.id + "'");
    if (e.measurement.size() != d2)
      throw DataError("measurement '" + e.id + "' has length " + std::to_string(e.measurement.size()) +
                      ", expected " + std::to_string(d2));
    if (!e.measurement.allFinite()) throw DataError("measurement '" + e.id + "' has non-finite entries");
    if (e.size() > 0 && e.members.rows() != d1)
      throw DataError("feasible set '" + e.id + "' has members of length " + std::to_string(e.members.rows()) +
                      ", expected " + std::to_string(d1));
    if (!e.members.allFinite()) throw DataError("feasible set '" + e.id + "' has non-finite entries");
  }
}

PairedDataset dataset_from_collection(const FeasibleSetCollection& c) {
  PairedDataset d;
  d.d1 = c.d1;
  d.d2 = c.d2;
  Index m = 0;
  for (const auto& e : c.entries) m += e.size();
  d.signals.resize(c.d1, m);
  d.measurements.resize(c.d2, m);
  d.groups.reserve(static_cast<std::size_t>(m));
  Index col = 0;
  for (std::size_t k = 0; k < c.entries.size(); ++k) {
    const auto& e = c.entries[k];
    d.group_ids.push_back(e.id);
    for (Index n = 0; n < e.size(); ++n, ++col) {
      d.signals.col(col) = e.members.col(n);
      d.measurements.col(col) = e.measurement;
      d.groups.push_back(static_cast<Index>(k));
    }
  }
  return d;
}

PairedDataset paired_dataset(const Matrix& signals, const Matrix& measurements, std::vector<std::string> ids) {
  if (signals.cols() != measurements.cols()) throw UsageError("signals and measurements differ in count");
  const Index m = signals.cols();
  if (ids.empty()) {
    for (Index i = 0; i < m; ++i) {
      std::string s = std::to_string(i);
      ids.push_back(std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s);
    }
  }
  if (static_cast<Index>(ids.size()) != m) throw UsageError("one id per pair is required");
  PairedDataset d;
  d.d1 = signals.rows();
  d.d2 = measurements.rows();
  d.signals = signals;
  d.measurements = measurements;
  d.group_ids = std::move(ids);
  for (Index i = 0; i < m; ++i) d.groups.push_back(i);
  return d;
}

double loss(const PairedDataset& dataset, const PredictionMap& predictions, const NormSpec& norm) {
  const Index m = dataset.size();
  if (m == 0) throw DataError("loss of an empty dataset is undefined");
  norm.validate(dataset.d1);

  // Resolve one prediction per group up front so a missing id fails early.
  std::vector<const Vector*> per_group(dataset.group_ids.size(), nullptr);
  CompensatedSum acc;
  for (Index i = 0; i < m; ++i) {
    const auto g = static_cast<std::size_t>(dataset.groups[static_cast<std::size_t>(i)]);
    if (per_group[g] == nullptr) {
      const auto it = predictions.find(dataset.group_ids[g]);
      if (it == predictions.end())
        throw DataError("no prediction for measurement '" + dataset.group_ids[g] + "'");
      if (it->second.size() != dataset.d1)
        throw DataError("prediction for '" + dataset.group_ids[g] + "' has length " +
                        std::to_string(it->second.size()) + ", expected " + std::to_string(dataset.d1));
      per_group[g] = &it->second;
    }
    acc += pow_p(p_dist(dataset.signals.col(i), *per_group[g], norm), norm.p);
  }
  return std::pow(acc.value() / static_cast<double>(m), 1.0 / norm.p);
}

std::size_t thread_count() {
  if (const char* env = std::getenv("KERSIZE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace kerbound
