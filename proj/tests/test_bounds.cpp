#include "kerbound/bounds.hpp"
#include "kerbound/sampling.hpp"

#include <doctest.h>

#include <algorithm>

using namespace kerbound;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Matrix cols(std::initializer_list<Vector> vs) {
  Matrix m(vs.begin()->size(), static_cast<Index>(vs.size()));
  Index c = 0;
  for (const auto& v : vs) m.col(c++) = v;
  return m;
}

FeasibleSetCollection collection(Index d1, std::vector<Matrix> sets) {
  FeasibleSetCollection c;
  c.d1 = d1;
  c.d2 = 1;
  for (std::size_t k = 0; k < sets.size(); ++k)
    c.entries.push_back({measurement_id(k, sets.size()), Vector::Constant(1, static_cast<double>(k)), sets[k]});
  return c;
}

// Direct evaluation of the average kernel size: every ordered pair, no tricks.
double naive_kersize(const FeasibleSetCollection& c, const NormSpec& norm) {
  long double total = 0.0L;
  for (const auto& e : c.entries) {
    const Index n = e.size();
    if (n == 0) continue;
    long double v = 0.0L;
    for (Index a = 0; a < n; ++a)
      for (Index b = 0; b < n; ++b) v += std::pow(p_dist(e.members.col(a), e.members.col(b), norm), norm.p);
    total += v / static_cast<long double>(n * n);
  }
  return std::pow(static_cast<double>(total / static_cast<long double>(c.size())), 1.0 / norm.p);
}

FeasibleSetCollection random_collection(Rng& rng, Index d1, Index k, Index n, bool uniform) {
  std::vector<Matrix> sets;
  for (Index i = 0; i < k; ++i) {
    const Index ni = uniform ? n : static_cast<Index>(rng.uniform() * static_cast<double>(n + 1));
    const Vector centre = Vector::NullaryExpr(d1, [&] { return rng.uniform(-3, 3); });
    const double spread = rng.uniform(0.0, 2.0);
    Matrix m(d1, ni);
    for (Index j = 0; j < ni; ++j) m.col(j) = centre + spread * Vector::NullaryExpr(d1, [&] { return rng.uniform(-1, 1); });
    sets.push_back(m);
  }
  return collection(d1, sets);
}

PredictionMap random_constant(const FeasibleSetCollection& c, Rng& rng) {
  const Vector z = Vector::NullaryExpr(c.d1, [&] { return rng.uniform(-4, 4); });
  PredictionMap out;
  for (const auto& e : c.entries) out[e.id] = z;
  return out;
}

}  // namespace

TEST_CASE("kersize examples") {
  const auto one = collection(2, {cols({vec({0, 0}), vec({0, 2})})});
  const KersizeResult r = kersize(one, NormSpec::euclidean(2.0));
  CHECK(r.kersize == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(r.half() == doctest::Approx(0.70710678118654752).epsilon(1e-15));
  CHECK(r.contributions[0] == doctest::Approx(2.0));

  const auto singles = collection(2, {cols({vec({1, 2})}), cols({vec({-1, 5})})});
  CHECK(kersize(singles, NormSpec::euclidean(2.0)).kersize == 0.0);

  const auto two = collection(2, {cols({vec({0, 0}), vec({0, 2})}), cols({vec({1, 1})})});
  CHECK(kersize(two, NormSpec::euclidean(1.0)).kersize == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("empty feasible sets contribute zero") {
  auto c = collection(2, {cols({vec({0, 0}), vec({0, 2})}), Matrix(2, 0)});
  const KersizeResult r = kersize(c, NormSpec::euclidean(2.0));
  CHECK(r.contributions[1] == 0.0);
  CHECK(r.kersize == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("kersize agrees with the direct ordered-pair evaluation") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const Index d1 = 1 + trial % 5;
    const auto c = random_collection(rng, d1, 1 + trial % 5, 10, trial % 2 == 0);
    NormSpec n;
    n.inner = static_cast<InnerNorm>(trial % 3);
    n.p = std::vector<double>{1.0, 2.0, 0.5, 3.0}[static_cast<std::size_t>(trial % 4)];
    if (d1 > 1 && trial % 7 == 0) {
      n.mask.assign(static_cast<std::size_t>(d1), 1);
      n.mask[0] = 0;
    }
    CHECK(kersize(c, n).kersize == doctest::Approx(naive_kersize(c, n)).epsilon(1e-12));
  }
}

TEST_CASE("kersize on a set larger than one chunk") {
  Rng rng(2);
  const auto c = random_collection(rng, 3, 2, 300, true);
  CHECK(kersize(c, NormSpec::euclidean(2.0)).kersize == doctest::Approx(naive_kersize(c, NormSpec::euclidean(2.0))).epsilon(1e-12));
  setenv("KERSIZE_THREADS", "3", 1);
  const double threaded = kersize(c, NormSpec::euclidean(1.0)).kersize;
  unsetenv("KERSIZE_THREADS");
  CHECK(threaded == kersize(c, NormSpec::euclidean(1.0)).kersize);
}

TEST_CASE("optimal map value examples") {
  CHECK(optimal_map_value(cols({vec({0, 0}), vec({0, 2})}), NormSpec::euclidean(2.0)) == vec({0, 1}));
  CHECK(optimal_map_value(cols({vec({0, 0})}), NormSpec::euclidean(1.0)) == vec({0, 0}));
  CHECK(optimal_map_value(cols({vec({0, 0})}), NormSpec::euclidean(3.0)) == vec({0, 0}));
  const Vector gm = optimal_map_value(cols({vec({0, 0}), vec({0, 0}), vec({0, 3})}), NormSpec::euclidean(1.0));
  CHECK(gm.norm() <= 1e-9);
  CHECK_THROWS_AS(optimal_map_value(cols({vec({0, 0}), vec({1, 0})}), NormSpec::euclidean(0.5)), UnsupportedError);
  CHECK_THROWS_AS(optimal_map_value(Matrix(2, 0), NormSpec::euclidean(2.0)), UsageError);
}

TEST_CASE("optimal map value beats a brute-force grid scan of the objective") {
  Rng rng(13);
  const std::vector<NormSpec> norms{NormSpec::euclidean(1.0), NormSpec::euclidean(2.0), NormSpec::euclidean(3.0),
                                    NormSpec{InnerNorm::l1, {}, 1.0}, NormSpec{InnerNorm::linf, {}, 2.0},
                                    NormSpec{InnerNorm::l1, {}, 1.5}};
  for (const auto& norm : norms) {
    for (int trial = 0; trial < 6; ++trial) {
      const Index n = 3 + trial;
      Matrix x(2, n);
      for (Index j = 0; j < n; ++j) x.col(j) = vec({rng.uniform(-1, 1), rng.uniform(-1, 1)});
      if (trial == 0) x.col(1) = x.col(0);  // repeated member
      const Vector z = optimal_map_value(x, norm);
      double best = std::numeric_limits<double>::infinity();
      for (double a = -1.0; a <= 1.0; a += 0.005)
        for (double b = -1.0; b <= 1.0; b += 0.005) best = std::min(best, map_objective(x, vec({a, b}), norm));
      CHECK(map_objective(x, z, norm) <= best + 1e-9);
    }
  }
}

TEST_CASE("masked coordinates of theta take the member mean") {
  const Matrix x = cols({vec({0, 10}), vec({2, 20}), vec({10, 60})});
  const NormSpec n{InnerNorm::l2, {1, 0}, 1.0};
  const Vector z = optimal_map_value(x, n);
  CHECK(z(1) == doctest::Approx(30.0));
  CHECK(z(0) == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("verify_bounds example") {
  const auto c = collection(2, {cols({vec({0, 0}), vec({0, 2})})});
  const BoundReport r = verify_bounds(c, {{"phi", {{c.entries[0].id, vec({0, 1})}}}}, NormSpec::euclidean(2.0));
  CHECK(r.half_kersize == doctest::Approx(0.70710678118654752));
  CHECK(r.losses.at("phi") == doctest::Approx(1.0));
  CHECK(r.theta_loss == doctest::Approx(1.0));
  CHECK(r.lower_ok.at("phi"));
  CHECK(r.lower_ok.at(kThetaName));
  CHECK(r.theta_upper_ok);
  CHECK(r.theta_upper_certified);
  CHECK(r.per_measurement[0].half_kersize_single == doctest::Approx(r.half_kersize));
  CHECK(r.per_measurement[0].losses.at("phi") == doctest::Approx(1.0));

  CHECK_THROWS_AS(verify_bounds(c, {{"phi", {{"other", vec({0, 1})}}}}, NormSpec::euclidean(2.0)), DataError);
}

TEST_CASE("singleton sets with the ground truth map") {
  const auto c = collection(2, {cols({vec({1, 2})}), cols({vec({3, 4})})});
  PredictionMap truth{{c.entries[0].id, vec({1, 2})}, {c.entries[1].id, vec({3, 4})}};
  const BoundReport r = verify_bounds(c, {{"truth", truth}}, NormSpec::euclidean(2.0));
  CHECK(r.half_kersize == 0.0);
  CHECK(r.losses.at("truth") == 0.0);
  CHECK(r.lower_ok_all);
  CHECK(r.theta_upper_ok);
}

TEST_CASE("lower bound holds for every map on uniform collections") {
  Rng rng(99);
  for (int trial = 0; trial < 150; ++trial) {
    const Index d1 = 1 + trial % 6;
    const auto c = random_collection(rng, d1, 1 + trial % 8, 1 + trial % 9, true);
    for (double p : {1.0, 2.0, 3.0}) {
      NormSpec n;
      n.p = p;
      n.inner = static_cast<InnerNorm>(trial % 3);
      PredictionMap noisy;
      for (const auto& e : c.entries) noisy[e.id] = e.members.col(0) + Vector::NullaryExpr(d1, [&] { return rng.uniform(-1, 1); });
      const std::map<std::string, PredictionMap> maps{{"median", median_map(c)},
                                                      {"zero", zero_map(c)},
                                                      {"constant", random_constant(c, rng)},
                                                      {"noisy", noisy},
                                                      {"mean", mean_map(c)}};
      const BoundReport r = verify_bounds(c, maps, n);
      CHECK(r.uniform);
      CHECK(r.lower_ok_all);
      CHECK(r.theta_upper_ok);
      for (const auto& [name, v] : r.losses) CHECK(leq_tol(r.theta_loss, v));
      for (const auto& m : r.per_measurement)
        for (const auto& [name, v] : m.losses) CHECK(leq_tol(m.half_kersize_single, v));
    }
  }
}

TEST_CASE("kersize scales with the members and ignores ordering") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    auto c = random_collection(rng, 3, 4, 6, trial % 2 == 0);
    const NormSpec n = NormSpec::euclidean(1.0 + trial % 3);
    const double base = kersize(c, n).kersize;
    const double lambda = rng.uniform(0.1, 5.0);
    auto scaled = c;
    for (auto& e : scaled.entries) e.members *= lambda;
    CHECK(kersize(scaled, n).kersize == doctest::Approx(lambda * base).epsilon(1e-12));

    auto shuffled = c;
    std::reverse(shuffled.entries.begin(), shuffled.entries.end());
    // Reversing each row reverses the member order.
    for (auto& e : shuffled.entries) e.members = e.members.rowwise().reverse().eval();
    CHECK(kersize(shuffled, n).kersize == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("kersize never shrinks when the noise grows on nested grid sets") {
  MicroscopyModel mm;
  mm.pixels_x = mm.pixels_y = 5;
  Vector lo(5), hi(5);
  lo << 200, 200, -100, 1.8, 900;
  hi << 300, 300, 100, 2.2, 1100;
  const Vector truth = (lo + hi) / 2;
  SamplerSpec g;
  g.kind = SamplerKind::grid;
  g.n_max = 100000;
  g.budget = 100000;
  g.grid_resolution = {9, 9, 3, 3, 3};
  const NormSpec n{InnerNorm::l2, {1, 1, 0, 0, 0}, 2.0};
  const Vector y = microscopy_intensity(mm, truth);
  double previous = -1.0;
  Index previous_count = 0;
  for (double scale : {0.5, 1.0, 2.0, 4.0}) {
    ForwardModel m(mm, NoiseSpec::mixed(0.02 * scale, 0.5 * scale), SignalBounds{lo, hi});
    const SampleResult r = sample_feasible(m, y, g);
    CHECK(r.members.cols() >= previous_count);
    FeasibleSetCollection c;
    c.d1 = 5;
    c.d2 = y.size();
    c.entries.push_back({"0000", y, r.members});
    const double k = kersize(c, n).kersize;
    CHECK(k >= previous);
    previous = k;
    previous_count = r.members.cols();
  }
  CHECK(previous > 0.0);
}

TEST_CASE("non-uniform collections: the report does not certify theta") {
  // One large tight set and one small wide set.
  Matrix tight = Matrix::Zero(1, 100);
  const auto c = collection(1, {tight, cols({vec({0}), vec({10})})});
  const BoundReport r = verify_bounds(c, {{"mean", mean_map(c)}}, NormSpec::euclidean(2.0));
  CHECK_FALSE(r.uniform);
  CHECK_FALSE(r.theta_upper_certified);
  // Pooled loss of the mean is 10 / sqrt(204), half the kernel size is 2.5:
  // the pooled lower bound fails once set sizes differ this much.
  CHECK(r.losses.at("mean") == doctest::Approx(10.0 / std::sqrt(204.0)));
  CHECK(r.half_kersize == doctest::Approx(2.5));
  CHECK_FALSE(r.lower_ok.at("mean"));
}
