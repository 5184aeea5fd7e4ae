#include "kerbound/resize.hpp"

#include <doctest.h>

#include <algorithm>

using namespace kerbound;

TEST_CASE("1-D decimation weights by hand") {
  const Matrix r = Matrix(resample_matrix_1d(8, 2));
  REQUIRE(r.rows() == 4);
  REQUIRE(r.cols() == 8);
  // Output 0 is centred at 0.5; the tap at -1 folds onto sample 0.
  CHECK(r(0, 0) == doctest::Approx(0.5));
  CHECK(r(0, 1) == doctest::Approx(0.375));
  CHECK(r(0, 2) == doctest::Approx(0.125));
  CHECK(r(1, 0) == 0.0);
  CHECK(r(1, 1) == doctest::Approx(0.125));
  CHECK(r(1, 2) == doctest::Approx(0.375));
  CHECK(r(1, 3) == doctest::Approx(0.375));
  CHECK(r(1, 4) == doctest::Approx(0.125));
  CHECK(r(3, 7) == doctest::Approx(0.5));
}

TEST_CASE("decimation rows sum to one and stay local") {
  for (Index f : {2, 3, 4}) {
    const Index n = 6 * f;
    const Matrix r = Matrix(resample_matrix_1d(n, f));
    for (Index i = 0; i < r.rows(); ++i) {
      CHECK(r.row(i).sum() == doctest::Approx(1.0).epsilon(1e-14));
      const double centre = (static_cast<double>(i) + 0.5) * static_cast<double>(f) - 0.5;
      for (Index j = 0; j < n; ++j) {
        CHECK(r(i, j) >= 0.0);
        // No weight beyond two output pixels of the output centre.
        if (r(i, j) > 0.0 && j > 0 && j < n - 1) CHECK(std::abs(static_cast<double>(j) - centre) < 2.0 * f);
      }
    }
  }
  CHECK_THROWS_AS(resample_matrix_1d(7, 2), UsageError);
  CHECK_THROWS_AS(resample_matrix_1d(8, 1), UsageError);
}

TEST_CASE("band operator is the separable product") {
  const Index h = 8, w = 12, f = 4;
  const SparseMatrix op = downsample_band_operator(h, w, f);
  const Matrix rows = Matrix(resample_matrix_1d(h, f));
  const Matrix cols = Matrix(resample_matrix_1d(w, f));
  const Vector img = Vector::LinSpaced(h * w, -1.0, 2.0).array().sin();
  const Vector y = op * img;
  for (Index r = 0; r < h / f; ++r)
    for (Index c = 0; c < w / f; ++c) {
      double expect = 0.0;
      for (Index i = 0; i < h; ++i)
        for (Index j = 0; j < w; ++j) expect += rows(r, i) * cols(c, j) * img(i * w + j);
      CHECK(y(r * (w / f) + c) == doctest::Approx(expect).epsilon(1e-13));
    }
  CHECK((downsample_image(img, 1, h, w, f) - y).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("upscalers keep constants and bilinear reproduces interior ramps") {
  const Index bands = 2, h = 4, w = 5, f = 3;
  const Vector c = Vector::Constant(bands * h * w, 0.42);
  CHECK((upscale_bilinear(c, bands, h, w, f).array() - 0.42).abs().maxCoeff() <= 1e-14);
  CHECK((upscale_bicubic(c, bands, h, w, f).array() - 0.42).abs().maxCoeff() <= 1e-14);
  CHECK(upscale_bicubic(c, bands, h, w, f).size() == bands * h * w * f * f);

  // Ramp along columns: value = column index.
  Vector ramp(h * w);
  for (Index r = 0; r < h; ++r)
    for (Index col = 0; col < w; ++col) ramp(r * w + col) = static_cast<double>(col);
  const Vector up = upscale_bilinear(ramp, 1, h, w, 2);
  // Output column j maps to source (j + 0.5) / 2 - 0.5.
  for (Index j = 1; j < 2 * w - 1; ++j) CHECK(up(j) == doctest::Approx((static_cast<double>(j) + 0.5) / 2.0 - 0.5));
}

TEST_CASE("bicubic matches a direct evaluation of the Keys kernel") {
  // Keys cubic with a = -0.75, written out per piece.
  auto keys = [](double s) {
    s = std::abs(s);
    if (s < 1.0) return 1.25 * s * s * s - 2.25 * s * s + 1.0;
    if (s < 2.0) return -0.75 * s * s * s + 3.75 * s * s - 6.0 * s + 3.0;
    return 0.0;
  };
  const Index n = 6, f = 4;
  Vector line(n);
  line << 0.1, 0.9, 0.4, 0.3, 0.8, 0.2;
  const Vector up = upscale_bicubic(line, 1, 1, n, f);
  for (Index j = 0; j < n * f; ++j) {
    const double src = (static_cast<double>(j) + 0.5) / f - 0.5;
    double expect = 0.0;
    for (Index k = -3; k < n + 3; ++k)
      expect += keys(src - static_cast<double>(k)) * line(std::clamp<Index>(k, 0, n - 1));
    CHECK(up(j) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("resize argument checks") {
  CHECK_THROWS_AS(downsample_image(Vector::Zero(10), 1, 4, 4, 2), UsageError);
  CHECK_THROWS_AS(upscale_bilinear(Vector::Zero(10), 1, 4, 4, 2), UsageError);
}
