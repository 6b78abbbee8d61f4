#include <cmath>
#include <random>

#include "doctest.h"
#include "liftkit/error.hpp"
#include "liftkit/linalg.hpp"
#include "support.hpp"

using namespace liftkit;
using namespace liftkit::linalg;

namespace {

Mat3 reconstruct(const Svd3& s) {
  Mat3 d{};
  for (int i = 0; i < 3; ++i) d[i][i] = s.singular_values[i];
  return multiply(multiply(s.u, d), transpose(s.v));
}

double max_abs_diff(const Mat3& a, const Mat3& b) {
  double m = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
  return m;
}

void check_orthogonal(const Mat3& q) {
  CHECK(max_abs_diff(multiply(transpose(q), q), identity3()) < 1e-12);
}

void check_svd(const Mat3& m) {
  const auto s = svd3(m);
  check_orthogonal(s.u);
  check_orthogonal(s.v);
  CHECK(s.singular_values[0] >= s.singular_values[1]);
  CHECK(s.singular_values[1] >= s.singular_values[2]);
  CHECK(s.singular_values[2] >= 0.0);
  CHECK(max_abs_diff(reconstruct(s), m) < 1e-12 * std::max(1.0, frobenius_norm(m)));
}

}  // namespace

TEST_CASE("basic 3x3 algebra") {
  const Mat3 a{{{1, 2, 3}, {4, 5, 6}, {7, 8, 10}}};
  CHECK(determinant(a) == doctest::Approx(-3.0));
  CHECK(determinant(identity3()) == 1.0);
  CHECK(transpose(a)[0][2] == 7.0);
  const Vec3 v = multiply(a, Vec3{1, 0, -1});
  CHECK(v[0] == -2.0);
  CHECK(v[2] == -3.0);
  CHECK(frobenius_norm(identity3()) == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("svd matches frozen singular values") {
  // Values computed offline with LAPACK.
  const auto s = svd3(Mat3{{{2, 0, 1}, {1, 3, 0}, {0, 1, 4}}});
  CHECK(s.singular_values[0] == doctest::Approx(4.413270182325494).epsilon(1e-13));
  CHECK(s.singular_values[1] == doctest::Approx(2.9882069744066264).epsilon(1e-13));
  CHECK(s.singular_values[2] == doctest::Approx(1.8956965410909805).epsilon(1e-13));

  const auto r = svd3(Mat3{{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}}});
  CHECK(r.singular_values[0] == doctest::Approx(16.84810335261421).epsilon(1e-13));
  CHECK(r.singular_values[1] == doctest::Approx(1.0683695145547099).epsilon(1e-13));
  CHECK(r.singular_values[2] < 1e-13);
}

TEST_CASE("svd reconstructs random, rank-deficient and special matrices") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Mat3 m;
    for (auto& row : m)
      for (auto& x : row) x = n(rng);
    check_svd(m);
  }
  check_svd(Mat3{});
  check_svd(identity3());
  check_svd(Mat3{{{1, 0, 0}, {0, 1, 0}, {0, 0, 0}}});
  check_svd(Mat3{{{1, 2, 3}, {2, 4, 6}, {3, 6, 9}}});      // rank 1
  check_svd(Mat3{{{0, 0, 5}, {0, -2, 0}, {1e-9, 0, 0}}});  // widely spread scales
  check_svd(Mat3{{{1, 0, 0}, {0, -1, 0}, {0, 0, 1}}});     // reflection
}

TEST_CASE("umeyama recovers a known similarity transform") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto src = testing::random_pose(rng, 17);
    const Mat3 r = testing::random_rotation(rng);
    const double s = 0.5 + 2.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    const Vec3 t{10.0 * trial, -30.0, 5.0};
    const auto dst = testing::transform(src, r, s, t);
    const auto fit = umeyama_align(src.coords(), dst.coords());
    CHECK(max_abs_diff(fit.rotation, r) < 1e-10);
    CHECK(fit.scale == doctest::Approx(s).epsilon(1e-10));
    for (int c = 0; c < 3; ++c) CHECK(fit.translation[c] == doctest::Approx(t[c]).epsilon(1e-8));
    CHECK(determinant(fit.rotation) == doctest::Approx(1.0));
  }
}

TEST_CASE("umeyama never returns a reflection") {
  std::mt19937_64 rng(23);
  const auto src = testing::random_pose(rng, 17);
  // Mirrored target: the best proper rotation differs from the reflection.
  const Mat3 mirror{{{-1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  const auto dst = testing::transform(src, mirror, 1.0, Vec3{0, 0, 0});
  const auto fit = umeyama_align(src.coords(), dst.coords());
  CHECK(determinant(fit.rotation) == doctest::Approx(1.0).epsilon(1e-12));
  check_orthogonal(fit.rotation);
}

TEST_CASE("umeyama without scale keeps unit scale") {
  std::mt19937_64 rng(29);
  const auto src = testing::random_pose(rng, 17);
  const auto dst = testing::transform(src, testing::random_rotation(rng), 3.0, Vec3{1, 2, 3});
  const auto fit = umeyama_align(src.coords(), dst.coords(), false);
  CHECK(fit.scale == 1.0);
}

TEST_CASE("degenerate inputs are numeric errors") {
  const std::vector<double> same(17 * 3, 4.0);
  std::vector<double> target(17 * 3);
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = static_cast<double>(i);
  try {
    umeyama_align(same, target);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
    CHECK(std::string(e.what()).find("degenerate point set") != std::string::npos);
  }
  CHECK_THROWS_AS(umeyama_align(std::vector<double>(6, 1.0), std::vector<double>(6, 1.0)), Error);
}
