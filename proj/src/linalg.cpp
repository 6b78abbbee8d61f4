#include "liftkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "liftkit/error.hpp"

namespace liftkit::linalg {

namespace {

constexpr int kMaxSweeps = 64;

Vec3 column(const Mat3& m, int c) { return {m[0][c], m[1][c], m[2][c]}; }

void set_column(Mat3& m, int c, const Vec3& v) {
  for (int r = 0; r < 3; ++r) m[r][c] = v[r];
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(dot(v, v));
  return {v[0] / n, v[1] / n, v[2] / n};
}

// Any unit vector orthogonal to unit vector `a`.
Vec3 any_orthogonal(const Vec3& a) {
  int smallest = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(a[i]) < std::abs(a[smallest])) smallest = i;
  Vec3 e{0.0, 0.0, 0.0};
  e[smallest] = 1.0;
  return normalized(cross(a, e));
}

}  // namespace

Mat3 identity3() { return Mat3{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}}; }

Mat3 transpose(const Mat3& m) {
  Mat3 t{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t[c][r] = m[r][c];
  return t;
}

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c];
  return out;
}

Vec3 multiply(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2], m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

double determinant(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

double frobenius_norm(const Mat3& m) {
  double s = 0.0;
  for (const auto& row : m)
    for (double v : row) s += v * v;
  return std::sqrt(s);
}

Svd3 svd3(const Mat3& m) {
  for (const auto& row : m)
    for (double v : row)
      if (!std::isfinite(v)) fail_numeric("svd3: non-finite matrix entry");

  Mat3 a = m;
  Mat3 v = identity3();
  constexpr double eps = std::numeric_limits<double>::epsilon();

  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const Vec3 ap = column(a, p);
        const Vec3 aq = column(a, q);
        const double alpha = dot(ap, ap);
        const double beta = dot(aq, aq);
        const double gamma = dot(ap, aq);
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int r = 0; r < 3; ++r) {
          const double x = a[r][p], y = a[r][q];
          a[r][p] = c * x - s * y;
          a[r][q] = s * x + c * y;
          const double vx = v[r][p], vy = v[r][q];
          v[r][p] = c * vx - s * vy;
          v[r][q] = s * vx + c * vy;
        }
      }
    }
  }
  if (!converged) fail_numeric("svd3: Jacobi iteration did not converge");

  std::array<int, 3> order{0, 1, 2};
  Vec3 norms{};
  for (int i = 0; i < 3; ++i) {
    const Vec3 col = column(a, i);
    norms[i] = std::sqrt(dot(col, col));
  }
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return norms[x] > norms[y]; });

  Svd3 out;
  for (int i = 0; i < 3; ++i) {
    out.singular_values[i] = norms[order[i]];
    set_column(out.v, i, column(v, order[i]));
  }

  // Columns of U from the orthogonalized columns; null directions are completed
  // to an orthonormal basis since their singular value is zero.
  const double tiny = std::max(out.singular_values[0], std::numeric_limits<double>::min()) * 1e-13;
  int rank = 0;
  for (int i = 0; i < 3; ++i) {
    if (out.singular_values[i] > tiny) {
      const Vec3 col = column(a, order[i]);
      const double s = out.singular_values[i];
      set_column(out.u, i, {col[0] / s, col[1] / s, col[2] / s});
      ++rank;
    }
  }
  if (rank == 0) set_column(out.u, 0, {1.0, 0.0, 0.0});
  if (rank <= 1) set_column(out.u, 1, any_orthogonal(column(out.u, 0)));
  if (rank <= 2) set_column(out.u, 2, normalized(cross(column(out.u, 0), column(out.u, 1))));
  return out;
}

Vec3 SimilarityTransform::apply(const Vec3& x) const {
  const Vec3 r = multiply(rotation, x);
  return {scale * r[0] + translation[0], scale * r[1] + translation[1], scale * r[2] + translation[2]};
}

SimilarityTransform umeyama_align(std::span<const double> source, std::span<const double> target, bool with_scale) {
  if (source.size() != target.size() || source.size() % 3 != 0) fail_data("umeyama_align: point sets must both be J x 3");
  const std::size_t count = source.size() / 3;
  if (count < 3) fail_data("umeyama_align: need at least 3 points");

  Vec3 mu_s{0, 0, 0}, mu_t{0, 0, 0};
  for (std::size_t j = 0; j < count; ++j)
    for (int c = 0; c < 3; ++c) {
      mu_s[c] += source[3 * j + c];
      mu_t[c] += target[3 * j + c];
    }
  for (int c = 0; c < 3; ++c) {
    mu_s[c] /= static_cast<double>(count);
    mu_t[c] /= static_cast<double>(count);
  }

  double var_s = 0.0;
  double magnitude = 0.0;
  Mat3 cov{};
  for (std::size_t j = 0; j < count; ++j) {
    Vec3 ds, dt;
    for (int c = 0; c < 3; ++c) {
      ds[c] = source[3 * j + c] - mu_s[c];
      dt[c] = target[3 * j + c] - mu_t[c];
      magnitude += source[3 * j + c] * source[3 * j + c];
    }
    var_s += dot(ds, ds);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cov[r][c] += dt[r] * ds[c];
  }
  var_s /= static_cast<double>(count);
  magnitude /= static_cast<double>(count);
  if (!(var_s > 1e-24 * std::max(1.0, magnitude))) fail_numeric("degenerate point set");
  for (auto& row : cov)
    for (double& x : row) x /= static_cast<double>(count);

  const Svd3 svd = svd3(cov);
  Vec3 sign{1.0, 1.0, 1.0};
  if (determinant(svd.u) * determinant(svd.v) < 0.0) sign[2] = -1.0;

  SimilarityTransform out;
  Mat3 us = svd.u;
  for (int r = 0; r < 3; ++r) us[r][2] *= sign[2];
  out.rotation = multiply(us, transpose(svd.v));
  if (with_scale) {
    const double trace = svd.singular_values[0] * sign[0] + svd.singular_values[1] * sign[1] +
                         svd.singular_values[2] * sign[2];
    out.scale = trace / var_s;
  }
  const Vec3 rotated = multiply(out.rotation, mu_s);
  for (int c = 0; c < 3; ++c) out.translation[c] = mu_t[c] - out.scale * rotated[c];
  return out;
}

}  // namespace liftkit::linalg
