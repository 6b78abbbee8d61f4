#pragma once

// Brute-force reference implementations used to check the closed-form code.
// They share nothing with the library beyond the Pose container.

#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "liftkit/skeleton.hpp"
#include "support.hpp"

namespace oracle {

using M3 = std::array<std::array<double, 3>, 3>;

inline M3 mat_mul(const M3& a, const M3& b) {
  M3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// Rodrigues formula for exp([w]x).
inline M3 exp_so3(const std::array<double, 3>& w) {
  const double theta = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
  const M3 k{{{0, -w[2], w[1]}, {w[2], 0, -w[0]}, {-w[1], w[0], 0}}};
  M3 r{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  double a = 1.0, b = 0.5;
  if (theta > 1e-8) {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
  const M3 k2 = mat_mul(k, k);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i][j] += a * k[i][j] + b * k2[i][j];
  return r;
}

struct Similarity {
  M3 r;
  double s;
  std::array<double, 3> t;
};

inline double sum_squared(const liftkit::Pose3D& x, const liftkit::Pose3D& y, const Similarity& p) {
  double e = 0.0;
  for (std::size_t j = 0; j < x.joints(); ++j)
    for (int i = 0; i < 3; ++i) {
      double v = p.t[i] - y.at(j, i);
      for (int k = 0; k < 3; ++k) v += p.s * p.r[i][k] * x.at(j, k);
      e += v * v;
    }
  return e;
}

// Solves the 7x7 system a * x = b by Gaussian elimination with partial pivoting.
inline std::array<double, 7> solve7(std::array<std::array<double, 7>, 7> a, std::array<double, 7> b) {
  for (int c = 0; c < 7; ++c) {
    int piv = c;
    for (int r = c + 1; r < 7; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (int r = c + 1; r < 7; ++r) {
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 7; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::array<double, 7> x{};
  for (int r = 6; r >= 0; --r) {
    double v = b[r];
    for (int k = r + 1; k < 7; ++k) v -= a[r][k] * x[k];
    x[r] = v / a[r][r];
  }
  return x;
}

// Levenberg-Marquardt on the rotation manifold, from one starting rotation.
inline Similarity refine(const liftkit::Pose3D& x, const liftkit::Pose3D& y, M3 r0) {
  Similarity p{r0, 1.0, {0, 0, 0}};
  const std::size_t n = x.joints();
  for (std::size_t j = 0; j < n; ++j)
    for (int i = 0; i < 3; ++i) p.t[i] += (y.at(j, i) - x.at(j, i)) / static_cast<double>(n);
  double lambda = 1e-3;
  double err = sum_squared(x, y, p);
  for (int iter = 0; iter < 500; ++iter) {
    std::array<std::array<double, 7>, 7> jtj{};
    std::array<double, 7> jtr{};
    for (std::size_t j = 0; j < n; ++j) {
      const std::array<double, 3> xj{x.at(j, 0), x.at(j, 1), x.at(j, 2)};
      std::array<double, 3> rx{};
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) rx[i] += p.r[i][k] * xj[k];
      // d(R exp([w]) x)/dw = -R [x]x
      const M3 xx{{{0, -xj[2], xj[1]}, {xj[2], 0, -xj[0]}, {-xj[1], xj[0], 0}}};
      const M3 rxx = mat_mul(p.r, xx);
      for (int i = 0; i < 3; ++i) {
        std::array<double, 7> row{};
        for (int k = 0; k < 3; ++k) row[k] = -p.s * rxx[i][k];
        row[3] = rx[i];
        row[4 + i] = 1.0;
        const double res = p.s * rx[i] + p.t[i] - y.at(j, i);
        for (int a = 0; a < 7; ++a) {
          jtr[a] += row[a] * res;
          for (int b = 0; b < 7; ++b) jtj[a][b] += row[a] * row[b];
        }
      }
    }
    bool improved = false;
    for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
      auto damped = jtj;
      std::array<double, 7> rhs{};
      for (int a = 0; a < 7; ++a) {
        damped[a][a] += lambda * (jtj[a][a] + 1e-12);
        rhs[a] = -jtr[a];
      }
      const auto step = solve7(damped, rhs);
      Similarity q = p;
      q.r = mat_mul(p.r, exp_so3({step[0], step[1], step[2]}));
      q.s += step[3];
      for (int i = 0; i < 3; ++i) q.t[i] += step[4 + i];
      const double e = sum_squared(x, y, q);
      if (e <= err) {
        improved = true;
        const double gain = err - e;
        p = q;
        err = e;
        lambda = std::max(lambda * 0.3, 1e-15);
        if (gain <= 1e-30 * std::max(1.0, err)) return p;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  return p;
}

// Multi-start least-squares similarity fit of x onto y, then mean joint distance.
inline double aligned_mpjpe(const liftkit::Pose3D& pred, const liftkit::Pose3D& gt, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  Similarity best{};
  double best_err = std::numeric_limits<double>::infinity();
  for (int start = 0; start < 12; ++start) {
    const M3 r0 = start == 0 ? M3{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}} : testing::random_rotation(rng);
    const auto p = refine(pred, gt, r0);
    const double e = sum_squared(pred, gt, p);
    if (e < best_err) {
      best_err = e;
      best = p;
    }
  }
  double total = 0.0;
  for (std::size_t j = 0; j < pred.joints(); ++j) {
    double d2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      double v = best.t[i] - gt.at(j, i);
      for (int k = 0; k < 3; ++k) v += best.s * best.r[i][k] * pred.at(j, k);
      d2 += v * v;
    }
    total += std::sqrt(d2);
  }
  return total / static_cast<double>(pred.joints());
}

// Golden-section search over the global scale minimizing squared error, then
// mean joint distance.
inline double scaled_mpjpe(const liftkit::Pose3D& pred, const liftkit::Pose3D& gt) {
  auto sse = [&](double s) {
    double e = 0.0;
    for (std::size_t i = 0; i < pred.coords().size(); ++i) {
      const double d = s * pred.coords()[i] - gt.coords()[i];
      e += d * d;
    }
    return e;
  };
  double lo = -100.0, hi = 100.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 300; ++it) {
    const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    if (sse(a) < sse(b)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  const double s = 0.5 * (lo + hi);
  double total = 0.0;
  for (std::size_t j = 0; j < pred.joints(); ++j) {
    double d2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double d = s * pred.at(j, i) - gt.at(j, i);
      d2 += d * d;
    }
    total += std::sqrt(d2);
  }
  return total / static_cast<double>(pred.joints());
}

}  // namespace oracle
