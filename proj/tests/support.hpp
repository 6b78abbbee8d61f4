#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "liftkit/linalg.hpp"
#include "liftkit/skeleton.hpp"

namespace testing {

inline liftkit::Pose3D random_pose(std::mt19937_64& rng, std::size_t joints, double spread = 400.0) {
  std::normal_distribution<double> n(0.0, spread);
  liftkit::Pose3D p(joints);
  for (auto& c : p.coords()) c = n(rng);
  return p;
}

inline liftkit::linalg::Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  double q[4];
  double norm = 0.0;
  for (double& v : q) {
    v = n(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : q) v /= norm;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
           {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
           {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
}

inline liftkit::Pose3D transform(const liftkit::Pose3D& p, const liftkit::linalg::Mat3& r, double s,
                                 const liftkit::linalg::Vec3& t) {
  liftkit::Pose3D out(p.joints());
  for (std::size_t j = 0; j < p.joints(); ++j) {
    const liftkit::linalg::Vec3 x{p.at(j, 0), p.at(j, 1), p.at(j, 2)};
    const auto y = liftkit::linalg::multiply(r, x);
    for (std::size_t c = 0; c < 3; ++c) out.at(j, c) = s * y[c] + t[c];
  }
  return out;
}

}  // namespace testing
