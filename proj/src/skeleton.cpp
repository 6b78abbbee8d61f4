#include "liftkit/skeleton.hpp"

#include <cmath>
#include <sstream>

#include "liftkit/error.hpp"

namespace liftkit {

void SkeletonSpec::validate() const {
  std::ostringstream msg;
  if (joint_count == 0) fail_config("skeleton '" + name + "': joint_count must be positive");
  if (root_index >= joint_count) {
    msg << "skeleton '" << name << "': root_index " << root_index << " out of range";
    fail_config(msg.str());
  }
  if (!joint_names.empty() && joint_names.size() != joint_count) {
    msg << "skeleton '" << name << "': " << joint_names.size() << " joint names for " << joint_count << " joints";
    fail_config(msg.str());
  }
  std::vector<bool> seen(joint_count, false);
  for (const auto& [left, right] : flip_pairs) {
    for (std::size_t j : {left, right}) {
      if (j >= joint_count) {
        msg << "skeleton '" << name << "': flip pair index " << j << " out of range";
        fail_config(msg.str());
      }
      if (j == root_index) fail_config("skeleton '" + name + "': root joint cannot be part of a flip pair");
      if (seen[j]) {
        msg << "skeleton '" << name << "': joint " << j << " appears in more than one flip pair slot";
        fail_config(msg.str());
      }
      seen[j] = true;
    }
  }
  if (!parents.empty()) {
    if (parents.size() != joint_count) fail_config("skeleton '" + name + "': parents length must equal joint_count");
    for (std::size_t j = 0; j < joint_count; ++j) {
      const int p = parents[j];
      if (j == root_index) {
        if (p != -1) fail_config("skeleton '" + name + "': root parent must be -1");
      } else if (p < 0 || static_cast<std::size_t>(p) >= j) {
        // parents precede children so forward kinematics is a single pass
        msg << "skeleton '" << name << "': joint " << j << " has invalid parent " << p;
        fail_config(msg.str());
      }
    }
  }
}

std::vector<std::size_t> SkeletonSpec::mirror_map() const {
  std::vector<std::size_t> map(joint_count);
  for (std::size_t j = 0; j < joint_count; ++j) map[j] = j;
  for (const auto& [left, right] : flip_pairs) {
    map[left] = right;
    map[right] = left;
  }
  return map;
}

const SkeletonSpec& h36m_17() {
  static const SkeletonSpec spec = [] {
    SkeletonSpec s;
    s.name = "h36m_17";
    s.joint_count = 17;
    s.root_index = 0;
    s.joint_names = {"pelvis",     "r_hip",   "r_knee",  "r_ankle",   "l_hip",      "l_knee",
                     "l_ankle",    "spine",   "thorax",  "neck",      "head",       "l_shoulder",
                     "l_elbow",    "l_wrist", "r_shoulder", "r_elbow", "r_wrist"};
    s.flip_pairs = {{4, 1}, {5, 2}, {6, 3}, {11, 14}, {12, 15}, {13, 16}};
    s.parents = {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
    return s;
  }();
  return spec;
}

const SkeletonSpec& eva_15() {
  static const SkeletonSpec spec = [] {
    SkeletonSpec s;
    s.name = "eva_15";
    s.joint_count = 15;
    s.root_index = 0;
    s.joint_names = {"pelvis",     "thorax",  "l_shoulder", "l_elbow", "l_wrist",
                     "r_shoulder", "r_elbow", "r_wrist",    "l_hip",   "l_knee",
                     "l_ankle",    "r_hip",   "r_knee",     "r_ankle", "head"};
    s.flip_pairs = {{2, 5}, {3, 6}, {4, 7}, {8, 11}, {9, 12}, {10, 13}};
    s.parents = {-1, 0, 1, 2, 3, 1, 5, 6, 0, 8, 9, 0, 11, 12, 1};
    return s;
  }();
  return spec;
}

const SkeletonSpec& builtin_skeleton(const std::string& name) {
  if (name == "h36m_17") return h36m_17();
  if (name == "eva_15") return eva_15();
  fail_data("unknown skeleton '" + name + "'");
}

template <std::size_t D>
Pose<D>::Pose(std::size_t joints, std::vector<double> coords) : joints_(joints), coords_(std::move(coords)) {
  if (coords_.size() != joints_ * D) {
    std::ostringstream msg;
    msg << "pose expects " << joints_ * D << " coordinates, got " << coords_.size();
    fail_data(msg.str());
  }
}

template <std::size_t D>
bool Pose<D>::all_finite() const noexcept {
  for (double v : coords_)
    if (!std::isfinite(v)) return false;
  return true;
}

Pose2D normalize_2d(std::span<const double> pixels, double image_width, double image_height) {
  if (!(image_width > 0.0) || !(image_height > 0.0)) fail_data("image size must be positive");
  if (pixels.size() % 2 != 0) fail_data("pixel array must hold (x, y) pairs");
  Pose2D out(pixels.size() / 2);
  for (std::size_t j = 0; j < out.joints(); ++j) {
    const double x = pixels[2 * j];
    const double y = pixels[2 * j + 1];
    if (!std::isfinite(x) || !std::isfinite(y)) fail_data("non-finite keypoint at joint " + std::to_string(j));
    out.at(j, 0) = 2.0 * x / image_width - 1.0;
    out.at(j, 1) = 2.0 * y / image_width - image_height / image_width;
  }
  return out;
}

std::vector<double> denormalize_2d(const Pose2D& pose, double image_width, double image_height) {
  if (!(image_width > 0.0) || !(image_height > 0.0)) fail_data("image size must be positive");
  std::vector<double> pixels(pose.joints() * 2);
  for (std::size_t j = 0; j < pose.joints(); ++j) {
    pixels[2 * j] = (pose.at(j, 0) + 1.0) * image_width / 2.0;
    pixels[2 * j + 1] = (pose.at(j, 1) + image_height / image_width) * image_width / 2.0;
  }
  return pixels;
}

Pose3D root_relative(const Pose3D& absolute, const SkeletonSpec& spec) {
  if (absolute.joints() != spec.joint_count) {
    fail_data("pose has " + std::to_string(absolute.joints()) + " joints, skeleton '" + spec.name + "' expects " +
              std::to_string(spec.joint_count));
  }
  Pose3D out(absolute.joints());
  const auto root = absolute.joint(spec.root_index);
  const double rx = root[0], ry = root[1], rz = root[2];
  for (std::size_t j = 0; j < absolute.joints(); ++j) {
    out.at(j, 0) = absolute.at(j, 0) - rx;
    out.at(j, 1) = absolute.at(j, 1) - ry;
    out.at(j, 2) = absolute.at(j, 2) - rz;
  }
  out.at(spec.root_index, 0) = 0.0;
  out.at(spec.root_index, 1) = 0.0;
  out.at(spec.root_index, 2) = 0.0;
  return out;
}

template <std::size_t D>
Pose<D> flip_pose(const Pose<D>& pose, const SkeletonSpec& spec) {
  if (pose.joints() != spec.joint_count) {
    fail_data("pose has " + std::to_string(pose.joints()) + " joints, skeleton '" + spec.name + "' expects " +
              std::to_string(spec.joint_count));
  }
  const auto mirror = spec.mirror_map();
  Pose<D> out(pose.joints());
  for (std::size_t j = 0; j < pose.joints(); ++j) {
    const std::size_t src = mirror[j];
    out.at(j, 0) = -pose.at(src, 0);
    for (std::size_t c = 1; c < D; ++c) out.at(j, c) = pose.at(src, c);
  }
  return out;
}

template class Pose<2>;
template class Pose<3>;
template Pose<2> flip_pose(const Pose<2>&, const SkeletonSpec&);
template Pose<3> flip_pose(const Pose<3>&, const SkeletonSpec&);

}  // namespace liftkit
