#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace liftkit {

// Joint topology of a skeleton. `parents` drives forward kinematics in the
// synthetic generator; -1 marks the root.
struct SkeletonSpec {
  std::string name;
  std::size_t joint_count = 0;
  std::size_t root_index = 0;
  std::vector<std::pair<std::size_t, std::size_t>> flip_pairs;  // (left, right)
  std::vector<std::string> joint_names;
  std::vector<int> parents;

  // Throws Error(config) naming the broken invariant.
  void validate() const;

  // Index each joint maps to under a left/right mirror.
  std::vector<std::size_t> mirror_map() const;

  bool operator==(const SkeletonSpec&) const = default;
};

// Human3.6M-style 17 joints, pelvis root.
const SkeletonSpec& h36m_17();
// HumanEva-style 15 joints, pelvis root.
const SkeletonSpec& eva_15();

// Looks up a built-in skeleton by name ("h36m_17", "eva_15").
// Throws Error(data) naming the unknown skeleton.
const SkeletonSpec& builtin_skeleton(const std::string& name);

// J x D joint coordinates, row-major. D = 2 for normalized image space,
// D = 3 for root-relative millimeters.
template <std::size_t D>
class Pose {
 public:
  static constexpr std::size_t dims = D;

  Pose() = default;
  explicit Pose(std::size_t joints) : joints_(joints), coords_(joints * D, 0.0) {}
  Pose(std::size_t joints, std::vector<double> coords);

  std::size_t joints() const noexcept { return joints_; }
  std::span<const double> coords() const noexcept { return coords_; }
  std::span<double> coords() noexcept { return coords_; }

  std::span<const double, D> joint(std::size_t j) const { return std::span<const double, D>(coords_.data() + j * D, D); }
  std::span<double, D> joint(std::size_t j) { return std::span<double, D>(coords_.data() + j * D, D); }

  double& at(std::size_t j, std::size_t c) { return coords_[j * D + c]; }
  double at(std::size_t j, std::size_t c) const { return coords_[j * D + c]; }

  bool all_finite() const noexcept;

  bool operator==(const Pose&) const = default;

 private:
  std::size_t joints_ = 0;
  std::vector<double> coords_;
};

using Pose2D = Pose<2>;
using Pose3D = Pose<3>;

// Pixel coordinates (J x 2, row-major) to normalized image space. Both axes
// are divided by the width so the aspect ratio survives and x -> -x is a
// mirror about the image center.
Pose2D normalize_2d(std::span<const double> pixels, double image_width, double image_height);
std::vector<double> denormalize_2d(const Pose2D& pose, double image_width, double image_height);

// Subtracts the root joint from every joint; the root row becomes exactly zero.
Pose3D root_relative(const Pose3D& absolute, const SkeletonSpec& spec);

// Negates x on every joint, then swaps the rows of each flip pair.
template <std::size_t D>
Pose<D> flip_pose(const Pose<D>& pose, const SkeletonSpec& spec);

}  // namespace liftkit
