#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "liftkit/linalg.hpp"
#include "liftkit/skeleton.hpp"

namespace liftkit::data {

struct PoseSequence {
  std::string subject;
  std::string action;
  std::optional<double> fps;
  std::vector<Pose2D> frames_2d;                 // normalized image space
  std::optional<std::vector<Pose3D>> frames_3d;  // root-relative mm
  SkeletonSpec skeleton;

  std::size_t frame_count() const noexcept { return frames_2d.size(); }
  bool has_3d() const noexcept { return frames_3d.has_value(); }

  // Throws Error(data) when frames disagree with the skeleton or each other.
  void validate() const;

  bool operator==(const PoseSequence&) const = default;
};

// Where the predicted frame sits inside its window.
enum class WindowAnchor { center, end };

struct Window {
  std::vector<Pose2D> inputs;    // n frames
  std::optional<Pose3D> target;  // source 3D frame at center_index, when present
  std::size_t center_index = 0;  // frame index in the source sequence
};

// One window per frame. Frames outside the sequence are replaced by the
// nearest edge frame. Throws Error(config) when n is even.
std::vector<Window> extract_windows(const PoseSequence& seq, std::size_t receptive_field,
                                    WindowAnchor anchor = WindowAnchor::center);

// Source frame indices feeding the window for `frame`.
std::vector<std::size_t> window_frame_indices(std::size_t frame, std::size_t frame_count, std::size_t receptive_field,
                                              WindowAnchor anchor = WindowAnchor::center);

Window flip_window(const Window& window, const SkeletonSpec& spec);

// Fixed pinhole camera looking down +z at the subject.
struct PinholeCamera {
  double focal_px = 1145.0;
  double image_width = 1000.0;
  double image_height = 1000.0;
  double subject_depth_mm = 4500.0;

  // Camera-space point (mm, y pointing down) -> pixel (u, v).
  std::array<double, 2> project(const linalg::Vec3& p) const;
};

struct MotionParams {
  double fps = 50.0;
  double amplitude = 1.0;          // scales every joint-angle oscillation
  double min_frequency_hz = 0.2;
  double max_frequency_hz = 1.2;
  double root_sway_mm = 150.0;     // horizontal root translation amplitude
  double yaw_amplitude = 0.6;      // radians
  PinholeCamera camera;
  std::string subject = "synth";
  std::string action = "synthetic";
};

struct SynthSequence {
  PoseSequence sequence;
  // Absolute camera-space joints (mm), kept for projection checks.
  std::vector<Pose3D> absolute_3d;
  // Rest-pose bone vectors; |offset| is the bone length of each non-root joint.
  std::vector<linalg::Vec3> bone_offsets;
};

// Forward kinematics with sinusoidal joint angles, projected through
// `params.camera`. Deterministic per seed. The skeleton needs `parents`.
SynthSequence synth_sequence(std::uint64_t seed, std::size_t frames, const SkeletonSpec& skeleton,
                             const MotionParams& params = {});

// JSON Lines: each sequence is a header record
//   {"format_version":1,"skeleton":<name or object>,"fps":..,"subject":..,"action":..}
// followed by one record per frame {"t":i,"kp2d":[[x,y],..],"kp3d":[[x,y,z],..]}.
// kp3d is optional but must be present on all or none of a sequence's frames.
std::vector<PoseSequence> load_sequences(const std::string& path);
std::vector<PoseSequence> parse_sequences(const std::string& text, const std::string& source = "<memory>");
void save_sequences(const std::string& path, std::span<const PoseSequence> sequences);
std::string format_sequences(std::span<const PoseSequence> sequences);

}  // namespace liftkit::data
