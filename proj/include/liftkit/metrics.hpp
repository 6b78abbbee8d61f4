#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "liftkit/skeleton.hpp"

namespace liftkit::metrics {

// All distances in mm; mpjve in mm per frame step.
struct EvalReport {
  double mpjpe = 0.0;
  double p_mpjpe = 0.0;
  double n_mpjpe = 0.0;
  double mpjve = 0.0;
  std::size_t frame_count = 0;

  // "key=value" lines. When fps is given an extra mpjve_per_s line is emitted.
  std::string to_text(std::optional<double> fps = std::nullopt) const;
};

// Mean joint distance.
double mpjpe(const Pose3D& pred, const Pose3D& gt);

// mpjpe after a per-pose least-squares similarity alignment of pred onto gt.
double p_mpjpe(const Pose3D& pred, const Pose3D& gt);

// mpjpe after the least-squares optimal global scale s* = <pred, gt> / <pred, pred>.
double n_mpjpe(const Pose3D& pred, const Pose3D& gt);

// Mean joint distance between frame-to-frame velocities.
double mpjve(std::span<const Pose3D> pred_seq, std::span<const Pose3D> gt_seq);

// Per-pose metrics averaged over frames plus mpjve over the sequence.
EvalReport evaluate_sequence(std::span<const Pose3D> pred_seq, std::span<const Pose3D> gt_seq);

}  // namespace liftkit::metrics
