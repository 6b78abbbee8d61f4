#include "liftkit/metrics.hpp"

#include <cmath>
#include <sstream>

#include "liftkit/error.hpp"
#include "liftkit/linalg.hpp"

namespace liftkit::metrics {

namespace {

void check_shapes(const Pose3D& pred, const Pose3D& gt) {
  if (pred.joints() != gt.joints()) {
    fail_data("pose shape mismatch: " + std::to_string(pred.joints()) + " vs " + std::to_string(gt.joints()) +
              " joints");
  }
  if (pred.joints() == 0) fail_data("empty pose");
}

double joint_distance(std::span<const double> a, std::span<const double> b, std::size_t j) {
  const double dx = a[3 * j] - b[3 * j];
  const double dy = a[3 * j + 1] - b[3 * j + 1];
  const double dz = a[3 * j + 2] - b[3 * j + 2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double mean_distance(std::span<const double> a, std::span<const double> b, std::size_t joints) {
  double total = 0.0;
  for (std::size_t j = 0; j < joints; ++j) total += joint_distance(a, b, j);
  return total / static_cast<double>(joints);
}

}  // namespace

std::string EvalReport::to_text(std::optional<double> fps) const {
  std::ostringstream out;
  out.precision(17);
  out << "mpjpe=" << mpjpe << "\n"
      << "p_mpjpe=" << p_mpjpe << "\n"
      << "n_mpjpe=" << n_mpjpe << "\n"
      << "mpjve=" << mpjve << "\n";
  if (fps) out << "mpjve_per_s=" << mpjve * *fps << "\n";
  out << "frame_count=" << frame_count << "\n";
  return out.str();
}

double mpjpe(const Pose3D& pred, const Pose3D& gt) {
  check_shapes(pred, gt);
  return mean_distance(pred.coords(), gt.coords(), pred.joints());
}

double p_mpjpe(const Pose3D& pred, const Pose3D& gt) {
  check_shapes(pred, gt);
  const auto transform = linalg::umeyama_align(pred.coords(), gt.coords(), true);
  Pose3D aligned(pred.joints());
  for (std::size_t j = 0; j < pred.joints(); ++j) {
    const auto p = transform.apply({pred.at(j, 0), pred.at(j, 1), pred.at(j, 2)});
    for (std::size_t c = 0; c < 3; ++c) aligned.at(j, c) = p[c];
  }
  return mpjpe(aligned, gt);
}

double n_mpjpe(const Pose3D& pred, const Pose3D& gt) {
  check_shapes(pred, gt);
  double cross = 0.0, self = 0.0;
  const auto p = pred.coords();
  const auto g = gt.coords();
  for (std::size_t i = 0; i < p.size(); ++i) {
    cross += p[i] * g[i];
    self += p[i] * p[i];
  }
  if (!(self > 0.0)) fail_numeric("n_mpjpe: prediction has zero norm");
  const double scale = cross / self;
  Pose3D scaled(pred.joints());
  for (std::size_t i = 0; i < p.size(); ++i) scaled.coords()[i] = scale * p[i];
  return mpjpe(scaled, gt);
}

double mpjve(std::span<const Pose3D> pred_seq, std::span<const Pose3D> gt_seq) {
  if (pred_seq.size() != gt_seq.size()) fail_data("mpjve: sequence length mismatch");
  if (pred_seq.size() < 2) fail_data("mpjve: need at least 2 frames");
  const std::size_t joints = pred_seq[0].joints();
  double total = 0.0;
  for (std::size_t t = 1; t < pred_seq.size(); ++t) {
    check_shapes(pred_seq[t], gt_seq[t]);
    check_shapes(pred_seq[t - 1], gt_seq[t - 1]);
    if (pred_seq[t].joints() != joints) fail_data("mpjve: joint count changes within sequence");
    for (std::size_t j = 0; j < joints; ++j) {
      double sq = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double dv = (pred_seq[t].at(j, c) - pred_seq[t - 1].at(j, c)) - (gt_seq[t].at(j, c) - gt_seq[t - 1].at(j, c));
        sq += dv * dv;
      }
      total += std::sqrt(sq);
    }
  }
  return total / static_cast<double>((pred_seq.size() - 1) * joints);
}

EvalReport evaluate_sequence(std::span<const Pose3D> pred_seq, std::span<const Pose3D> gt_seq) {
  if (pred_seq.size() != gt_seq.size()) {
    fail_data("evaluate_sequence: length mismatch (" + std::to_string(pred_seq.size()) + " vs " +
              std::to_string(gt_seq.size()) + ")");
  }
  if (pred_seq.size() < 2) fail_data("evaluate_sequence: need at least 2 frames");
  EvalReport report;
  report.frame_count = pred_seq.size();
  for (std::size_t t = 0; t < pred_seq.size(); ++t) {
    report.mpjpe += mpjpe(pred_seq[t], gt_seq[t]);
    report.p_mpjpe += p_mpjpe(pred_seq[t], gt_seq[t]);
    report.n_mpjpe += n_mpjpe(pred_seq[t], gt_seq[t]);
  }
  const double frames = static_cast<double>(pred_seq.size());
  report.mpjpe /= frames;
  report.p_mpjpe /= frames;
  report.n_mpjpe /= frames;
  report.mpjve = mpjve(pred_seq, gt_seq);
  return report;
}

}  // namespace liftkit::metrics
