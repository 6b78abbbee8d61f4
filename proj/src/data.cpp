#include "liftkit/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json_fields.hpp"
#include "liftkit/error.hpp"
#include "liftkit/nn/tensor.hpp"
#include "skeleton_json.hpp"

namespace liftkit::data {

using detail::json;
using linalg::Mat3;
using linalg::Vec3;

void PoseSequence::validate() const {
  skeleton.validate();
  if (frames_2d.empty()) fail_data("sequence '" + subject + "/" + action + "' has no frames");
  for (std::size_t t = 0; t < frames_2d.size(); ++t) {
    if (frames_2d[t].joints() != skeleton.joint_count) {
      fail_data("frame " + std::to_string(t) + ": kp2d has " + std::to_string(frames_2d[t].joints()) +
                " joints, skeleton '" + skeleton.name + "' has " + std::to_string(skeleton.joint_count));
    }
    if (!frames_2d[t].all_finite()) fail_data("frame " + std::to_string(t) + ": non-finite kp2d");
  }
  if (frames_3d) {
    if (frames_3d->size() != frames_2d.size()) fail_data("sequence has different 2D and 3D frame counts");
    for (std::size_t t = 0; t < frames_3d->size(); ++t) {
      const auto& p = (*frames_3d)[t];
      if (p.joints() != skeleton.joint_count) fail_data("frame " + std::to_string(t) + ": kp3d joint count mismatch");
      if (!p.all_finite()) fail_data("frame " + std::to_string(t) + ": non-finite kp3d");
    }
  }
  if (fps && !(std::isfinite(*fps) && *fps > 0.0)) fail_data("fps must be positive");
}

std::vector<std::size_t> window_frame_indices(std::size_t frame, std::size_t frame_count, std::size_t receptive_field,
                                              WindowAnchor anchor) {
  if (receptive_field == 0 || receptive_field % 2 == 0) {
    fail_config("receptive field must be odd, got " + std::to_string(receptive_field));
  }
  if (frame >= frame_count) fail_data("frame index out of range");
  const auto last = static_cast<std::ptrdiff_t>(frame_count) - 1;
  const auto n = static_cast<std::ptrdiff_t>(receptive_field);
  const std::ptrdiff_t start =
      static_cast<std::ptrdiff_t>(frame) - (anchor == WindowAnchor::center ? (n - 1) / 2 : n - 1);
  std::vector<std::size_t> indices(receptive_field);
  for (std::ptrdiff_t i = 0; i < n; ++i) indices[i] = static_cast<std::size_t>(std::clamp(start + i, std::ptrdiff_t{0}, last));
  return indices;
}

std::vector<Window> extract_windows(const PoseSequence& seq, std::size_t receptive_field, WindowAnchor anchor) {
  if (receptive_field == 0 || receptive_field % 2 == 0) {
    fail_config("receptive field must be odd, got " + std::to_string(receptive_field));
  }
  const std::size_t count = seq.frame_count();
  std::vector<Window> windows;
  windows.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    Window w;
    w.center_index = t;
    for (std::size_t src : window_frame_indices(t, count, receptive_field, anchor)) w.inputs.push_back(seq.frames_2d[src]);
    if (seq.frames_3d) w.target = (*seq.frames_3d)[t];
    windows.push_back(std::move(w));
  }
  return windows;
}

Window flip_window(const Window& window, const SkeletonSpec& spec) {
  Window out;
  out.center_index = window.center_index;
  out.inputs.reserve(window.inputs.size());
  for (const auto& frame : window.inputs) out.inputs.push_back(flip_pose(frame, spec));
  if (window.target) out.target = flip_pose(*window.target, spec);
  return out;
}

std::array<double, 2> PinholeCamera::project(const Vec3& p) const {
  return {focal_px * p[0] / p[2] + image_width / 2.0, focal_px * p[1] / p[2] + image_height / 2.0};
}

namespace {

Mat3 rotation_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
}

Mat3 rotation_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
}

Mat3 rotation_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

// Rest-pose bone vectors in a y-up body frame, mm.
std::vector<Vec3> rest_offsets(const SkeletonSpec& skeleton, nn::Rng& rng) {
  if (skeleton == h36m_17()) {
    return {{0, 0, 0},      {-130, 0, 0},   {0, -450, 0}, {0, -440, 0},  {130, 0, 0},  {0, -450, 0},
            {0, -440, 0},   {0, 230, 0},    {0, 250, 0},  {0, 110, 20},  {0, 120, 0},  {150, -20, 0},
            {0, -280, 0},   {0, -250, 0},   {-150, -20, 0}, {0, -280, 0}, {0, -250, 0}};
  }
  if (skeleton == eva_15()) {
    return {{0, 0, 0},    {0, 480, 0},  {150, 0, 0},   {0, -280, 0}, {0, -250, 0},
            {-150, 0, 0}, {0, -280, 0}, {0, -250, 0},  {130, 0, 0},  {0, -450, 0},
            {0, -440, 0}, {-130, 0, 0}, {0, -450, 0},  {0, -440, 0}, {0, 250, 0}};
  }
  std::vector<Vec3> offsets(skeleton.joint_count, Vec3{0, 0, 0});
  for (std::size_t j = 0; j < skeleton.joint_count; ++j) {
    if (j == skeleton.root_index) continue;
    const double z = 2.0 * nn::uniform01(rng) - 1.0;
    const double phi = 2.0 * std::numbers::pi * nn::uniform01(rng);
    const double r = std::sqrt(1.0 - z * z);
    const double length = 150.0 + 200.0 * nn::uniform01(rng);
    offsets[j] = {length * r * std::cos(phi), length * z, length * r * std::sin(phi)};
  }
  return offsets;
}

struct Oscillator {
  double amplitude, frequency, phase;
  double at(double time) const { return amplitude * std::sin(2.0 * std::numbers::pi * frequency * time + phase); }
};

}  // namespace

SynthSequence synth_sequence(std::uint64_t seed, std::size_t frames, const SkeletonSpec& skeleton,
                             const MotionParams& params) {
  if (frames == 0) fail_config("synth_sequence: need at least one frame");
  skeleton.validate();
  if (skeleton.parents.size() != skeleton.joint_count) {
    fail_config("synth_sequence: skeleton '" + skeleton.name + "' has no parent table");
  }
  if (!(params.fps > 0.0)) fail_config("synth_sequence: fps must be positive");

  nn::Rng rng(seed);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * nn::uniform01(rng); };

  SynthSequence out;
  out.bone_offsets = rest_offsets(skeleton, rng);
  const std::size_t joints = skeleton.joint_count;

  std::vector<std::array<Oscillator, 3>> angles(joints);
  for (auto& joint : angles) {
    for (auto& osc : joint) {
      osc = {params.amplitude * uniform(0.05, 0.45), uniform(params.min_frequency_hz, params.max_frequency_hz),
             uniform(0.0, 2.0 * std::numbers::pi)};
    }
  }
  const Oscillator yaw{params.yaw_amplitude, uniform(params.min_frequency_hz, params.max_frequency_hz) * 0.5,
                       uniform(0.0, 2.0 * std::numbers::pi)};
  const double yaw_offset = uniform(-0.5, 0.5);
  const Oscillator sway_x{params.root_sway_mm, uniform(0.1, 0.4), uniform(0.0, 2.0 * std::numbers::pi)};
  const Oscillator sway_z{params.root_sway_mm, uniform(0.1, 0.4), uniform(0.0, 2.0 * std::numbers::pi)};

  auto& seq = out.sequence;
  seq.subject = params.subject;
  seq.action = params.action;
  seq.fps = params.fps;
  seq.skeleton = skeleton;
  seq.frames_3d.emplace();

  std::vector<Mat3> global(joints);
  std::vector<Vec3> world(joints);
  for (std::size_t t = 0; t < frames; ++t) {
    const double time = static_cast<double>(t) / params.fps;
    for (std::size_t j = 0; j < joints; ++j) {
      if (j == skeleton.root_index) {
        global[j] = rotation_y(yaw_offset + yaw.at(time));
        world[j] = {sway_x.at(time), 0.0, sway_z.at(time)};
        continue;
      }
      const auto parent = static_cast<std::size_t>(skeleton.parents[j]);
      const auto& a = angles[j];
      const Mat3 local = linalg::multiply(rotation_z(a[2].at(time)),
                                          linalg::multiply(rotation_y(a[1].at(time)), rotation_x(a[0].at(time))));
      const Vec3 bone = linalg::multiply(global[parent], out.bone_offsets[j]);
      for (int c = 0; c < 3; ++c) world[j][c] = world[parent][c] + bone[c];
      global[j] = linalg::multiply(global[parent], local);
    }

    // World is y-up facing the camera; camera space has y down and z forward.
    Pose3D absolute(joints);
    std::vector<double> pixels(2 * joints);
    for (std::size_t j = 0; j < joints; ++j) {
      const Vec3 cam{world[j][0], -world[j][1], params.camera.subject_depth_mm - world[j][2]};
      for (std::size_t c = 0; c < 3; ++c) absolute.at(j, c) = cam[c];
      const auto px = params.camera.project(cam);
      pixels[2 * j] = px[0];
      pixels[2 * j + 1] = px[1];
    }
    seq.frames_2d.push_back(normalize_2d(pixels, params.camera.image_width, params.camera.image_height));
    seq.frames_3d->push_back(root_relative(absolute, skeleton));
    out.absolute_3d.push_back(std::move(absolute));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kFormatVersion = 1;

template <std::size_t D>
json pose_to_json(const Pose<D>& pose) {
  json rows = json::array();
  for (std::size_t j = 0; j < pose.joints(); ++j) {
    json row = json::array();
    for (std::size_t c = 0; c < D; ++c) row.push_back(pose.at(j, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <std::size_t D>
Pose<D> pose_from_json(const json& rows, std::size_t joints, const std::string& where) {
  if (!rows.is_array() || rows.size() != joints) {
    fail_data(where + ": expected " + std::to_string(joints) + " joints");
  }
  Pose<D> pose(joints);
  for (std::size_t j = 0; j < joints; ++j) {
    const auto& row = rows[j];
    if (!row.is_array() || row.size() != D) {
      fail_data(where + ": joint " + std::to_string(j) + " must have " + std::to_string(D) + " coordinates");
    }
    for (std::size_t c = 0; c < D; ++c) {
      if (!row[c].is_number()) fail_data(where + ": joint " + std::to_string(j) + " has a non-numeric coordinate");
      pose.at(j, c) = row[c].get<double>();
      if (!std::isfinite(pose.at(j, c))) fail_data(where + ": non-finite coordinate");
    }
  }
  return pose;
}

}  // namespace

std::string format_sequences(std::span<const PoseSequence> sequences) {
  std::string out;
  for (const auto& seq : sequences) {
    seq.validate();
    json header;
    header["format_version"] = kFormatVersion;
    header["skeleton"] = detail::skeleton_to_json(seq.skeleton);
    if (seq.fps) header["fps"] = *seq.fps;
    header["subject"] = seq.subject;
    header["action"] = seq.action;
    out += header.dump();
    out += '\n';
    for (std::size_t t = 0; t < seq.frame_count(); ++t) {
      json frame;
      frame["t"] = t;
      frame["kp2d"] = pose_to_json(seq.frames_2d[t]);
      if (seq.frames_3d) frame["kp3d"] = pose_to_json((*seq.frames_3d)[t]);
      out += frame.dump();
      out += '\n';
    }
  }
  return out;
}

std::vector<PoseSequence> parse_sequences(const std::string& text, const std::string& source) {
  std::vector<PoseSequence> sequences;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  PoseSequence* current = nullptr;
  std::optional<bool> current_has_3d;

  auto finish_current = [&](std::size_t at_line) {
    if (!current) return;
    if (current->frames_2d.empty()) {
      fail_data(source + ":" + std::to_string(at_line) + ": sequence header without frames");
    }
    if (current_has_3d.value_or(false) == false) current->frames_3d.reset();
    try {
      current->validate();
    } catch (const Error& e) {
      fail_data(source + ": " + e.what());
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      fail_data(where + ": invalid JSON (" + e.what() + ")");
    }
    if (!record.is_object()) fail_data(where + ": record must be a JSON object");

    if (record.contains("format_version")) {
      finish_current(line_no);
      detail::FieldReader r(record, where, ErrorKind::data);
      const int version = r.required<int>("format_version");
      if (version != kFormatVersion) fail_data(where + ": unsupported format_version " + std::to_string(version));
      PoseSequence seq;
      if (!r.has("skeleton")) fail_data(where + ": header is missing 'skeleton'");
      seq.skeleton = detail::skeleton_from_json(r.raw("skeleton"), where, ErrorKind::data);
      if (r.has("fps")) {
        const auto& fps = r.raw("fps");
        if (!fps.is_null()) {
          if (!fps.is_number()) fail_data(where + ": fps must be a number");
          seq.fps = fps.get<double>();
        }
      }
      r.optional("subject", seq.subject);
      r.optional("action", seq.action);
      r.finish();
      sequences.push_back(std::move(seq));
      current = &sequences.back();
      current_has_3d.reset();
      continue;
    }

    if (!current) fail_data(where + ": frame record before any sequence header");
    detail::FieldReader r(record, where, ErrorKind::data);
    const std::size_t t = r.required<std::size_t>("t");
    if (t != current->frames_2d.size()) {
      fail_data(where + ": expected frame t=" + std::to_string(current->frames_2d.size()) + ", got t=" +
                std::to_string(t));
    }
    if (!r.has("kp2d")) fail_data(where + ": frame is missing 'kp2d'");
    const std::size_t joints = current->skeleton.joint_count;
    current->frames_2d.push_back(pose_from_json<2>(r.raw("kp2d"), joints, where + " kp2d"));
    const bool has_3d = r.has("kp3d");
    if (!current_has_3d) {
      current_has_3d = has_3d;
      if (has_3d) current->frames_3d.emplace();
    } else if (*current_has_3d != has_3d) {
      fail_data(where + ": kp3d must be present on all frames of a sequence or on none");
    }
    if (has_3d) current->frames_3d->push_back(pose_from_json<3>(r.raw("kp3d"), joints, where + " kp3d"));
    r.finish();
  }
  finish_current(line_no);
  if (sequences.empty()) fail_data(source + ": no sequences found");
  return sequences;
}

std::vector<PoseSequence> load_sequences(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("cannot open data file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_sequences(buffer.str(), path);
}

void save_sequences(const std::string& path, std::span<const PoseSequence> sequences) {
  const std::string text = format_sequences(sequences);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_data("cannot open '" + path + "' for writing");
  out << text;
  if (!out) fail_data("failed writing '" + path + "'");
}

}  // namespace liftkit::data
