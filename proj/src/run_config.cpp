#include "liftkit/run_config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json_fields.hpp"
#include "skeleton_json.hpp"

namespace liftkit {

using detail::FieldReader;
using detail::json;

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    fail_config(source + ": invalid JSON (" + e.what() + ")");
  }
  FieldReader top(root, source);
  const int version = top.required<int>("version");
  if (version != 1) fail_config(source + ": unsupported config version " + std::to_string(version));

  RunConfig cfg;
  bool joints_given = false;
  if (top.has("model")) {
    const auto& m = top.raw("model");
    joints_given = m.is_object() && m.contains("joints");
    cfg.model = ModelConfig::from_json(m.dump());
  }
  if (top.has("train")) {
    FieldReader r(top.raw("train"), source + ": train");
    auto& t = cfg.train;
    r.optional("epochs", t.epochs);
    r.optional("batch_size", t.batch_size);
    r.optional("warmup_steps", t.warmup_steps);
    r.optional("lr_factor", t.lr_factor);
    r.optional("beta1", t.adam.beta1);
    r.optional("beta2", t.adam.beta2);
    r.optional("eps", t.adam.eps);
    r.optional("amsgrad", t.adam.amsgrad);
    cfg.seed_from_file = r.has("seed");
    r.optional("seed", t.seed);
    r.optional("max_steps", t.max_steps);
    r.optional("flip_augment", t.flip_augment);
    r.finish();
  }
  if (top.has("data")) {
    FieldReader r(top.raw("data"), source + ": data");
    r.optional("val_subjects", cfg.split.val_subjects);
    r.optional("val_fraction", cfg.split.val_fraction);
    r.finish();
  }
  if (top.has("skeleton")) {
    cfg.skeleton = detail::skeleton_from_json(top.raw("skeleton"), source, ErrorKind::config);
    if (!joints_given) cfg.model.joints = cfg.skeleton->joint_count;
  }
  top.finish();
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_config("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path);
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (train.batch_size == 0) training::default_batch_size(model.receptive_field);
  if (!(split.val_fraction >= 0.0 && split.val_fraction < 1.0)) fail_config("data.val_fraction must lie in [0, 1)");
  if (skeleton && skeleton->joint_count != model.joints) {
    fail_config("skeleton '" + skeleton->name + "' has " + std::to_string(skeleton->joint_count) +
                " joints but model.joints is " + std::to_string(model.joints));
  }
}

std::optional<std::uint64_t> seed_from_environment() {
  const char* raw = std::getenv("LIFTKIT_SEED");
  if (!raw || !*raw) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (errno != 0 || *end != '\0' || raw[0] == '-') fail_config(std::string("LIFTKIT_SEED is not an unsigned integer: ") + raw);
  return static_cast<std::uint64_t>(v);
}

std::pair<std::vector<data::PoseSequence>, std::vector<data::PoseSequence>> split_sequences(
    const std::vector<data::PoseSequence>& sequences, const DataSplit& split) {
  std::vector<data::PoseSequence> train, val;
  if (!split.val_subjects.empty()) {
    for (const auto& seq : sequences) {
      const bool held_out =
          std::find(split.val_subjects.begin(), split.val_subjects.end(), seq.subject) != split.val_subjects.end();
      (held_out ? val : train).push_back(seq);
    }
    return {std::move(train), std::move(val)};
  }
  for (const auto& seq : sequences) {
    const auto held = static_cast<std::size_t>(static_cast<double>(seq.frame_count()) * split.val_fraction);
    if (held < 2 || held >= seq.frame_count()) {
      train.push_back(seq);
      continue;
    }
    const std::size_t cut = seq.frame_count() - held;
    data::PoseSequence head = seq, tail = seq;
    head.frames_2d.assign(seq.frames_2d.begin(), seq.frames_2d.begin() + cut);
    tail.frames_2d.assign(seq.frames_2d.begin() + cut, seq.frames_2d.end());
    if (seq.frames_3d) {
      head.frames_3d->assign(seq.frames_3d->begin(), seq.frames_3d->begin() + cut);
      tail.frames_3d->assign(seq.frames_3d->begin() + cut, seq.frames_3d->end());
    }
    train.push_back(std::move(head));
    val.push_back(std::move(tail));
  }
  return {std::move(train), std::move(val)};
}

}  // namespace liftkit
