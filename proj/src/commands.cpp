#include "liftkit/commands.hpp"

#include <filesystem>
#include <fstream>
#include <map>

#include "json.hpp"
#include "liftkit/error.hpp"
#include "liftkit/metrics.hpp"
#include "liftkit/run_config.hpp"
#include "liftkit/training.hpp"

namespace liftkit::commands {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Writes through a sibling temp file so a failed run leaves no partial output.
void write_atomically(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail_data("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail_data("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

json report_to_json(const metrics::EvalReport& r, std::optional<double> fps) {
  json j;
  j["mpjpe"] = r.mpjpe;
  j["p_mpjpe"] = r.p_mpjpe;
  j["n_mpjpe"] = r.n_mpjpe;
  j["mpjve"] = r.mpjve;
  j["frames"] = r.frame_count;
  if (fps) j["mpjve_per_s"] = r.mpjve * *fps;
  return j;
}

struct GroupTotals {
  double mpjpe = 0.0, p_mpjpe = 0.0, n_mpjpe = 0.0;
  double velocity_sum = 0.0;  // mpjve weighted by frame steps
  std::size_t frames = 0, steps = 0;
  std::optional<double> fps;
  bool fps_consistent = true;
};

metrics::EvalReport finish(const GroupTotals& g) {
  metrics::EvalReport r;
  r.frame_count = g.frames;
  const double frames = static_cast<double>(g.frames);
  r.mpjpe = g.mpjpe / frames;
  r.p_mpjpe = g.p_mpjpe / frames;
  r.n_mpjpe = g.n_mpjpe / frames;
  r.mpjve = g.steps ? g.velocity_sum / static_cast<double>(g.steps) : 0.0;
  return r;
}

// Per-action reports plus the frame-count-weighted mean of the per-action values.
json evaluate_predictions(const std::vector<data::PoseSequence>& sequences, const std::vector<std::vector<Pose3D>>& preds) {
  std::map<std::string, GroupTotals> groups;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const auto& seq = sequences[s];
    const auto& gt = *seq.frames_3d;
    auto& g = groups[seq.action];
    for (std::size_t t = 0; t < gt.size(); ++t) {
      g.mpjpe += metrics::mpjpe(preds[s][t], gt[t]);
      g.p_mpjpe += metrics::p_mpjpe(preds[s][t], gt[t]);
      g.n_mpjpe += metrics::n_mpjpe(preds[s][t], gt[t]);
    }
    g.frames += gt.size();
    if (gt.size() >= 2) {
      g.velocity_sum += metrics::mpjve(preds[s], gt) * static_cast<double>(gt.size() - 1);
      g.steps += gt.size() - 1;
    }
    if (g.frames == gt.size()) {
      g.fps = seq.fps;
    } else if (g.fps != seq.fps) {
      g.fps_consistent = false;
    }
  }

  json out;
  out["mpjve_unit"] = "mm/frame";
  json actions = json::object();
  double total_frames = 0.0;
  metrics::EvalReport avg;
  for (const auto& [action, g] : groups) {
    const auto r = finish(g);
    actions[action] = report_to_json(r, g.fps_consistent ? g.fps : std::nullopt);
    const double w = static_cast<double>(r.frame_count);
    avg.mpjpe += w * r.mpjpe;
    avg.p_mpjpe += w * r.p_mpjpe;
    avg.n_mpjpe += w * r.n_mpjpe;
    avg.mpjve += w * r.mpjve;
    avg.frame_count += r.frame_count;
    total_frames += w;
  }
  avg.mpjpe /= total_frames;
  avg.p_mpjpe /= total_frames;
  avg.n_mpjpe /= total_frames;
  avg.mpjve /= total_frames;
  out["actions"] = actions;
  out["average"] = report_to_json(avg, std::nullopt);
  return out;
}

json evaluate_model(const LiftFormer<float>& model, const std::vector<data::PoseSequence>& sequences) {
  std::vector<std::vector<Pose3D>> preds;
  for (const auto& seq : sequences) {
    if (!seq.has_3d()) fail_data("sequence '" + seq.subject + "/" + seq.action + "' has no 3D ground truth to evaluate");
    preds.push_back(training::lift_sequence(model, seq));
  }
  return evaluate_predictions(sequences, preds);
}

}  // namespace

TrainOutputs train(const std::string& config_path, const std::string& data_path, const std::string& out_dir,
                   const TrainOverrides& overrides) {
  RunConfig cfg = RunConfig::load(config_path);
  if (overrides.epochs) cfg.train.epochs = *overrides.epochs;
  if (overrides.batch_size) cfg.train.batch_size = *overrides.batch_size;
  if (overrides.max_steps) cfg.train.max_steps = *overrides.max_steps;
  if (overrides.seed) {
    cfg.train.seed = *overrides.seed;
  } else if (!cfg.seed_from_file) {
    cfg.train.seed = seed_from_environment().value_or(0);
  }
  cfg.validate();

  const auto sequences = data::load_sequences(data_path);
  for (const auto& seq : sequences) {
    if (cfg.skeleton && seq.skeleton != *cfg.skeleton) {
      fail_data("sequence '" + seq.subject + "/" + seq.action + "' uses skeleton '" + seq.skeleton.name +
                "', config requires '" + cfg.skeleton->name + "'");
    }
    if (seq.skeleton.joint_count != cfg.model.joints) {
      fail_data("data has " + std::to_string(seq.skeleton.joint_count) + " joints, model.joints is " +
                std::to_string(cfg.model.joints));
    }
    if (!seq.has_3d()) fail_data("training data sequence '" + seq.subject + "/" + seq.action + "' has no kp3d");
  }
  auto [train_set, val_set] = split_sequences(sequences, cfg.split);
  if (train_set.empty()) fail_data("the split left no training sequences");

  auto model = LiftFormer<float>::build(cfg.model, cfg.train.seed);
  std::string log;
  const auto result = training::train(model, train_set, val_set, cfg.train, [&](const training::EpochRecord& r) {
    json j;
    j["step"] = r.step;
    j["epoch"] = r.epoch;
    j["lr"] = r.lr;
    j["train_loss"] = r.train_loss;
    if (r.val_mpjpe) j["val_mpjpe"] = *r.val_mpjpe;
    log += j.dump() + "\n";
  });

  json report = evaluate_model(model, val_set.empty() ? train_set : val_set);
  report["split"] = val_set.empty() ? "train" : "held_out";
  report["steps"] = result.steps;
  if (result.best_epoch) report["best_epoch"] = *result.best_epoch;

  fs::create_directories(out_dir);
  TrainOutputs out;
  out.checkpoint_path = (fs::path(out_dir) / "checkpoint.lft").string();
  out.log_path = (fs::path(out_dir) / "train_log.jsonl").string();
  out.report_path = (fs::path(out_dir) / "eval_report.json").string();
  out.report_json = report.dump(2);
  const auto bytes = encode_checkpoint(model);
  write_atomically(out.checkpoint_path, std::string(bytes.begin(), bytes.end()));
  write_atomically(out.log_path, log);
  write_atomically(out.report_path, out.report_json + "\n");
  return out;
}

std::string evaluate(const std::string& checkpoint_path, const std::string& data_path) {
  const auto model = load_checkpoint(checkpoint_path);
  const auto sequences = data::load_sequences(data_path);
  return evaluate_model(model, sequences).dump(2);
}

void lift(const std::string& checkpoint_path, const std::string& data_path, const std::string& out_path,
          std::optional<bool> causal) {
  auto model = load_checkpoint(checkpoint_path);
  if (causal) model.set_causal(*causal);
  auto sequences = data::load_sequences(data_path);
  for (auto& seq : sequences) seq.frames_3d = training::lift_sequence(model, seq);
  write_atomically(out_path, data::format_sequences(sequences));
}

std::string count_params_json(const ModelConfig& config) {
  const auto count = parameter_count(config);
  json j;
  j["count"] = count;
  j["millions"] = round_millions(count, 2);
  j["head_invariant"] = count_is_head_invariant(config);
  j["config"] = json::parse(config.to_json());
  return j.dump(2);
}

std::string reference_table_json() {
  json rows = json::array();
  bool all_pass = true;
  for (const auto& row : audit_reference_counts()) {
    json j;
    j["label"] = row.reference.label;
    j["hidden_dim"] = row.reference.config.hidden_dim;
    j["heads"] = row.reference.config.heads;
    j["blocks"] = row.reference.config.blocks;
    j["receptive_field"] = row.reference.config.receptive_field;
    j["share_attention"] = row.reference.config.share_attention;
    j["expected_millions"] = row.reference.expected_millions;
    j["decimals"] = row.reference.decimals;
    j["count"] = row.count;
    j["rounded_millions"] = row.rounded_millions;
    j["status"] = row.pass ? "PASS" : "FAIL";
    all_pass = all_pass && row.pass;
    rows.push_back(std::move(j));
  }
  ModelConfig base;
  json out;
  out["rows"] = rows;
  out["head_invariant"] = count_is_head_invariant(base);
  out["all_pass"] = all_pass && count_is_head_invariant(base);
  return out.dump(2);
}

void synth(const SynthRequest& request, const std::string& out_path) {
  if (request.sequences == 0) fail_config("synth: need at least one sequence");
  std::vector<data::PoseSequence> sequences;
  for (std::size_t i = 0; i < request.sequences; ++i) {
    data::MotionParams motion = request.motion;
    motion.subject = request.motion.subject + std::to_string(i);
    sequences.push_back(data::synth_sequence(request.seed + i, request.frames, request.skeleton, motion).sequence);
  }
  write_atomically(out_path, data::format_sequences(sequences));
}

}  // namespace liftkit::commands
