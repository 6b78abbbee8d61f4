#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "liftkit/data.hpp"
#include "liftkit/model.hpp"

namespace liftkit::commands {

struct TrainOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> max_steps;
};

struct TrainOutputs {
  std::string checkpoint_path;
  std::string log_path;
  std::string report_path;
  std::string report_json;
};

// Validates config and data before anything is written, trains, then writes
// <out_dir>/checkpoint.lft, train_log.jsonl and eval_report.json.
TrainOutputs train(const std::string& config_path, const std::string& data_path, const std::string& out_dir,
                   const TrainOverrides& overrides = {});

// Flip-averaged lifting of every sequence, evaluated per action group plus a
// frame-weighted "average". Returns a JSON document.
std::string evaluate(const std::string& checkpoint_path, const std::string& data_path);

// Writes the input sequences with kp3d replaced by predictions. `causal`
// overrides the checkpoint's attention mask when set.
void lift(const std::string& checkpoint_path, const std::string& data_path, const std::string& out_path,
          std::optional<bool> causal = std::nullopt);

// {"count": N, "millions": M, "head_invariant": bool}
std::string count_params_json(const ModelConfig& config);

// Every reference configuration with expected and computed values and PASS/FAIL.
std::string reference_table_json();

struct SynthRequest {
  std::uint64_t seed = 0;
  std::size_t frames = 200;
  std::size_t sequences = 1;
  SkeletonSpec skeleton;
  data::MotionParams motion;
};

// Sequence i uses seed + i and subject "<motion.subject><i>".
void synth(const SynthRequest& request, const std::string& out_path);

}  // namespace liftkit::commands
