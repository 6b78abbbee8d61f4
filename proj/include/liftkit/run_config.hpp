#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "liftkit/data.hpp"
#include "liftkit/model.hpp"
#include "liftkit/skeleton.hpp"
#include "liftkit/training.hpp"

namespace liftkit {

// How the held-out split is carved from a data file. Subjects listed in
// val_subjects are held out whole; otherwise the last val_fraction of each
// sequence's frames is held out.
struct DataSplit {
  std::vector<std::string> val_subjects;
  double val_fraction = 0.1;
};

// Run configuration file: UTF-8 JSON
//   {"version": 1, "model": {...}, "train": {...}, "data": {...}, "skeleton": ...}
// Unknown keys are rejected with the offending key named.
struct RunConfig {
  ModelConfig model;
  training::TrainConfig train;
  DataSplit split;
  std::optional<SkeletonSpec> skeleton;

  // Seed precedence is resolved by the caller: flag > file > LIFTKIT_SEED > 0.
  bool seed_from_file = false;

  static RunConfig parse(const std::string& text, const std::string& source = "<config>");
  static RunConfig load(const std::string& path);

  void validate() const;
};

// LIFTKIT_SEED when set and parseable; throws Error(config) when malformed.
std::optional<std::uint64_t> seed_from_environment();

std::pair<std::vector<data::PoseSequence>, std::vector<data::PoseSequence>> split_sequences(
    const std::vector<data::PoseSequence>& sequences, const DataSplit& split);

}  // namespace liftkit
