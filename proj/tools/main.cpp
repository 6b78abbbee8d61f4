#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "liftkit/liftkit.h"

namespace {

using nlohmann::json;

constexpr int kExitUsage = 1;

int report_failure(lk_status status) {
  std::cerr << "liftkit: " << lk_last_error() << "\n";
  return status == LK_ERR_INTERNAL ? kExitUsage : static_cast<int>(status);
}

// Takes ownership of a library-allocated string.
std::string take(char* s) {
  std::string out = s ? s : "";
  lk_string_free(s);
  return out;
}

std::string format_millions(double m, int decimals) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*fM", decimals, m);
  return buf;
}

void print_reference_table(const json& table) {
  std::printf("%-28s %8s %6s %6s %12s %10s %10s  %s\n", "config", "d", "heads", "blocks", "count", "computed",
              "expected", "status");
  for (const auto& row : table["rows"]) {
    const int decimals = row["decimals"].get<int>();
    std::printf("%-28s %8zu %6zu %6zu %12llu %10s %10s  %s\n", row["label"].get<std::string>().c_str(),
                row["hidden_dim"].get<std::size_t>(), row["heads"].get<std::size_t>(),
                row["blocks"].get<std::size_t>(), static_cast<unsigned long long>(row["count"].get<std::uint64_t>()),
                format_millions(row["rounded_millions"].get<double>(), decimals).c_str(),
                format_millions(row["expected_millions"].get<double>(), decimals).c_str(),
                row["status"].get<std::string>().c_str());
  }
  std::printf("head-count invariance: %s\n", table["head_invariant"].get<bool>() ? "PASS" : "FAIL");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lift 2D keypoint sequences to 3D poses with a temporal transformer encoder"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(lk_version()));

  bool json_output = false;
  app.add_flag("--json", json_output, "Print machine-readable JSON on stdout");

  // train
  std::string train_config, train_data, train_out;
  std::optional<std::uint64_t> train_seed;
  std::size_t train_epochs = 0, train_batch = 0, train_max_steps = 0;
  auto* train = app.add_subcommand("train", "Train a model and write checkpoint, log and evaluation report");
  train->add_option("config", train_config, "Run configuration (JSON)")->required();
  train->add_option("data", train_data, "Training data (JSON Lines)")->required();
  train->add_option("out_dir", train_out, "Output directory")->required();
  train->add_option("--seed", train_seed, "Seed; overrides the config file and LIFTKIT_SEED");
  train->add_option("--epochs", train_epochs, "Override train.epochs")->check(CLI::PositiveNumber);
  train->add_option("--batch-size", train_batch, "Override train.batch_size")->check(CLI::PositiveNumber);
  train->add_option("--max-steps", train_max_steps, "Override train.max_steps")->check(CLI::PositiveNumber);

  // eval
  std::string eval_checkpoint, eval_data;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against 3D ground truth (JSON report)");
  eval->add_option("checkpoint", eval_checkpoint, "Checkpoint file")->required();
  eval->add_option("data", eval_data, "Data with kp3d (JSON Lines)")->required();

  // lift
  std::string lift_checkpoint, lift_data, lift_out;
  bool lift_causal = false, lift_non_causal = false;
  auto* lift = app.add_subcommand("lift", "Predict 3D poses for every frame of a 2D pose file");
  lift->add_option("checkpoint", lift_checkpoint, "Checkpoint file")->required();
  lift->add_option("data", lift_data, "Input poses (JSON Lines, kp2d only is fine)")->required();
  lift->add_option("out", lift_out, "Output file (JSON Lines)")->required();
  auto* causal_flag = lift->add_flag("--causal", lift_causal, "Mask attention to current and past frames");
  lift->add_flag("--non-causal", lift_non_causal, "Use full attention regardless of the checkpoint")
      ->excludes(causal_flag);

  // count-params
  lk_model_config count_cfg;
  lk_model_config_default(&count_cfg);
  bool count_share = false, paper_table = false;
  auto* count = app.add_subcommand("count-params", "Exact trainable parameter count of a configuration");
  count->add_option("--d", count_cfg.hidden_dim, "Hidden width")->capture_default_str();
  count->add_option("--heads", count_cfg.heads, "Attention heads")->capture_default_str();
  count->add_option("--blocks", count_cfg.blocks, "Encoder blocks")->capture_default_str();
  count->add_option("--ffn", count_cfg.ffn_dim, "Feed-forward inner width")->capture_default_str();
  count->add_option("--joints", count_cfg.joints, "Joints per pose")->capture_default_str();
  count->add_option("--receptive-field", count_cfg.receptive_field, "Frames per window")->capture_default_str();
  count->add_flag("--share", count_share, "Share one attention parameter set across blocks");
  count->add_flag("--paper-table", paper_table, "Audit every reference configuration");

  // synth
  lk_synth_options synth_opts;
  lk_synth_options_default(&synth_opts);
  std::string synth_skeleton = "h36m_17", synth_out;
  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "Generate synthetic 2D/3D pose sequences");
  synth->add_option("out", synth_out, "Output file (JSON Lines)")->required();
  synth->add_option("--seed", synth_seed, "Seed; falls back to LIFTKIT_SEED, then 0");
  synth->add_option("--frames", synth_opts.frames, "Frames per sequence")->capture_default_str();
  synth->add_option("--sequences", synth_opts.sequences, "Number of sequences")->capture_default_str();
  synth->add_option("--skeleton", synth_skeleton, "Built-in skeleton (h36m_17, eva_15)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (*train) {
    lk_train_options opts;
    lk_train_options_default(&opts);
    if (train_seed) {
      opts.has_seed = 1;
      opts.seed = *train_seed;
    }
    opts.epochs = train_epochs;
    opts.batch_size = train_batch;
    opts.max_steps = train_max_steps;
    char* report = nullptr;
    const lk_status s = lk_train(train_config.c_str(), train_data.c_str(), train_out.c_str(), &opts, &report);
    if (s != LK_OK) return report_failure(s);
    const std::string text = take(report);
    if (json_output) {
      std::cout << text << "\n";
    } else {
      const auto r = json::parse(text);
      const auto& avg = r["average"];
      std::cout << "trained " << r["steps"].get<std::size_t>() << " steps; " << r["split"].get<std::string>()
                << " mpjpe=" << avg["mpjpe"].get<double>() << " p_mpjpe=" << avg["p_mpjpe"].get<double>()
                << " n_mpjpe=" << avg["n_mpjpe"].get<double>() << " mpjve=" << avg["mpjve"].get<double>() << "\n"
                << "wrote " << train_out << "/checkpoint.lft, train_log.jsonl, eval_report.json\n";
    }
    return 0;
  }

  if (*eval) {
    char* report = nullptr;
    const lk_status s = lk_eval(eval_checkpoint.c_str(), eval_data.c_str(), &report);
    if (s != LK_OK) return report_failure(s);
    std::cout << take(report) << "\n";
    return 0;
  }

  if (*lift) {
    const int causal = lift_causal ? 1 : (lift_non_causal ? 0 : -1);
    const lk_status s = lk_lift(lift_checkpoint.c_str(), lift_data.c_str(), lift_out.c_str(), causal);
    if (s != LK_OK) return report_failure(s);
    if (json_output) std::cout << json{{"output", lift_out}}.dump() << "\n";
    return 0;
  }

  if (*count) {
    if (paper_table) {
      char* table = nullptr;
      const lk_status s = lk_reference_table_json(&table);
      if (s != LK_OK) return report_failure(s);
      const auto parsed = json::parse(take(table));
      if (json_output) {
        std::cout << parsed.dump(2) << "\n";
      } else {
        print_reference_table(parsed);
      }
      return parsed["all_pass"].get<bool>() ? 0 : static_cast<int>(LK_ERR_NUMERIC);
    }
    count_cfg.share_attention = count_share ? 1 : 0;
    char* out = nullptr;
    const lk_status s = lk_count_params_json(&count_cfg, &out);
    if (s != LK_OK) return report_failure(s);
    const auto parsed = json::parse(take(out));
    if (json_output) {
      std::cout << parsed.dump(2) << "\n";
    } else {
      std::cout << parsed["count"].get<std::uint64_t>() << " parameters ("
                << format_millions(parsed["millions"].get<double>(), 2) << ")\n";
    }
    return 0;
  }

  if (*synth) {
    if (synth_seed) {
      synth_opts.seed = *synth_seed;
    } else {
      int present = 0;
      std::uint64_t env_seed = 0;
      if (const lk_status s = lk_seed_from_env(&env_seed, &present); s != LK_OK) return report_failure(s);
      if (present) synth_opts.seed = env_seed;
    }
    synth_opts.skeleton = synth_skeleton.c_str();
    const lk_status s = lk_synth(&synth_opts, synth_out.c_str());
    if (s != LK_OK) return report_failure(s);
    if (json_output) std::cout << json{{"output", synth_out}, {"seed", synth_opts.seed}}.dump() << "\n";
    return 0;
  }
  return kExitUsage;
}
