#include "liftkit/liftkit.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "liftkit/commands.hpp"
#include "liftkit/error.hpp"
#include "liftkit/model.hpp"
#include "liftkit/run_config.hpp"

struct lk_model {
  liftkit::LiftFormer<float> impl;
};

namespace {

thread_local std::string last_error;

lk_status set_error(lk_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename F>
lk_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return LK_OK;
  } catch (const liftkit::Error& e) {
    return set_error(static_cast<lk_status>(e.kind()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return set_error(LK_ERR_DATA, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(LK_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(LK_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(LK_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) liftkit::fail_config(std::string(what) + " must not be null");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

liftkit::ModelConfig to_cpp(const lk_model_config& c) {
  liftkit::ModelConfig m;
  m.hidden_dim = c.hidden_dim;
  m.heads = c.heads;
  m.blocks = c.blocks;
  m.ffn_dim = c.ffn_dim;
  m.receptive_field = c.receptive_field;
  m.joints = c.joints;
  m.share_attention = c.share_attention != 0;
  m.dropout = c.dropout;
  m.causal = c.causal != 0;
  m.output_token = c.output_last_token ? liftkit::OutputToken::last : liftkit::OutputToken::center;
  m.output_scale = c.output_scale;
  return m;
}

lk_model_config to_c(const liftkit::ModelConfig& m) {
  lk_model_config c;
  c.hidden_dim = m.hidden_dim;
  c.heads = m.heads;
  c.blocks = m.blocks;
  c.ffn_dim = m.ffn_dim;
  c.receptive_field = m.receptive_field;
  c.joints = m.joints;
  c.share_attention = m.share_attention ? 1 : 0;
  c.dropout = m.dropout;
  c.causal = m.causal ? 1 : 0;
  c.output_last_token = m.output_token == liftkit::OutputToken::last ? 1 : 0;
  c.output_scale = m.output_scale;
  return c;
}

}  // namespace

extern "C" {

const char* lk_last_error(void) { return last_error.c_str(); }

const char* lk_version(void) { return "0.1.0"; }

void lk_string_free(char* s) { std::free(s); }

lk_status lk_seed_from_env(uint64_t* seed, int* present) {
  return guarded([&] {
    require(seed, "seed");
    require(present, "present");
    const auto value = liftkit::seed_from_environment();
    *present = value ? 1 : 0;
    if (value) *seed = *value;
  });
}

void lk_model_config_default(lk_model_config* config) {
  if (config) *config = to_c(liftkit::ModelConfig{});
}

void lk_train_options_default(lk_train_options* options) {
  if (options) *options = lk_train_options{0, 0, 0, 0, 0};
}

void lk_synth_options_default(lk_synth_options* options) {
  if (options) *options = lk_synth_options{0, 200, 1, nullptr};
}

lk_status lk_count_params(const lk_model_config* config, uint64_t* count) {
  return guarded([&] {
    require(config, "config");
    require(count, "count");
    const auto cfg = to_cpp(*config);
    cfg.validate();
    *count = liftkit::parameter_count(cfg);
  });
}

lk_status lk_count_params_json(const lk_model_config* config, char** json) {
  return guarded([&] {
    require(config, "config");
    require(json, "json");
    const auto cfg = to_cpp(*config);
    cfg.validate();
    *json = copy_string(liftkit::commands::count_params_json(cfg));
  });
}

lk_status lk_reference_table_json(char** json) {
  return guarded([&] {
    require(json, "json");
    *json = copy_string(liftkit::commands::reference_table_json());
  });
}

lk_status lk_model_build(const lk_model_config* config, uint64_t seed, lk_model** model) {
  return guarded([&] {
    require(config, "config");
    require(model, "model");
    *model = new lk_model{liftkit::LiftFormer<float>::build(to_cpp(*config), seed)};
  });
}

lk_status lk_model_load(const char* path, lk_model** model) {
  return guarded([&] {
    require(path, "path");
    require(model, "model");
    *model = new lk_model{liftkit::load_checkpoint(path)};
  });
}

lk_status lk_model_save(const lk_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    liftkit::save_checkpoint(model->impl, path);
  });
}

void lk_model_free(lk_model* model) { delete model; }

lk_status lk_model_get_config(const lk_model* model, lk_model_config* config) {
  return guarded([&] {
    require(model, "model");
    require(config, "config");
    *config = to_c(model->impl.config());
  });
}

lk_status lk_model_param_count(const lk_model* model, uint64_t* count) {
  return guarded([&] {
    require(model, "model");
    require(count, "count");
    *count = model->impl.parameter_scalar_count();
  });
}

lk_status lk_model_set_causal(lk_model* model, int causal) {
  return guarded([&] {
    require(model, "model");
    model->impl.set_causal(causal != 0);
  });
}

lk_status lk_model_forward(const lk_model* model, const float* windows, size_t batch, float* out) {
  return guarded([&] {
    require(model, "model");
    require(windows, "windows");
    require(out, "out");
    const auto& cfg = model->impl.config();
    const std::size_t in_size = batch * cfg.receptive_field * 2 * cfg.joints;
    const auto result = model->impl.predict(std::span<const float>(windows, in_size));
    std::memcpy(out, result.data(), result.size() * sizeof(float));
  });
}

lk_status lk_train(const char* config_path, const char* data_path, const char* out_dir, const lk_train_options* options,
                   char** report_json) {
  return guarded([&] {
    require(config_path, "config_path");
    require(data_path, "data_path");
    require(out_dir, "out_dir");
    liftkit::commands::TrainOverrides overrides;
    if (options) {
      if (options->has_seed) overrides.seed = options->seed;
      if (options->epochs) overrides.epochs = options->epochs;
      if (options->batch_size) overrides.batch_size = options->batch_size;
      if (options->max_steps) overrides.max_steps = options->max_steps;
    }
    const auto outputs = liftkit::commands::train(config_path, data_path, out_dir, overrides);
    if (report_json) *report_json = copy_string(outputs.report_json);
  });
}

lk_status lk_eval(const char* checkpoint_path, const char* data_path, char** report_json) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(data_path, "data_path");
    require(report_json, "report_json");
    *report_json = copy_string(liftkit::commands::evaluate(checkpoint_path, data_path));
  });
}

lk_status lk_lift(const char* checkpoint_path, const char* data_path, const char* out_path, int causal) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(data_path, "data_path");
    require(out_path, "out_path");
    if (causal < -1 || causal > 1) liftkit::fail_config("causal must be -1, 0 or 1");
    std::optional<bool> mask;
    if (causal >= 0) mask = causal == 1;
    liftkit::commands::lift(checkpoint_path, data_path, out_path, mask);
  });
}

lk_status lk_synth(const lk_synth_options* options, const char* out_path) {
  return guarded([&] {
    require(options, "options");
    require(out_path, "out_path");
    liftkit::commands::SynthRequest request;
    request.seed = options->seed;
    request.frames = options->frames;
    request.sequences = options->sequences;
    const std::string name = options->skeleton ? options->skeleton : "h36m_17";
    try {
      request.skeleton = liftkit::builtin_skeleton(name);
    } catch (const liftkit::Error& e) {
      liftkit::fail_config(e.what());
    }
    liftkit::commands::synth(request, out_path);
  });
}

}  // extern "C"
