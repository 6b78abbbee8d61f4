#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "liftkit/liftkit.h"

namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / ("liftkit_capi_" + std::to_string(::getpid()) + "_" + name)).string();
}

lk_model_config tiny() {
  lk_model_config c;
  lk_model_config_default(&c);
  c.hidden_dim = 8;
  c.heads = 2;
  c.blocks = 2;
  c.ffn_dim = 16;
  c.receptive_field = 5;
  c.joints = 4;
  c.dropout = 0.0;
  return c;
}

std::vector<float> windows(size_t batch, const lk_model_config& c) {
  std::vector<float> w(batch * c.receptive_field * 2 * c.joints);
  for (size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(0.3 * std::sin(0.9 * static_cast<double>(i)));
  return w;
}

}  // namespace

TEST_CASE("defaults and parameter counts") {
  lk_model_config c;
  lk_model_config_default(&c);
  CHECK(c.hidden_dim == 512);
  CHECK(c.heads == 8);
  CHECK(c.blocks == 6);
  CHECK(c.receptive_field == 27);
  uint64_t n = 0;
  REQUIRE(lk_count_params(&c, &n) == LK_OK);
  CHECK(n == 18958387u);
  c.share_attention = 1;
  REQUIRE(lk_count_params(&c, &n) == LK_OK);
  CHECK(n == 13705267u);
  CHECK(std::strlen(lk_version()) > 0);

  char* json = nullptr;
  REQUIRE(lk_reference_table_json(&json) == LK_OK);
  CHECK(nlohmann::json::parse(json).at("all_pass") == true);
  lk_string_free(json);
  REQUIRE(lk_count_params_json(&c, &json) == LK_OK);
  CHECK(std::string(json).find("13705267") != std::string::npos);
  lk_string_free(json);
}

TEST_CASE("errors map to status codes and messages") {
  lk_model_config c = tiny();
  c.heads = 3;
  uint64_t n = 0;
  CHECK(lk_count_params(&c, &n) == LK_ERR_CONFIG);
  CHECK(std::string(lk_last_error()).find("divisible") != std::string::npos);
  CHECK(lk_count_params(nullptr, &n) == LK_ERR_CONFIG);
  c = tiny();
  REQUIRE(lk_count_params(&c, &n) == LK_OK);
  CHECK(std::string(lk_last_error()).empty());

  lk_model* m = nullptr;
  CHECK(lk_model_load("/nonexistent/model.lft", &m) == LK_ERR_DATA);
  CHECK(m == nullptr);
  char* report = nullptr;
  CHECK(lk_eval("/nonexistent/model.lft", "/nonexistent/data.jsonl", &report) == LK_ERR_DATA);
  CHECK(report == nullptr);

  lk_synth_options s;
  lk_synth_options_default(&s);
  s.skeleton = "coco_19";
  CHECK(lk_synth(&s, temp_path("never.jsonl").c_str()) == LK_ERR_CONFIG);
  CHECK_FALSE(fs::exists(temp_path("never.jsonl")));
  lk_model_free(nullptr);
}

TEST_CASE("build, forward, save and load") {
  const lk_model_config c = tiny();
  lk_model* m = nullptr;
  REQUIRE(lk_model_build(&c, 3, &m) == LK_OK);
  uint64_t n = 0, expected = 0;
  REQUIRE(lk_model_param_count(m, &n) == LK_OK);
  REQUIRE(lk_count_params(&c, &expected) == LK_OK);
  CHECK(n == expected);

  const auto in = windows(3, c);
  std::vector<float> out(3 * 3 * c.joints), again(out.size());
  REQUIRE(lk_model_forward(m, in.data(), 3, out.data()) == LK_OK);
  for (float v : out) CHECK(std::isfinite(v));

  const auto path = temp_path("model.lft");
  REQUIRE(lk_model_save(m, path.c_str()) == LK_OK);
  lk_model* loaded = nullptr;
  REQUIRE(lk_model_load(path.c_str(), &loaded) == LK_OK);
  REQUIRE(lk_model_forward(loaded, in.data(), 3, again.data()) == LK_OK);
  CHECK(std::memcmp(out.data(), again.data(), out.size() * sizeof(float)) == 0);

  lk_model_config got;
  REQUIRE(lk_model_get_config(loaded, &got) == LK_OK);
  CHECK(got.hidden_dim == 8);
  CHECK(got.causal == 0);
  REQUIRE(lk_model_set_causal(loaded, 1) == LK_OK);
  REQUIRE(lk_model_get_config(loaded, &got) == LK_OK);
  CHECK(got.causal == 1);
  REQUIRE(lk_model_forward(loaded, in.data(), 3, again.data()) == LK_OK);
  CHECK(std::memcmp(out.data(), again.data(), out.size() * sizeof(float)) != 0);

  CHECK(lk_model_forward(m, nullptr, 3, out.data()) == LK_ERR_CONFIG);
  lk_model_free(loaded);
  lk_model_free(m);
  fs::remove(path);
}

TEST_CASE("synth, train, eval and lift through the C interface") {
  const auto data = temp_path("data.jsonl");
  const auto config = temp_path("config.json");
  const auto out_dir = temp_path("run");
  const auto lifted = temp_path("lifted.jsonl");
  lk_synth_options s;
  lk_synth_options_default(&s);
  s.seed = 2;
  s.frames = 30;
  s.sequences = 2;
  REQUIRE(lk_synth(&s, data.c_str()) == LK_OK);
  std::ofstream(config) << R"({"version": 1, "model": {"hidden_dim": 16, "heads": 2, "blocks": 1, "ffn_dim": 16},
                              "train": {"epochs": 1, "batch_size": 16, "warmup_steps": 5}})";

  lk_train_options o;
  lk_train_options_default(&o);
  o.has_seed = 1;
  o.seed = 8;
  o.max_steps = 2;
  char* report = nullptr;
  REQUIRE(lk_train(config.c_str(), data.c_str(), out_dir.c_str(), &o, &report) == LK_OK);
  CHECK(nlohmann::json::parse(report).at("steps") == 2);
  lk_string_free(report);

  const auto ckpt = out_dir + "/checkpoint.lft";
  REQUIRE(lk_eval(ckpt.c_str(), data.c_str(), &report) == LK_OK);
  CHECK(nlohmann::json::parse(report).contains("average"));
  lk_string_free(report);
  REQUIRE(lk_lift(ckpt.c_str(), data.c_str(), lifted.c_str(), -1) == LK_OK);
  CHECK(fs::exists(lifted));
  CHECK(lk_lift(ckpt.c_str(), data.c_str(), lifted.c_str(), 2) == LK_ERR_CONFIG);

  fs::remove_all(out_dir);
  fs::remove(data);
  fs::remove(config);
  fs::remove(lifted);
}

TEST_CASE("seed from the environment") {
  uint64_t seed = 0;
  int present = 1;
  ::unsetenv("LIFTKIT_SEED");
  REQUIRE(lk_seed_from_env(&seed, &present) == LK_OK);
  CHECK(present == 0);
  ::setenv("LIFTKIT_SEED", "77", 1);
  REQUIRE(lk_seed_from_env(&seed, &present) == LK_OK);
  CHECK(present == 1);
  CHECK(seed == 77);
  ::setenv("LIFTKIT_SEED", "seven", 1);
  CHECK(lk_seed_from_env(&seed, &present) == LK_ERR_CONFIG);
  ::unsetenv("LIFTKIT_SEED");
}
