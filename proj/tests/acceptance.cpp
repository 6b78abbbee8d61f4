// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "json.hpp"
#include "liftkit/data.hpp"
#include "liftkit/metrics.hpp"
#include "liftkit/model.hpp"
#include "liftkit/nn/ops.hpp"
#include "liftkit/training.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace liftkit;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("liftkit_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::pair<int, std::string> run_cli(const std::string& args) {
  const std::string cmd = "cd '" + work_dir().string() + "' && '" LIFTKIT_CLI_PATH "' " + args + " 2>&1";
  std::string out;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Outcome reference_table() {
  const auto t0 = Clock::now();
  const auto [code, out] = run_cli("--json count-params --paper-table");
  const double secs = seconds_since(t0);
  std::size_t rows = 0, passed = 0;
  try {
    const auto j = json::parse(out);
    for (const auto& row : j.at("rows")) {
      ++rows;
      if (row.at("status") == "PASS") ++passed;
    }
  } catch (const std::exception&) {
    return {false, "unparseable output"};
  }
  return {code == 0 && rows > 0 && passed == rows && secs < 1.0,
          std::to_string(passed) + "/" + std::to_string(rows) + " rows in " + fmt(secs) + " s"};
}

Outcome head_invariance() {
  std::size_t configs = 0;
  for (std::size_t d : {64, 128, 256, 512, 1024}) {
    for (std::size_t blocks : {1, 2, 4, 6, 8}) {
      for (bool share : {false, true}) {
        ModelConfig c;
        c.hidden_dim = d;
        c.blocks = blocks;
        c.share_attention = share;
        c.heads = 1;
        const auto base = parameter_count(c);
        for (std::size_t h : {2, 4, 8, 16, 32}) {
          c.heads = h;
          if (parameter_count(c) != base) return {false, "d=" + std::to_string(d) + " h=" + std::to_string(h)};
          // same count from the built parameter storage
          if (d == 64 && blocks <= 2 && LiftFormer<float>::build(c, 1).parameter_scalar_count() != base)
            return {false, "storage mismatch"};
        }
        ++configs;
      }
    }
  }
  return {true, std::to_string(configs) + " configurations, heads 1..32"};
}

Outcome finite_differences() {
  const auto t0 = Clock::now();
  ModelConfig c;
  c.hidden_dim = 16;
  c.heads = 4;
  c.blocks = 2;
  c.ffn_dim = 32;
  c.receptive_field = 5;
  c.joints = 4;
  c.dropout = 0.0;
  auto model = LiftFormer<double>::build(c, 17);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  // move norm gains and biases off their initial constants
  for (auto& p : model.named_parameters())
    for (auto& v : p.tensor.mutable_values()) v += 0.05 * normal(rng);
  const std::size_t batch = 3;
  std::vector<double> in(batch * 5 * 8), target(batch * 12);
  for (auto& v : in) v = 0.5 * normal(rng);
  for (auto& v : target) v = 20.0 * normal(rng);
  const nn::Tensor<double> x({batch, 5, 8}, in);
  const nn::Tensor<double> gt({batch, 12}, target);
  nn::Rng dropout_rng(0);
  auto loss = [&] { return training::mpjpe_loss(model.forward(x, false, dropout_rng), gt); };

  auto params = model.parameters();
  for (auto& p : params) p.zero_grad();
  const auto value = loss();
  value.backward();

  // Central differences with h = 1e-4: at 1e-6 one ulp of the loss already
  // shifts the quotient by ~4e-9. Relative error is undefined where the true
  // gradient vanishes (key biases are softmax shift invariant, inactive ReLU
  // rows give exact zeros), so coordinates whose gradient stays below 100x
  // the rounding noise of the quotient are held to that absolute bound.
  const double h = 1e-4;
  const double noise = 2.2e-16 * std::abs(value.item()) / h;
  const double tiny = 100.0 * noise;
  std::size_t total = 0;
  for (const auto& p : params) total += p.size();
  const std::size_t stride = 7;  // about one coordinate in seven, covering every tensor
  double worst = 0.0, worst_abs = 0.0;
  std::size_t relative = 0, absolute = 0, flat = 0;
  for (auto& p : params) {
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    auto values = p.mutable_values();
    for (std::size_t i = (flat % stride); i < values.size(); i += stride) {
      const double saved = values[i];
      double plus, minus;
      {
        nn::NoGradGuard guard;
        values[i] = saved + h;
        plus = loss().item();
        values[i] = saved - h;
        minus = loss().item();
      }
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double scale = std::max(std::abs(analytic[i]), std::abs(numeric));
      if (scale < tiny) {
        worst_abs = std::max(worst_abs, std::abs(analytic[i] - numeric));
        ++absolute;
      } else {
        worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
        ++relative;
      }
    }
    flat += values.size();
  }
  const double secs = seconds_since(t0);
  return {relative >= 200 && worst < 1e-4 && worst_abs <= tiny && secs < 30.0,
          std::to_string(relative) + " of " + std::to_string(total) + " coordinates, max rel err " + fmt(worst) +
              "; " + std::to_string(absolute) + " near-zero coordinates within " + fmt(worst_abs) + " (bound " +
              fmt(tiny) + "), " + fmt(secs) + " s"};
}

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> noise(0.0, 40.0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto gt = testing::random_pose(rng, 17);
    Pose3D pred = testing::transform(gt, testing::random_rotation(rng), 0.8 + 0.01 * i, {30.0, -5.0, 12.0});
    for (auto& v : pred.coords()) v += noise(rng);
    worst = std::max(worst, std::abs(metrics::p_mpjpe(pred, gt) - oracle::aligned_mpjpe(pred, gt)));
  }
  double similarity = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto gt = testing::random_pose(rng, 17);
    const auto pred = testing::transform(gt, testing::random_rotation(rng), 0.3 + 0.1 * i, {100.0, -40.0, 7.0});
    similarity = std::max(similarity, metrics::p_mpjpe(pred, gt));
  }
  // coordinates on a 1/8 grid keep the offset subtraction exact
  auto gt = testing::random_pose(rng, 17);
  for (auto& v : gt.coords()) v = std::round(v * 8.0) / 8.0;
  Pose3D offset = gt, twice = gt;
  for (std::size_t j = 0; j < 17; ++j) {
    offset.at(j, 0) += 3.0;
    offset.at(j, 1) += 4.0;
  }
  for (auto& v : twice.coords()) v *= 2.0;
  const double off = metrics::mpjpe(offset, gt);
  const double scaled = metrics::n_mpjpe(twice, gt);
  std::vector<Pose3D> seq, shifted;
  for (int t = 0; t < 10; ++t) {
    seq.push_back(testing::random_pose(rng, 17));
    shifted.push_back(seq.back());
    for (std::size_t j = 0; j < 17; ++j) shifted.back().at(j, 2) += 25.0;
  }
  const double velocity = metrics::mpjve(shifted, seq);
  const double secs = seconds_since(t0);
  const bool pass = worst < 1e-6 && similarity < 1e-9 && off == 5.0 && scaled < 1e-9 && velocity < 1e-9 && secs < 10.0;
  return {pass, fmt(secs) + " s, oracle gap " + fmt(worst) + ", similarity " + fmt(similarity) + ", offset " + fmt(off) +
                    ", n_mpjpe(2gt) " + fmt(scaled) + ", mpjve(offset) " + fmt(velocity)};
}

Outcome overfit() {
  const auto t0 = Clock::now();
  const std::vector<data::PoseSequence> seqs{data::synth_sequence(1, 200, h36m_17()).sequence};
  ModelConfig c;
  c.hidden_dim = 64;
  c.heads = 4;
  c.blocks = 2;
  c.ffn_dim = 256;
  c.receptive_field = 27;
  c.dropout = 0.0;
  auto model = LiftFormer<float>::build(c, 3);
  training::TrainConfig t;
  t.epochs = 100000;
  t.batch_size = 64;
  t.warmup_steps = 200;
  t.lr_factor = 1.0;
  t.max_steps = 2000;
  t.flip_augment = false;
  t.seed = 3;
  const auto result = training::train(model, seqs, {}, t);
  const double err = training::mean_train_mpjpe(model, seqs);
  const double secs = seconds_since(t0);
  return {err < 5.0 && result.steps <= 2000 && secs < 300.0,
          "train MPJPE " + fmt(err) + " mm after " + std::to_string(result.steps) + " steps, " + fmt(secs) + " s"};
}

const char* small_config = R"({"version": 1,
  "model": {"hidden_dim": 32, "heads": 4, "blocks": 2, "ffn_dim": 64, "receptive_field": 27, "dropout": 0.1},
  "train": {"epochs": 3, "batch_size": 32, "warmup_steps": 20, "lr_factor": 1.0, "seed": 11},
  "data": {"val_fraction": 0.2}})";

Outcome determinism() {
  std::ofstream(work_dir() / "config.json") << small_config;
  if (run_cli("synth det.jsonl --seed 4 --frames 80 --sequences 2").first != 0) return {false, "synth failed"};
  for (const char* out : {"det_a", "det_b"})
    if (run_cli(std::string("train config.json det.jsonl ") + out).first != 0) return {false, "train failed"};
  bool same = true;
  for (const char* f : {"checkpoint.lft", "train_log.jsonl", "eval_report.json"})
    same = same && read_file(work_dir() / "det_a" / f) == read_file(work_dir() / "det_b" / f);
  const bool nonempty = !read_file(work_dir() / "det_a/checkpoint.lft").empty();
  return {same && nonempty, same ? "checkpoint, log and report identical" : "outputs differ"};
}

// Lifts `file` with the given flag and returns the predictions of the first sequence.
std::vector<Pose3D> lift_via_cli(const std::string& ckpt, const std::string& file, const std::string& flag) {
  const std::string out = file + flag + ".out.jsonl";
  if (run_cli("lift " + ckpt + " " + file + " " + out + " " + flag).first != 0) return {};
  return *data::load_sequences((work_dir() / out).string()).at(0).frames_3d;
}

Outcome causal_contract() {
  std::ofstream(work_dir() / "config.json") << small_config;
  if (run_cli("synth causal.jsonl --seed 8 --frames 60").first != 0) return {false, "synth failed"};
  if (run_cli("train config.json causal.jsonl causal_run --max-steps 5").first != 0) return {false, "train failed"};
  const std::string ckpt = "causal_run/checkpoint.lft";
  auto seqs = data::load_sequences((work_dir() / "causal.jsonl").string());
  std::size_t unchanged = 0, probes = 0, changed = 0;
  for (std::size_t t : {0, 17, 30, 58}) {
    auto perturbed = seqs;
    for (std::size_t f = t + 1; f < perturbed[0].frame_count(); ++f)
      for (auto& v : perturbed[0].frames_2d[f].coords()) v += 0.3;
    const std::string name = "causal_" + std::to_string(t) + ".jsonl";
    data::save_sequences((work_dir() / name).string(), perturbed);
    const auto base_c = lift_via_cli(ckpt, "causal.jsonl", "--causal");
    const auto pert_c = lift_via_cli(ckpt, name, "--causal");
    const auto base_n = lift_via_cli(ckpt, "causal.jsonl", "--non-causal");
    const auto pert_n = lift_via_cli(ckpt, name, "--non-causal");
    if (base_c.empty() || pert_c.empty() || base_n.empty() || pert_n.empty()) return {false, "lift failed"};
    ++probes;
    bool same = true;
    for (std::size_t s = 0; s <= t; ++s) same = same && base_c[s] == pert_c[s];
    if (same) ++unchanged;
    if (!(base_n[t] == pert_n[t])) ++changed;
  }
  return {unchanged == probes && changed == probes,
          "causal: frames <= t bit-identical in " + std::to_string(unchanged) + "/" + std::to_string(probes) +
              "; non-causal: frame t changed in " + std::to_string(changed) + "/" + std::to_string(probes)};
}

Outcome flip_equivariance() {
  ModelConfig c;
  c.hidden_dim = 64;
  c.heads = 8;
  c.blocks = 2;
  c.ffn_dim = 128;
  auto model = LiftFormer<float>::build(c, 12);
  const auto& spec = h36m_17();
  const auto seq = data::synth_sequence(13, 40, spec).sequence;
  const auto windows = data::extract_windows(seq, 27);
  double worst = 0.0;
  for (const auto& w : windows) {
    const auto a = training::predict_with_flip_average(model, data::flip_window(w, spec), spec);
    const auto b = flip_pose(training::predict_with_flip_average(model, w, spec), spec);
    for (std::size_t i = 0; i < a.coords().size(); ++i) worst = std::max(worst, std::abs(a.coords()[i] - b.coords()[i]));
  }
  return {worst <= 1e-6, std::to_string(windows.size()) + " windows, max deviation " + fmt(worst) + " mm"};
}

Outcome round_trips() {
  ModelConfig c;
  c.hidden_dim = 32;
  c.heads = 4;
  c.blocks = 3;
  c.ffn_dim = 64;
  c.share_attention = true;
  auto model = LiftFormer<float>::build(c, 99);
  const auto seq = data::synth_sequence(21, 50, h36m_17()).sequence;
  const std::string path = (work_dir() / "rt.lft").string();
  save_checkpoint(model, path);
  const auto loaded = load_checkpoint(path);
  const auto a = training::lift_sequence(model, seq);
  const auto b = training::lift_sequence(loaded, seq);
  const bool outputs = a == b && encode_checkpoint(loaded) == encode_checkpoint(model);

  auto other = data::synth_sequence(22, 30, eva_15()).sequence;
  other.fps.reset();
  other.frames_3d.reset();
  other.action = "Sitting \"Down\"";
  const std::vector<data::PoseSequence> seqs{seq, other};
  const std::string poses = (work_dir() / "rt.jsonl").string();
  data::save_sequences(poses, seqs);
  const auto back = data::load_sequences(poses);
  const bool files = back.size() == 2 && back[0] == seq && back[1] == other && data::format_sequences(back) == read_file(poses);
  return {outputs && files, std::string("checkpoint outputs ") + (outputs ? "identical" : "differ") + ", pose files " +
                                (files ? "lossless" : "lossy")};
}

Outcome noam() {
  const std::size_t d = 512, warmup = 1000;
  const double factor = 12.0;
  const double w = static_cast<double>(warmup);
  const double rising = factor / std::sqrt(static_cast<double>(d)) * w * std::pow(w, -1.5);
  const double falling = factor / std::sqrt(static_cast<double>(d)) / std::sqrt(w);
  const double at = training::noam_lr(warmup, d, factor, warmup);
  const double gap = std::max(std::abs(at - rising), std::abs(at - falling));
  const double expected = 12.0 * std::pow(512.0, -0.5) * std::pow(1000.0, -0.5);
  const double value_err = std::max(std::abs(at - expected), std::abs(at - 0.016770509831248424));
  return {gap < 1e-12 && value_err < 1e-9,
          "branch gap at warmup " + fmt(gap) + ", lr(1000) = " + fmt(at) + " (error " + fmt(value_err) + ")"};
}

}  // namespace

int main() {
  const std::array<std::pair<const char*, std::function<Outcome()>>, 10> criteria{{
      {"parameter table reproduces", reference_table},
      {"parameter count independent of heads", head_invariance},
      {"full-model gradient check", finite_differences},
      {"metric oracles", metric_oracles},
      {"overfit 200 frames below 5 mm", overfit},
      {"bit-identical reruns", determinism},
      {"causal contract", causal_contract},
      {"flip equivariance", flip_equivariance},
      {"checkpoint and pose file round trips", round_trips},
      {"noam schedule", noam},
  }};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %zu: %s (%s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(work_dir());
  return failures == 0 ? 0 : 1;
}
