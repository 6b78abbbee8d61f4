#include "liftkit/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "liftkit/error.hpp"
#include "liftkit/metrics.hpp"
#include "liftkit/nn/ops.hpp"

namespace liftkit::training {

void TrainConfig::validate() const {
  if (epochs == 0) fail_config("train.epochs must be positive");
  if (warmup_steps == 0) fail_config("train.warmup_steps must be positive");
  if (!(lr_factor > 0.0)) fail_config("train.lr_factor must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) fail_config("train.beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) fail_config("train.beta2 must lie in [0, 1)");
  if (!(adam.eps > 0.0)) fail_config("train.eps must be positive");
}

std::size_t default_batch_size(std::size_t receptive_field) {
  switch (receptive_field) {
    case 27: return 5120;
    case 81: return 3072;
    case 243: return 1536;
    default:
      fail_config("no default batch size for receptive field " + std::to_string(receptive_field) +
                  "; set train.batch_size");
  }
}

double noam_lr(std::uint64_t step, std::size_t hidden_dim, double factor, std::size_t warmup) {
  if (step == 0) fail_config("noam_lr: step must be >= 1");
  if (hidden_dim == 0 || warmup == 0) fail_config("noam_lr: hidden_dim and warmup must be positive");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return factor * std::pow(static_cast<double>(hidden_dim), -0.5) * std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, AdamMoments<T>& moments, std::uint64_t step, double lr,
                 const AdamConfig& config) {
  if (grad.size() != param.size()) fail_config("adam_update: gradient size mismatch");
  if (step == 0) fail_config("adam_update: step must be >= 1");
  if (moments.m.size() != param.size()) {
    moments.m.assign(param.size(), T(0));
    moments.v.assign(param.size(), T(0));
    moments.v_max.assign(config.amsgrad ? param.size() : 0, T(0));
  }
  const double b1 = config.beta1, b2 = config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = b1 * moments.m[i] + (1.0 - b1) * g;
    const double v = b2 * moments.v[i] + (1.0 - b2) * g * g;
    moments.m[i] = static_cast<T>(m);
    moments.v[i] = static_cast<T>(v);
    double v_hat = v / correction2;
    if (config.amsgrad) {
      v_hat = std::max(static_cast<double>(moments.v_max[i]), v_hat);
      moments.v_max[i] = static_cast<T>(v_hat);
    }
    param[i] = static_cast<T>(param[i] - lr * (m / correction1) / (std::sqrt(v_hat) + config.eps));
  }
}

template <typename T>
void adam_step(std::span<nn::Tensor<T>> params, OptimizerState<T>& state, double lr, const AdamConfig& config) {
  if (state.moments.size() != params.size()) state.moments.resize(params.size());
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.has_grad()) {
      // untouched this step: behaves as a zero gradient
      std::vector<T> zeros(p.size(), T(0));
      adam_update<T>(p.mutable_values(), zeros, state.moments[i], state.step, lr, config);
    } else {
      adam_update<T>(p.mutable_values(), p.grad(), state.moments[i], state.step, lr, config);
    }
  }
}

template <typename T>
nn::Tensor<T> mpjpe_loss(const nn::Tensor<T>& pred, const nn::Tensor<T>& gt) {
  return nn::mpjpe_loss(pred, gt);
}

template void adam_update(std::span<float>, std::span<const float>, AdamMoments<float>&, std::uint64_t, double,
                          const AdamConfig&);
template void adam_update(std::span<double>, std::span<const double>, AdamMoments<double>&, std::uint64_t, double,
                          const AdamConfig&);
template void adam_step(std::span<nn::Tensor<float>>, OptimizerState<float>&, double, const AdamConfig&);
template void adam_step(std::span<nn::Tensor<double>>, OptimizerState<double>&, double, const AdamConfig&);
template nn::Tensor<float> mpjpe_loss(const nn::Tensor<float>&, const nn::Tensor<float>&);
template nn::Tensor<double> mpjpe_loss(const nn::Tensor<double>&, const nn::Tensor<double>&);

// ---------------------------------------------------------------------------

namespace {

data::WindowAnchor anchor_for(const ModelConfig& config) {
  return config.output_token == OutputToken::center ? data::WindowAnchor::center : data::WindowAnchor::end;
}

void check_skeleton(const LiftFormer<float>& model, const SkeletonSpec& skeleton) {
  if (skeleton.joint_count != model.config().joints) {
    fail_data("skeleton '" + skeleton.name + "' has " + std::to_string(skeleton.joint_count) +
              " joints but the model expects " + std::to_string(model.config().joints));
  }
}

void append_window(std::vector<float>& out, const data::Window& w) {
  for (const auto& frame : w.inputs)
    for (double v : frame.coords()) out.push_back(static_cast<float>(v));
}

Pose3D to_pose(std::span<const float> values, std::size_t joints) {
  Pose3D pose(joints);
  for (std::size_t i = 0; i < values.size(); ++i) pose.coords()[i] = values[i];
  return pose;
}

constexpr std::size_t kInferenceChunk = 256;

}  // namespace

std::vector<Pose3D> predict_windows(const LiftFormer<float>& model, std::span<const data::Window> windows,
                                    const SkeletonSpec& spec, bool flip_average) {
  check_skeleton(model, spec);
  const std::size_t joints = model.config().joints;
  const std::size_t n = model.config().receptive_field;
  std::vector<Pose3D> out;
  out.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += kInferenceChunk) {
    const std::size_t count = std::min(kInferenceChunk, windows.size() - start);
    std::vector<float> plain, flipped;
    for (std::size_t i = 0; i < count; ++i) {
      const auto& w = windows[start + i];
      if (w.inputs.size() != n) fail_data("window length does not match the receptive field");
      append_window(plain, w);
      if (flip_average) append_window(flipped, data::flip_window(w, spec));
    }
    const auto a = model.predict(plain);
    std::vector<float> b;
    if (flip_average) b = model.predict(flipped);
    for (std::size_t i = 0; i < count; ++i) {
      Pose3D pose = to_pose(std::span<const float>(a).subspan(i * 3 * joints, 3 * joints), joints);
      if (flip_average) {
        const Pose3D mirrored = flip_pose(to_pose(std::span<const float>(b).subspan(i * 3 * joints, 3 * joints), joints), spec);
        for (std::size_t k = 0; k < pose.coords().size(); ++k) {
          pose.coords()[k] = 0.5 * (pose.coords()[k] + mirrored.coords()[k]);
        }
      }
      out.push_back(std::move(pose));
    }
  }
  return out;
}

Pose3D predict_with_flip_average(const LiftFormer<float>& model, const data::Window& window, const SkeletonSpec& spec) {
  return predict_windows(model, std::span<const data::Window>(&window, 1), spec, true).front();
}

std::vector<Pose3D> lift_sequence(const LiftFormer<float>& model, const data::PoseSequence& seq) {
  check_skeleton(model, seq.skeleton);
  const auto windows = data::extract_windows(seq, model.config().receptive_field, anchor_for(model.config()));
  return predict_windows(model, windows, seq.skeleton, true);
}

double mean_train_mpjpe(const LiftFormer<float>& model, std::span<const data::PoseSequence> sequences) {
  double total = 0.0;
  std::size_t frames = 0;
  for (const auto& seq : sequences) {
    if (!seq.has_3d()) fail_data("sequence '" + seq.subject + "/" + seq.action + "' has no 3D ground truth");
    const auto windows = data::extract_windows(seq, model.config().receptive_field, anchor_for(model.config()));
    const auto preds = predict_windows(model, windows, seq.skeleton, false);
    for (std::size_t t = 0; t < preds.size(); ++t) total += metrics::mpjpe(preds[t], *windows[t].target);
    frames += preds.size();
  }
  if (frames == 0) fail_data("no frames to evaluate");
  return total / static_cast<double>(frames);
}

namespace {

double validation_mpjpe(const LiftFormer<float>& model, std::span<const data::PoseSequence> sequences) {
  double total = 0.0;
  std::size_t frames = 0;
  for (const auto& seq : sequences) {
    const auto preds = lift_sequence(model, seq);
    for (std::size_t t = 0; t < preds.size(); ++t) total += metrics::mpjpe(preds[t], (*seq.frames_3d)[t]);
    frames += preds.size();
  }
  return total / static_cast<double>(frames);
}

struct TrainingSample {
  data::Window window;
  const SkeletonSpec* skeleton;
};

}  // namespace

TrainResult train(LiftFormer<float>& model, std::span<const data::PoseSequence> train_set,
                  std::span<const data::PoseSequence> val_set, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  const ModelConfig& mc = model.config();
  const std::size_t n = mc.receptive_field;
  const std::size_t joints = mc.joints;

  std::vector<TrainingSample> samples;
  for (const auto& seq : train_set) {
    check_skeleton(model, seq.skeleton);
    if (!seq.has_3d()) fail_data("training sequence '" + seq.subject + "/" + seq.action + "' has no kp3d");
    for (auto& w : data::extract_windows(seq, n, anchor_for(mc))) samples.push_back({std::move(w), &seq.skeleton});
  }
  if (samples.empty()) fail_data("training set is empty");
  for (const auto& seq : val_set) {
    check_skeleton(model, seq.skeleton);
    if (!seq.has_3d()) fail_data("validation sequence '" + seq.subject + "/" + seq.action + "' has no kp3d");
  }

  std::size_t batch = config.batch_size ? config.batch_size : default_batch_size(n);
  batch = std::min(batch, samples.size());

  nn::Rng shuffle_rng(config.seed);
  nn::Rng dropout_rng(config.seed ^ 0x9E3779B97F4A7C15ull);
  auto params = model.parameters();
  OptimizerState<float> state;

  TrainResult result;
  std::optional<double> best_val;
  std::vector<std::vector<float>> best_values;
  std::vector<std::size_t> order(samples.size());
  std::vector<bool> flip(samples.size(), false);
  bool capped = false;

  for (std::size_t epoch = 1; epoch <= config.epochs && !capped; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(nn::uniform01(shuffle_rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    if (config.flip_augment) {
      for (std::size_t i = 0; i < flip.size(); ++i) flip[i] = nn::uniform01(shuffle_rng) < 0.5;
    }

    double loss_sum = 0.0;
    std::size_t seen = 0;
    double lr = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      std::vector<float> inputs;
      std::vector<float> targets;
      inputs.reserve(count * n * 2 * joints);
      targets.reserve(count * 3 * joints);
      for (std::size_t i = 0; i < count; ++i) {
        const auto& sample = samples[order[start + i]];
        const bool mirrored = flip[order[start + i]];
        const data::Window w = mirrored ? data::flip_window(sample.window, *sample.skeleton) : sample.window;
        append_window(inputs, w);
        for (double v : w.target->coords()) targets.push_back(static_cast<float>(v));
      }
      const nn::Tensor<float> input({count, n, 2 * joints}, std::move(inputs));
      const nn::Tensor<float> target({count, 3 * joints}, std::move(targets));

      model.zero_grad();
      const auto loss = nn::mpjpe_loss(model.forward(input, true, dropout_rng), target);
      if (!std::isfinite(loss.item())) fail_numeric("training diverged: non-finite loss at step " + std::to_string(result.steps + 1));
      loss.backward();
      ++result.steps;
      lr = noam_lr(result.steps, mc.hidden_dim, config.lr_factor, config.warmup_steps);
      adam_step<float>(params, state, lr, config.adam);

      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(count);
      seen += count;
      if (config.max_steps && result.steps >= config.max_steps) {
        capped = true;
        break;
      }
    }

    EpochRecord record;
    record.step = result.steps;
    record.epoch = epoch;
    record.lr = lr;
    record.train_loss = loss_sum / static_cast<double>(seen);
    if (!val_set.empty()) {
      record.val_mpjpe = validation_mpjpe(model, val_set);
      if (!best_val || *record.val_mpjpe < *best_val) {
        best_val = record.val_mpjpe;
        result.best_epoch = epoch;
        best_values.clear();
        for (const auto& p : params) best_values.emplace_back(p.values().begin(), p.values().end());
      }
    }
    result.log.push_back(record);
    if (on_epoch) on_epoch(record);
  }

  if (!best_values.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      std::copy(best_values[i].begin(), best_values[i].end(), params[i].mutable_values().begin());
    }
  }
  model.zero_grad();
  return result;
}

}  // namespace liftkit::training
