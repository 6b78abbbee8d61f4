#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "liftkit/data.hpp"
#include "liftkit/model.hpp"
#include "liftkit/nn/tensor.hpp"

namespace liftkit::training {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool amsgrad = true;
};

struct TrainConfig {
  std::size_t epochs = 80;
  std::size_t batch_size = 0;  // 0 selects default_batch_size(receptive_field)
  std::size_t warmup_steps = 1000;
  double lr_factor = 12.0;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;  // 0 = no cap
  bool flip_augment = true;

  void validate() const;
};

// 5120 / 3072 / 1536 for n = 27 / 81 / 243; throws Error(config) otherwise.
std::size_t default_batch_size(std::size_t receptive_field);

// factor * d^-0.5 * min(step^-0.5, step * warmup^-1.5). Throws on step 0.
double noam_lr(std::uint64_t step, std::size_t hidden_dim, double factor, std::size_t warmup);

// Moment buffers for one parameter array.
template <typename T>
struct AdamMoments {
  std::vector<T> m, v, v_max;
};

template <typename T>
struct OptimizerState {
  std::vector<AdamMoments<T>> moments;  // parallel to the parameter list
  std::uint64_t step = 0;
};

// Bias-corrected Adam on one array at 1-based `step`. With amsgrad the
// running max of the corrected second moment is used in the denominator.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, AdamMoments<T>& moments, std::uint64_t step, double lr,
                 const AdamConfig& config);

// Advances state.step and updates every parameter from its accumulated grad.
template <typename T>
void adam_step(std::span<nn::Tensor<T>> params, OptimizerState<T>& state, double lr, const AdamConfig& config);

// Mean Euclidean joint distance; pred/gt are [batch, 3J] tensors.
template <typename T>
nn::Tensor<T> mpjpe_loss(const nn::Tensor<T>& pred, const nn::Tensor<T>& gt);

struct EpochRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_mpjpe;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  std::size_t steps = 0;
  std::optional<std::size_t> best_epoch;  // set when validation data was given
};

// Mini-batch Adam on MPJPE with a Noam schedule. Deterministic for a given
// seed. With validation data the parameters of the best epoch (lowest held-out MPJPE)
// are restored at the end.
TrainResult train(LiftFormer<float>& model, std::span<const data::PoseSequence> train_set,
                  std::span<const data::PoseSequence> val_set, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Plain forward per window (no flip averaging), used for training error.
double mean_train_mpjpe(const LiftFormer<float>& model, std::span<const data::PoseSequence> sequences);

// 0.5 * (f(w) + flip(f(flip(w)))).
Pose3D predict_with_flip_average(const LiftFormer<float>& model, const data::Window& window, const SkeletonSpec& spec);

// Batched form of the above for many windows.
std::vector<Pose3D> predict_windows(const LiftFormer<float>& model, std::span<const data::Window> windows,
                                    const SkeletonSpec& spec, bool flip_average = true);

// One flip-averaged 3D pose per frame.
std::vector<Pose3D> lift_sequence(const LiftFormer<float>& model, const data::PoseSequence& seq);

}  // namespace liftkit::training
