#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "liftkit/nn/layers.hpp"
#include "liftkit/nn/tensor.hpp"

namespace liftkit {

enum class OutputToken { center, last };

struct ModelConfig {
  std::size_t hidden_dim = 512;
  std::size_t heads = 8;
  std::size_t blocks = 6;
  std::size_t ffn_dim = 2048;
  std::size_t receptive_field = 27;
  std::size_t joints = 17;
  bool share_attention = false;
  double dropout = 0.1;
  bool causal = false;
  OutputToken output_token = OutputToken::center;
  // Fixed multiplier on the output projection (no parameters). Predictions and
  // the loss stay in mm; larger values amplify every Adam step on the output
  // layer and raise the noise floor of training.
  double output_scale = 10.0;

  // Throws Error(config) naming the violated invariant.
  void validate() const;

  std::size_t output_index() const {
    return output_token == OutputToken::center ? (receptive_field - 1) / 2 : receptive_field - 1;
  }

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);

  bool operator==(const ModelConfig&) const = default;
};

// Closed-form scalar count; attention is counted once when shared.
std::uint64_t parameter_count(const ModelConfig& config);

// True when the count is identical for every head count in {4, 8, 16} that
// divides the hidden dim.
bool count_is_head_invariant(const ModelConfig& config);

// One row of the published ablation parameter counts.
struct ReferenceCount {
  std::string label;
  ModelConfig config;
  double expected_millions;
  int decimals;  // precision the reference value is quoted at
};

struct AuditRow {
  ReferenceCount reference;
  std::uint64_t count;
  double rounded_millions;
  bool pass;
};

std::vector<ReferenceCount> reference_counts();
std::vector<AuditRow> audit_reference_counts();
double round_millions(std::uint64_t count, int decimals);

template <typename T>
struct NamedParameter {
  std::string name;
  nn::Tensor<T> tensor;
};

// Input reprojection (2J -> d) + temporal encoding, E post-norm encoder
// blocks, selection of one output token, reprojection (d -> 3J).
template <typename T>
class LiftFormer {
 public:
  static LiftFormer build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  void set_causal(bool causal) { config_.causal = causal; }

  // windows: [batch, n, 2J] -> [batch, 3J]. `rng` feeds dropout and is only
  // consumed when training.
  nn::Tensor<T> forward(const nn::Tensor<T>& windows, bool training, nn::Rng& rng) const;

  // Inference without graph recording; `windows` holds whole windows of
  // n * 2J values each. Returns batch * 3J values.
  std::vector<T> predict(std::span<const T> windows) const;

  // Unique storages in a stable order; shared attention appears once.
  std::vector<NamedParameter<T>> named_parameters() const;
  std::vector<nn::Tensor<T>> parameters() const;
  std::size_t parameter_scalar_count() const;
  void zero_grad();

  const std::vector<nn::EncoderBlockParams<T>>& blocks() const noexcept { return blocks_; }

 private:
  ModelConfig config_;
  nn::LinearParams<T> input_proj_;
  std::vector<nn::EncoderBlockParams<T>> blocks_;
  nn::LinearParams<T> output_proj_;
  nn::Tensor<T> encoding_;
};

extern template class LiftFormer<float>;
extern template class LiftFormer<double>;

// Checkpoint layout (little-endian):
//   "LFT1" | u32 version | u32 len + UTF-8 config JSON | u32 entries |
//   entries: u32 name len + name, u32 rank, u32 dims[rank], u64 payload offset |
//   float32 payload
// Throws Error(data) on a malformed or truncated file.
void save_checkpoint(const LiftFormer<float>& model, const std::string& path);
LiftFormer<float> load_checkpoint(const std::string& path);

std::vector<std::uint8_t> encode_checkpoint(const LiftFormer<float>& model);
LiftFormer<float> decode_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace liftkit
