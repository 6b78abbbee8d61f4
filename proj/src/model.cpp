#include "liftkit/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include "json_fields.hpp"
#include "liftkit/error.hpp"

namespace liftkit {

using detail::FieldReader;
using detail::json;

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) fail_config(std::string("model.") + name + " must be positive");
  };
  positive(hidden_dim, "hidden_dim");
  positive(heads, "heads");
  positive(blocks, "blocks");
  positive(ffn_dim, "ffn_dim");
  positive(receptive_field, "receptive_field");
  positive(joints, "joints");
  if (hidden_dim % 2 != 0) fail_config("model.hidden_dim must be even");
  if (hidden_dim % heads != 0) {
    fail_config("model.hidden_dim " + std::to_string(hidden_dim) + " is not divisible by heads " + std::to_string(heads));
  }
  if (receptive_field % 2 == 0) fail_config("model.receptive_field must be odd");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail_config("model.dropout must lie in [0, 1)");
  if (!(std::isfinite(output_scale) && output_scale > 0.0)) fail_config("model.output_scale must be positive");
}

std::string ModelConfig::to_json() const {
  json j;
  j["hidden_dim"] = hidden_dim;
  j["heads"] = heads;
  j["blocks"] = blocks;
  j["ffn_dim"] = ffn_dim;
  j["receptive_field"] = receptive_field;
  j["joints"] = joints;
  j["share_attention"] = share_attention;
  j["dropout"] = dropout;
  j["causal"] = causal;
  j["output_token"] = output_token == OutputToken::center ? "center" : "last";
  j["output_scale"] = output_scale;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail_config(std::string("model config: invalid JSON: ") + e.what());
  }
  FieldReader r(j, "model");
  ModelConfig c;
  r.optional("hidden_dim", c.hidden_dim);
  r.optional("heads", c.heads);
  r.optional("blocks", c.blocks);
  r.optional("ffn_dim", c.ffn_dim);
  r.optional("receptive_field", c.receptive_field);
  r.optional("joints", c.joints);
  r.optional("share_attention", c.share_attention);
  r.optional("dropout", c.dropout);
  r.optional("causal", c.causal);
  r.optional("output_scale", c.output_scale);
  std::string token = "center";
  r.optional("output_token", token);
  if (token == "center") {
    c.output_token = OutputToken::center;
  } else if (token == "last") {
    c.output_token = OutputToken::last;
  } else {
    fail_config("model.output_token must be \"center\" or \"last\", got \"" + token + "\"");
  }
  r.finish();
  c.validate();
  return c;
}

std::uint64_t parameter_count(const ModelConfig& c) {
  c.validate();
  const std::uint64_t d = c.hidden_dim, ff = c.ffn_dim, j = c.joints, e = c.blocks;
  const std::uint64_t attention = 4 * d * d + 4 * d;
  const std::uint64_t ffn = d * ff + ff + ff * d + d;
  const std::uint64_t norms = 4 * d;
  const std::uint64_t projections = (2 * j * d + d) + (d * 3 * j + 3 * j);
  if (c.share_attention) return attention + e * (ffn + norms) + projections;
  return e * (attention + ffn + norms) + projections;
}

bool count_is_head_invariant(const ModelConfig& config) {
  std::set<std::uint64_t> counts;
  for (std::size_t heads : {4, 8, 16}) {
    if (config.hidden_dim % heads != 0) continue;
    ModelConfig c = config;
    c.heads = heads;
    counts.insert(parameter_count(c));
  }
  return counts.size() <= 1;
}

double round_millions(std::uint64_t count, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(static_cast<double>(count) / 1e6 * scale) / scale;
}

std::vector<ReferenceCount> reference_counts() {
  auto cfg = [](std::size_t d, std::size_t h, std::size_t e, std::size_t n, bool share) {
    ModelConfig c;
    c.hidden_dim = d;
    c.heads = h;
    c.blocks = e;
    c.receptive_field = n;
    c.share_attention = share;
    return c;
  };
  // Hidden-dim / head / block ablation (n = 27, unshared), then the
  // attention-sharing ablation. Values are quoted in millions.
  return {
      {"d=128 h=8 E=6", cfg(128, 8, 6, 27, false), 3.57, 2},
      {"d=256 h=8 E=6", cfg(256, 8, 6, 27, false), 7.91, 2},
      {"d=512 h=8 E=6", cfg(512, 8, 6, 27, false), 18.96, 2},
      {"d=768 h=8 E=6", cfg(768, 8, 6, 27, false), 33.15, 2},
      {"d=512 h=4 E=6", cfg(512, 4, 6, 27, false), 18.96, 2},
      {"d=512 h=16 E=6", cfg(512, 16, 6, 27, false), 18.96, 2},
      {"d=512 h=8 E=4", cfg(512, 8, 4, 27, false), 12.65, 2},
      {"d=512 h=8 E=8", cfg(512, 8, 8, 27, false), 25.26, 2},
      {"n=81 unshared", cfg(512, 8, 6, 81, false), 18.96, 2},
      {"n=81 shared", cfg(512, 8, 6, 81, true), 13.7, 1},
      {"n=243 E=4 shared", cfg(512, 8, 4, 243, true), 9.5, 1},
      {"n=243 E=2 d=256 shared", cfg(256, 8, 2, 243, true), 2.4, 1},
  };
}

std::vector<AuditRow> audit_reference_counts() {
  std::vector<AuditRow> rows;
  for (auto& ref : reference_counts()) {
    const std::uint64_t count = parameter_count(ref.config);
    const double rounded = round_millions(count, ref.decimals);
    const bool pass = std::abs(rounded - ref.expected_millions) < 1e-9;
    rows.push_back({std::move(ref), count, rounded, pass});
  }
  return rows;
}

// ---------------------------------------------------------------------------

template <typename T>
LiftFormer<T> LiftFormer<T>::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  nn::Rng rng(seed);
  LiftFormer model;
  model.config_ = config;
  const std::size_t d = config.hidden_dim;
  model.input_proj_ = nn::make_linear<T>(2 * config.joints, d, rng);
  nn::AttentionParams<T> shared;
  if (config.share_attention) shared = nn::make_attention<T>(d, rng);
  for (std::size_t b = 0; b < config.blocks; ++b) {
    nn::EncoderBlockParams<T> block;
    block.attention = config.share_attention ? shared : nn::make_attention<T>(d, rng);
    block.ffn = nn::make_feed_forward<T>(d, config.ffn_dim, rng);
    block.norm1 = nn::make_norm<T>(d);
    block.norm2 = nn::make_norm<T>(d);
    model.blocks_.push_back(std::move(block));
  }
  model.output_proj_ = nn::make_linear<T>(d, 3 * config.joints, rng);
  model.encoding_ = nn::temporal_encoding<T>(config.receptive_field, d);
  return model;
}

template <typename T>
nn::Tensor<T> LiftFormer<T>::forward(const nn::Tensor<T>& windows, bool training, nn::Rng& rng) const {
  const std::size_t n = config_.receptive_field;
  const std::size_t in_width = 2 * config_.joints;
  if (windows.rank() != 3 || windows.dim(1) != n || windows.dim(2) != in_width) {
    fail_data("forward: expected windows of shape [batch, " + std::to_string(n) + ", " + std::to_string(in_width) +
              "], got " + nn::shape_string(windows.shape()));
  }
  const std::size_t batch = windows.dim(0);
  auto h = nn::apply(input_proj_, nn::reshape(windows, {batch * n, in_width}));
  h = nn::add_tiled(h, encoding_);

  nn::BlockOptions options;
  options.heads = config_.heads;
  options.seq_len = n;
  options.causal = config_.causal;
  options.dropout = config_.dropout;
  options.training = training;
  for (const auto& block : blocks_) h = nn::encoder_block(h, block, options, rng);

  std::vector<std::size_t> rows(batch);
  for (std::size_t b = 0; b < batch; ++b) rows[b] = b * n + config_.output_index();
  auto out = nn::apply(output_proj_, nn::select_rows<T>(h, rows));
  if (config_.output_scale != 1.0) out = nn::scale(out, static_cast<T>(config_.output_scale));
  return out;
}

template <typename T>
std::vector<T> LiftFormer<T>::predict(std::span<const T> windows) const {
  const std::size_t per_window = config_.receptive_field * 2 * config_.joints;
  if (windows.empty() || windows.size() % per_window != 0) {
    fail_data("predict: input length " + std::to_string(windows.size()) + " is not a multiple of the window size " +
              std::to_string(per_window));
  }
  nn::NoGradGuard no_grad;
  nn::Rng unused(0);
  const std::size_t batch = windows.size() / per_window;
  nn::Tensor<T> input({batch, config_.receptive_field, 2 * config_.joints},
                      std::vector<T>(windows.begin(), windows.end()));
  const auto out = forward(input, false, unused);
  return std::vector<T>(out.values().begin(), out.values().end());
}

template <typename T>
std::vector<NamedParameter<T>> LiftFormer<T>::named_parameters() const {
  std::vector<NamedParameter<T>> out;
  auto linear = [&](const std::string& prefix, const nn::LinearParams<T>& p) {
    out.push_back({prefix + ".weight", p.weight});
    out.push_back({prefix + ".bias", p.bias});
  };
  auto attention = [&](const std::string& prefix, const nn::AttentionParams<T>& p) {
    linear(prefix + ".query", p.query);
    linear(prefix + ".key", p.key);
    linear(prefix + ".value", p.value);
    linear(prefix + ".output", p.output);
  };
  linear("input_proj", input_proj_);
  if (config_.share_attention && !blocks_.empty()) attention("shared_attention", blocks_.front().attention);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string prefix = "blocks." + std::to_string(b);
    const auto& block = blocks_[b];
    if (!config_.share_attention) attention(prefix + ".attention", block.attention);
    linear(prefix + ".ffn.inner", block.ffn.inner);
    linear(prefix + ".ffn.outer", block.ffn.outer);
    out.push_back({prefix + ".norm1.gain", block.norm1.gain});
    out.push_back({prefix + ".norm1.bias", block.norm1.bias});
    out.push_back({prefix + ".norm2.gain", block.norm2.gain});
    out.push_back({prefix + ".norm2.bias", block.norm2.bias});
  }
  linear("output_proj", output_proj_);
  return out;
}

template <typename T>
std::vector<nn::Tensor<T>> LiftFormer<T>::parameters() const {
  std::vector<nn::Tensor<T>> out;
  for (auto& p : named_parameters()) out.push_back(p.tensor);
  return out;
}

template <typename T>
std::size_t LiftFormer<T>::parameter_scalar_count() const {
  // Walk every block's references and count each storage once.
  std::set<const void*> seen;
  std::size_t total = 0;
  auto visit = [&](const nn::Tensor<T>& t) {
    if (seen.insert(t.storage_id()).second) total += t.size();
  };
  auto linear = [&](const nn::LinearParams<T>& p) {
    visit(p.weight);
    visit(p.bias);
  };
  linear(input_proj_);
  for (const auto& block : blocks_) {
    linear(block.attention.query);
    linear(block.attention.key);
    linear(block.attention.value);
    linear(block.attention.output);
    linear(block.ffn.inner);
    linear(block.ffn.outer);
    visit(block.norm1.gain);
    visit(block.norm1.bias);
    visit(block.norm2.gain);
    visit(block.norm2.bias);
  }
  linear(output_proj_);
  return total;
}

template <typename T>
void LiftFormer<T>::zero_grad() {
  for (auto& p : parameters()) p.zero_grad();
}

template class LiftFormer<float>;
template class LiftFormer<double>;

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'L', 'F', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_bytes(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t count, const char* what) {
    if (count > bytes_.size() - pos_) fail_data(std::string("checkpoint truncated while reading ") + what);
    auto s = bytes_.subspan(pos_, count);
    pos_ += count;
    return s;
  }

  std::uint32_t u32(const char* what) {
    auto s = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[i]) << (8 * i);
    return v;
  }

  std::uint64_t u64(const char* what) {
    auto s = take(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return v;
  }

  std::string string(const char* what) {
    const std::uint32_t len = u32(what);
    auto s = take(len, what);
    return std::string(s.begin(), s.end());
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const LiftFormer<float>& model) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kVersion);
  put_bytes(out, model.config().to_json());
  const auto params = model.named_parameters();
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  std::uint64_t offset = 0;
  for (const auto& p : params) {
    put_bytes(out, p.name);
    put_u32(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    put_u64(out, offset);
    offset += 4 * p.tensor.size();
  }
  for (const auto& p : params) {
    for (float v : p.tensor.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

LiftFormer<float> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  const auto magic = in.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) fail_data("checkpoint: bad magic bytes");
  const std::uint32_t version = in.u32("version");
  if (version != kVersion) fail_data("checkpoint: unsupported version " + std::to_string(version));
  const std::string config_text = in.string("config");
  ModelConfig config;
  try {
    config = ModelConfig::from_json(config_text);
  } catch (const Error& e) {
    fail_data(std::string("checkpoint: invalid config: ") + e.what());
  }

  struct Entry {
    nn::Shape shape;
    std::uint64_t offset;
  };
  std::map<std::string, Entry> table;
  const std::uint32_t entries = in.u32("entry count");
  for (std::uint32_t i = 0; i < entries; ++i) {
    std::string name = in.string("entry name");
    const std::uint32_t rank = in.u32("entry rank");
    if (rank > 8) fail_data("checkpoint: entry '" + name + "' has implausible rank");
    nn::Shape shape(rank);
    for (auto& d : shape) d = in.u32("entry shape");
    const std::uint64_t offset = in.u64("entry offset");
    if (!table.emplace(name, Entry{shape, offset}).second) fail_data("checkpoint: duplicate entry '" + name + "'");
  }
  const std::size_t payload_start = in.position();
  const std::size_t payload_size = in.remaining();
  const auto payload = bytes.subspan(payload_start);

  auto model = LiftFormer<float>::build(config, 0);
  const auto params = model.named_parameters();
  if (params.size() != table.size()) {
    fail_data("checkpoint: expected " + std::to_string(params.size()) + " parameter entries, found " +
              std::to_string(table.size()));
  }
  for (auto p : params) {
    auto it = table.find(p.name);
    if (it == table.end()) fail_data("checkpoint: missing parameter '" + p.name + "'");
    if (it->second.shape != p.tensor.shape()) {
      fail_data("checkpoint: parameter '" + p.name + "' has shape " + nn::shape_string(it->second.shape) +
                ", expected " + nn::shape_string(p.tensor.shape()));
    }
    const std::uint64_t bytes_needed = 4ull * p.tensor.size();
    if (it->second.offset > payload_size || bytes_needed > payload_size - it->second.offset) {
      fail_data("checkpoint truncated in payload of '" + p.name + "'");
    }
    auto dst = p.tensor.mutable_values();
    const std::uint8_t* src = payload.data() + it->second.offset;
    for (std::size_t i = 0; i < dst.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(src[4 * i + b]) << (8 * b);
      dst[i] = std::bit_cast<float>(bits);
    }
  }
  return model;
}

void save_checkpoint(const LiftFormer<float>& model, const std::string& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_data("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail_data("failed writing checkpoint '" + path + "'");
}

LiftFormer<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace liftkit
