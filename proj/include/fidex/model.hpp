#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fidex/textproc.hpp"

namespace fidex {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

/// Toy T5-style hyperparameters. Defaults are the desk-scale configuration.
struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_enc_layers = 2;
  std::size_t n_dec_layers = 2;
  std::size_t d_ffn = 128;
  std::size_t vocab_size = 0;
  /// Per-chunk encoder length (L_ctx).
  std::size_t context_length = 512;
  std::size_t max_target_len = 64;
  /// Applied to residual branches in training mode only.
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;

  /// Throws UsageError on an invalid configuration.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct TensorInfo {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  /// Fan-in used for uniform initialization; 0 marks norm gains (init 1).
  std::size_t fan_in = 0;
  bool is_embedding = false;
};

struct AttentionSlots {
  std::size_t q, k, v, o;
};

struct EncoderLayerSlots {
  std::size_t norm_attn;
  AttentionSlots attn;
  std::size_t norm_ffn, ffn_in, ffn_out;
};

struct DecoderLayerSlots {
  std::size_t norm_self;
  AttentionSlots self_attn;
  std::size_t norm_cross;
  AttentionSlots cross_attn;
  std::size_t norm_ffn, ffn_in, ffn_out;
};

/// Named tensor layout over one flat parameter buffer. Slots are indices
/// into tensors.
struct ParameterLayout {
  explicit ParameterLayout(const ModelConfig& config);

  ModelConfig config;
  std::vector<TensorInfo> tensors;
  std::size_t embedding, enc_pos, dec_pos, enc_final_norm, dec_final_norm;
  std::vector<EncoderLayerSlots> encoder;
  std::vector<DecoderLayerSlots> decoder;
  std::size_t total = 0;
};

/// All model weights in one contiguous buffer. The token embedding is shared
/// by the encoder input, the decoder input and the output projection.
/// Gradients use the same type and layout.
class Parameters {
 public:
  /// Zero-filled tensors for the given config.
  explicit Parameters(const ModelConfig& config);

  const ModelConfig& config() const { return layout_->config; }
  const ParameterLayout& layout() const { return *layout_; }
  const std::vector<TensorInfo>& tensors() const { return layout_->tensors; }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  MatrixMap tensor(std::size_t slot);
  ConstMatrixMap tensor(std::size_t slot) const;

  void set_zero();
  bool all_finite() const;
  bool operator==(const Parameters& o) const { return config() == o.config() && data_ == o.data_; }

 private:
  std::shared_ptr<const ParameterLayout> layout_;
  // Aligned so every tensor starts at the same address offset in every run;
  // Eigen's vectorized reductions peel by runtime alignment, which otherwise
  // changes summation order between runs.
  std::vector<double, Eigen::aligned_allocator<double>> data_;
};

/// Deterministic for a fixed config.seed: matrices uniform in
/// [-1/sqrt(fan_in), 1/sqrt(fan_in)], embeddings uniform in [-0.05, 0.05],
/// norm gains 1.
Parameters init_params(const ModelConfig& config);

/// Concatenated per-chunk encoder outputs: chunk i occupies rows
/// [i*L_ctx, (i+1)*L_ctx). Padding rows are zero and masked.
struct FusedStates {
  Matrix states;
  /// 1 marks a row excluded from cross-attention.
  std::vector<std::uint8_t> mask;
  std::size_t context_length = 0;

  std::size_t n_chunks() const { return context_length ? mask.size() / context_length : 0; }
};

/// Encodes each chunk independently with positions restarting at 0.
FusedStates encode_chunks(const Parameters& params, const ChunkSet& chunks);

/// Teacher-forced decoder logits. prefix[0] is the decoder start token
/// (<pad>); row t scores the token following prefix[0..t].
Matrix decoder_logits(const Parameters& params, const FusedStates& fused, std::span<const int> prefix);

/// Decoder input for a target: [<pad>, target[0..n-2]].
std::vector<int> shift_right(std::span<const int> target);

/// Mean token cross-entropy over the non-pad target positions.
double loss(const Parameters& params, const ChunkSet& chunks, std::span<const int> target_ids);

struct TrainingExample {
  ChunkSet chunks;
  std::vector<int> target;
};

struct GradientResult {
  double loss = 0.0;
  Parameters grad;
};

/// Gradient of the mean batch loss. dropout_seed != 0 with a positive
/// dropout rate enables training-mode dropout.
GradientResult grad(const Parameters& params, std::span<const TrainingExample> batch, std::uint64_t dropout_seed = 0);

/// Greedy decoding with incremental self-attention caches. Stops at EOS or
/// after max_len tokens; EOS is not returned. Ties go to the lowest id.
std::vector<int> greedy_decode(const Parameters& params, const ChunkSet& chunks, std::size_t max_len);
std::vector<int> greedy_decode(const Parameters& params, const FusedStates& fused, std::size_t max_len);

/// Number of scalar parameters for a config.
std::size_t parameter_count(const ModelConfig& config);

}  // namespace fidex
