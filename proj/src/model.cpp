#include "fidex/model.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace fidex {

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || n_enc_layers == 0 || n_dec_layers == 0 || d_ffn == 0)
    throw UsageError("model dimensions must be positive");
  if (d_model % n_heads != 0)
    throw UsageError("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                     std::to_string(n_heads) + ")");
  if (vocab_size == 0) throw UsageError("vocab_size must be positive");
  if (context_length == 0) throw UsageError("context_length must be positive");
  if (max_target_len < 2) throw UsageError("max_target_len must be at least 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw UsageError("dropout_rate must lie in [0, 1)");
}

// ---------------------------------------------------------------------------
// Layout

ParameterLayout::ParameterLayout(const ModelConfig& cfg) : config(cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_model, f = cfg.d_ffn;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols, std::size_t fan_in, bool emb = false) {
    tensors.push_back({std::move(name), rows, cols, total, fan_in, emb});
    total += rows * cols;
    return tensors.size() - 1;
  };
  auto add_attn = [&](const std::string& prefix) {
    AttentionSlots s{};
    s.q = add(prefix + ".q", d, d, d);
    s.k = add(prefix + ".k", d, d, d);
    s.v = add(prefix + ".v", d, d, d);
    s.o = add(prefix + ".o", d, d, d);
    return s;
  };

  embedding = add("embedding", cfg.vocab_size, d, 0, true);
  enc_pos = add("encoder.position", cfg.context_length, d, 0, true);
  dec_pos = add("decoder.position", cfg.max_target_len, d, 0, true);
  for (std::size_t l = 0; l < cfg.n_enc_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    EncoderLayerSlots s{};
    s.norm_attn = add(p + ".attn_norm", 1, d, 0);
    s.attn = add_attn(p + ".attn");
    s.norm_ffn = add(p + ".ffn_norm", 1, d, 0);
    s.ffn_in = add(p + ".ffn.in", d, f, d);
    s.ffn_out = add(p + ".ffn.out", f, d, f);
    encoder.push_back(s);
  }
  enc_final_norm = add("encoder.final_norm", 1, d, 0);
  for (std::size_t l = 0; l < cfg.n_dec_layers; ++l) {
    const std::string p = "decoder." + std::to_string(l);
    DecoderLayerSlots s{};
    s.norm_self = add(p + ".self_norm", 1, d, 0);
    s.self_attn = add_attn(p + ".self_attn");
    s.norm_cross = add(p + ".cross_norm", 1, d, 0);
    s.cross_attn = add_attn(p + ".cross_attn");
    s.norm_ffn = add(p + ".ffn_norm", 1, d, 0);
    s.ffn_in = add(p + ".ffn.in", d, f, d);
    s.ffn_out = add(p + ".ffn.out", f, d, f);
    decoder.push_back(s);
  }
  dec_final_norm = add("decoder.final_norm", 1, d, 0);
}

Parameters::Parameters(const ModelConfig& config)
    : layout_(std::make_shared<const ParameterLayout>(config)), data_(layout_->total, 0.0) {}

MatrixMap Parameters::tensor(std::size_t slot) {
  const auto& t = layout_->tensors[slot];
  return MatrixMap(data_.data() + t.offset, static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols));
}

ConstMatrixMap Parameters::tensor(std::size_t slot) const {
  const auto& t = layout_->tensors[slot];
  return ConstMatrixMap(data_.data() + t.offset, static_cast<Eigen::Index>(t.rows),
                        static_cast<Eigen::Index>(t.cols));
}

void Parameters::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool Parameters::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::size_t parameter_count(const ModelConfig& config) { return ParameterLayout(config).total; }

Parameters init_params(const ModelConfig& config) {
  Parameters p(config);
  Rng rng(mix_seed(config.seed, 0x696e6974ULL));
  auto data = p.data();
  for (const auto& t : p.tensors()) {
    const std::size_t n = t.rows * t.cols;
    double bound = 0.0;
    if (t.is_embedding)
      bound = 0.05;
    else if (t.fan_in > 0)
      bound = 1.0 / std::sqrt(static_cast<double>(t.fan_in));
    for (std::size_t i = 0; i < n; ++i)
      data[t.offset + i] = bound > 0.0 ? rng.uniform(-bound, bound) : 1.0;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Building blocks

namespace {

constexpr double kNormEps = 1e-6;

struct NormCache {
  Matrix x_hat;
  Eigen::VectorXd inv_rms;
};

Matrix rms_norm(const Matrix& x, ConstMatrixMap gain, NormCache* cache) {
  const Eigen::Index d = x.cols();
  Eigen::VectorXd inv = ((x.array().square().rowwise().sum() / static_cast<double>(d)) + kNormEps).rsqrt();
  Matrix x_hat = x.array().colwise() * inv.array();
  Matrix y = x_hat.array().rowwise() * gain.row(0).array();
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_rms = std::move(inv);
  }
  return y;
}

Matrix rms_norm_backward(const Matrix& dy, ConstMatrixMap gain, const NormCache& c, MatrixMap dgain) {
  const double d = static_cast<double>(dy.cols());
  dgain.row(0) += (dy.array() * c.x_hat.array()).colwise().sum().matrix();
  Matrix dx_hat = dy.array().rowwise() * gain.row(0).array();
  Eigen::VectorXd proj = (dx_hat.array() * c.x_hat.array()).rowwise().sum() / d;
  Matrix dx = (dx_hat.array() - c.x_hat.array().colwise() * proj.array()).colwise() * c.inv_rms.array();
  return dx;
}

struct AttnCache {
  Matrix xq, xkv, q, k, v, o;
  std::vector<Matrix> probs;
};

void softmax_rows(Matrix& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    const double m = row.maxCoeff();
    row = (row.array() - m).exp();
    row /= row.sum();
  }
}

Matrix attention(const Parameters& p, const AttentionSlots& slots, const Matrix& xq, const Matrix& xkv, bool causal,
                 std::size_t heads, AttnCache* cache) {
  Matrix q = xq * p.tensor(slots.q);
  Matrix k = xkv * p.tensor(slots.k);
  Matrix v = xkv * p.tensor(slots.v);
  const Eigen::Index d = q.cols();
  const Eigen::Index dh = d / static_cast<Eigen::Index>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix o(xq.rows(), d);
  if (cache) cache->probs.resize(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
    Matrix s = (q.middleCols(c0, dh) * k.middleCols(c0, dh).transpose()) * scale;
    if (causal) {
      for (Eigen::Index i = 0; i < s.rows(); ++i)
        for (Eigen::Index j = i + 1; j < s.cols(); ++j) s(i, j) = -std::numeric_limits<double>::infinity();
    }
    softmax_rows(s);
    o.middleCols(c0, dh) = s * v.middleCols(c0, dh);
    if (cache) cache->probs[h] = std::move(s);
  }
  Matrix y = o * p.tensor(slots.o);
  if (cache) {
    cache->xq = xq;
    cache->xkv = xkv;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->o = std::move(o);
  }
  return y;
}

void attention_backward(const Parameters& p, Parameters& g, const AttentionSlots& slots, const Matrix& dy,
                        const AttnCache& c, std::size_t heads, Matrix& dxq, Matrix& dxkv) {
  g.tensor(slots.o).noalias() += c.o.transpose() * dy;
  Matrix d_o = dy * p.tensor(slots.o).transpose();
  const Eigen::Index d = c.q.cols();
  const Eigen::Index dh = d / static_cast<Eigen::Index>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix dq(c.q.rows(), d), dk(c.k.rows(), d), dv(c.v.rows(), d);
  for (std::size_t h = 0; h < heads; ++h) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
    const Matrix& P = c.probs[h];
    Matrix dP = d_o.middleCols(c0, dh) * c.v.middleCols(c0, dh).transpose();
    dv.middleCols(c0, dh) = P.transpose() * d_o.middleCols(c0, dh);
    Eigen::VectorXd rs = (dP.array() * P.array()).rowwise().sum();
    Matrix dS = (P.array() * (dP.array().colwise() - rs.array())) * scale;
    dq.middleCols(c0, dh) = dS * c.k.middleCols(c0, dh);
    dk.middleCols(c0, dh) = dS.transpose() * c.q.middleCols(c0, dh);
  }
  g.tensor(slots.q).noalias() += c.xq.transpose() * dq;
  g.tensor(slots.k).noalias() += c.xkv.transpose() * dk;
  g.tensor(slots.v).noalias() += c.xkv.transpose() * dv;
  dxq = dq * p.tensor(slots.q).transpose();
  dxkv = dk * p.tensor(slots.k).transpose() + dv * p.tensor(slots.v).transpose();
}

// tanh-approximated GELU
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

struct FfnCache {
  Matrix x, h;
};

Matrix ffn(const Parameters& p, std::size_t w_in, std::size_t w_out, const Matrix& x, FfnCache* cache) {
  Matrix h = x * p.tensor(w_in);
  Matrix a = h.unaryExpr([](double z) { return 0.5 * z * (1.0 + std::tanh(kGeluC * (z + kGeluA * z * z * z))); });
  Matrix y = a * p.tensor(w_out);
  if (cache) {
    cache->x = x;
    cache->h = std::move(h);
  }
  return y;
}

Matrix ffn_backward(const Parameters& p, Parameters& g, std::size_t w_in, std::size_t w_out, const Matrix& dy,
                    const FfnCache& c) {
  Matrix a = c.h.unaryExpr([](double z) { return 0.5 * z * (1.0 + std::tanh(kGeluC * (z + kGeluA * z * z * z))); });
  g.tensor(w_out).noalias() += a.transpose() * dy;
  Matrix da = dy * p.tensor(w_out).transpose();
  Matrix dgelu = c.h.unaryExpr([](double z) {
    const double t = std::tanh(kGeluC * (z + kGeluA * z * z * z));
    return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * z * z);
  });
  Matrix dh = da.cwiseProduct(dgelu);
  g.tensor(w_in).noalias() += c.x.transpose() * dh;
  return dh * p.tensor(w_in).transpose();
}

class Dropout {
 public:
  Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {}

  Matrix apply(const Matrix& y, Matrix* mask_out) {
    Matrix mask(y.rows(), y.cols());
    const double keep = 1.0 / (1.0 - rate_);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng_.uniform() < rate_ ? 0.0 : keep;
    Matrix out = y.cwiseProduct(mask);
    if (mask_out) *mask_out = std::move(mask);
    return out;
  }

 private:
  double rate_;
  Rng rng_;
};

Matrix maybe_dropout(const Matrix& y, Dropout* drop, Matrix* mask_out) {
  if (!drop) return y;
  return drop->apply(y, mask_out);
}

Matrix dropout_backward(const Matrix& dy, const Matrix& mask) {
  if (mask.size() == 0) return dy;
  return dy.cwiseProduct(mask);
}

// ---------------------------------------------------------------------------
// Encoder / decoder stacks

struct EncoderLayerCache {
  NormCache norm_attn;
  AttnCache attn;
  Matrix drop_attn;
  NormCache norm_ffn;
  FfnCache ffn;
  Matrix drop_ffn;
};

struct EncoderTape {
  std::vector<int> ids;
  std::vector<EncoderLayerCache> layers;
  NormCache final_norm;
};

Matrix encode_tokens(const Parameters& p, std::span<const int> ids, Dropout* drop, EncoderTape* tape) {
  const auto& L = p.layout();
  const auto& cfg = p.config();
  auto E = p.tensor(L.embedding);
  auto P = p.tensor(L.enc_pos);
  const auto n = static_cast<Eigen::Index>(ids.size());
  Matrix x(n, static_cast<Eigen::Index>(cfg.d_model));
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = E.row(ids[static_cast<std::size_t>(i)]) + P.row(i);
  if (tape) {
    tape->ids.assign(ids.begin(), ids.end());
    tape->layers.resize(L.encoder.size());
  }
  for (std::size_t l = 0; l < L.encoder.size(); ++l) {
    const auto& s = L.encoder[l];
    EncoderLayerCache* c = tape ? &tape->layers[l] : nullptr;
    Matrix h = rms_norm(x, p.tensor(s.norm_attn), c ? &c->norm_attn : nullptr);
    x += maybe_dropout(attention(p, s.attn, h, h, false, cfg.n_heads, c ? &c->attn : nullptr), drop,
                       c ? &c->drop_attn : nullptr);
    h = rms_norm(x, p.tensor(s.norm_ffn), c ? &c->norm_ffn : nullptr);
    x += maybe_dropout(ffn(p, s.ffn_in, s.ffn_out, h, c ? &c->ffn : nullptr), drop, c ? &c->drop_ffn : nullptr);
  }
  return rms_norm(x, p.tensor(L.enc_final_norm), tape ? &tape->final_norm : nullptr);
}

void encode_backward(const Parameters& p, Parameters& g, const EncoderTape& tape, const Matrix& dy) {
  const auto& L = p.layout();
  const auto& cfg = p.config();
  Matrix dx = rms_norm_backward(dy, p.tensor(L.enc_final_norm), tape.final_norm, g.tensor(L.enc_final_norm));
  for (std::size_t l = L.encoder.size(); l-- > 0;) {
    const auto& s = L.encoder[l];
    const auto& c = tape.layers[l];
    Matrix dh = ffn_backward(p, g, s.ffn_in, s.ffn_out, dropout_backward(dx, c.drop_ffn), c.ffn);
    dx += rms_norm_backward(dh, p.tensor(s.norm_ffn), c.norm_ffn, g.tensor(s.norm_ffn));
    Matrix dxq, dxkv;
    attention_backward(p, g, s.attn, dropout_backward(dx, c.drop_attn), c.attn, cfg.n_heads, dxq, dxkv);
    dxq += dxkv;
    dx += rms_norm_backward(dxq, p.tensor(s.norm_attn), c.norm_attn, g.tensor(s.norm_attn));
  }
  auto dE = g.tensor(L.embedding);
  auto dP = g.tensor(L.enc_pos);
  for (Eigen::Index i = 0; i < dx.rows(); ++i) {
    dE.row(tape.ids[static_cast<std::size_t>(i)]) += dx.row(i);
    dP.row(i) += dx.row(i);
  }
}

struct DecoderLayerCache {
  NormCache norm_self;
  AttnCache self_attn;
  Matrix drop_self;
  NormCache norm_cross;
  AttnCache cross_attn;
  Matrix drop_cross;
  NormCache norm_ffn;
  FfnCache ffn;
  Matrix drop_ffn;
};

struct DecoderTape {
  std::vector<int> ids;
  std::vector<DecoderLayerCache> layers;
  NormCache final_norm;
  Matrix out;
};

// Final decoder hidden states (after the output norm).
Matrix decode_hidden(const Parameters& p, const Matrix& memory, std::span<const int> ids, Dropout* drop,
                     DecoderTape* tape) {
  const auto& L = p.layout();
  const auto& cfg = p.config();
  if (ids.empty()) throw std::invalid_argument("empty decoder input");
  if (ids.size() > cfg.max_target_len) throw std::invalid_argument("decoder input exceeds max_target_len");
  auto E = p.tensor(L.embedding);
  auto P = p.tensor(L.dec_pos);
  const auto n = static_cast<Eigen::Index>(ids.size());
  Matrix y(n, static_cast<Eigen::Index>(cfg.d_model));
  for (Eigen::Index i = 0; i < n; ++i) y.row(i) = E.row(ids[static_cast<std::size_t>(i)]) + P.row(i);
  if (tape) {
    tape->ids.assign(ids.begin(), ids.end());
    tape->layers.resize(L.decoder.size());
  }
  for (std::size_t l = 0; l < L.decoder.size(); ++l) {
    const auto& s = L.decoder[l];
    DecoderLayerCache* c = tape ? &tape->layers[l] : nullptr;
    Matrix h = rms_norm(y, p.tensor(s.norm_self), c ? &c->norm_self : nullptr);
    y += maybe_dropout(attention(p, s.self_attn, h, h, true, cfg.n_heads, c ? &c->self_attn : nullptr), drop,
                       c ? &c->drop_self : nullptr);
    h = rms_norm(y, p.tensor(s.norm_cross), c ? &c->norm_cross : nullptr);
    y += maybe_dropout(attention(p, s.cross_attn, h, memory, false, cfg.n_heads, c ? &c->cross_attn : nullptr),
                       drop, c ? &c->drop_cross : nullptr);
    h = rms_norm(y, p.tensor(s.norm_ffn), c ? &c->norm_ffn : nullptr);
    y += maybe_dropout(ffn(p, s.ffn_in, s.ffn_out, h, c ? &c->ffn : nullptr), drop, c ? &c->drop_ffn : nullptr);
  }
  Matrix out = rms_norm(y, p.tensor(L.dec_final_norm), tape ? &tape->final_norm : nullptr);
  if (tape) tape->out = out;
  return out;
}

// Returns d(memory).
Matrix decode_backward(const Parameters& p, Parameters& g, const DecoderTape& tape, const Matrix& dout,
                       Eigen::Index memory_rows) {
  const auto& L = p.layout();
  const auto& cfg = p.config();
  Matrix dmem = Matrix::Zero(memory_rows, static_cast<Eigen::Index>(cfg.d_model));
  Matrix dy = rms_norm_backward(dout, p.tensor(L.dec_final_norm), tape.final_norm, g.tensor(L.dec_final_norm));
  for (std::size_t l = L.decoder.size(); l-- > 0;) {
    const auto& s = L.decoder[l];
    const auto& c = tape.layers[l];
    Matrix dh = ffn_backward(p, g, s.ffn_in, s.ffn_out, dropout_backward(dy, c.drop_ffn), c.ffn);
    dy += rms_norm_backward(dh, p.tensor(s.norm_ffn), c.norm_ffn, g.tensor(s.norm_ffn));
    Matrix dxq, dxkv;
    attention_backward(p, g, s.cross_attn, dropout_backward(dy, c.drop_cross), c.cross_attn, cfg.n_heads, dxq, dxkv);
    dmem += dxkv;
    dy += rms_norm_backward(dxq, p.tensor(s.norm_cross), c.norm_cross, g.tensor(s.norm_cross));
    attention_backward(p, g, s.self_attn, dropout_backward(dy, c.drop_self), c.self_attn, cfg.n_heads, dxq, dxkv);
    dxq += dxkv;
    dy += rms_norm_backward(dxq, p.tensor(s.norm_self), c.norm_self, g.tensor(s.norm_self));
  }
  auto dE = g.tensor(L.embedding);
  auto dP = g.tensor(L.dec_pos);
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    dE.row(tape.ids[static_cast<std::size_t>(i)]) += dy.row(i);
    dP.row(i) += dy.row(i);
  }
  return dmem;
}

void check_chunks(const Parameters& p, const ChunkSet& chunks) {
  if (chunks.chunks.empty()) throw std::invalid_argument("chunk set is empty");
  if (chunks.context_length != p.config().context_length)
    throw std::invalid_argument("chunk length " + std::to_string(chunks.context_length) +
                                " does not match model context_length " +
                                std::to_string(p.config().context_length));
  for (const auto& c : chunks.chunks) {
    if (c.size() != chunks.context_length) throw std::invalid_argument("chunk length mismatch");
    for (int id : c)
      if (id < 0 || static_cast<std::size_t>(id) >= p.config().vocab_size)
        throw std::invalid_argument("token id outside the model vocabulary");
  }
}

Matrix compact_memory(const FusedStates& fused) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < fused.mask.size(); ++i)
    if (!fused.mask[i]) rows.push_back(static_cast<Eigen::Index>(i));
  if (rows.empty()) throw std::invalid_argument("empty memory");
  Matrix m(static_cast<Eigen::Index>(rows.size()), fused.states.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = fused.states.row(rows[i]);
  return m;
}

Matrix output_logits(const Parameters& p, const Matrix& hidden) {
  return hidden * p.tensor(p.layout().embedding).transpose();
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API

FusedStates encode_chunks(const Parameters& params, const ChunkSet& chunks) {
  check_chunks(params, chunks);
  const auto L = static_cast<Eigen::Index>(chunks.context_length);
  FusedStates fused;
  fused.context_length = chunks.context_length;
  fused.states = Matrix::Zero(L * static_cast<Eigen::Index>(chunks.size()),
                              static_cast<Eigen::Index>(params.config().d_model));
  fused.mask.reserve(chunks.size() * chunks.context_length);
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const std::size_t n = chunks.valid_length(c);
    fused.mask.insert(fused.mask.end(), chunks.pad_mask[c].begin(), chunks.pad_mask[c].end());
    if (n == 0) continue;
    Matrix enc = encode_tokens(params, std::span<const int>(chunks.chunks[c].data(), n), nullptr, nullptr);
    fused.states.middleRows(static_cast<Eigen::Index>(c) * L, static_cast<Eigen::Index>(n)) = enc;
  }
  return fused;
}

Matrix decoder_logits(const Parameters& params, const FusedStates& fused, std::span<const int> prefix) {
  const Matrix memory = compact_memory(fused);
  return output_logits(params, decode_hidden(params, memory, prefix, nullptr, nullptr));
}

std::vector<int> shift_right(std::span<const int> target) {
  std::vector<int> in{Vocabulary::kPad};
  if (!target.empty()) in.insert(in.end(), target.begin(), target.end() - 1);
  return in;
}

namespace {

struct ForwardResult {
  double loss = 0.0;
  std::vector<EncoderTape> enc;
  std::vector<std::size_t> valid;
  Matrix memory;
  DecoderTape dec;
  Matrix dlogits;
};

// Forward pass with optional tapes; dlogits is d(loss)/d(logits) scaled by
// `weight` when tapes are requested.
ForwardResult forward(const Parameters& p, const ChunkSet& chunks, std::span<const int> target, Dropout* drop,
                      bool keep_tape, double weight) {
  check_chunks(p, chunks);
  if (target.empty() || target.back() != Vocabulary::kEos) throw std::invalid_argument("target must end with EOS");
  ForwardResult r;
  std::vector<Matrix> encoded;
  Eigen::Index rows = 0;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const std::size_t n = chunks.valid_length(c);
    r.valid.push_back(n);
    if (keep_tape) r.enc.emplace_back();
    if (n == 0) {
      encoded.emplace_back();
      continue;
    }
    encoded.push_back(encode_tokens(p, std::span<const int>(chunks.chunks[c].data(), n), drop,
                                    keep_tape ? &r.enc.back() : nullptr));
    rows += static_cast<Eigen::Index>(n);
  }
  if (rows == 0) throw std::invalid_argument("empty memory");
  r.memory.resize(rows, static_cast<Eigen::Index>(p.config().d_model));
  Eigen::Index at = 0;
  for (const auto& e : encoded) {
    if (e.rows() == 0) continue;
    r.memory.middleRows(at, e.rows()) = e;
    at += e.rows();
  }

  const std::vector<int> dec_in = shift_right(target);
  Matrix hidden = decode_hidden(p, r.memory, dec_in, drop, keep_tape ? &r.dec : nullptr);
  Matrix logits = output_logits(p, hidden);

  std::size_t counted = 0;
  for (int t : target) counted += (t != Vocabulary::kPad);
  if (counted == 0) throw std::invalid_argument("target has no non-pad tokens");
  if (keep_tape) r.dlogits = Matrix::Zero(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int gold = target[static_cast<std::size_t>(i)];
    if (gold == Vocabulary::kPad) continue;
    auto row = logits.row(i);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    total += lse - row(gold);
    if (keep_tape) {
      auto d = r.dlogits.row(i);
      d = (row.array() - lse).exp();
      d(gold) -= 1.0;
      d *= weight / static_cast<double>(counted);
    }
  }
  r.loss = total / static_cast<double>(counted);
  return r;
}

}  // namespace

double loss(const Parameters& params, const ChunkSet& chunks, std::span<const int> target_ids) {
  return forward(params, chunks, target_ids, nullptr, false, 1.0).loss;
}

GradientResult grad(const Parameters& params, std::span<const TrainingExample> batch, std::uint64_t dropout_seed) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  GradientResult out{0.0, Parameters(params.config())};
  Parameters& g = out.grad;
  const double weight = 1.0 / static_cast<double>(batch.size());
  const bool use_dropout = dropout_seed != 0 && params.config().dropout_rate > 0.0;
  const auto& L = params.layout();

  for (std::size_t b = 0; b < batch.size(); ++b) {
    std::optional<Dropout> drop;
    if (use_dropout) drop.emplace(params.config().dropout_rate, mix_seed(dropout_seed, b));
    ForwardResult r = forward(params, batch[b].chunks, batch[b].target, drop ? &*drop : nullptr, true, weight);
    if (!std::isfinite(r.loss)) throw NumericalError("non-finite loss", -1);
    out.loss += r.loss * weight;

    // Output projection (tied embedding).
    g.tensor(L.embedding).noalias() += r.dlogits.transpose() * r.dec.out;
    Matrix dhidden = r.dlogits * params.tensor(L.embedding);
    Matrix dmem = decode_backward(params, g, r.dec, dhidden, r.memory.rows());

    Eigen::Index at = 0;
    for (std::size_t c = 0; c < r.valid.size(); ++c) {
      const auto n = static_cast<Eigen::Index>(r.valid[c]);
      if (n == 0) continue;
      encode_backward(params, g, r.enc[c], dmem.middleRows(at, n));
      at += n;
    }
  }
  return out;
}

std::vector<int> greedy_decode(const Parameters& params, const ChunkSet& chunks, std::size_t max_len) {
  return greedy_decode(params, encode_chunks(params, chunks), max_len);
}

std::vector<int> greedy_decode(const Parameters& params, const FusedStates& fused, std::size_t max_len) {
  const auto& L = params.layout();
  const auto& cfg = params.config();
  if (max_len > cfg.max_target_len) max_len = cfg.max_target_len;
  const Matrix memory = compact_memory(fused);
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto heads = static_cast<Eigen::Index>(cfg.n_heads);
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  struct LayerState {
    Matrix self_k, self_v, cross_k, cross_v;
  };
  std::vector<LayerState> state(L.decoder.size());
  for (std::size_t l = 0; l < L.decoder.size(); ++l) {
    const auto& s = L.decoder[l];
    state[l].self_k.resize(static_cast<Eigen::Index>(max_len), d);
    state[l].self_v.resize(static_cast<Eigen::Index>(max_len), d);
    state[l].cross_k = memory * params.tensor(s.cross_attn.k);
    state[l].cross_v = memory * params.tensor(s.cross_attn.v);
  }

  // Single-query attention over the first n rows of K/V.
  auto attend = [&](const Matrix& q, const Matrix& K, const Matrix& V, Eigen::Index n) {
    Matrix o(1, d);
    for (Eigen::Index h = 0; h < heads; ++h) {
      const Eigen::Index c0 = h * dh;
      Matrix s = (q.middleCols(c0, dh) * K.topRows(n).middleCols(c0, dh).transpose()) * scale;
      softmax_rows(s);
      o.middleCols(c0, dh) = s * V.topRows(n).middleCols(c0, dh);
    }
    return o;
  };

  auto E = params.tensor(L.embedding);
  auto P = params.tensor(L.dec_pos);
  std::vector<int> out;
  int token = Vocabulary::kPad;
  for (std::size_t t = 0; t < max_len; ++t) {
    Matrix y = E.row(token) + P.row(static_cast<Eigen::Index>(t));
    for (std::size_t l = 0; l < L.decoder.size(); ++l) {
      const auto& s = L.decoder[l];
      auto& st = state[l];
      Matrix h = rms_norm(y, params.tensor(s.norm_self), nullptr);
      st.self_k.row(static_cast<Eigen::Index>(t)) = h * params.tensor(s.self_attn.k);
      st.self_v.row(static_cast<Eigen::Index>(t)) = h * params.tensor(s.self_attn.v);
      Matrix q = h * params.tensor(s.self_attn.q);
      y += attend(q, st.self_k, st.self_v, static_cast<Eigen::Index>(t) + 1) * params.tensor(s.self_attn.o);
      h = rms_norm(y, params.tensor(s.norm_cross), nullptr);
      q = h * params.tensor(s.cross_attn.q);
      y += attend(q, st.cross_k, st.cross_v, st.cross_k.rows()) * params.tensor(s.cross_attn.o);
      h = rms_norm(y, params.tensor(s.norm_ffn), nullptr);
      y += ffn(params, s.ffn_in, s.ffn_out, h, nullptr);
    }
    Matrix logits = output_logits(params, rms_norm(y, params.tensor(L.dec_final_norm), nullptr));
    int best = 0;
    for (Eigen::Index v = 1; v < logits.cols(); ++v)
      if (logits(0, v) > logits(0, best)) best = static_cast<int>(v);
    if (best == Vocabulary::kEos) break;
    out.push_back(best);
    token = best;
  }
  return out;
}

}  // namespace fidex
