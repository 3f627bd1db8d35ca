#include "fidex/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "json.hpp"

namespace fidex {

namespace {

constexpr char kMagic[8] = {'F', 'I', 'D', 'E', 'X', 'C', 'K', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)]);
  return v;
}

nlohmann::ordered_json config_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["d_model"] = c.d_model;
  j["n_heads"] = c.n_heads;
  j["n_enc_layers"] = c.n_enc_layers;
  j["n_dec_layers"] = c.n_dec_layers;
  j["d_ffn"] = c.d_ffn;
  j["vocab_size"] = c.vocab_size;
  j["context_length"] = c.context_length;
  j["max_target_len"] = c.max_target_len;
  j["dropout_rate"] = c.dropout_rate;
  j["seed"] = c.seed;
  return j;
}

ModelConfig config_from(const nlohmann::json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.n_enc_layers = j.at("n_enc_layers").get<std::size_t>();
  c.n_dec_layers = j.at("n_dec_layers").get<std::size_t>();
  c.d_ffn = j.at("d_ffn").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.context_length = j.at("context_length").get<std::size_t>();
  c.max_target_len = j.at("max_target_len").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& c) { return config_json(c).dump(); }

ModelConfig model_config_from_json(const std::string& text) { return config_from(nlohmann::json::parse(text)); }

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian doubles");
  nlohmann::ordered_json header;
  header["config"] = config_json(ckpt.params.config());
  header["vocab_hash"] = hex64(ckpt.vocab_hash);
  header["step"] = ckpt.step;
  header["stage"] = ckpt.stage;
  header["init_from"] = ckpt.init_from;
  auto tensors = nlohmann::ordered_json::array();
  for (const auto& t : ckpt.params.tensors()) tensors.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}});
  header["tensors"] = std::move(tensors);
  const std::string h = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, h.size());
  out += h;
  const auto data = ckpt.params.data();
  const std::size_t at = out.size();
  out.resize(at + data.size() * sizeof(double));
  std::memcpy(out.data() + at, data.data(), data.size() * sizeof(double));
  write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  if (!file_exists(path)) throw DataError("checkpoint not found: " + path);
  const std::string in = read_file(path);
  if (in.size() < 16 || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a checkpoint file: " + path);
  const std::uint64_t hlen = get_u64(in, 8);
  if (16 + hlen > in.size()) throw DataError("truncated checkpoint header: " + path);
  nlohmann::json header;
  ModelConfig config;
  try {
    header = nlohmann::json::parse(in.substr(16, hlen));
    config = config_from(header.at("config"));
    config.validate();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint header in " + path + ": " + e.what());
  } catch (const UsageError& e) {
    throw DataError("invalid config in checkpoint " + path + ": " + e.what());
  }

  Checkpoint ckpt{Parameters(config), {}, 0, {}, {}};
  const auto& tensors = header.at("tensors");
  const auto& expected = ckpt.params.tensors();
  if (tensors.size() != expected.size())
    throw DataError("checkpoint tensor count " + std::to_string(tensors.size()) + " does not match config (" +
                    std::to_string(expected.size()) + ")");
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto name = tensors[i].at("name").get<std::string>();
    const auto shape = tensors[i].at("shape").get<std::vector<std::size_t>>();
    if (name != expected[i].name || shape.size() != 2 || shape[0] != expected[i].rows ||
        shape[1] != expected[i].cols)
      throw DataError("checkpoint tensor '" + name + "' does not match the shape expected for '" +
                      expected[i].name + "'");
  }
  const std::size_t bytes = ckpt.params.size() * sizeof(double);
  if (in.size() != 16 + hlen + bytes) throw DataError("checkpoint data size mismatch: " + path);
  std::memcpy(ckpt.params.data().data(), in.data() + 16 + hlen, bytes);

  ckpt.vocab_hash = std::stoull(header.at("vocab_hash").get<std::string>(), nullptr, 16);
  ckpt.step = header.at("step").get<std::size_t>();
  ckpt.stage = header.value("stage", std::string{});
  ckpt.init_from = header.value("init_from", std::string{});
  if (!ckpt.params.all_finite()) throw DataError("checkpoint contains non-finite weights: " + path);
  return ckpt;
}

void require_same_shapes(const ModelConfig& e, const ModelConfig& a) {
  auto check = [](const char* field, std::size_t x, std::size_t y) {
    if (x != y)
      throw DataError(std::string("checkpoint/config mismatch in ") + field + ": config " + std::to_string(x) +
                      ", checkpoint " + std::to_string(y));
  };
  check("d_model", e.d_model, a.d_model);
  check("n_heads", e.n_heads, a.n_heads);
  check("n_enc_layers", e.n_enc_layers, a.n_enc_layers);
  check("n_dec_layers", e.n_dec_layers, a.n_dec_layers);
  check("d_ffn", e.d_ffn, a.d_ffn);
  check("vocab_size", e.vocab_size, a.vocab_size);
  check("context_length", e.context_length, a.context_length);
  check("max_target_len", e.max_target_len, a.max_target_len);
}

}  // namespace fidex
