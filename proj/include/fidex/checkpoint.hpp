#pragma once

#include <cstdint>
#include <string>

#include "fidex/model.hpp"

namespace fidex {

/// Binary checkpoint container:
///
///   bytes 0..7   magic "FIDEXCK1"
///   bytes 8..15  little-endian uint64 header length H
///   next H bytes JSON header: {"config": {...}, "vocab_hash": "<16 hex>",
///                "step": n, "stage": "...", "init_from": "...",
///                "tensors": [{"name": ..., "shape": [rows, cols]}, ...]}
///   remainder    float64 little-endian tensor data in header order
struct Checkpoint {
  Parameters params;
  std::uint64_t vocab_hash = 0;
  std::size_t step = 0;
  std::string stage;
  std::string init_from;
};

std::string model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const std::string& text);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
/// Validates every tensor name and shape against the stored config.
Checkpoint load_checkpoint(const std::string& path);

/// Throws DataError naming the first mismatching field.
void require_same_shapes(const ModelConfig& expected, const ModelConfig& actual);

}  // namespace fidex
