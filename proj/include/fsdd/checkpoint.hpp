#pragma once

// Binary checkpoint layout (all integers and floats little-endian):
//
//   "FSDDCKPT"                       8 bytes
//   u32 version                      currently 1
//   u32 C, M, num_classes, embed_dim, num_layers, num_heads
//   f64 label_drop_prob
//   u64 step                         optimizer steps taken
//   u32 group count, then per group:
//     u32 name length, name bytes
//     u32 tensor count, then per tensor:
//       u32 name length, name bytes, u32 rows, u32 cols, rows*cols f64 (row-major)
//
// Groups written by the trainer: "params", "ema", "adam.m", "adam.v".

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "fsdd/denoiser.hpp"

namespace fsdd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  DenoiserConfig config;
  std::uint64_t step = 0;
  ParameterStore params;
  ParameterStore ema;
  ParameterStore adam_m;
  ParameterStore adam_v;

  /// Fresh state: EMA equal to params, zero moments.
  static Checkpoint from_model(const Denoiser& model);

  Denoiser live_model() const { return Denoiser(config, params); }
  Denoiser ema_model() const { return Denoiser(config, ema); }
};

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws ValidationError naming `source` on a bad magic, unsupported version,
/// truncation, trailing bytes or a layout that does not match the stored config.
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source);

/// Atomic write (temp file then rename). Throws IoError with the path.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fsdd
