#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "causalmask/trainer.hpp"

namespace causalmask {

// Binary trainer snapshot: the magic "CKPT", a u32 format version, then a
// fixed sequence of length-prefixed sections (4-byte tag + u64 little-endian
// payload length):
//
//   CONF  training configuration (structured text)
//   META  dimension, ablation mode, progress counters (structured text)
//   MNET  mask net: f64 temperature + parameter blob
//   HNET  classifier parameter blob
//   DNET  adversary parameter blob
//   ADMM  Adam state for the mask net
//   ADMH  Adam state for the classifier
//   ADMD  Adam state for the adversary
//   BEST  best-so-far snapshot: f64 temperature + three parameter blobs
//   HIST  per-epoch history (structured text)
//   RNGS  noise stream state (text)
//
// A parameter blob is: u32 layer count, u64 layer dims, u32 output activation
// code, then the parameters as f64 in flatten() order. An Adam blob is: u64
// step count, f64 beta1/beta2/epsilon, then first moments and second moments
// as f64 in the same flatten() order. All integers and doubles are
// little-endian; doubles travel as their IEEE-754 bit patterns.
//
// Readers enforce the exact section order, cross-check every network against
// the dimension in META, reject trailing bytes, and throw FormatError with a
// byte offset on any violation.

inline constexpr std::string_view kCheckpointMagic = "CKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointMetaSchema = "causalmask.checkpoint.meta.v1";

std::string serialize_checkpoint(const TrainerState& state);
TrainerState deserialize_checkpoint(std::string_view bytes);

// Atomic write (tmp file + rename) / whole-file read wrappers.
void save_checkpoint(const std::string& path, const TrainerState& state);
TrainerState load_checkpoint(const std::string& path);

}  // namespace causalmask
