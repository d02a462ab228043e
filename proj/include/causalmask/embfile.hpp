#pragma once

#include <cstdint>
#include <string>

#include "causalmask/scm.hpp"

namespace causalmask {

// EMB1 binary layout (all integers little-endian):
//   bytes 0..3   magic "EMB1"
//   bytes 4..7   version u32 (currently 1)
//   bytes 8..11  n u32
//   bytes 12..15 d u32
//   bytes 16..19 flags u32 (bit0: labels present, bit1: truth mask present)
//   then n*d float32 embeddings, row-major
//   then n label bytes (0/1) when bit0 is set
//   then d truth-mask bytes (0/1) when bit1 is set
// The file length is exactly 20 + 4nd + (n if labels) + (d if truth mask).
inline constexpr std::uint32_t kEmbVersion = 1;
inline constexpr std::size_t kEmbHeaderBytes = 20;

// Embeddings are stored at 32-bit precision: in-memory doubles are rounded on
// write, and the round-trip identity holds at that precision. Labels are
// written when batch.labels is non-empty (must then match n); the truth mask
// is written when batch.ground_truth is non-empty. Writes are atomic
// (write-then-rename).
void write_emb(const std::string& path, const LabeledBatch& batch);

// Throws FormatError carrying the byte offset of the first missing or invalid
// byte; IoError when the file cannot be read. domain_id is not part of the
// format and comes back 0.
LabeledBatch read_emb(const std::string& path);

}  // namespace causalmask
