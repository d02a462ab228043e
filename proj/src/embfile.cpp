#include "causalmask/embfile.hpp"

#include <cstring>
#include <limits>
#include <string>

#include "causalmask/errors.hpp"
#include "causalmask/fileio.hpp"

namespace causalmask {

namespace {

void append_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t read_u32(const std::string& bytes, std::size_t offset) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 3])) << 24);
}

}  // namespace

void write_emb(const std::string& path, const LabeledBatch& batch) {
  const std::size_t n = batch.embeddings.rows;
  const std::size_t d = batch.embeddings.cols;
  if (n > std::numeric_limits<std::uint32_t>::max() ||
      d > std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError("write_emb: dimensions exceed the u32 header fields");
  }
  require_finite(batch.embeddings, "write_emb embeddings");
  const bool with_labels = !batch.labels.empty();
  if (with_labels && batch.labels.size() != n) {
    throw DimensionError("write_emb: " + std::to_string(batch.labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
  }
  if (with_labels) {
    for (double y : batch.labels) {
      if (y != 0.0 && y != 1.0) {
        throw ConfigError("write_emb: label " + std::to_string(y) + " is not 0/1");
      }
    }
  }
  const bool with_truth = !batch.ground_truth.empty();
  if (with_truth) {
    for (std::size_t idx : batch.ground_truth) {
      if (idx >= d) {
        throw DimensionError("write_emb: truth index " + std::to_string(idx) +
                             " out of range for d=" + std::to_string(d));
      }
    }
  }

  std::string bytes;
  bytes.reserve(kEmbHeaderBytes + 4 * n * d + (with_labels ? n : 0) + (with_truth ? d : 0));
  bytes += "EMB1";
  append_u32(bytes, kEmbVersion);
  append_u32(bytes, static_cast<std::uint32_t>(n));
  append_u32(bytes, static_cast<std::uint32_t>(d));
  append_u32(bytes, (with_labels ? 1u : 0u) | (with_truth ? 2u : 0u));
  for (double v : batch.embeddings.data) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    append_u32(bytes, bits);
  }
  if (with_labels) {
    for (double y : batch.labels) {
      bytes.push_back(y == 1.0 ? '\x01' : '\x00');
    }
  }
  if (with_truth) {
    std::string truth_bytes(d, '\x00');
    for (std::size_t idx : batch.ground_truth) {
      truth_bytes[idx] = '\x01';
    }
    bytes += truth_bytes;
  }
  write_file_atomic(path, bytes);
}

LabeledBatch read_emb(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  if (bytes.size() < kEmbHeaderBytes) {
    throw FormatError("truncated header: need " + std::to_string(kEmbHeaderBytes) +
                          " bytes, found " + std::to_string(bytes.size()),
                      bytes.size());
  }
  if (bytes.compare(0, 4, "EMB1") != 0) {
    throw FormatError("bad magic, expected EMB1", 0);
  }
  const std::uint32_t version = read_u32(bytes, 4);
  if (version != kEmbVersion) {
    throw FormatError("unsupported version " + std::to_string(version), 4);
  }
  const std::uint64_t n = read_u32(bytes, 8);
  const std::uint64_t d = read_u32(bytes, 12);
  const std::uint32_t flags = read_u32(bytes, 16);
  if ((flags & ~3u) != 0) {
    throw FormatError("unknown flag bits 0x" + std::to_string(flags & ~3u), 16);
  }
  const bool with_labels = (flags & 1u) != 0;
  const bool with_truth = (flags & 2u) != 0;

  const std::uint64_t payload_end = kEmbHeaderBytes + 4 * n * d;
  if (bytes.size() < payload_end) {
    // Offset of the first float that is missing or cut short.
    const std::uint64_t first_missing = (bytes.size() - kEmbHeaderBytes) / 4;
    throw FormatError("truncated embedding payload: float " + std::to_string(first_missing) +
                          " of " + std::to_string(n * d) + " is incomplete",
                      static_cast<std::size_t>(kEmbHeaderBytes + 4 * first_missing));
  }
  const std::uint64_t labels_end = payload_end + (with_labels ? n : 0);
  if (bytes.size() < labels_end) {
    throw FormatError("truncated label section", bytes.size());
  }
  const std::uint64_t truth_end = labels_end + (with_truth ? d : 0);
  if (bytes.size() < truth_end) {
    throw FormatError("truncated truth-mask section", bytes.size());
  }
  if (bytes.size() > truth_end) {
    throw FormatError("length mismatch: expected " + std::to_string(truth_end) +
                          " bytes, found " + std::to_string(bytes.size()),
                      static_cast<std::size_t>(truth_end));
  }

  LabeledBatch batch;
  batch.embeddings = DenseMatrix(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
  for (std::uint64_t i = 0; i < n * d; ++i) {
    const std::uint32_t bits = read_u32(bytes, static_cast<std::size_t>(kEmbHeaderBytes + 4 * i));
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    batch.embeddings.data[static_cast<std::size_t>(i)] = static_cast<double>(f);
  }
  if (with_labels) {
    batch.labels.resize(static_cast<std::size_t>(n));
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::size_t offset = static_cast<std::size_t>(payload_end + i);
      const unsigned char b = static_cast<unsigned char>(bytes[offset]);
      if (b > 1) {
        throw FormatError("label byte " + std::to_string(b) + " is not 0/1", offset);
      }
      batch.labels[static_cast<std::size_t>(i)] = b;
    }
  }
  if (with_truth) {
    for (std::uint64_t j = 0; j < d; ++j) {
      const std::size_t offset = static_cast<std::size_t>(labels_end + j);
      const unsigned char b = static_cast<unsigned char>(bytes[offset]);
      if (b > 1) {
        throw FormatError("truth-mask byte " + std::to_string(b) + " is not 0/1", offset);
      }
      if (b == 1) {
        batch.ground_truth.push_back(static_cast<std::size_t>(j));
      }
    }
  }
  return batch;
}

}  // namespace causalmask
