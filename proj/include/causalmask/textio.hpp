#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace causalmask {

// Line-oriented structured text: the first significant line names the schema
// (e.g. "causalmask.config.v1"); every following significant line is
// `key = value`. '#' starts a comment line, blank lines are ignored, keys are
// dotted identifiers ([A-Za-z0-9_.]), values run verbatim to end of line
// (surrounding whitespace trimmed). Entry order is preserved.
struct TextDoc {
  std::string schema;
  std::vector<std::pair<std::string, std::string>> entries;

  bool has(std::string_view key) const;
  // Each require_* throws FormatError naming the key when it is absent or its
  // value does not parse as the requested type.
  const std::string& require(std::string_view key) const;
  double require_double(std::string_view key) const;
  std::uint64_t require_u64(std::string_view key) const;
  bool require_bool(std::string_view key) const;  // stored as "0"/"1"

  // set replaces the value in place when the key already exists. Throws
  // ConfigError on malformed keys or values containing newlines.
  void set(std::string_view key, std::string_view value);
  void set_double(std::string_view key, double value);  // %.17g: exact round-trip
  void set_u64(std::string_view key, std::uint64_t value);
  void set_bool(std::string_view key, bool value);
};

// Throws FormatError (with the byte offset of the offending line) on
// malformed content.
TextDoc parse_text_doc(std::string_view content);
std::string serialize_text_doc(const TextDoc& doc);

TextDoc read_text_doc(const std::string& path);
void write_text_doc(const std::string& path, const TextDoc& doc);

// Shared %.17g formatting for doubles so every writer round-trips bit-exactly.
std::string format_double(double value);

}  // namespace causalmask
