#include "causalmask/textio.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "causalmask/errors.hpp"
#include "causalmask/fileio.hpp"

namespace causalmask {

namespace {

bool is_key_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c == '.';
}

bool is_valid_key(std::string_view key) {
  if (key.empty()) {
    return false;
  }
  for (char c : key) {
    if (!is_key_char(c)) {
      return false;
    }
  }
  return true;
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) {
    ++b;
  }
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) {
    --e;
  }
  return s.substr(b, e - b);
}

}  // namespace

bool TextDoc::has(std::string_view key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) {
      return true;
    }
  }
  return false;
}

const std::string& TextDoc::require(std::string_view key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) {
      return v;
    }
  }
  throw FormatError("missing key '" + std::string(key) + "' in " + schema + " document");
}

double TextDoc::require_double(std::string_view key) const {
  const std::string& raw = require(key);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(raw.c_str(), &end);
  if (raw.empty() || end != raw.c_str() + raw.size()) {
    throw FormatError("key '" + std::string(key) + "': '" + raw + "' is not a number");
  }
  return v;
}

std::uint64_t TextDoc::require_u64(std::string_view key) const {
  const std::string& raw = require(key);
  if (raw.empty() || raw[0] == '-' || raw[0] == '+') {
    throw FormatError("key '" + std::string(key) + "': '" + raw + "' is not an unsigned integer");
  }
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw.c_str(), &end, 10);
  if (end != raw.c_str() + raw.size() || errno == ERANGE) {
    throw FormatError("key '" + std::string(key) + "': '" + raw + "' is not an unsigned integer");
  }
  return static_cast<std::uint64_t>(v);
}

bool TextDoc::require_bool(std::string_view key) const {
  const std::string& raw = require(key);
  if (raw == "0") {
    return false;
  }
  if (raw == "1") {
    return true;
  }
  throw FormatError("key '" + std::string(key) + "': '" + raw + "' is not a 0/1 flag");
}

void TextDoc::set(std::string_view key, std::string_view value) {
  if (!is_valid_key(key)) {
    throw ConfigError("TextDoc::set: malformed key '" + std::string(key) + "'");
  }
  if (value.find('\n') != std::string_view::npos) {
    throw ConfigError("TextDoc::set: value for '" + std::string(key) + "' contains a newline");
  }
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = std::string(value);
      return;
    }
  }
  entries.emplace_back(std::string(key), std::string(value));
}

void TextDoc::set_double(std::string_view key, double value) { set(key, format_double(value)); }

void TextDoc::set_u64(std::string_view key, std::uint64_t value) {
  set(key, std::to_string(value));
}

void TextDoc::set_bool(std::string_view key, bool value) { set(key, value ? "1" : "0"); }

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

TextDoc parse_text_doc(std::string_view content) {
  TextDoc doc;
  bool have_schema = false;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    const std::size_t line_start = pos;
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) {
      nl = content.size();
    }
    const std::string_view line = trim(content.substr(line_start, nl - line_start));
    pos = nl + 1;
    if (line.empty() || line.front() == '#') {
      if (nl == content.size()) {
        break;
      }
      continue;
    }
    if (!have_schema) {
      if (!is_valid_key(line)) {
        throw FormatError("malformed schema line '" + std::string(line) + "'", line_start);
      }
      doc.schema = std::string(line);
      have_schema = true;
    } else {
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw FormatError("expected 'key = value', got '" + std::string(line) + "'", line_start);
      }
      const std::string_view key = trim(line.substr(0, eq));
      const std::string_view value = trim(line.substr(eq + 1));
      if (!is_valid_key(key)) {
        throw FormatError("malformed key '" + std::string(key) + "'", line_start);
      }
      if (doc.has(key)) {
        throw FormatError("duplicate key '" + std::string(key) + "'", line_start);
      }
      doc.entries.emplace_back(std::string(key), std::string(value));
    }
    if (nl == content.size()) {
      break;
    }
  }
  if (!have_schema) {
    throw FormatError("document has no schema line", 0);
  }
  return doc;
}

std::string serialize_text_doc(const TextDoc& doc) {
  if (!is_valid_key(doc.schema)) {
    throw ConfigError("serialize_text_doc: malformed schema '" + doc.schema + "'");
  }
  std::string out = doc.schema;
  out.push_back('\n');
  for (const auto& [k, v] : doc.entries) {
    if (!is_valid_key(k)) {
      throw ConfigError("serialize_text_doc: malformed key '" + k + "'");
    }
    if (v.find('\n') != std::string::npos) {
      throw ConfigError("serialize_text_doc: value for '" + k + "' contains a newline");
    }
    out += k;
    out += " = ";
    out += v;
    out.push_back('\n');
  }
  return out;
}

TextDoc read_text_doc(const std::string& path) { return parse_text_doc(read_file_bytes(path)); }

void write_text_doc(const std::string& path, const TextDoc& doc) {
  write_file_atomic(path, serialize_text_doc(doc));
}

}  // namespace causalmask
