#pragma once

#include <string>
#include <string_view>

namespace causalmask {

// Whole-file binary read; throws IoError when the file cannot be opened or read.
std::string read_file_bytes(const std::string& path);

// Writes to `path + ".tmp"` then renames over `path`, so a reader never
// observes a partially written file. Throws IoError on failure and removes
// the temporary.
void write_file_atomic(const std::string& path, std::string_view bytes);

}  // namespace causalmask
