#pragma once

#include <string>

namespace ato {

std::string read_text_file(const std::string& path);

// Writes to a sibling temporary file and renames it over the target.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace ato
