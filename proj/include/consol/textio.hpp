#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace consol {

// %.17g formatting; 17 significant digits round-trip any double exactly.
std::string g17(double v);

// Writes via a temp file in the same directory followed by a rename, so a
// crash never leaves a half-written file behind.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace consol
