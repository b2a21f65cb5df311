#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "predictchain/encoding.hpp"

namespace predictchain::detail {

Bytes read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Write to a sibling temp file, fsync, then rename over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

/// Append one line ("\n" added) and flush it to disk.
void append_line(const std::filesystem::path& path, std::string_view line);

}  // namespace predictchain::detail
