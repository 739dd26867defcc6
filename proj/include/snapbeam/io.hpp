#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace snapbeam {

inline constexpr std::string_view tool_version = "0.3.0";

/// Write through a temporary sibling and rename, so readers never observe a
/// half-written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Fixed-format number for text artifacts (CSV/SVG); locale independent.
std::string fmt_num(double value, int precision = 9);

}  // namespace snapbeam
