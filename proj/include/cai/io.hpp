#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace cai::io {

using Json = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
void write_file(const std::filesystem::path& path, std::string_view content);

void append_line(const std::filesystem::path& path, std::string_view line);

/// Calls fn(line_number, json) for every non-blank line; line numbers are
/// 1-based. Malformed JSON raises a parse error naming the file and line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const nlohmann::json&)>& fn);

std::string sha256_hex(std::string_view data);

/// Round-trip-exact shortest decimal form of a double.
std::string format_double(double v);
/// Fixed notation with the given decimals.
std::string format_fixed(double v, int decimals);

}  // namespace cai::io
