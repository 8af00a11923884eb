#pragma once
// JSON Lines helpers and crash-safe file writes.

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace seqstory::io {

using json = nlohmann::json;

/// Calls `visit(row, line_number)` for every non-blank line. Parse errors and
/// exceptions thrown by `visit` are rethrown as ValidationError prefixed with
/// "<path>:<line>".
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& visit);

std::vector<json> read_jsonl(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file then renames over `path`, so readers only
/// ever see the old or the new content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

void write_jsonl_atomic(const std::filesystem::path& path, const std::vector<json>& rows);

/// Compact, key-sorted, one line. Used for every JSONL row the toolkit emits.
std::string dump_line(const json& row);

/// Appends one line under an exclusive flock(2) on the file.
void append_line_locked(const std::filesystem::path& path, std::string_view line);

}  // namespace seqstory::io
