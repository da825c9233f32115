// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace scs {

using json = nlohmann::ordered_json;

/// Writes to a sibling temp file and renames it into place, so readers never
/// observe a partially written file under the final name.
void atomic_write_text(const std::filesystem::path& path, std::string_view content);
void atomic_write_json(const std::filesystem::path& path, const json& value);

std::string read_text(const std::filesystem::path& path);
json read_json(const std::filesystem::path& path);

void append_jsonl(const std::filesystem::path& path, const json& value);
std::vector<json> read_jsonl(const std::filesystem::path& path);

/// Canonical pretty form used for every persisted record.
std::string dump_pretty(const json& value);

/// Parses model output into JSON. Tolerates a surrounding markdown code fence.
/// Throws SchemaViolation when the text is not a JSON document.
json parse_model_json(std::string_view text, std::string_view context);

/// Reads named fields out of a JSON object while collecting every missing or
/// ill-typed field, so one SchemaViolation can report the full list.
class RecordReader {
public:
    RecordReader(const json& record, std::string context);

    std::string text(std::string_view key);
    std::string optional_text(std::string_view key, std::string fallback = {});
    std::vector<std::string> texts(std::string_view key);
    std::vector<std::string> optional_texts(std::string_view key);
    long long integer(std::string_view key);
    double number(std::string_view key);
    const json& array(std::string_view key);
    const json& optional_array(std::string_view key);
    const json& object(std::string_view key);
    bool has(std::string_view key) const;

    void mark_bad(std::string field);
    const std::vector<std::string>& problems() const { return _problems; }
    /// Throws SchemaViolation naming every problem field, if any.
    void finish() const;

private:
    const json* find(std::string_view key) const;

    const json& _record;
    std::string _context;
    std::vector<std::string> _problems;
};

/// Lowercase ASCII slug: runs of non-alphanumerics collapse to '-'.
std::string slugify(std::string_view text);
std::string trim(std::string_view text);
std::string to_lower(std::string_view text);

}  // namespace scs
