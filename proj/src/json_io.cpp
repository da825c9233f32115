// SPDX-License-Identifier: Apache-2.0
#include "scs/json_io.hpp"

#include "scs/error.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace fs = std::filesystem;

namespace scs {

namespace {

const json& empty_array()
{
    static const json value = json::array();
    return value;
}

}  // namespace

void atomic_write_text(const fs::path& path, std::string_view content)
{
    static std::atomic<unsigned long> counter {0};
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            fail(ErrorCode::Io, "cannot open '" + tmp.string() + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out)
            fail(ErrorCode::Io, "short write to '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        fail(ErrorCode::Io, "rename onto '" + path.string() + "' failed: " + ec.message());
    }
}

std::string dump_pretty(const json& value)
{
    return value.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

void atomic_write_json(const fs::path& path, const json& value)
{
    atomic_write_text(path, dump_pretty(value));
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::Io, "cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json read_json(const fs::path& path)
{
    auto text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::ValidationFailed, "'" + path.string() + "' is not valid JSON: " + e.what(), {path.string()});
    }
}

void append_jsonl(const fs::path& path, const json& value)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out)
        fail(ErrorCode::Io, "cannot open '" + path.string() + "' for append");
    out << value.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    if (!out)
        fail(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

std::vector<json> read_jsonl(const fs::path& path)
{
    std::vector<json> rows;
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            fail(ErrorCode::LogCorrupt, path.string() + ":" + std::to_string(line_no) + ": " + e.what(),
                 {path.string()});
        }
    }
    return rows;
}

json parse_model_json(std::string_view text, std::string_view context)
{
    auto body = trim(text);
    if (body.rfind("```", 0) == 0) {
        auto first_newline = body.find('\n');
        auto closing = body.rfind("```");
        if (first_newline != std::string::npos && closing > first_newline)
            body = trim(std::string_view(body).substr(first_newline + 1, closing - first_newline - 1));
    }
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        schema_violation(std::string(context) + ": response is not JSON (" + e.what() + ")", {"<document>"});
    }
}

RecordReader::RecordReader(const json& record, std::string context): _record(record), _context(std::move(context))
{
    if (!_record.is_object())
        _problems.emplace_back("<object>");
}

const json* RecordReader::find(std::string_view key) const
{
    if (!_record.is_object())
        return nullptr;
    auto it = _record.find(std::string(key));
    if (it == _record.end() || it->is_null())
        return nullptr;
    return &*it;
}

bool RecordReader::has(std::string_view key) const
{
    return find(key) != nullptr;
}

void RecordReader::mark_bad(std::string field)
{
    if (std::find(_problems.begin(), _problems.end(), field) == _problems.end())
        _problems.push_back(std::move(field));
}

std::string RecordReader::text(std::string_view key)
{
    const auto* v = find(key);
    if (!v || !v->is_string() || trim(v->get<std::string>()).empty()) {
        mark_bad(std::string(key));
        return {};
    }
    return v->get<std::string>();
}

std::string RecordReader::optional_text(std::string_view key, std::string fallback)
{
    const auto* v = find(key);
    if (!v)
        return fallback;
    if (!v->is_string()) {
        mark_bad(std::string(key));
        return fallback;
    }
    return v->get<std::string>();
}

std::vector<std::string> RecordReader::texts(std::string_view key)
{
    auto out = optional_texts(key);
    if (out.empty() && std::find(_problems.begin(), _problems.end(), key) == _problems.end())
        mark_bad(std::string(key));
    return out;
}

std::vector<std::string> RecordReader::optional_texts(std::string_view key)
{
    std::vector<std::string> out;
    const auto* v = find(key);
    if (!v)
        return out;
    if (!v->is_array()) {
        mark_bad(std::string(key));
        return out;
    }
    for (const auto& item: *v) {
        if (!item.is_string()) {
            mark_bad(std::string(key));
            return {};
        }
        out.push_back(item.get<std::string>());
    }
    return out;
}

long long RecordReader::integer(std::string_view key)
{
    const auto* v = find(key);
    if (!v || !v->is_number_integer()) {
        mark_bad(std::string(key));
        return 0;
    }
    return v->get<long long>();
}

double RecordReader::number(std::string_view key)
{
    const auto* v = find(key);
    if (!v || !v->is_number()) {
        mark_bad(std::string(key));
        return 0.0;
    }
    return v->get<double>();
}

const json& RecordReader::array(std::string_view key)
{
    const auto* v = find(key);
    if (!v || !v->is_array()) {
        mark_bad(std::string(key));
        return empty_array();
    }
    return *v;
}

const json& RecordReader::optional_array(std::string_view key)
{
    const auto* v = find(key);
    if (!v)
        return empty_array();
    if (!v->is_array()) {
        mark_bad(std::string(key));
        return empty_array();
    }
    return *v;
}

const json& RecordReader::object(std::string_view key)
{
    static const json empty = json::object();
    const auto* v = find(key);
    if (!v || !v->is_object()) {
        mark_bad(std::string(key));
        return empty;
    }
    return *v;
}

void RecordReader::finish() const
{
    if (_problems.empty())
        return;
    std::string list;
    for (const auto& p: _problems)
        list += (list.empty() ? "" : ", ") + p;
    schema_violation(_context + ": missing or ill-formed field(s) " + list, _problems);
}

std::string trim(std::string_view text)
{
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    std::size_t b = 0, e = text.size();
    while (b < e && is_space(text[b]))
        ++b;
    while (e > b && is_space(text[e - 1]))
        --e;
    return std::string(text.substr(b, e - b));
}

std::string to_lower(std::string_view text)
{
    std::string out(text);
    for (auto& c: out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string slugify(std::string_view text)
{
    std::string out;
    bool dash = false;
    for (char c: text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            if (dash && !out.empty())
                out.push_back('-');
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            dash = false;
        } else {
            dash = true;
        }
    }
    return out.empty() ? "unnamed" : out;
}

}  // namespace scs
