// SPDX-License-Identifier: Apache-2.0
#include "scs/gateway.hpp"

#include "scs/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdlib>
#include <set>
#include <thread>

namespace fs = std::filesystem;

namespace scs {

namespace {

const std::set<std::string, std::less<>>& role_registry()
{
    static const std::set<std::string, std::less<>> roles {
        std::string(roles::setup_agent), std::string(roles::artifact_creator), std::string(roles::work_agent),
        std::string(roles::collaborator), std::string(roles::judge),           std::string(roles::analyst),
        std::string(roles::echo),
    };
    return roles;
}

std::string normalize_whitespace(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    std::string line;
    auto flush_line = [&] {
        auto end = line.find_last_not_of(" \t");
        out += end == std::string::npos ? std::string {} : line.substr(0, end + 1);
        line.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n')
                continue;
            c = '\n';
        }
        if (c == '\n') {
            flush_line();
            out.push_back('\n');
        } else {
            line.push_back(c);
        }
    }
    flush_line();
    return trim(out);
}

struct SchemaRegistry {
    std::mutex mutex;
    std::map<std::string, SchemaValidator, std::less<>> validators;
};

SchemaValidator json_document(bool want_array)
{
    return [want_array](const std::string& text) {
        auto doc = parse_model_json(text, "structured output");
        if (want_array ? !doc.is_array() : !doc.is_object())
            schema_violation(std::string("structured output must be a JSON ") + (want_array ? "array" : "object"),
                             {"<document>"});
    };
}

SchemaRegistry& schema_registry()
{
    static SchemaRegistry registry;
    static std::once_flag once;
    std::call_once(once, [] {
        auto& r = registry;
        auto accept_any = [](const std::string&) {};
        r.validators.emplace("text", accept_any);
        r.validators.emplace("work_turn", accept_any);
        for (const char* hint: {"profile", "fs_policy", "fs_plan", "artifact_content", "objectives", "collaborators",
                                "weekly_plan", "collaborator_reply", "rubric", "rubric_merge", "score",
                                "retrospective", "experience_items", "partition", "skill"})
            r.validators.emplace(hint, json_document(false));
    });
    return registry;
}

void validate_request(const GenerationRequest& request)
{
    if (request.messages.empty())
        fail(ErrorCode::PreconditionViolation, "generation request has no messages");
    if (!is_registered_role(request.role_label))
        fail(ErrorCode::PreconditionViolation, "unregistered role label '" + request.role_label + "'");
    if (!is_registered_schema(request.schema_hint))
        fail(ErrorCode::PreconditionViolation, "unregistered schema hint '" + request.schema_hint + "'");
    if (request.max_turn_budget <= 0)
        fail(ErrorCode::PreconditionViolation, "max_turn_budget must be positive");
}

std::string line_value(std::string_view text, std::string_view key)
{
    std::string prefix = std::string(key) + ": ";
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        auto line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        if (line.substr(0, prefix.size()) == prefix)
            return std::string(line.substr(prefix.size()));
        if (end == std::string_view::npos)
            break;
        pos = end + 1;
    }
    return {};
}

std::string json_escape(std::string_view text)
{
    auto quoted = json(std::string(text)).dump();
    return quoted.substr(1, quoted.size() - 2);
}

json expand_json(const json& node, const GenerationRequest& request)
{
    if (node.is_string())
        return expand_template(node.get<std::string>(), request);
    if (node.is_array() || node.is_object()) {
        json out = node;
        for (auto& item: out)
            item = expand_json(item, request);
        return out;
    }
    return node;
}

}  // namespace

bool is_registered_role(std::string_view role_label)
{
    return role_registry().contains(role_label);
}

std::string_view to_string(FinishReason reason)
{
    switch (reason) {
    case FinishReason::complete: return "complete";
    case FinishReason::tool_use: return "tool_use";
    case FinishReason::truncated: return "truncated";
    case FinishReason::backend_error: return "backend_error";
    }
    return "complete";
}

FinishReason finish_reason_from(std::string_view text)
{
    if (text == "complete")
        return FinishReason::complete;
    if (text == "tool_use")
        return FinishReason::tool_use;
    if (text == "truncated")
        return FinishReason::truncated;
    if (text == "backend_error")
        return FinishReason::backend_error;
    schema_violation("unknown finish_reason '" + std::string(text) + "'", {"finish_reason"});
}

json to_json(const GenerationResponse& response)
{
    json calls = json::array();
    for (const auto& call: response.tool_calls)
        calls.push_back(json {{"name", call.name}, {"arguments", call.arguments}});
    json out {
        {"text", response.text},
        {"tool_calls", std::move(calls)},
        {"finish_reason", to_string(response.finish_reason)},
        {"usage", {{"request_count", response.usage.request_count}, {"token_estimate", response.usage.token_estimate}}},
    };
    if (!response.error_detail.empty())
        out["error_detail"] = response.error_detail;
    return out;
}

GenerationResponse response_from_json(const json& j)
{
    GenerationResponse r;
    r.text = j.value("text", "");
    for (const auto& call: j.value("tool_calls", json::array()))
        r.tool_calls.push_back(ToolCall {call.value("name", ""), call.value("arguments", json::object())});
    r.finish_reason = finish_reason_from(j.value("finish_reason", "complete"));
    if (j.contains("usage")) {
        r.usage.request_count = j["usage"].value("request_count", 1LL);
        r.usage.token_estimate = j["usage"].value("token_estimate", 0LL);
    }
    r.error_detail = j.value("error_detail", "");
    return r;
}

std::string canonical_serialization(const GenerationRequest& request)
{
    json messages = json::array();
    for (const auto& m: request.messages)
        messages.push_back(json::array({normalize_whitespace(m.speaker), normalize_whitespace(m.text)}));
    json tools = json::array();
    for (const auto& t: request.tool_results)
        tools.push_back(json::array({normalize_whitespace(t.tool), normalize_whitespace(t.result)}));
    json doc = json::array({
        normalize_whitespace(request.role_label),
        normalize_whitespace(request.system_context),
        std::move(messages),
        std::move(tools),
        normalize_whitespace(request.schema_hint),
        request.max_turn_budget,
    });
    return doc.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string sha256_hex(std::string_view data)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md {};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        fail(ErrorCode::Io, "sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

std::string request_digest(const GenerationRequest& request)
{
    return sha256_hex(canonical_serialization(request));
}

long long estimate_tokens(std::string_view text)
{
    return static_cast<long long>(text.size() / 4);
}

void register_schema(std::string hint, SchemaValidator validator)
{
    auto& registry = schema_registry();
    std::lock_guard lock(registry.mutex);
    registry.validators[std::move(hint)] = std::move(validator);
}

bool is_registered_schema(std::string_view hint)
{
    auto& registry = schema_registry();
    std::lock_guard lock(registry.mutex);
    return registry.validators.find(hint) != registry.validators.end();
}

void validate_schema(std::string_view hint, const std::string& text)
{
    SchemaValidator validator;
    {
        auto& registry = schema_registry();
        std::lock_guard lock(registry.mutex);
        auto it = registry.validators.find(hint);
        if (it == registry.validators.end())
            fail(ErrorCode::PreconditionViolation, "unregistered schema hint '" + std::string(hint) + "'");
        validator = it->second;
    }
    validator(text);
}

// --- transcripts -------------------------------------------------------------

Transcript Transcript::load(const fs::path& path)
{
    if (!fs::exists(path))
        fail(ErrorCode::Io, "transcript '" + path.string() + "' does not exist");
    Transcript t;
    for (const auto& row: read_jsonl(path)) {
        if (!row.contains("digest") || !row.contains("response"))
            fail(ErrorCode::LogCorrupt, "transcript entry without digest/response in " + path.string());
        t.add(TranscriptEntry {row["digest"].get<std::string>(), response_from_json(row["response"])});
    }
    return t;
}

void Transcript::add(TranscriptEntry entry)
{
    _first_index.emplace(entry.digest, _entries.size());
    _entries.push_back(std::move(entry));
}

const GenerationResponse* Transcript::find(const std::string& digest) const
{
    auto it = _first_index.find(digest);
    return it == _first_index.end() ? nullptr : &_entries[it->second].response;
}

TranscriptWriter::TranscriptWriter(fs::path path): _path(std::move(path))
{
}

void TranscriptWriter::append(const std::string& digest, const GenerationResponse& response)
{
    std::lock_guard lock(_mutex);
    append_jsonl(_path, json {{"digest", digest}, {"response", to_json(response)}});
}

// --- replay ----------------------------------------------------------------------

ReplayBackend::ReplayBackend(Transcript transcript): _transcript(std::move(transcript))
{
}

std::shared_ptr<ReplayBackend> ReplayBackend::from_file(const fs::path& path)
{
    return std::make_shared<ReplayBackend>(Transcript::load(path));
}

GenerationResponse ReplayBackend::generate(const GenerationRequest& request)
{
    auto digest = request_digest(request);
    const auto* hit = _transcript.find(digest);
    if (!hit)
        fail(ErrorCode::ReplayMiss,
             "no recorded response for " + request.role_label + " request " + digest.substr(0, 12) +
                 " (request construction is not deterministic or the transcript is stale)",
             {digest});
    return *hit;
}

// --- scripted --------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules): _rules(std::move(rules))
{
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const json& doc, const fs::path& base_dir)
{
    const json& list = doc.is_array() ? doc : doc.value("rules", json::array());
    std::vector<ScriptRule> rules;
    for (const auto& r: list) {
        ScriptRule rule;
        rule.role = r.value("role", "*");
        rule.contains = r.value("contains", "");
        const json& response = r.contains("response") ? r["response"] : r;
        if (response.contains("text")) {
            const auto& text = response["text"];
            rule.text = text.is_string() ? text.get<std::string>() : text.dump();
        } else if (response.contains("text_file")) {
            rule.text = read_text(base_dir / response["text_file"].get<std::string>());
        }
        rule.tool_calls = response.value("tool_calls", json::array());
        auto default_reason = rule.tool_calls.empty() ? "complete" : "tool_use";
        rule.finish_reason = finish_reason_from(response.value("finish_reason", default_reason));
        rules.push_back(std::move(rule));
    }
    return std::make_shared<ScriptedBackend>(std::move(rules));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const fs::path& path)
{
    return from_json(read_json(path), path.parent_path());
}

std::string expand_template(std::string_view tmpl, const GenerationRequest& request)
{
    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        auto name = tmpl.substr(open + 2, close - open - 2);
        if (name == "last_message")
            out += request.last_message();
        else if (name == "role")
            out += request.role_label;
        else if (name.substr(0, 5) == "line:")
            out += json_escape(line_value(request.last_message(), name.substr(5)));
        else
            out.append(tmpl.substr(open, close + 2 - open));
        pos = close + 2;
    }
    return out;
}

GenerationResponse ScriptedBackend::generate(const GenerationRequest& request)
{
    const auto& last = request.last_message();
    for (const auto& rule: _rules) {
        if (rule.role != "*" && rule.role != request.role_label)
            continue;
        if (!rule.contains.empty() && last.find(rule.contains) == std::string::npos)
            continue;
        GenerationResponse r;
        r.text = expand_template(rule.text, request);
        for (const auto& call: rule.tool_calls)
            r.tool_calls.push_back(
                ToolCall {call.value("name", ""), expand_json(call.value("arguments", json::object()), request)});
        r.finish_reason = rule.finish_reason;
        r.usage.token_estimate = estimate_tokens(canonical_serialization(request)) + estimate_tokens(r.text);
        return r;
    }
    GenerationResponse miss;
    miss.finish_reason = FinishReason::backend_error;
    miss.error_detail = "no scripted rule matches role '" + request.role_label + "'";
    return miss;
}

// --- gateway -----------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<TranscriptWriter> recorder):
    _backend(std::move(backend)), _recorder(std::move(recorder))
{
    if (!_backend)
        fail(ErrorCode::PreconditionViolation, "gateway needs a backend");
}

GenerationResponse Gateway::complete(const GenerationRequest& request)
{
    validate_request(request);
    auto response = _backend->generate(request);
    {
        std::lock_guard lock(_stats_mutex);
        ++_calls_by_role[request.role_label];
    }
    if (_recorder)
        _recorder->append(request_digest(request), response);

    if (response.finish_reason == FinishReason::backend_error)
        fail(ErrorCode::BackendUnavailable, response.error_detail.empty() ? "backend error" : response.error_detail);
    if (response.finish_reason == FinishReason::tool_use && response.tool_calls.empty())
        schema_violation("finish_reason tool_use without tool calls", {"tool_calls"});
    if (response.tool_calls.empty())
        validate_schema(request.schema_hint, response.text);
    return response;
}

long long Gateway::calls() const
{
    std::lock_guard lock(_stats_mutex);
    long long total = 0;
    for (const auto& [_, n]: _calls_by_role)
        total += n;
    return total;
}

long long Gateway::calls_for(std::string_view role_label) const
{
    std::lock_guard lock(_stats_mutex);
    auto it = _calls_by_role.find(role_label);
    return it == _calls_by_role.end() ? 0 : it->second;
}

std::shared_ptr<Gateway> make_gateway(std::string_view backend, const fs::path& source, const fs::path& record_to)
{
    std::shared_ptr<Backend> impl;
    if (backend == "live")
        impl = LiveBackend::from_environment();
    else if (backend == "replay")
        impl = ReplayBackend::from_file(source);
    else if (backend == "scripted")
        impl = ScriptedBackend::from_file(source);
    else
        fail(ErrorCode::InvalidConfig, "unknown backend '" + std::string(backend) + "'");
    std::shared_ptr<TranscriptWriter> recorder;
    if (!record_to.empty())
        recorder = std::make_shared<TranscriptWriter>(record_to);
    return std::make_shared<Gateway>(std::move(impl), std::move(recorder));
}

}  // namespace scs
