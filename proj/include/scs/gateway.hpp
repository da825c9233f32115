// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scs/json_io.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

// Uniform access point for every generative call in the pipeline. Stages build
// a GenerationRequest and hand it to a Gateway; the Gateway validates it, routes
// it to the configured backend (live, replay or scripted), optionally records
// the exchange into a transcript and checks the response against the validator
// registered for the request's schema hint.
namespace scs {

namespace roles {
inline constexpr std::string_view setup_agent = "setup-agent";
inline constexpr std::string_view artifact_creator = "artifact-creator";
inline constexpr std::string_view work_agent = "work-agent";
inline constexpr std::string_view collaborator = "collaborator";
inline constexpr std::string_view judge = "judge";
inline constexpr std::string_view analyst = "analyst";
inline constexpr std::string_view echo = "echo";
}  // namespace roles

bool is_registered_role(std::string_view role_label);

struct ChatMessage {
    std::string speaker;
    std::string text;
};

struct ToolResultEntry {
    std::string tool;
    std::string result;
};

struct ToolCall {
    std::string name;
    json arguments = json::object();
};

enum class FinishReason { complete, tool_use, truncated, backend_error };

std::string_view to_string(FinishReason reason);
FinishReason finish_reason_from(std::string_view text);

struct Usage {
    long long request_count = 1;
    long long token_estimate = 0;
};

struct GenerationRequest {
    std::string role_label;
    std::string system_context;
    std::vector<ChatMessage> messages;
    std::vector<ToolResultEntry> tool_results;
    std::string schema_hint = "text";
    int max_turn_budget = 1;

    const std::string& last_message() const { return messages.back().text; }
};

struct GenerationResponse {
    std::string text;
    std::vector<ToolCall> tool_calls;
    FinishReason finish_reason = FinishReason::complete;
    Usage usage;
    std::string error_detail;
};

json to_json(const GenerationResponse& response);
GenerationResponse response_from_json(const json& j);

/// Field-order-fixed, whitespace-normalized serialization of a request. Two
/// requests that differ only in line endings or trailing blanks serialize
/// identically.
std::string canonical_serialization(const GenerationRequest& request);
/// Lowercase hex SHA-256 of the canonical serialization.
std::string request_digest(const GenerationRequest& request);
std::string sha256_hex(std::string_view data);

/// Character/4 heuristic used when the backend does not report usage.
long long estimate_tokens(std::string_view text);

// ---------------------------------------------------------------------------
// Schema registry

using SchemaValidator = std::function<void(const std::string& text)>;

/// Registers (or replaces) the validator for a schema hint. The built-in hints
/// are registered on first use.
void register_schema(std::string hint, SchemaValidator validator);
bool is_registered_schema(std::string_view hint);
void validate_schema(std::string_view hint, const std::string& text);

// ---------------------------------------------------------------------------
// Transcripts

struct TranscriptEntry {
    std::string digest;
    GenerationResponse response;
};

class Transcript {
public:
    static Transcript load(const std::filesystem::path& path);

    void add(TranscriptEntry entry);
    const std::vector<TranscriptEntry>& entries() const { return _entries; }
    /// First recorded response for the digest, or nullptr.
    const GenerationResponse* find(const std::string& digest) const;

private:
    std::vector<TranscriptEntry> _entries;
    std::map<std::string, std::size_t> _first_index;
};

/// Appends {"digest", "response"} lines to a JSONL file; appends are serialized.
class TranscriptWriter {
public:
    explicit TranscriptWriter(std::filesystem::path path);
    void append(const std::string& digest, const GenerationResponse& response);
    const std::filesystem::path& path() const { return _path; }

private:
    std::filesystem::path _path;
    std::mutex _mutex;
};

// ---------------------------------------------------------------------------
// Backends

class Backend {
public:
    virtual ~Backend() = default;
    virtual GenerationResponse generate(const GenerationRequest& request) = 0;
    virtual std::string_view mode() const = 0;
};

/// Returns the recorded response whose digest matches; ReplayMiss otherwise.
class ReplayBackend final : public Backend {
public:
    explicit ReplayBackend(Transcript transcript);
    static std::shared_ptr<ReplayBackend> from_file(const std::filesystem::path& path);

    GenerationResponse generate(const GenerationRequest& request) override;
    std::string_view mode() const override { return "replay"; }

private:
    Transcript _transcript;
};

/// Ordered rules: the first rule whose role matches (or is "*") and whose
/// `contains` substring occurs in the request's last message produces the
/// response. Templates support {{last_message}}, {{role}} and {{line:KEY}},
/// which expands to the JSON-escaped value of the first "KEY: value" line of
/// the last message. A response may name a "text_file" (relative to the rules
/// file) instead of inline "text".
struct ScriptRule {
    std::string role = "*";
    std::string contains;
    std::string text;
    json tool_calls = json::array();
    FinishReason finish_reason = FinishReason::complete;
};

class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(std::vector<ScriptRule> rules);
    static std::shared_ptr<ScriptedBackend> from_json(const json& doc, const std::filesystem::path& base_dir = {});
    static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

    GenerationResponse generate(const GenerationRequest& request) override;
    std::string_view mode() const override { return "scripted"; }

    const std::vector<ScriptRule>& rules() const { return _rules; }

private:
    std::vector<ScriptRule> _rules;
};

std::string expand_template(std::string_view tmpl, const GenerationRequest& request);

struct TransportResult {
    bool transport_ok = false;  // false: connection failure, timeout, 5xx, 429
    int status = 0;
    std::string body;
    std::string error;
};

using Transport = std::function<TransportResult(const std::string& request_body)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct LiveOptions {
    std::string api_base;
    std::string api_key;
    std::string model = "default";
    int attempts = 3;
    std::chrono::milliseconds initial_backoff {1000};
};

/// Chat-completion client. Retries transport failures with exponential backoff
/// and raises BackendUnavailable once the attempts are spent.
class LiveBackend final : public Backend {
public:
    LiveBackend(LiveOptions options, Transport transport = {}, Sleeper sleeper = {});
    /// Reads SCS_API_BASE / SCS_API_KEY (and optional SCS_MODEL).
    static std::shared_ptr<LiveBackend> from_environment();

    GenerationResponse generate(const GenerationRequest& request) override;
    std::string_view mode() const override { return "live"; }

    json wire_request(const GenerationRequest& request) const;
    static GenerationResponse parse_wire_response(const std::string& body);

private:
    LiveOptions _options;
    Transport _transport;
    Sleeper _sleeper;
};

/// Wire-level tool definitions exposed to a role (work agent only).
json tool_definitions_for(std::string_view role_label);

// ---------------------------------------------------------------------------

class Gateway {
public:
    explicit Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<TranscriptWriter> recorder = nullptr);

    /// Validates, dispatches, records and schema-checks one completion.
    GenerationResponse complete(const GenerationRequest& request);

    std::string_view mode() const { return _backend->mode(); }
    long long calls() const;
    long long calls_for(std::string_view role_label) const;

private:
    std::shared_ptr<Backend> _backend;
    std::shared_ptr<TranscriptWriter> _recorder;
    mutable std::mutex _stats_mutex;
    std::map<std::string, long long, std::less<>> _calls_by_role;
};

/// Builds a gateway for a CLI-style backend name: live, replay (needs a
/// transcript path) or scripted (needs a rules file). When `record_to` is set
/// every exchange is appended there.
std::shared_ptr<Gateway> make_gateway(std::string_view backend, const std::filesystem::path& source,
                                      const std::filesystem::path& record_to = {});

}  // namespace scs
