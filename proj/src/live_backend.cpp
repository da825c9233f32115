// SPDX-License-Identifier: Apache-2.0
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "scs/error.hpp"
#include "scs/gateway.hpp"

#include <cstdlib>
#include <thread>

namespace scs {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix without trailing slash
};

Endpoint split_base(const std::string& base)
{
    auto scheme_end = base.find("://");
    auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = base.find('/', host_start);
    Endpoint e;
    e.origin = base.substr(0, path_start);
    e.prefix = path_start == std::string::npos ? "" : base.substr(path_start);
    while (!e.prefix.empty() && e.prefix.back() == '/')
        e.prefix.pop_back();
    return e;
}

Transport http_transport(const LiveOptions& options)
{
    return [options](const std::string& body) {
        TransportResult result;
        auto endpoint = split_base(options.api_base);
        httplib::Client client(endpoint.origin);
        client.set_connection_timeout(30);
        client.set_read_timeout(600);
        httplib::Headers headers {{"Authorization", "Bearer " + options.api_key}};
        auto res = client.Post(endpoint.prefix + "/chat/completions", headers, body, "application/json");
        if (!res) {
            result.error = httplib::to_string(res.error());
            return result;
        }
        result.status = res->status;
        result.body = res->body;
        result.transport_ok = !(res->status >= 500 || res->status == 429);
        if (!result.transport_ok)
            result.error = "HTTP " + std::to_string(res->status);
        return result;
    };
}

std::string wire_role(const std::string& speaker)
{
    if (speaker == "assistant" || speaker == "user" || speaker == "system")
        return speaker;
    return "user";
}

bool structured_schema(const std::string& hint)
{
    return hint != "text" && hint != "work_turn";
}

}  // namespace

json tool_definitions_for(std::string_view role_label)
{
    if (role_label != roles::work_agent)
        return json::array();
    auto fn = [](const char* name, const char* description, json properties, json required) {
        return json {{"type", "function"},
                     {"function",
                      {{"name", name},
                       {"description", description},
                       {"parameters", {{"type", "object"}, {"properties", properties}, {"required", required}}}}}};
    };
    json str = {{"type", "string"}};
    return json::array({
        fn("list_dir", "List a directory of the computer.", {{"path", str}}, {"path"}),
        fn("read_file", "Read a file of the computer.", {{"path", str}}, {"path"}),
        fn("write_file", "Create or overwrite a file.", {{"path", str}, {"content", str}}, {"path", "content"}),
        fn("send_message", "Send a message to a collaborator.",
           {{"recipient", str}, {"subject", str}, {"body", str}, {"attach", {{"type", "array"}, {"items", str}}}},
           {"recipient", "subject", "body"}),
        fn("check_inbox", "List delivered messages.", json::object(), json::array()),
        fn("save_attachment", "Save a message attachment onto the computer.",
           {{"message_id", str}, {"index", {{"type", "integer"}}}, {"dest", str}}, {"message_id", "index", "dest"}),
        fn("log_activity", "Append to today's activity log.", {{"text", str}}, {"text"}),
        fn("finish_day", "End today's session.", json::object(), json::array()),
    });
}

LiveBackend::LiveBackend(LiveOptions options, Transport transport, Sleeper sleeper):
    _options(std::move(options)), _transport(std::move(transport)), _sleeper(std::move(sleeper))
{
    if (!_transport)
        _transport = http_transport(_options);
    if (!_sleeper)
        _sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::shared_ptr<LiveBackend> LiveBackend::from_environment()
{
    const char* base = std::getenv("SCS_API_BASE");
    const char* key = std::getenv("SCS_API_KEY");
    if (!base || !*base || !key || !*key)
        fail(ErrorCode::BackendUnavailable, "live backend needs SCS_API_BASE and SCS_API_KEY");
    LiveOptions options;
    options.api_base = base;
    options.api_key = key;
    if (const char* model = std::getenv("SCS_MODEL"); model && *model)
        options.model = model;
    return std::make_shared<LiveBackend>(std::move(options));
}

json LiveBackend::wire_request(const GenerationRequest& request) const
{
    json messages = json::array();
    if (!request.system_context.empty())
        messages.push_back({{"role", "system"}, {"content", request.system_context}});
    for (const auto& m: request.messages) {
        auto role = wire_role(m.speaker);
        auto content = role == m.speaker ? m.text : "[" + m.speaker + "] " + m.text;
        messages.push_back({{"role", role}, {"content", content}});
    }
    if (!request.tool_results.empty()) {
        std::string text = "Tool results:";
        for (const auto& t: request.tool_results)
            text += "\n[" + t.tool + "] " + t.result;
        messages.push_back({{"role", "user"}, {"content", text}});
    }
    json body {{"model", _options.model}, {"messages", messages}};
    auto tools = tool_definitions_for(request.role_label);
    if (!tools.empty())
        body["tools"] = tools;
    else if (structured_schema(request.schema_hint))
        body["response_format"] = {{"type", "json_object"}};
    return body;
}

GenerationResponse LiveBackend::parse_wire_response(const std::string& body)
{
    GenerationResponse r;
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        r.finish_reason = FinishReason::backend_error;
        r.error_detail = std::string("unparseable wire response: ") + e.what();
        return r;
    }
    if (!doc.contains("choices") || doc["choices"].empty()) {
        r.finish_reason = FinishReason::backend_error;
        r.error_detail = doc.contains("error") ? doc["error"].dump() : "wire response without choices";
        return r;
    }
    const auto& choice = doc["choices"][0];
    const auto& message = choice.value("message", json::object());
    if (message.contains("content") && message["content"].is_string())
        r.text = message["content"].get<std::string>();
    for (const auto& call: message.value("tool_calls", json::array())) {
        const auto& fn = call.value("function", json::object());
        json args = json::object();
        auto raw = fn.value("arguments", std::string("{}"));
        try {
            args = json::parse(raw);
        } catch (const json::exception&) {
            args = {{"_raw", raw}};
        }
        r.tool_calls.push_back(ToolCall {fn.value("name", ""), args});
    }
    auto reason = choice.value("finish_reason", std::string("stop"));
    if (!r.tool_calls.empty())
        r.finish_reason = FinishReason::tool_use;
    else if (reason == "length")
        r.finish_reason = FinishReason::truncated;
    else
        r.finish_reason = FinishReason::complete;
    if (doc.contains("usage") && doc["usage"].contains("total_tokens"))
        r.usage.token_estimate = doc["usage"]["total_tokens"].get<long long>();
    else
        r.usage.token_estimate = estimate_tokens(body);
    return r;
}

GenerationResponse LiveBackend::generate(const GenerationRequest& request)
{
    auto body = wire_request(request).dump();
    auto backoff = _options.initial_backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= _options.attempts; ++attempt) {
        auto result = _transport(body);
        if (result.transport_ok) {
            if (result.status >= 400)
                fail(ErrorCode::BackendUnavailable,
                     "backend rejected request with HTTP " + std::to_string(result.status) + ": " + result.body);
            auto response = parse_wire_response(result.body);
            response.usage.request_count = attempt;
            return response;
        }
        last_error = result.error;
        if (attempt < _options.attempts) {
            _sleeper(backoff);
            backoff *= 2;
        }
    }
    fail(ErrorCode::BackendUnavailable,
         "live backend unavailable after " + std::to_string(_options.attempts) + " attempts: " + last_error);
}

}  // namespace scs
