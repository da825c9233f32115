// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scs/error.hpp"
#include "scs/setup.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

// Long-horizon simulation: weekly planning, one agent session per working day,
// collaborator replies with seeded latency, and telemetry recomputed from the
// persisted logs.
namespace scs {

enum class ActivityKind { deep_work, review, admin, outreach, email };
std::string_view to_string(ActivityKind kind);
ActivityKind activity_kind_from(std::string_view text, const std::string& field = "kind");

struct PlannedActivity {
    Date date {};
    int minute_of_day = 0;
    ActivityKind kind = ActivityKind::deep_work;
    std::string description;
    std::vector<std::string> creates;
    std::vector<std::string> consults;
    std::vector<std::string> contacts;  // collab ids
    std::string deliverable_id;
};

struct WeeklyPlan {
    int week_index = 1;
    std::vector<Date> days;
    std::string focus;
    std::vector<PlannedActivity> activities;
};

json to_json(const WeeklyPlan& plan);
/// Validates against the week's days, the objectives and the collaborators.
/// Throws SchemaViolation.
WeeklyPlan weekly_plan_from_json(const json& j, int week_index, const std::vector<Date>& days,
                                 const ObjectiveSet& objectives, const CollaboratorSet& collaborators);

inline constexpr std::string_view user_party = "user";

struct Attachment {
    std::string filename;
    std::string source;  // logical path, or "private:<collab>/<file>"
    std::string content_sha256;
};

struct Message {
    std::string message_id;
    std::string sender;
    std::string recipient;
    Timestamp sent_at {};
    std::optional<Timestamp> deliver_at;  // unset until a collaborator processes it
    std::string subject;
    std::string body;
    std::vector<Attachment> attachments;
    std::string in_reply_to;
    std::optional<Date> surfaced_on;  // first session that saw it
};

json to_json(const Message& m);
Message message_from_json(const json& j);

struct ToolResult {
    bool ok = true;
    std::string text;
    std::optional<ErrorCode> error;
};

struct ToolLog {
    std::string name;
    json arguments = json::object();
    bool ok = true;
    std::string result;
    std::optional<std::string> error;
};

struct TurnRecord {
    int index = 0;
    std::string role;
    std::string collab_id;  // collaborator turns only
    Timestamp time {};
    std::string text;
    std::vector<ToolLog> tool_calls;
    bool error = false;
};

json to_json(const TurnRecord& turn);
TurnRecord turn_from_json(const json& j);

struct ActivityEntry {
    Timestamp time {};
    std::string text;
    std::vector<std::string> files_created;
    std::vector<std::string> files_modified;
};

json to_json(const ActivityEntry& entry);
ActivityEntry activity_from_json(const json& j);

struct FileDiff {
    std::vector<std::string> added;
    std::vector<std::string> modified;
};

/// Paths new in `after`, and paths whose timestamp or content changed.
FileDiff diff_manifests(const json& before, const json& after);

struct DayRecord {
    Date date {};
    int week_index = 1;
    std::vector<TurnRecord> turns;
    std::vector<ActivityEntry> activity_log;
    std::vector<std::string> messages_sent;
    std::vector<std::string> messages_received;
    FileDiff file_diff;
    json shares = json::array();
    bool truncated = false;
    bool finished = false;
};

json to_json(const DayRecord& day);  // summary written to day.json

struct RunTelemetry {
    long long turns_weekly_planning = 0;
    long long turns_daily_execution = 0;
    long long turns_total = 0;
    long long error_turns = 0;
    double error_rate = 0;
    long long messages_sent = 0;
    long long messages_received = 0;
    long long communications_total = 0;
    long long turns_setup = 0;
    double wall_clock_seconds = 0;
};

json to_json(const RunTelemetry& t);
RunTelemetry telemetry_from_json(const json& j);

struct SimulationRecord {
    std::string run_id;
    std::vector<WeeklyPlan> weekly_plans;
    std::vector<DayRecord> days;
    json final_manifest;
    RunTelemetry telemetry;
    bool truncated = false;
    std::string skill;  // matched skill slug, empty when none matched
};

struct SkillDocument {
    std::string slug;
    std::string occupation;
    std::string text;
};

struct EngineConfig {
    int working_days = 20;
    int day_turn_budget = 400;
    int global_turn_budget = 5000;
    int planning_turn_budget = 20;
    bool blank_guard = true;
    std::uint64_t seed = 0;
    int history_window = 12;
    std::vector<SkillDocument> skills;
};

/// Throws InvalidConfig.
void validate_engine_config(const EngineConfig& config);

struct SimulationInputs {
    std::string run_id;
    fs::path run_dir;  // receives days/, weeks/, messages.jsonl, simulation.json, telemetry.json
    UserProfile profile;
    SyntheticComputer computer;
    ObjectiveSet objectives;
    CollaboratorSet collaborators;
};

/// Deterministic delivery time of a collaborator reply.
Timestamp reply_delivery(Timestamp request_sent_at, double min_hours, double max_hours, std::uint64_t seed,
                         std::string_view request_message_id);
std::uint64_t fnv1a64(std::string_view text);

/// The simulation state for one run. Sessions share nothing but the computer,
/// the message store and the persisted logs.
class Simulation {
public:
    Simulation(SimulationInputs inputs, EngineConfig config, Gateway& gateway);

    /// Plans the week covering `days`. Throws SchemaViolation.
    WeeklyPlan plan_week(int week_index, const std::vector<Date>& days);
    /// Runs one agent session. Closes the day as truncated when the per-day
    /// budget runs out; throws BudgetExhausted when the global budget does.
    DayRecord run_day(Date date, const WeeklyPlan& plan);
    /// Executes a tool call at the current clock. Failures come back as results.
    ToolResult handle_tool_call(const ToolCall& call);
    /// Replies to every message addressed to the collaborator that has not been
    /// processed yet.
    std::vector<Message> collaborator_turn(const Collaborator& collaborator);
    /// Full period: plan each week, then run its days.
    SimulationRecord run();

    const std::vector<Message>& messages() const { return _messages; }
    const SyntheticComputer& computer() const { return _in.computer; }
    const SimulationRecord& record() const { return _record; }
    Timestamp clock() const { return _clock; }
    void set_clock(Timestamp t) { _clock = t; }
    /// Adds a message directly (used by tests and message imports).
    void deliver(Message m);
    long long turns_used() const { return _turns_used; }
    /// The period's working days grouped into Monday-started weeks.
    std::vector<std::vector<Date>> weeks() const;

private:
    GenerationResponse call_gateway(const GenerationRequest& request);
    std::string day_context(Date date, const WeeklyPlan& plan, const std::vector<const Message*>& fresh) const;
    std::string manifest_summary() const;
    std::string activity_tail(Date date) const;
    std::string skill_text() const;
    std::vector<const Message*> visible_inbox() const;
    ToolResult tool_list_dir(const json& args);
    ToolResult tool_read_file(const json& args);
    ToolResult tool_write_file(const json& args);
    ToolResult tool_send_message(const json& args);
    ToolResult tool_check_inbox();
    ToolResult tool_save_attachment(const json& args);
    ToolResult tool_log_activity(const json& args);
    void record_file(const std::string& logical_path, const std::string& bytes, const std::string& origin,
                     const json& provenance);
    void persist_messages() const;
    void persist_day(const DayRecord& day) const;
    void persist_summary(double wall_clock_seconds) const;
    void process_replies();

    SimulationInputs _in;
    EngineConfig _config;
    Gateway& _gateway;
    std::vector<Message> _messages;
    SimulationRecord _record;
    Timestamp _clock {};
    long long _turns_used = 0;
    int _next_file = 1;
    // current-day scratch
    DayRecord* _day = nullptr;
    std::vector<std::string> _pending_created;
    std::vector<std::string> _pending_modified;
    std::set<std::string> _created_today;
    bool _finish_requested = false;
    bool _planning = false;
};

SimulationRecord run_simulation(SimulationInputs inputs, const EngineConfig& config, Gateway& gateway);

/// Rebuilds the record from the files under run_dir. Throws LogCorrupt.
SimulationRecord load_simulation(const fs::path& run_dir);
std::vector<Message> load_messages(const fs::path& run_dir);

/// Recounts turns, errors and messages from the logs under run_dir. Setup
/// turns come from stages.json when present. Throws LogCorrupt.
RunTelemetry compute_telemetry(const fs::path& run_dir);

}  // namespace scs
