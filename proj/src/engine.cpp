// SPDX-License-Identifier: Apache-2.0
#include "scs/engine.hpp"

#include "scs/error.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <random>
#include <set>

namespace scs {

namespace {

constexpr std::string_view work_prompt =
    "You are the user of this computer, working through one day of a month-long set of objectives. Use the tools "
    "to inspect and edit files, message collaborators, save attachments they send, and log what you did. Paths "
    "are logical paths on the computer's drives. Call finish_day when the day's work is done.";

constexpr std::string_view planning_prompt =
    "You plan the coming working week for the user. You may inspect files and the inbox first (list_dir, "
    "read_file, check_inbox). Then answer with one JSON object: focus, activities[{date,time (HH:MM),kind "
    "(deep_work|review|admin|outreach|email),description,creates[],consults[],contacts[],deliverable_id}].";

constexpr std::size_t read_limit = 64 * 1024;
constexpr std::size_t log_result_limit = 4000;
constexpr std::size_t private_excerpt_limit = 4000;

std::string clip(const std::string& text, std::size_t limit)
{
    if (text.size() <= limit)
        return text;
    auto cut = limit;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80)
        --cut;
    return text.substr(0, cut) + "\n[truncated]";
}

std::string numbered(char prefix, std::size_t n)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%04zu", prefix, n);
    return buf;
}

int parse_minute_of_day(const std::string& text)
{
    if (text.size() != 5 || text[2] != ':' || !std::isdigit(static_cast<unsigned char>(text[0])) ||
        !std::isdigit(static_cast<unsigned char>(text[1])) || !std::isdigit(static_cast<unsigned char>(text[3])) ||
        !std::isdigit(static_cast<unsigned char>(text[4])))
        return -1;
    int h = std::stoi(text.substr(0, 2));
    int m = std::stoi(text.substr(3, 2));
    if (h > 23 || m > 59)
        return -1;
    return h * 60 + m;
}

std::string minute_text(int minute_of_day)
{
    char buf[24];
    std::snprintf(buf, sizeof buf, "%02d:%02d", minute_of_day / 60, minute_of_day % 60);
    return buf;
}

Timestamp turn_time(Date date, int hour, int index, int last_minute)
{
    auto t = at(date, hour) + std::chrono::minutes {index};
    return std::min(t, at(date, hour, last_minute));
}

std::vector<std::string> string_list(const json& j, const char* key)
{
    std::vector<std::string> out;
    if (j.contains(key) && j[key].is_array())
        for (const auto& v: j[key])
            if (v.is_string())
                out.push_back(v.get<std::string>());
    return out;
}

json attachments_json(const std::vector<Attachment>& list)
{
    json out = json::array();
    for (const auto& a: list)
        out.push_back({{"filename", a.filename}, {"source", a.source}, {"content_sha256", a.content_sha256}});
    return out;
}

bool ends_with(std::string_view text, std::string_view suffix)
{
    return text.size() >= suffix.size() && text.compare(text.size() - suffix.size(), suffix.size(), suffix) == 0;
}

ToolResult tool_error(std::string text, std::optional<ErrorCode> code = std::nullopt)
{
    return {false, std::move(text), code};
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(ActivityKind kind)
{
    switch (kind) {
    case ActivityKind::deep_work: return "deep_work";
    case ActivityKind::review: return "review";
    case ActivityKind::admin: return "admin";
    case ActivityKind::outreach: return "outreach";
    case ActivityKind::email: return "email";
    }
    return "deep_work";
}

ActivityKind activity_kind_from(std::string_view text, const std::string& field)
{
    auto t = to_lower(trim(text));
    std::replace(t.begin(), t.end(), '-', '_');
    std::replace(t.begin(), t.end(), ' ', '_');
    if (t.find("deep") != std::string::npos || t == "focus" || t == "work")
        return ActivityKind::deep_work;
    if (t.find("review") != std::string::npos || t == "reading")
        return ActivityKind::review;
    if (t.find("admin") != std::string::npos || t.find("meeting") != std::string::npos)
        return ActivityKind::admin;
    if (t.find("outreach") != std::string::npos || t.find("call") != std::string::npos)
        return ActivityKind::outreach;
    if (t.find("email") != std::string::npos || t.find("mail") != std::string::npos)
        return ActivityKind::email;
    schema_violation("unrecognized activity kind '" + std::string(text) + "'", {field});
}

json to_json(const WeeklyPlan& plan)
{
    json days = json::array();
    for (auto d: plan.days)
        days.push_back(format_date(d));
    json activities = json::array();
    for (const auto& a: plan.activities)
        activities.push_back({
            {"date", format_date(a.date)},
            {"time", minute_text(a.minute_of_day)},
            {"kind", to_string(a.kind)},
            {"description", a.description},
            {"creates", a.creates},
            {"consults", a.consults},
            {"contacts", a.contacts},
            {"deliverable_id", a.deliverable_id},
        });
    return {{"week_index", plan.week_index}, {"days", days}, {"focus", plan.focus}, {"activities", activities}};
}

WeeklyPlan weekly_plan_from_json(const json& j, int week_index, const std::vector<Date>& days,
                                 const ObjectiveSet& objectives, const CollaboratorSet& collaborators)
{
    RecordReader r(j, "weekly plan");
    WeeklyPlan plan;
    plan.week_index = week_index;
    plan.days = days;
    plan.focus = r.optional_text("focus");
    const auto& list = r.array("activities");
    std::map<Date, int> last_minute;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& a = list[i];
        auto f = [&](const char* name) { return "activities[" + std::to_string(i) + "]." + name; };
        if (!a.is_object()) {
            r.mark_bad("activities[" + std::to_string(i) + "]");
            continue;
        }
        PlannedActivity act;
        try {
            act.date = parse_date(a.value("date", ""));
            if (std::find(days.begin(), days.end(), act.date) == days.end())
                r.mark_bad(f("date"));
        } catch (const Error&) {
            r.mark_bad(f("date"));
        }
        act.minute_of_day = parse_minute_of_day(trim(a.value("time", "")));
        if (act.minute_of_day < 0) {
            r.mark_bad(f("time"));
        } else {
            auto it = last_minute.find(act.date);
            if (it != last_minute.end() && act.minute_of_day <= it->second)
                r.mark_bad(f("time"));
            last_minute[act.date] = act.minute_of_day;
        }
        try {
            act.kind = activity_kind_from(a.value("kind", ""), f("kind"));
        } catch (const Error&) {
            r.mark_bad(f("kind"));
        }
        act.description = a.value("description", "");
        if (trim(act.description).empty())
            r.mark_bad(f("description"));
        for (const auto& p: string_list(a, "creates")) {
            auto n = normalize_logical_path(p);
            act.creates.push_back(n);
        }
        act.consults = string_list(a, "consults");
        for (const auto& c: string_list(a, "contacts")) {
            const auto* who = collaborators.resolve(c);
            if (!who) {
                r.mark_bad(f("contacts"));
                break;
            }
            act.contacts.push_back(who->collab_id);
        }
        if (a.contains("deliverable_id") && a["deliverable_id"].is_string())
            act.deliverable_id = trim(a["deliverable_id"].get<std::string>());
        if (!act.deliverable_id.empty() && !objectives.find(act.deliverable_id))
            r.mark_bad(f("deliverable_id"));
        plan.activities.push_back(std::move(act));
    }
    r.finish();
    std::stable_sort(plan.activities.begin(), plan.activities.end(), [](const auto& a, const auto& b) {
        return std::tie(a.date, a.minute_of_day) < std::tie(b.date, b.minute_of_day);
    });
    return plan;
}

namespace {

// Reads a persisted plan without re-validating it against setup records.
WeeklyPlan plan_record(const json& j)
{
    WeeklyPlan p;
    p.week_index = j.at("week_index").get<int>();
    for (const auto& d: j.at("days"))
        p.days.push_back(parse_date(d.get<std::string>()));
    p.focus = j.value("focus", "");
    for (const auto& a: j.at("activities")) {
        PlannedActivity act;
        act.date = parse_date(a.at("date").get<std::string>());
        act.minute_of_day = parse_minute_of_day(a.at("time").get<std::string>());
        act.kind = activity_kind_from(a.at("kind").get<std::string>());
        act.description = a.value("description", "");
        act.creates = string_list(a, "creates");
        act.consults = string_list(a, "consults");
        act.contacts = string_list(a, "contacts");
        act.deliverable_id = a.value("deliverable_id", "");
        p.activities.push_back(std::move(act));
    }
    return p;
}

}  // namespace

// ---------------------------------------------------------------------------

json to_json(const Message& m)
{
    return {
        {"message_id", m.message_id},
        {"sender", m.sender},
        {"recipient", m.recipient},
        {"sent_at", format_timestamp(m.sent_at)},
        {"deliver_at", m.deliver_at ? json(format_timestamp(*m.deliver_at)) : json(nullptr)},
        {"subject", m.subject},
        {"body", m.body},
        {"attachments", attachments_json(m.attachments)},
        {"in_reply_to", m.in_reply_to},
        {"surfaced_on", m.surfaced_on ? json(format_date(*m.surfaced_on)) : json(nullptr)},
    };
}

Message message_from_json(const json& j)
{
    Message m;
    m.message_id = j.at("message_id").get<std::string>();
    m.sender = j.at("sender").get<std::string>();
    m.recipient = j.at("recipient").get<std::string>();
    m.sent_at = parse_timestamp(j.at("sent_at").get<std::string>());
    if (j.contains("deliver_at") && j["deliver_at"].is_string())
        m.deliver_at = parse_timestamp(j["deliver_at"].get<std::string>());
    m.subject = j.value("subject", "");
    m.body = j.value("body", "");
    for (const auto& a: j.value("attachments", json::array()))
        m.attachments.push_back({a.at("filename").get<std::string>(), a.at("source").get<std::string>(),
                                 a.value("content_sha256", "")});
    m.in_reply_to = j.value("in_reply_to", "");
    if (j.contains("surfaced_on") && j["surfaced_on"].is_string())
        m.surfaced_on = parse_date(j["surfaced_on"].get<std::string>());
    return m;
}

json to_json(const TurnRecord& t)
{
    json calls = json::array();
    for (const auto& c: t.tool_calls)
        calls.push_back({{"name", c.name},
                         {"arguments", c.arguments},
                         {"ok", c.ok},
                         {"result", c.result},
                         {"error", c.error ? json(*c.error) : json(nullptr)}});
    json out {{"index", t.index}, {"role", t.role}};
    if (!t.collab_id.empty())
        out["collab_id"] = t.collab_id;
    out["time"] = format_timestamp(t.time);
    out["text"] = t.text;
    out["tool_calls"] = calls;
    out["error"] = t.error;
    return out;
}

TurnRecord turn_from_json(const json& j)
{
    TurnRecord t;
    t.index = j.at("index").get<int>();
    t.role = j.at("role").get<std::string>();
    t.collab_id = j.value("collab_id", "");
    t.time = parse_timestamp(j.at("time").get<std::string>());
    t.text = j.value("text", "");
    for (const auto& c: j.at("tool_calls")) {
        ToolLog log;
        log.name = c.at("name").get<std::string>();
        log.arguments = c.value("arguments", json::object());
        log.ok = c.at("ok").get<bool>();
        log.result = c.value("result", "");
        if (c.contains("error") && c["error"].is_string())
            log.error = c["error"].get<std::string>();
        t.tool_calls.push_back(std::move(log));
    }
    t.error = j.at("error").get<bool>();
    return t;
}

json to_json(const ActivityEntry& e)
{
    return {{"time", format_timestamp(e.time)},
            {"text", e.text},
            {"files_created", e.files_created},
            {"files_modified", e.files_modified}};
}

ActivityEntry activity_from_json(const json& j)
{
    ActivityEntry e;
    e.time = parse_timestamp(j.at("time").get<std::string>());
    e.text = j.at("text").get<std::string>();
    e.files_created = string_list(j, "files_created");
    e.files_modified = string_list(j, "files_modified");
    return e;
}

FileDiff diff_manifests(const json& before, const json& after)
{
    std::map<std::string, json> old_by_path;
    for (const auto& [id, e]: before.at("files").items())
        old_by_path[e.at("logical_path").get<std::string>()] = e;
    FileDiff d;
    for (const auto& [id, e]: after.at("files").items()) {
        auto path = e.at("logical_path").get<std::string>();
        auto it = old_by_path.find(path);
        if (it == old_by_path.end())
            d.added.push_back(path);
        else if (it->second.at("content_sha256") != e.at("content_sha256") ||
                 it->second.at("virtual_timestamp") != e.at("virtual_timestamp"))
            d.modified.push_back(path);
    }
    std::sort(d.added.begin(), d.added.end());
    std::sort(d.modified.begin(), d.modified.end());
    return d;
}

json to_json(const DayRecord& d)
{
    long long errors = std::count_if(d.turns.begin(), d.turns.end(), [](const TurnRecord& t) { return t.error; });
    return {
        {"date", format_date(d.date)},
        {"weekday", weekday_name(d.date)},
        {"week_index", d.week_index},
        {"turns", static_cast<long long>(d.turns.size())},
        {"error_turns", errors},
        {"messages_sent", d.messages_sent},
        {"messages_received", d.messages_received},
        {"file_diff", {{"added", d.file_diff.added}, {"modified", d.file_diff.modified}}},
        {"shares", d.shares},
        {"activity_entries", static_cast<long long>(d.activity_log.size())},
        {"finished", d.finished},
        {"truncated", d.truncated},
    };
}

json to_json(const RunTelemetry& t)
{
    return {
        {"turns_weekly_planning", t.turns_weekly_planning},
        {"turns_daily_execution", t.turns_daily_execution},
        {"turns_total", t.turns_total},
        {"error_turns", t.error_turns},
        {"error_rate", t.error_rate},
        {"messages_sent", t.messages_sent},
        {"messages_received", t.messages_received},
        {"communications_total", t.communications_total},
        {"turns_setup", t.turns_setup},
        {"wall_clock_seconds", t.wall_clock_seconds},
    };
}

RunTelemetry telemetry_from_json(const json& j)
{
    RunTelemetry t;
    t.turns_weekly_planning = j.at("turns_weekly_planning").get<long long>();
    t.turns_daily_execution = j.at("turns_daily_execution").get<long long>();
    t.turns_total = j.at("turns_total").get<long long>();
    t.error_turns = j.at("error_turns").get<long long>();
    t.error_rate = j.at("error_rate").get<double>();
    t.messages_sent = j.value("messages_sent", 0LL);
    t.messages_received = j.value("messages_received", 0LL);
    t.communications_total = j.at("communications_total").get<long long>();
    t.turns_setup = j.value("turns_setup", 0LL);
    t.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
    return t;
}

void validate_engine_config(const EngineConfig& c)
{
    if (c.working_days < 1)
        fail(ErrorCode::InvalidConfig, "working_days must be at least 1");
    if (c.day_turn_budget < 1 || c.global_turn_budget < 1 || c.planning_turn_budget < 1)
        fail(ErrorCode::InvalidConfig, "turn budgets must be positive");
    if (c.history_window < 0)
        fail(ErrorCode::InvalidConfig, "history_window must not be negative");
}

std::uint64_t fnv1a64(std::string_view text)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c: text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

Timestamp reply_delivery(Timestamp sent_at, double min_hours, double max_hours, std::uint64_t seed,
                         std::string_view message_id)
{
    auto lo = std::llround(min_hours * 60);
    auto hi = std::max(lo, std::llround(max_hours * 60));
    std::mt19937_64 rng(seed ^ fnv1a64(message_id));
    auto span = static_cast<std::uint64_t>(hi - lo);
    auto offset = static_cast<long long>(rng() % (span + 1));
    return sent_at + std::chrono::minutes {lo + offset};
}

// ---------------------------------------------------------------------------

Simulation::Simulation(SimulationInputs inputs, EngineConfig config, Gateway& gateway):
    _in(std::move(inputs)), _config(std::move(config)), _gateway(gateway)
{
    validate_engine_config(_config);
    if (_in.run_dir.empty())
        fail(ErrorCode::InvalidConfig, "simulation needs a run directory");
    _record.run_id = _in.run_id;
    _clock = at(first_working_day_from(_in.objectives.period_start), 8);
    for (const auto& [id, e]: _in.computer.manifest)
        if (id.size() == 5 && id[0] == 'w')
            _next_file = std::max(_next_file, std::stoi(id.substr(1)) + 1);

    auto occupation = to_lower(trim(_in.profile.occupation));
    auto skills = _config.skills;
    std::sort(skills.begin(), skills.end(), [](const auto& a, const auto& b) { return a.slug < b.slug; });
    for (const auto& s: skills)
        if (to_lower(trim(s.occupation)) == occupation) {
            _record.skill = s.slug;
            break;
        }
    fs::create_directories(_in.run_dir);
}

std::vector<std::vector<Date>> Simulation::weeks() const
{
    std::vector<std::vector<Date>> out;
    auto d = first_working_day_from(_in.objectives.period_start);
    for (int i = 0; i < _config.working_days; ++i) {
        if (out.empty() || is_monday(d))
            out.emplace_back();
        out.back().push_back(d);
        d = next_working_day(d);
    }
    return out;
}

GenerationResponse Simulation::call_gateway(const GenerationRequest& request)
{
    if (_turns_used >= _config.global_turn_budget)
        fail(ErrorCode::BudgetExhausted,
             "global turn budget of " + std::to_string(_config.global_turn_budget) + " turns exhausted");
    ++_turns_used;
    return _gateway.complete(request);
}

void Simulation::deliver(Message m)
{
    if (m.message_id.empty())
        m.message_id = numbered('m', _messages.size() + 1);
    _messages.push_back(std::move(m));
}

std::string Simulation::skill_text() const
{
    if (_record.skill.empty())
        return {};
    for (const auto& s: _config.skills)
        if (s.slug == _record.skill)
            return "SKILL (" + s.slug + "):\n" + s.text + "\n";
    return {};
}

std::string Simulation::manifest_summary() const
{
    std::vector<const ManifestEntry*> files;
    for (const auto& [id, e]: _in.computer.manifest)
        files.push_back(&e);
    std::sort(files.begin(), files.end(),
              [](const auto* a, const auto* b) { return a->logical_path < b->logical_path; });
    std::string out = "FILES (" + std::to_string(files.size()) + "):\n";
    std::size_t shown = 0;
    for (const auto* f: files) {
        if (++shown > 200) {
            out += "...\n";
            break;
        }
        out += f->logical_path + "  [" + format_timestamp(f->virtual_timestamp) + ", " + std::to_string(f->byte_size) +
               " bytes]\n";
    }
    return out;
}

std::string Simulation::activity_tail(Date date) const
{
    // sessions only see what earlier days persisted
    std::vector<json> rows;
    auto days_dir = _in.run_dir / "days";
    if (fs::is_directory(days_dir)) {
        std::vector<fs::path> dirs;
        for (const auto& e: fs::directory_iterator(days_dir))
            if (e.is_directory() && e.path().filename().string() < format_date(date))
                dirs.push_back(e.path());
        std::sort(dirs.begin(), dirs.end());
        for (const auto& d: dirs)
            for (auto& row: read_jsonl(d / "activity_log.jsonl"))
                rows.push_back(std::move(row));
    }
    std::string out;
    auto start = rows.size() > 10 ? rows.size() - 10 : 0;
    for (auto i = start; i < rows.size(); ++i)
        out += rows[i].value("time", "") + " " + rows[i].value("text", "") + "\n";
    return out;
}

std::vector<const Message*> Simulation::visible_inbox() const
{
    std::vector<const Message*> out;
    auto today = date_of(_clock);
    for (const auto& m: _messages)
        if (m.recipient == user_party && m.deliver_at && date_of(*m.deliver_at) <= today)
            out.push_back(&m);
    std::stable_sort(out.begin(), out.end(), [](const auto* a, const auto* b) { return *a->deliver_at < *b->deliver_at; });
    return out;
}

std::string Simulation::day_context(Date date, const WeeklyPlan& plan, const std::vector<const Message*>& fresh) const
{
    auto all_days = weeks();
    int day_index = 0, total = 0;
    for (const auto& w: all_days)
        for (auto d: w) {
            ++total;
            if (d <= date)
                ++day_index;
        }
    std::string s = "TASK: work-day\nDATE: " + format_date(date) + "\nWEEKDAY: " + std::string(weekday_name(date)) +
                    "\nDAY_INDEX: " + std::to_string(day_index) + " of " + std::to_string(total) + "\n\nUSER:\n" +
                    profile_summary(_in.profile) + "\n\nOBJECTIVES:\n";
    for (const auto& d: _in.objectives.deliverables) {
        s += d.deliverable_id + ": " + d.title + " (target " + format_date(d.target_date) + ")";
        if (!d.depends_on.empty()) {
            s += " depends on";
            for (const auto& x: d.depends_on)
                s += " " + x;
        }
        s += "\n";
        for (const auto& a: d.expected_artifacts)
            s += "  expected: " + a + "\n";
    }
    s += "\nCOLLABORATORS:\n";
    for (const auto& c: _in.collaborators.collaborators)
        s += c.collab_id + ": " + c.name + ", " + std::string(to_string(c.relationship)) +
             (c.title.empty() ? "" : " (" + c.title + ")") + ". " + c.communication_style + "\n";
    s += "\nTODAY'S PLAN:\n";
    for (const auto& a: plan.activities) {
        if (a.date != date)
            continue;
        s += minute_text(a.minute_of_day) + " " + std::string(to_string(a.kind)) +
             (a.deliverable_id.empty() ? "" : " [" + a.deliverable_id + "]") + " " + a.description;
        for (const auto& c: a.creates)
            s += "\n  creates: " + c;
        for (const auto& c: a.contacts)
            s += "\n  contact: " + c;
        s += "\n";
    }
    auto tail = activity_tail(date);
    if (!tail.empty())
        s += "\nRECENT ACTIVITY:\n" + tail;
    s += "\nNEW MESSAGES:\n";
    if (fresh.empty())
        s += "(none)\n";
    for (const auto* m: fresh) {
        s += m->message_id + " from " + m->sender + ": " + m->subject;
        if (!m->attachments.empty()) {
            s += " (attachments:";
            for (const auto& a: m->attachments)
                s += " " + a.filename;
            s += ")";
        }
        s += "\n";
    }
    s += "\n" + manifest_summary();
    auto skill = skill_text();
    if (!skill.empty())
        s += "\n" + skill;
    return s;
}

// ---------------------------------------------------------------------------
// Tools

namespace {

struct Resolved {
    std::string logical;
    fs::path host;
};

std::optional<Resolved> resolve_path(const SyntheticComputer& c, const std::string& raw)
{
    auto text = normalize_logical_path(trim(raw));
    LogicalPath lp;
    try {
        lp = parse_logical_path(text, c.os_style);
    } catch (const Error&) {
        return std::nullopt;
    }
    if (std::find(c.mounts.begin(), c.mounts.end(), lp.mount) == c.mounts.end())
        return std::nullopt;
    auto logical = format_logical_path(lp, c.os_style);
    return Resolved {logical, c.root / map_logical_path(logical, c.os_style)};
}

std::optional<std::string> text_arg(const json& args, const char* key)
{
    if (!args.is_object() || !args.contains(key))
        return std::nullopt;
    const auto& v = args[key];
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_null())
        return std::nullopt;
    return v.dump();
}

}  // namespace

ToolResult Simulation::handle_tool_call(const ToolCall& call)
{
    static const std::set<std::string, std::less<>> planning_tools {"list_dir", "read_file", "check_inbox"};
    static const std::set<std::string, std::less<>> all_tools {"list_dir",        "read_file",    "write_file",
                                                               "send_message",    "check_inbox",  "save_attachment",
                                                               "log_activity",    "finish_day"};
    if (!all_tools.count(call.name))
        return tool_error("unknown tool '" + call.name + "'", ErrorCode::UnknownTool);
    if (_planning && !planning_tools.count(call.name))
        return tool_error(call.name + " is not available while planning", ErrorCode::PreconditionViolation);
    const auto& args = call.arguments;
    if (call.name == "list_dir")
        return tool_list_dir(args);
    if (call.name == "read_file")
        return tool_read_file(args);
    if (call.name == "write_file")
        return tool_write_file(args);
    if (call.name == "send_message")
        return tool_send_message(args);
    if (call.name == "check_inbox")
        return tool_check_inbox();
    if (call.name == "save_attachment")
        return tool_save_attachment(args);
    if (call.name == "log_activity")
        return tool_log_activity(args);
    _finish_requested = true;
    return {true, "day finished", std::nullopt};
}

ToolResult Simulation::tool_list_dir(const json& args)
{
    auto raw = text_arg(args, "path");
    if (!raw)
        return tool_error("missing argument 'path'", ErrorCode::SchemaViolation);
    auto p = resolve_path(_in.computer, *raw);
    if (!p)
        return tool_error("path is outside the computer: " + *raw, ErrorCode::PathOutsideRoot);
    if (!fs::is_directory(p->host))
        return tool_error("no such directory: " + p->logical);
    std::vector<std::string> lines;
    for (const auto& e: fs::directory_iterator(p->host)) {
        auto name = e.path().filename().string();
        if (e.is_directory())
            lines.push_back(name + "/");
        else if (!ends_with(name, sidecar_suffix))
            lines.push_back(name + "  (" + std::to_string(e.file_size()) + " bytes)");
    }
    std::sort(lines.begin(), lines.end());
    std::string out = p->logical + ":\n";
    for (const auto& l: lines)
        out += l + "\n";
    return {true, out, std::nullopt};
}

ToolResult Simulation::tool_read_file(const json& args)
{
    auto raw = text_arg(args, "path");
    if (!raw)
        return tool_error("missing argument 'path'", ErrorCode::SchemaViolation);
    auto p = resolve_path(_in.computer, *raw);
    if (!p || ends_with(p->logical, sidecar_suffix))
        return tool_error("path is outside the computer: " + *raw, ErrorCode::PathOutsideRoot);
    if (!fs::is_regular_file(p->host))
        return tool_error("no such file: " + p->logical);
    return {true, clip(read_text(p->host), read_limit), std::nullopt};
}

void Simulation::record_file(const std::string& logical, const std::string& bytes, const std::string& origin,
                             const json& provenance)
{
    auto& c = _in.computer;
    auto physical = map_logical_path(logical, c.os_style);
    auto host = c.root / physical;
    fs::create_directories(host.parent_path());
    atomic_write_text(host, bytes);
    set_virtual_mtime(host, _clock);
    auto sha = sha256_hex(bytes);

    ManifestEntry* entry = nullptr;
    for (auto& [id, e]: c.manifest)
        if (e.logical_path == logical)
            entry = &e;
    bool created = entry == nullptr;
    if (created) {
        auto id = numbered('w', static_cast<std::size_t>(_next_file++));
        entry = &c.manifest[id];
        entry->file_id = id;
        entry->logical_path = logical;
        entry->physical_path = physical;
        entry->origin = origin;
        c.order.push_back(id);
    } else if (origin == "received") {
        entry->origin = origin;
    }
    entry->virtual_timestamp = _clock;
    entry->byte_size = bytes.size();
    entry->content_sha256 = sha;

    auto side_path = host;
    side_path += std::string(sidecar_suffix);
    json side = fs::exists(side_path) ? read_json(side_path) : json::object();
    side["file_id"] = entry->file_id;
    side["logical_path"] = logical;
    side["artifact_type"] = to_string(artifact_type_from_path(logical));
    side["origin"] = entry->origin;
    side["virtual_timestamp"] = format_timestamp(_clock);
    side["content_sha256"] = sha;
    if (!provenance.is_null())
        side["provenance"] = provenance;
    atomic_write_json(side_path, side);

    if (created)
        _created_today.insert(logical);
    auto& list = _created_today.count(logical) ? _pending_created : _pending_modified;
    if (std::find(list.begin(), list.end(), logical) == list.end())
        list.push_back(logical);
}

ToolResult Simulation::tool_write_file(const json& args)
{
    auto raw = text_arg(args, "path");
    auto content = text_arg(args, "content");
    if (!raw || !content)
        return tool_error("write_file needs 'path' and 'content'", ErrorCode::SchemaViolation);
    auto p = resolve_path(_in.computer, *raw);
    if (!p || ends_with(p->logical, sidecar_suffix))
        return tool_error("path is outside the writable computer: " + *raw, ErrorCode::PathOutsideRoot);
    if (is_mount_root(p->logical, _in.computer.os_style) || fs::is_directory(p->host))
        return tool_error("path is a directory: " + p->logical);
    for (auto parent = p->host.parent_path(); parent != _in.computer.root && !parent.empty(); parent = parent.parent_path())
        if (fs::exists(parent) && !fs::is_directory(parent))
            return tool_error("a parent of " + p->logical + " is a file");
    bool existed = fs::exists(p->host);
    record_file(p->logical, *content, "authored", nullptr);
    return {true, (existed ? "updated " : "created ") + p->logical + " (" + std::to_string(content->size()) + " bytes)",
            std::nullopt};
}

ToolResult Simulation::tool_send_message(const json& args)
{
    auto recipient = text_arg(args, "recipient");
    if (!recipient)
        recipient = text_arg(args, "to");
    if (!recipient)
        return tool_error("missing argument 'recipient'", ErrorCode::SchemaViolation);
    const auto* who = _in.collaborators.resolve(*recipient);
    if (!who)
        return tool_error("unknown recipient '" + *recipient + "'", ErrorCode::PreconditionViolation);
    auto body = text_arg(args, "body").value_or("");
    if (_config.blank_guard && trim(body).empty())
        return tool_error("message body is empty; nothing was sent", ErrorCode::EmptyMessageBlocked);

    Message m;
    m.message_id = numbered('m', _messages.size() + 1);
    m.sender = std::string(user_party);
    m.recipient = who->collab_id;
    m.sent_at = _clock;
    m.subject = text_arg(args, "subject").value_or("");
    m.body = body;
    json attach = args.is_object() && args.contains("attach") ? args["attach"] : json::array();
    if (attach.is_string())
        attach = json::array({attach});
    if (!attach.is_array())
        return tool_error("'attach' must be a list of paths", ErrorCode::SchemaViolation);
    for (const auto& a: attach) {
        if (!a.is_string())
            return tool_error("'attach' must be a list of paths", ErrorCode::SchemaViolation);
        auto p = resolve_path(_in.computer, a.get<std::string>());
        if (!p)
            return tool_error("attachment is outside the computer: " + a.get<std::string>(), ErrorCode::PathOutsideRoot);
        if (!fs::is_regular_file(p->host))
            return tool_error("no such file: " + p->logical);
        m.attachments.push_back({p->host.filename().string(), p->logical, sha256_hex(read_text(p->host))});
    }
    auto id = m.message_id;
    _messages.push_back(std::move(m));
    if (_day)
        _day->messages_sent.push_back(id);
    return {true, "sent " + id + " to " + who->collab_id, std::nullopt};
}

ToolResult Simulation::tool_check_inbox()
{
    json list = json::array();
    for (const auto* m: visible_inbox()) {
        json names = json::array();
        for (const auto& a: m->attachments)
            names.push_back(a.filename);
        list.push_back({{"message_id", m->message_id},
                        {"from", m->sender},
                        {"delivered", format_timestamp(*m->deliver_at)},
                        {"subject", m->subject},
                        {"body", m->body},
                        {"attachments", names}});
    }
    return {true, list.dump(), std::nullopt};
}

ToolResult Simulation::tool_save_attachment(const json& args)
{
    auto id = text_arg(args, "message_id");
    if (!id)
        return tool_error("missing argument 'message_id'", ErrorCode::SchemaViolation);
    const Message* msg = nullptr;
    for (const auto* m: visible_inbox())
        if (m->message_id == *id)
            msg = m;
    if (!msg)
        return tool_error("no message '" + *id + "' in the inbox", ErrorCode::UnknownMessageId);
    long long index = 0;
    if (args.contains("index")) {
        if (args["index"].is_number_integer())
            index = args["index"].get<long long>();
        else if (args["index"].is_string())
            index = std::atoll(args["index"].get<std::string>().c_str());
    }
    if (index < 0 || index >= static_cast<long long>(msg->attachments.size()))
        return tool_error("message " + *id + " has no attachment " + std::to_string(index),
                          ErrorCode::PreconditionViolation);
    const auto& att = msg->attachments[static_cast<std::size_t>(index)];
    auto dest = text_arg(args, "dest");
    if (!dest)
        return tool_error("missing argument 'dest'", ErrorCode::SchemaViolation);
    auto p = resolve_path(_in.computer, *dest);
    if (p && (is_mount_root(p->logical, _in.computer.os_style) || fs::is_directory(p->host) ||
              ends_with(trim(*dest), "/") || ends_with(trim(*dest), "\\")))
        p = resolve_path(_in.computer, p->logical + (ends_with(p->logical, "/") ? "" : "/") + att.filename);
    if (!p || ends_with(p->logical, sidecar_suffix))
        return tool_error("destination is outside the computer: " + *dest, ErrorCode::PathOutsideRoot);
    if (fs::is_directory(p->host))
        return tool_error("destination is a directory: " + p->logical);

    std::string bytes;
    constexpr std::string_view prefix = "private:";
    if (att.source.rfind(prefix, 0) == 0) {
        auto rel = att.source.substr(prefix.size());
        auto slash = rel.find('/');
        auto path = private_file_path(_in.computer.private_store, rel.substr(0, slash), rel.substr(slash + 1));
        if (!fs::is_regular_file(path))
            return tool_error("attachment content is unavailable");
        bytes = read_text(path);
    } else {
        auto src = resolve_path(_in.computer, att.source);
        if (!src || !fs::is_regular_file(src->host))
            return tool_error("attachment content is unavailable");
        bytes = read_text(src->host);
    }
    json provenance {{"kind", "shared_attachment"}, {"message_id", msg->message_id}, {"source", att.source}};
    record_file(p->logical, bytes, "received", provenance);
    if (_day)
        _day->shares.push_back({{"message_id", msg->message_id},
                                {"source", att.source},
                                {"dest", p->logical},
                                {"time", format_timestamp(_clock)}});
    return {true, "saved " + att.filename + " to " + p->logical, std::nullopt};
}

ToolResult Simulation::tool_log_activity(const json& args)
{
    auto text = text_arg(args, "text");
    if (!text || trim(*text).empty())
        return tool_error("log_activity needs non-empty 'text'", ErrorCode::SchemaViolation);
    if (!_day)
        return tool_error("no day in progress", ErrorCode::PreconditionViolation);
    ActivityEntry e {_clock, *text, _pending_created, _pending_modified};
    _pending_created.clear();
    _pending_modified.clear();
    _day->activity_log.push_back(std::move(e));
    return {true, "logged", std::nullopt};
}

// ---------------------------------------------------------------------------

WeeklyPlan Simulation::plan_week(int week_index, const std::vector<Date>& days)
{
    if (days.empty())
        fail(ErrorCode::PreconditionViolation, "a week needs at least one day");
    auto turns_path = _in.run_dir / "weeks" / ("week_" + std::to_string(week_index) + ".turns.jsonl");
    fs::create_directories(turns_path.parent_path());
    fs::remove(turns_path);

    std::string context = "TASK: weekly-plan-context\nUSER:\n" + profile_summary(_in.profile) + "\n\nOBJECTIVES:\n";
    for (const auto& d: _in.objectives.deliverables) {
        context += d.deliverable_id + ": " + d.title + " (target " + format_date(d.target_date) + ")\n" + d.description + "\n";
        for (const auto& m: d.milestones)
            context += "  W" + std::to_string(m.week_index) + ": " + m.summary + "\n";
    }
    context += "\nCOLLABORATORS:\n";
    for (const auto& c: _in.collaborators.collaborators)
        context += c.collab_id + ": " + c.name + ", " + std::string(to_string(c.relationship)) + "\n";
    auto tail = activity_tail(days.front());
    if (!tail.empty())
        context += "\nRECENT ACTIVITY:\n" + tail;
    context += "\n" + manifest_summary();
    auto skill = skill_text();
    if (!skill.empty())
        context += "\n" + skill;

    std::string header = "TASK: weekly-plan\nWEEK: " + std::to_string(week_index) +
                         "\nWEEK_START: " + format_date(days.front()) + "\n";
    for (std::size_t i = 0; i < days.size(); ++i)
        header += "DAY" + std::to_string(i + 1) + ": " + format_date(days[i]) + "\n";

    _planning = true;
    struct PlanningGuard {
        bool& flag;
        ~PlanningGuard() { flag = false; }
    } guard {_planning};

    std::vector<ChatMessage> history;
    std::vector<ToolResultEntry> last_results;
    for (int k = 0; k < _config.planning_turn_budget; ++k) {
        _clock = std::max(_clock, turn_time(days.front(), 8, k, 59));
        GenerationRequest request;
        request.role_label = std::string(roles::work_agent);
        request.system_context = std::string(planning_prompt);
        request.schema_hint = "weekly_plan";
        request.max_turn_budget = _config.planning_turn_budget;
        request.messages.push_back({"user", context});
        for (const auto& h: history)
            request.messages.push_back(h);
        request.messages.push_back({"user", header + "TURN: " + std::to_string(k) + "\n"});
        request.tool_results = last_results;

        auto response = call_gateway(request);
        TurnRecord turn;
        turn.index = k;
        turn.role = std::string(roles::work_agent);
        turn.time = _clock;
        turn.text = response.text;
        if (response.tool_calls.empty()) {
            append_jsonl(turns_path, to_json(turn));
            auto plan = weekly_plan_from_json(parse_model_json(response.text, "weekly plan"), week_index, days,
                                              _in.objectives, _in.collaborators);
            atomic_write_json(_in.run_dir / "weeks" / ("week_" + std::to_string(week_index) + ".json"), to_json(plan));
            _record.weekly_plans.push_back(plan);
            return plan;
        }
        std::string calls_text = response.text;
        last_results.clear();
        for (const auto& call: response.tool_calls) {
            auto r = handle_tool_call(call);
            turn.error = turn.error || !r.ok;
            turn.tool_calls.push_back({call.name, call.arguments, r.ok, clip(r.text, log_result_limit),
                                       r.error ? std::optional<std::string>(std::string(to_string(*r.error))) : std::nullopt});
            calls_text += "\nCALL " + call.name + " " + call.arguments.dump();
            last_results.push_back({call.name, clip(r.text, log_result_limit)});
        }
        append_jsonl(turns_path, to_json(turn));
        history.push_back({"assistant", calls_text});
        if (static_cast<int>(history.size()) > _config.history_window)
            history.erase(history.begin());
    }
    schema_violation("no weekly plan within " + std::to_string(_config.planning_turn_budget) + " planning turns",
                     {"weekly_plan"});
}

std::vector<Message> Simulation::collaborator_turn(const Collaborator& c)
{
    std::vector<Message*> pending;
    for (auto& m: _messages)
        if (m.recipient == c.collab_id && !m.deliver_at)
            pending.push_back(&m);
    if (pending.empty())
        return {};
    for (auto* m: pending)
        m->deliver_at = m->sent_at;
    const Message last = *pending.back();

    std::string system = "You are " + c.name + " (" + std::string(to_string(c.relationship)) +
                         (c.title.empty() ? "" : ", " + c.title) + ").\nBACKGROUND: " + c.background +
                         "\nSTYLE: " + c.communication_style + "\nKNOWLEDGE: " + c.knowledge +
                         "\nReply to the user's messages in character with one JSON object {subject, body, "
                         "attach[filenames of your private files to share]} or {\"skip\": true}.\n";
    for (std::size_t i = 0; i < c.private_files.size(); ++i) {
        const auto& f = c.private_files[i];
        system += "PRIVATE_FILE_" + std::to_string(i + 1) + ": " + f.filename + "\n";
        auto path = private_file_path(_in.computer.private_store, c.collab_id, f.filename);
        if (fs::is_regular_file(path))
            system += clip(read_text(path), private_excerpt_limit) + "\n";
    }

    std::string thread = "THREAD:\n";
    for (const auto& m: _messages) {
        if (!((m.sender == c.collab_id && m.recipient == user_party) ||
              (m.sender == user_party && m.recipient == c.collab_id)))
            continue;
        thread += "[" + m.message_id + " " + format_timestamp(m.sent_at) + " " + m.sender + " -> " + m.recipient +
                  "] " + m.subject + "\n" + m.body + "\n";
        for (const auto& a: m.attachments) {
            thread += "  attachment: " + a.filename + "\n";
            if (m.sender == user_party) {
                auto p = resolve_path(_in.computer, a.source);
                if (p && fs::is_regular_file(p->host))
                    thread += clip(read_text(p->host), private_excerpt_limit) + "\n";
            }
        }
    }
    std::string task = "TASK: collaborator-reply\nCOLLABORATOR: " + c.collab_id + "\nDATE: " +
                       format_date(date_of(_clock)) + "\nPENDING: " + std::to_string(pending.size()) +
                       "\nREPLY_TO: " + last.message_id + "\nSUBJECT: " + last.subject + "\n\n" + last.body + "\n";

    GenerationRequest request;
    request.role_label = std::string(roles::collaborator);
    request.system_context = system;
    request.schema_hint = "collaborator_reply";
    request.messages.push_back({"user", thread});
    request.messages.push_back({"user", task});
    auto response = call_gateway(request);

    if (_day) {
        TurnRecord turn;
        turn.index = static_cast<int>(_day->turns.size());
        turn.role = std::string(roles::collaborator);
        turn.collab_id = c.collab_id;
        turn.time = _clock;
        turn.text = response.text;
        _day->turns.push_back(std::move(turn));
    }

    auto body = parse_model_json(response.text, "collaborator reply");
    if (!body.is_object())
        schema_violation("collaborator reply must be an object", {"<object>"});
    if (body.value("skip", false))
        return {};
    RecordReader r(body, "collaborator reply");
    Message reply;
    reply.subject = r.optional_text("subject", "Re: " + last.subject);
    reply.body = r.optional_text("body");
    auto attach = r.optional_texts("attach");
    r.finish();
    for (const auto& name: attach) {
        auto it = std::find_if(c.private_files.begin(), c.private_files.end(),
                               [&](const PrivateFile& f) { return f.filename == name; });
        if (it == c.private_files.end())
            schema_violation(c.collab_id + " cannot attach unknown file '" + name + "'", {"attach"});
        auto path = private_file_path(_in.computer.private_store, c.collab_id, name);
        reply.attachments.push_back({name, "private:" + c.collab_id + "/" + name,
                                     fs::is_regular_file(path) ? sha256_hex(read_text(path)) : std::string()});
    }
    if (trim(reply.body).empty() && reply.attachments.empty())
        schema_violation("collaborator reply is empty", {"body"});
    reply.message_id = numbered('m', _messages.size() + 1);
    reply.sender = c.collab_id;
    reply.recipient = std::string(user_party);
    reply.sent_at = reply_delivery(last.sent_at, c.latency_min_hours, c.latency_max_hours, _config.seed, last.message_id);
    reply.deliver_at = reply.sent_at;
    reply.in_reply_to = last.message_id;
    _messages.push_back(reply);
    return {reply};
}

void Simulation::process_replies()
{
    for (const auto& c: _in.collaborators.collaborators)
        collaborator_turn(c);
}

void Simulation::persist_messages() const
{
    std::string text;
    for (const auto& m: _messages)
        text += to_json(m).dump() + "\n";
    atomic_write_text(_in.run_dir / "messages.jsonl", text);
}

void Simulation::persist_day(const DayRecord& day) const
{
    auto dir = _in.run_dir / "days" / format_date(day.date);
    fs::create_directories(dir);
    std::string turns, log;
    for (const auto& t: day.turns)
        turns += to_json(t).dump() + "\n";
    for (const auto& e: day.activity_log)
        log += to_json(e).dump() + "\n";
    atomic_write_text(dir / "turns.jsonl", turns);
    atomic_write_text(dir / "activity_log.jsonl", log);
    atomic_write_json(dir / "day.json", to_json(day));
}

DayRecord Simulation::run_day(Date date, const WeeklyPlan& plan)
{
    if (!is_working_day(date))
        fail(ErrorCode::PreconditionViolation, format_date(date) + " is not a working day");
    if (std::find(plan.days.begin(), plan.days.end(), date) == plan.days.end())
        fail(ErrorCode::PreconditionViolation, format_date(date) + " is not covered by the weekly plan");

    DayRecord day;
    day.date = date;
    day.week_index = plan.week_index;
    _day = &day;
    _pending_created.clear();
    _pending_modified.clear();
    _created_today.clear();
    _finish_requested = false;
    _clock = std::max(_clock, at(date, 9));
    auto before = manifest_to_json(_in.computer);

    std::vector<const Message*> fresh;
    for (auto& m: _messages)
        if (m.recipient == user_party && m.deliver_at && date_of(*m.deliver_at) <= date && !m.surfaced_on) {
            m.surfaced_on = date;
            day.messages_received.push_back(m.message_id);
            fresh.push_back(&m);
        }
    auto context = day_context(date, plan, fresh);

    auto close = [&] {
        if (!_pending_created.empty() || !_pending_modified.empty())
            day.activity_log.push_back({_clock, "(unlogged file changes)", _pending_created, _pending_modified});
        _pending_created.clear();
        _pending_modified.clear();
        day.file_diff = diff_manifests(before, manifest_to_json(_in.computer));
        save_manifest(_in.computer);
        persist_messages();
        persist_day(day);
        _record.days.push_back(day);
        _day = nullptr;
    };

    try {
        std::vector<ChatMessage> history;
        std::vector<ToolResultEntry> last_results;
        for (int k = 0;; ++k) {
            if (k >= _config.day_turn_budget) {
                day.truncated = true;
                break;
            }
            _clock = std::max(_clock, turn_time(date, 9, k, 8 * 60 + 59));
            GenerationRequest request;
            request.role_label = std::string(roles::work_agent);
            request.system_context = std::string(work_prompt);
            request.schema_hint = "work_turn";
            request.max_turn_budget = _config.day_turn_budget;
            request.messages.push_back({"user", context});
            for (const auto& h: history)
                request.messages.push_back(h);
            request.messages.push_back({"user", "DATE: " + format_date(date) + "\nTURN: " + std::to_string(k) + "\n"});
            request.tool_results = last_results;

            auto response = call_gateway(request);
            TurnRecord turn;
            turn.index = static_cast<int>(day.turns.size());
            turn.role = std::string(roles::work_agent);
            turn.time = _clock;
            turn.text = response.text;
            if (response.tool_calls.empty()) {
                day.turns.push_back(std::move(turn));
                day.finished = true;
                break;
            }
            std::string calls_text = response.text;
            last_results.clear();
            for (const auto& call: response.tool_calls) {
                auto r = handle_tool_call(call);
                turn.error = turn.error || !r.ok;
                turn.tool_calls.push_back({call.name, call.arguments, r.ok, clip(r.text, log_result_limit),
                                           r.error ? std::optional<std::string>(std::string(to_string(*r.error)))
                                                   : std::nullopt});
                calls_text += "\nCALL " + call.name + " " + call.arguments.dump();
                last_results.push_back({call.name, clip(r.text, log_result_limit)});
                if (_finish_requested)
                    break;
            }
            day.turns.push_back(std::move(turn));
            if (_finish_requested) {
                day.finished = true;
                break;
            }
            history.push_back({"assistant", calls_text});
            if (static_cast<int>(history.size()) > _config.history_window)
                history.erase(history.begin());
        }
        _clock = std::max(_clock, at(date, 18));
        process_replies();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::BudgetExhausted) {
            day.truncated = true;
            _record.truncated = true;
        }
        close();
        throw;
    }
    close();
    return _record.days.back();
}

void Simulation::persist_summary(double wall_clock_seconds) const
{
    json weeks = json::array();
    for (const auto& w: _record.weekly_plans)
        weeks.push_back({{"week_index", w.week_index},
                         {"first_day", format_date(w.days.front())},
                         {"days", static_cast<long long>(w.days.size())},
                         {"activities", static_cast<long long>(w.activities.size())}});
    json days = json::array();
    for (const auto& d: _record.days)
        days.push_back(to_json(d));
    json sim {
        {"run_id", _record.run_id},
        {"period", {{"start", format_date(first_working_day_from(_in.objectives.period_start))},
                    {"working_days", _config.working_days}}},
        {"seed", _config.seed},
        {"weeks", weeks},
        {"days", days},
        {"truncated", _record.truncated},
        {"skill", _record.skill.empty() ? json(nullptr) : json(_record.skill)},
        {"no_skill_match", !_config.skills.empty() && _record.skill.empty()},
        {"final_manifest", manifest_to_json(_in.computer)},
        {"wall_clock_seconds", wall_clock_seconds},
    };
    atomic_write_json(_in.run_dir / "simulation.json", sim);
    atomic_write_json(_in.run_dir / "telemetry.json", to_json(compute_telemetry(_in.run_dir)));
}

SimulationRecord Simulation::run()
{
    auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count(); };
    _record.weekly_plans.clear();
    _record.days.clear();
    _record.truncated = false;
    try {
        auto all = weeks();
        for (std::size_t w = 0; w < all.size(); ++w) {
            auto plan = plan_week(static_cast<int>(w + 1), all[w]);
            for (auto d: all[w])
                run_day(d, plan);
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::BudgetExhausted)
            _record.truncated = true;
        _record.final_manifest = manifest_to_json(_in.computer);
        persist_summary(elapsed());
        throw;
    }
    _record.final_manifest = manifest_to_json(_in.computer);
    persist_summary(elapsed());
    _record.telemetry = compute_telemetry(_in.run_dir);
    return _record;
}

SimulationRecord run_simulation(SimulationInputs inputs, const EngineConfig& config, Gateway& gateway)
{
    Simulation sim(std::move(inputs), config, gateway);
    return sim.run();
}

// ---------------------------------------------------------------------------

std::vector<Message> load_messages(const fs::path& run_dir)
{
    std::vector<Message> out;
    for (const auto& row: read_jsonl(run_dir / "messages.jsonl")) {
        try {
            out.push_back(message_from_json(row));
        } catch (const std::exception& e) {
            fail(ErrorCode::LogCorrupt, std::string("messages.jsonl: ") + e.what(), {"messages.jsonl"});
        }
    }
    return out;
}

namespace {

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories)
{
    std::vector<fs::path> out;
    if (!fs::is_directory(dir))
        return out;
    for (const auto& e: fs::directory_iterator(dir))
        if (directories ? e.is_directory() : e.is_regular_file())
            out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<TurnRecord> load_turns(const fs::path& file)
{
    std::vector<TurnRecord> turns;
    auto rows = read_jsonl(file);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        try {
            turns.push_back(turn_from_json(rows[i]));
        } catch (const std::exception& e) {
            fail(ErrorCode::LogCorrupt, file.filename().string() + ": " + e.what(), {file.filename().string()});
        }
        if (turns.back().index != static_cast<int>(i))
            fail(ErrorCode::LogCorrupt, file.filename().string() + ": turn indices are not contiguous",
                 {file.filename().string()});
    }
    return turns;
}

}  // namespace

SimulationRecord load_simulation(const fs::path& run_dir)
{
    if (!fs::exists(run_dir / "simulation.json"))
        fail(ErrorCode::StageMissing, "no simulation record in the run", {"simulation.json"});
    SimulationRecord rec;
    try {
        auto sim = read_json(run_dir / "simulation.json");
        rec.run_id = sim.at("run_id").get<std::string>();
        rec.truncated = sim.value("truncated", false);
        if (sim.contains("skill") && sim["skill"].is_string())
            rec.skill = sim["skill"].get<std::string>();
        rec.final_manifest = sim.value("final_manifest", json::object());
        for (const auto& f: sorted_entries(run_dir / "weeks", false)) {
            auto name = f.filename().string();
            if (ends_with(name, ".json") && !ends_with(name, ".turns.jsonl"))
                rec.weekly_plans.push_back(plan_record(read_json(f)));
        }
        std::sort(rec.weekly_plans.begin(), rec.weekly_plans.end(),
                  [](const auto& a, const auto& b) { return a.week_index < b.week_index; });
        for (const auto& dir: sorted_entries(run_dir / "days", true)) {
            auto summary = read_json(dir / "day.json");
            DayRecord d;
            d.date = parse_date(summary.at("date").get<std::string>());
            d.week_index = summary.value("week_index", 1);
            d.turns = load_turns(dir / "turns.jsonl");
            for (const auto& row: read_jsonl(dir / "activity_log.jsonl"))
                d.activity_log.push_back(activity_from_json(row));
            d.messages_sent = string_list(summary, "messages_sent");
            d.messages_received = string_list(summary, "messages_received");
            d.file_diff.added = string_list(summary.at("file_diff"), "added");
            d.file_diff.modified = string_list(summary.at("file_diff"), "modified");
            d.shares = summary.value("shares", json::array());
            d.truncated = summary.value("truncated", false);
            d.finished = summary.value("finished", false);
            rec.days.push_back(std::move(d));
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::LogCorrupt)
            throw;
        fail(ErrorCode::LogCorrupt, std::string("simulation logs: ") + e.what());
    } catch (const std::exception& e) {
        fail(ErrorCode::LogCorrupt, std::string("simulation logs: ") + e.what());
    }
    rec.telemetry = compute_telemetry(run_dir);
    return rec;
}

RunTelemetry compute_telemetry(const fs::path& run_dir)
{
    RunTelemetry t;
    for (const auto& f: sorted_entries(run_dir / "weeks", false))
        if (ends_with(f.filename().string(), ".turns.jsonl"))
            for (const auto& turn: load_turns(f)) {
                ++t.turns_weekly_planning;
                t.error_turns += turn.error;
            }
    for (const auto& dir: sorted_entries(run_dir / "days", true))
        for (const auto& turn: load_turns(dir / "turns.jsonl")) {
            ++t.turns_daily_execution;
            t.error_turns += turn.error;
        }
    t.turns_total = t.turns_weekly_planning + t.turns_daily_execution;
    t.error_rate = t.turns_total == 0 ? 0.0 : static_cast<double>(t.error_turns) / static_cast<double>(t.turns_total);
    for (const auto& m: load_messages(run_dir)) {
        if (m.sender == user_party)
            ++t.messages_sent;
        else if (m.recipient == user_party && m.surfaced_on)
            ++t.messages_received;
    }
    t.communications_total = t.messages_sent + t.messages_received;

    if (fs::exists(run_dir / "stages.json")) {
        try {
            auto stages = read_json(run_dir / "stages.json").value("stages", json::object());
            for (const char* name: {"profile", "policy", "plan", "computer", "objectives", "collaborators"})
                if (stages.contains(name))
                    t.turns_setup += stages[name].value("gateway_calls", 0LL);
        } catch (const std::exception& e) {
            fail(ErrorCode::LogCorrupt, std::string("stages.json: ") + e.what(), {"stages.json"});
        }
    }
    if (fs::exists(run_dir / "simulation.json")) {
        try {
            t.wall_clock_seconds = read_json(run_dir / "simulation.json").value("wall_clock_seconds", 0.0);
        } catch (const std::exception& e) {
            fail(ErrorCode::LogCorrupt, std::string("simulation.json: ") + e.what(), {"simulation.json"});
        }
    }
    return t;
}

}  // namespace scs
