// SPDX-License-Identifier: Apache-2.0
#include "scs/setup.hpp"

#include "scs/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

namespace scs {

namespace {

constexpr std::string_view objectives_prompt =
    "You design a month of realistic, valuable work for the user of this computer. Respond with one JSON object: "
    "period{start,working_days}, deliverables[{deliverable_id,title,description,target_date (YYYY-MM-DD),"
    "milestones[{week,summary}],expected_artifacts[logical paths],depends_on[deliverable ids]}].";

constexpr std::string_view collaborators_prompt =
    "You create the people the user works with during the period. Respond with one JSON object: "
    "collaborators[{name,relationship (manager|peer|direct_report|client|compliance|external),title,background,"
    "communication_style,knowledge,response_latency_hours{min,max},private_files[{filename,description,"
    "planted_discrepancy?,content?}]}]. Private files are reference material only that collaborator holds.";

std::string field(std::size_t i, std::string_view name)
{
    return "deliverables[" + std::to_string(i) + "]." + std::string(name);
}

Date next_monday_after(Date d)
{
    d += std::chrono::days {1};
    while (!is_monday(d))
        d += std::chrono::days {1};
    return d;
}

Date week_start(Date d)
{
    // sys_days epoch (1970-01-01) was a Thursday
    auto n = d.time_since_epoch().count();
    auto weekday = ((n % 7) + 7 + 3) % 7;  // 0 = Monday
    return d - std::chrono::days {weekday};
}

bool plain_filename(const std::string& name)
{
    if (name.empty() || name == "." || name == ".." || name.find_first_of("/\\:") != std::string::npos)
        return false;
    if (name.size() >= sidecar_suffix.size() &&
        name.compare(name.size() - sidecar_suffix.size(), sidecar_suffix.size(), sidecar_suffix) == 0)
        return false;
    return std::none_of(name.begin(), name.end(), [](char c) { return static_cast<unsigned char>(c) < 0x20; });
}

int week_number(const json& m)
{
    for (const char* key: {"week_index", "week"}) {
        if (!m.contains(key))
            continue;
        const auto& v = m[key];
        if (v.is_number_integer())
            return v.get<int>();
        if (v.is_string()) {
            // "W2", "2", "Week 2"
            std::string digits;
            for (char c: v.get<std::string>())
                if (std::isdigit(static_cast<unsigned char>(c)))
                    digits += c;
            if (!digits.empty() && digits.size() < 4)
                return std::stoi(digits);
        }
    }
    return 0;
}

}  // namespace

std::vector<Date> ObjectiveSet::working_dates() const
{
    std::vector<Date> out;
    if (working_days <= 0)
        return out;
    auto d = first_working_day_from(period_start);
    for (int i = 0; i < working_days; ++i) {
        out.push_back(d);
        d = next_working_day(d);
    }
    return out;
}

Date ObjectiveSet::period_end() const
{
    auto dates = working_dates();
    return dates.empty() ? period_start : dates.back();
}

int ObjectiveSet::week_count() const
{
    std::set<Date> weeks;
    for (auto d: working_dates())
        weeks.insert(week_start(d));
    return static_cast<int>(weeks.size());
}

const Deliverable* ObjectiveSet::find(std::string_view id) const
{
    for (const auto& d: deliverables)
        if (d.deliverable_id == id)
            return &d;
    return nullptr;
}

json to_json(const ObjectiveSet& o)
{
    json list = json::array();
    for (const auto& d: o.deliverables) {
        json milestones = json::array();
        for (const auto& m: d.milestones)
            milestones.push_back({{"week_index", m.week_index}, {"summary", m.summary}});
        list.push_back({
            {"deliverable_id", d.deliverable_id},
            {"title", d.title},
            {"description", d.description},
            {"target_date", format_date(d.target_date)},
            {"milestones", milestones},
            {"expected_artifacts", d.expected_artifacts},
            {"depends_on", d.depends_on},
        });
    }
    return {
        {"period", {{"start", format_date(o.period_start)}, {"working_days", o.working_days}, {"end", format_date(o.period_end())}}},
        {"deliverables", list},
    };
}

namespace {

Deliverable deliverable_from_json(const json& j, std::size_t i, RecordReader& outer)
{
    Deliverable d;
    if (!j.is_object()) {
        outer.mark_bad("deliverables[" + std::to_string(i) + "]");
        return d;
    }
    auto str = [&](std::initializer_list<const char*> keys, const char* name, bool required) {
        for (const char* k: keys)
            if (j.contains(k) && j[k].is_string() && !trim(j[k].get<std::string>()).empty())
                return trim(j[k].get<std::string>());
        if (required)
            outer.mark_bad(field(i, name));
        return std::string();
    };
    d.deliverable_id = str({"deliverable_id", "id"}, "deliverable_id", true);
    d.title = str({"title"}, "title", true);
    d.description = str({"description"}, "description", true);
    auto target = str({"target_date", "target"}, "target_date", true);
    if (!target.empty()) {
        try {
            d.target_date = date_of(parse_timestamp(target));
        } catch (const Error&) {
            outer.mark_bad(field(i, "target_date"));
        }
    }
    if (j.contains("milestones") && j["milestones"].is_array()) {
        for (const auto& m: j["milestones"]) {
            if (m.is_object())
                d.milestones.push_back({week_number(m), m.value("summary", "")});
            else
                outer.mark_bad(field(i, "milestones"));
        }
    }
    auto list = [&](const char* key, std::vector<std::string>& out) {
        if (!j.contains(key) || j[key].is_null())
            return;
        if (!j[key].is_array()) {
            outer.mark_bad(field(i, key));
            return;
        }
        for (const auto& v: j[key]) {
            if (!v.is_string())
                outer.mark_bad(field(i, key));
            else
                out.push_back(trim(v.get<std::string>()));
        }
    };
    std::vector<std::string> artifacts;
    list("expected_artifacts", artifacts);
    for (auto& a: artifacts)
        d.expected_artifacts.push_back(normalize_logical_path(a));
    list("depends_on", d.depends_on);
    return d;
}

}  // namespace

void validate_objectives(const ObjectiveSet& o, OsStyle os)
{
    if (o.working_days <= 0)
        fail(ErrorCode::InvalidConfig, "period must have at least one working day");
    std::vector<std::string> bad;
    if (o.deliverables.empty())
        bad.emplace_back("deliverables");
    std::set<std::string> ids;
    auto end = o.period_end();
    auto weeks = o.week_count();
    for (std::size_t i = 0; i < o.deliverables.size(); ++i) {
        const auto& d = o.deliverables[i];
        if (!ids.insert(d.deliverable_id).second)
            bad.push_back(field(i, "deliverable_id"));
        if (d.target_date < o.period_start || d.target_date > end)
            bad.push_back(field(i, "target_date"));
        if (d.expected_artifacts.empty())
            bad.push_back(field(i, "expected_artifacts"));
        for (const auto& a: d.expected_artifacts)
            if (!is_valid_logical_path(a, os) || is_mount_root(a, os)) {
                bad.push_back(field(i, "expected_artifacts"));
                break;
            }
        for (const auto& m: d.milestones)
            if (m.week_index < 1 || m.week_index > weeks) {
                bad.push_back(field(i, "milestones"));
                break;
            }
    }
    for (std::size_t i = 0; i < o.deliverables.size(); ++i)
        for (const auto& dep: o.deliverables[i].depends_on)
            if (!ids.count(dep)) {
                bad.push_back(field(i, "depends_on"));
                break;
            }
    if (!bad.empty())
        schema_violation("objectives do not validate", bad);

    // depth-first search for a dependency cycle
    std::map<std::string, int> state;  // 1 visiting, 2 done
    std::vector<std::string> stack;
    std::function<void(const Deliverable&)> visit = [&](const Deliverable& d) {
        state[d.deliverable_id] = 1;
        stack.push_back(d.deliverable_id);
        for (const auto& dep: d.depends_on) {
            if (state[dep] == 1) {
                auto from = std::find(stack.begin(), stack.end(), dep);
                std::vector<std::string> cycle(from, stack.end());
                fail(ErrorCode::DependencyCycle, "deliverable dependencies form a cycle", cycle);
            }
            if (state[dep] == 0)
                visit(*o.find(dep));
        }
        stack.pop_back();
        state[d.deliverable_id] = 2;
    };
    for (const auto& d: o.deliverables)
        if (state[d.deliverable_id] == 0)
            visit(d);
}

ObjectiveSet objectives_from_json(const json& j, OsStyle os)
{
    RecordReader r(j, "objectives");
    ObjectiveSet o;
    const auto& period = r.object("period");
    if (period.contains("start") && period["start"].is_string()) {
        try {
            o.period_start = parse_date(period["start"].get<std::string>());
        } catch (const Error&) {
            r.mark_bad("period.start");
        }
    } else if (r.has("period")) {
        r.mark_bad("period.start");
    }
    if (period.contains("working_days") && period["working_days"].is_number_integer())
        o.working_days = period["working_days"].get<int>();
    else if (r.has("period"))
        r.mark_bad("period.working_days");
    const auto& list = r.array("deliverables");
    for (std::size_t i = 0; i < list.size(); ++i)
        o.deliverables.push_back(deliverable_from_json(list[i], i, r));
    r.finish();
    validate_objectives(o, os);
    return o;
}

ObjectiveSet create_objectives(const UserProfile& profile, const SyntheticComputer& computer, Gateway& gateway,
                               const ObjectivesConfig& config)
{
    if (config.working_days <= 0)
        fail(ErrorCode::InvalidConfig, "working_days must be positive");

    std::optional<Date> newest;
    for (const auto& [id, e]: computer.manifest)
        if (!newest || date_of(e.virtual_timestamp) > *newest)
            newest = date_of(e.virtual_timestamp);
    auto fallback = newest ? next_monday_after(*newest) : Date {};

    std::string msg = "TASK: objectives\nworking_days: " + std::to_string(config.working_days);
    if (config.start)
        msg += "\nperiod_start: " + format_date(*config.start);
    else if (newest)
        msg += "\nsuggested_start: " + format_date(fallback);
    msg += "\n\nPROFILE:\n" + profile_summary(profile) + "\n\nFILES:\n";
    for (const auto& id: computer.order) {
        const auto& e = computer.manifest.at(id);
        msg += e.logical_path + " (" + format_timestamp(e.virtual_timestamp) + ")\n";
    }

    GenerationRequest request;
    request.role_label = std::string(roles::setup_agent);
    request.system_context = std::string(objectives_prompt);
    request.schema_hint = "objectives";
    request.messages.push_back({"user", msg});
    auto body = parse_model_json(gateway.complete(request).text, "objectives");
    if (!body.is_object())
        schema_violation("objectives response is not an object", {"<object>"});

    // the configuration owns the period; the backend may only supply a start
    std::optional<Date> start = config.start;
    if (!start && body.contains("period") && body["period"].is_object() && body["period"].contains("start") &&
        body["period"]["start"].is_string()) {
        try {
            start = parse_date(body["period"]["start"].get<std::string>());
        } catch (const Error&) {
            schema_violation("objectives period start is not a date", {"period.start"});
        }
    }
    if (!start) {
        if (!newest)
            schema_violation("no period start from configuration, backend, or computer", {"period.start"});
        start = fallback;
    }
    body["period"] = {{"start", format_date(first_working_day_from(*start))}, {"working_days", config.working_days}};
    return objectives_from_json(body, computer.os_style);
}

// ---------------------------------------------------------------------------

std::string_view to_string(Relationship r)
{
    switch (r) {
    case Relationship::manager: return "manager";
    case Relationship::peer: return "peer";
    case Relationship::direct_report: return "direct_report";
    case Relationship::client: return "client";
    case Relationship::compliance: return "compliance";
    case Relationship::external: return "external";
    }
    return "peer";
}

Relationship relationship_from(std::string_view text, const std::string& f)
{
    auto t = to_lower(trim(text));
    std::replace(t.begin(), t.end(), '-', '_');
    std::replace(t.begin(), t.end(), ' ', '_');
    auto has = [&](std::string_view w) { return t.find(w) != std::string::npos; };
    if (has("direct_report") || has("report") || has("junior") || has("associate") || has("subordinate"))
        return Relationship::direct_report;
    if (has("manager") || has("director") || has("boss") || has("supervisor") || has("cio") || has("chief"))
        return Relationship::manager;
    if (has("compliance") || has("regulat") || has("legal"))
        return Relationship::compliance;
    if (has("client") || has("customer"))
        return Relationship::client;
    if (has("external") || has("vendor") || has("partner") || has("supplier"))
        return Relationship::external;
    if (has("peer") || has("colleague") || has("coworker") || has("teammate"))
        return Relationship::peer;
    schema_violation("unrecognized relationship '" + std::string(text) + "'", {f});
}

const Collaborator* CollaboratorSet::find(std::string_view collab_id) const
{
    for (const auto& c: collaborators)
        if (c.collab_id == collab_id)
            return &c;
    return nullptr;
}

const Collaborator* CollaboratorSet::resolve(std::string_view id_or_name) const
{
    if (const auto* c = find(id_or_name))
        return c;
    auto want = to_lower(trim(id_or_name));
    for (const auto& c: collaborators)
        if (to_lower(c.name) == want || c.collab_id == slugify(want))
            return &c;
    return nullptr;
}

json to_json(const Collaborator& c)
{
    json files = json::array();
    for (const auto& f: c.private_files)
        files.push_back({{"filename", f.filename}, {"artifact_type", to_string(f.artifact_type)}, {"description", f.description}});
    return {
        {"collab_id", c.collab_id},
        {"name", c.name},
        {"relationship", to_string(c.relationship)},
        {"title", c.title},
        {"background", c.background},
        {"communication_style", c.communication_style},
        {"knowledge", c.knowledge},
        {"response_latency_hours", {{"min", c.latency_min_hours}, {"max", c.latency_max_hours}}},
        {"private_files", files},
    };
}

json to_json(const CollaboratorSet& set)
{
    json list = json::array();
    for (const auto& c: set.collaborators)
        list.push_back(to_json(c));
    return {{"collaborators", list}};
}

namespace {

void read_latency(const json& j, Collaborator& c, RecordReader& r, const std::string& prefix)
{
    const json* lat = nullptr;
    for (const char* key: {"response_latency_hours", "response_latency", "latency_hours"})
        if (j.contains(key)) {
            lat = &j[key];
            break;
        }
    if (!lat) {
        r.mark_bad(prefix + "response_latency_hours");
        return;
    }
    bool ok = false;
    if (lat->is_array() && lat->size() == 2 && (*lat)[0].is_number() && (*lat)[1].is_number()) {
        c.latency_min_hours = (*lat)[0].get<double>();
        c.latency_max_hours = (*lat)[1].get<double>();
        ok = true;
    } else if (lat->is_object() && lat->contains("min") && lat->contains("max") && (*lat)["min"].is_number() &&
               (*lat)["max"].is_number()) {
        c.latency_min_hours = (*lat)["min"].get<double>();
        c.latency_max_hours = (*lat)["max"].get<double>();
        ok = true;
    }
    if (!ok || !(c.latency_min_hours > 0) || !(c.latency_max_hours >= c.latency_min_hours) ||
        !std::isfinite(c.latency_max_hours))
        r.mark_bad(prefix + "response_latency_hours");
}

}  // namespace

CollaboratorSet collaborators_from_json(const json& j, bool strict)
{
    RecordReader r(j, "collaborators");
    const auto& list = r.array("collaborators");
    CollaboratorSet set;
    if (list.empty() && r.problems().empty())
        schema_violation("at least one collaborator is required", {"collaborators"});
    if (strict && list.size() > max_collaborators)
        schema_violation("more than 12 collaborators", {"collaborators"});
    std::set<std::string> ids;
    for (std::size_t i = 0; i < list.size() && i < max_collaborators; ++i) {
        const auto& item = list[i];
        std::string prefix = "collaborators[" + std::to_string(i) + "].";
        if (!item.is_object()) {
            r.mark_bad(prefix.substr(0, prefix.size() - 1));
            continue;
        }
        RecordReader cr(item, "collaborator");
        Collaborator c;
        c.name = trim(cr.text("name"));
        c.collab_id = item.contains("collab_id") && item["collab_id"].is_string() ? item["collab_id"].get<std::string>()
                                                                                 : slugify(c.name);
        auto rel = cr.text("relationship");
        if (!rel.empty()) {
            try {
                c.relationship = relationship_from(rel);
            } catch (const Error&) {
                cr.mark_bad("relationship");
            }
        }
        c.title = cr.optional_text("title", rel);
        c.background = cr.text("background");
        c.communication_style = cr.text("communication_style");
        c.knowledge = cr.optional_text("knowledge");
        for (const auto& p: cr.problems())
            r.mark_bad(prefix + p);
        read_latency(item, c, r, prefix);
        if (c.collab_id.empty() || c.collab_id != slugify(c.collab_id) || !ids.insert(c.collab_id).second)
            r.mark_bad(prefix + "collab_id");

        std::set<std::string> names;
        const json files = item.value("private_files", json::array());
        if (!files.is_array())
            r.mark_bad(prefix + "private_files");
        for (const auto& f: files.is_array() ? files : json::array()) {
            PrivateFile pf;
            if (f.is_object() && f.contains("filename") && f["filename"].is_string())
                pf.filename = trim(f["filename"].get<std::string>());
            if (!plain_filename(pf.filename)) {
                r.mark_bad(prefix + "private_files.filename");
                continue;
            }
            if (!names.insert(pf.filename).second) {
                r.mark_bad(prefix + "private_files.duplicate");
                continue;
            }
            pf.artifact_type = artifact_type_from_path(pf.filename);
            pf.description = f.value("description", "");
            if (f.contains("planted_discrepancy") && f["planted_discrepancy"].is_string())
                pf.planted_discrepancy = f["planted_discrepancy"].get<std::string>();
            c.private_files.push_back(std::move(pf));
        }
        set.collaborators.push_back(std::move(c));
    }
    r.finish();
    return set;
}

fs::path private_file_path(const fs::path& private_store, std::string_view collab_id, std::string_view filename)
{
    return private_store / std::string(collab_id) / std::string(filename);
}

std::string profile_summary(const UserProfile& p)
{
    std::string s = p.identity.full_name + " (" + p.identity.username + "), " + p.occupation;
    if (!p.organization.empty())
        s += " at " + p.organization;
    s += "\nResponsibilities: ";
    for (std::size_t i = 0; i < p.responsibilities.size(); ++i)
        s += (i ? "; " : "") + p.responsibilities[i];
    s += "\nCurrent projects: ";
    for (std::size_t i = 0; i < p.current_projects.size(); ++i)
        s += (i ? "; " : "") + p.current_projects[i];
    if (!p.collaborators.empty()) {
        s += "\nKnown contacts: ";
        for (std::size_t i = 0; i < p.collaborators.size(); ++i)
            s += (i ? "; " : "") + p.collaborators[i].name + " (" + p.collaborators[i].relationship + ")";
    }
    s += "\nNaming: " + p.naming_preferences + "\nOrganization: " + p.organization_style;
    return s;
}

CollaboratorSet create_collaborators(const UserProfile& profile, const ObjectiveSet& objectives, Gateway& gateway,
                                     const SyntheticComputer& computer)
{
    validate_objectives(objectives, computer.os_style);
    if (computer.private_store.empty())
        fail(ErrorCode::PreconditionViolation, "computer has no private store");
    if (!paths_disjoint(computer.root, computer.private_store))
        fail(ErrorCode::PreconditionViolation, "private store overlaps the computer root");

    std::string msg = "TASK: collaborators\n\nPROFILE:\n" + profile_summary(profile) + "\n\nDELIVERABLES:\n";
    for (const auto& d: objectives.deliverables)
        msg += d.deliverable_id + ": " + d.title + " (target " + format_date(d.target_date) + ")\n" + d.description + "\n";

    GenerationRequest request;
    request.role_label = std::string(roles::setup_agent);
    request.system_context = std::string(collaborators_prompt);
    request.schema_hint = "collaborators";
    request.messages.push_back({"user", msg});
    auto body = parse_model_json(gateway.complete(request).text, "collaborators");
    auto set = collaborators_from_json(body, false);

    // inline content, keyed by collaborator index and filename
    const auto& raw = body["collaborators"];
    auto summary = profile_summary(profile);
    for (std::size_t i = 0; i < set.collaborators.size(); ++i) {
        const auto& c = set.collaborators[i];
        std::map<std::string, json> inline_content;
        for (const auto& f: raw[i].value("private_files", json::array()))
            if (f.is_object() && f.contains("content") && f.contains("filename") && f["filename"].is_string())
                inline_content[trim(f["filename"].get<std::string>())] = f["content"];
        for (const auto& pf: c.private_files) {
            ArtifactContent content;
            auto it = inline_content.find(pf.filename);
            if (it != inline_content.end()) {
                try {
                    content = content_from_json(it->second, pf.artifact_type);
                } catch (const Error& e) {
                    schema_violation("private file " + c.collab_id + "/" + pf.filename + ": " + e.what(),
                                     {"collaborators[" + std::to_string(i) + "].private_files.content"});
                }
            } else {
                ArtifactRequest ar;
                ar.file_id = c.collab_id + "/" + pf.filename;
                ar.path = "private:" + c.collab_id + "/" + pf.filename;
                ar.artifact_type = pf.artifact_type;
                ar.timestamp = at(objectives.period_start, 9);
                ar.origin = "received";
                ar.description = pf.description + (pf.planted_discrepancy.empty() ? "" : "\nPlanted flaw: " + pf.planted_discrepancy) +
                                 "\nHeld by " + c.name + " (" + std::string(to_string(c.relationship)) + ")";
                ar.user_summary = summary;
                content = synthesize_artifact(ar, gateway);
            }
            auto bytes = render_canonical(content);
            auto path = private_file_path(computer.private_store, c.collab_id, pf.filename);
            atomic_write_text(path, bytes);
            json side {
                {"collab_id", c.collab_id},
                {"filename", pf.filename},
                {"artifact_type", to_string(pf.artifact_type)},
                {"description", pf.description},
                {"content_sha256", sha256_hex(bytes)},
            };
            if (!pf.planted_discrepancy.empty())
                side["planted_discrepancy"] = pf.planted_discrepancy;
            auto side_path = path;
            side_path += std::string(sidecar_suffix);
            atomic_write_json(side_path, side);
        }
    }
    return set;
}

}  // namespace scs
