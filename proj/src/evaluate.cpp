// SPDX-License-Identifier: Apache-2.0
#include "scs/evaluate.hpp"

#include "scs/error.hpp"
#include "scs/layout.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace scs {

namespace {

constexpr std::size_t artifact_excerpt_limit = 6000;
constexpr std::size_t message_excerpt_limit = 600;

constexpr std::string_view rubric_prompt =
    "You are the judge. Write a draft rubric for what a good solution to these objectives should satisfy. Answer "
    "with one JSON object {\"items\":[{\"text\",\"points\" (integer >= 1),\"source\" "
    "(spec|interaction|expertise|reference|quality),\"deliverable_id\"}]}.";

constexpr std::string_view merge_prompt =
    "You are the judge. Merge the draft rubrics into one final rubric, combining items that state the same "
    "requirement. Answer with {\"items\":[{\"text\",\"points\",\"source\",\"deliverable_id\",\"sources\":[draft item "
    "ids]}]}.";

constexpr std::string_view score_prompt =
    "You are the judge. Score the final deliverables against every rubric item. Partial credit is allowed. Answer "
    "with {\"awards\":[{\"item_id\",\"awarded\" (integer 0..points),\"rationale\"}]}.";

constexpr std::string_view retrospective_prompt =
    "You are the analyst. Write a retrospective report on the whole trajectory: what the agent did well, where it "
    "failed, and which behaviors are useful learning signals. Answer with {\"sections\":{<key>: {\"text\", "
    "\"evidence\": {\"turns\": [\"YYYY-MM-DD#k\"], \"messages\": [message ids], \"paths\": [logical paths]}}}} for "
    "the keys executive_summary, per_deliverable_analysis, collaborator_communication_analysis, "
    "workflow_efficiency, domain_insights, recommendations, score_summary.";

std::string clip(const std::string& text, std::size_t limit)
{
    if (text.size() <= limit)
        return text;
    auto cut = limit;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80)
        --cut;
    return text.substr(0, cut) + "\n[truncated]";
}

std::string pct(double value)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", value);
    return buf;
}

std::string tally_text(const Tally& t)
{
    return std::to_string(t.awarded) + " / " + std::to_string(t.possible) + " (" + pct(t.percentage()) + ")";
}

template <class F>
auto load_file(const fs::path& run_dir, std::string_view name, F&& parse)
{
    auto path = run_dir / std::string(name);
    if (!fs::exists(path))
        fail(ErrorCode::StageMissing, std::string(name) + " is missing from the run", {std::string(name)});
    try {
        return parse(path);
    } catch (const Error& e) {
        fail(ErrorCode::ValidationFailed, std::string(name) + " does not validate: " + e.what(), {std::string(name)});
    } catch (const std::exception& e) {
        fail(ErrorCode::ValidationFailed, std::string(name) + " does not validate: " + e.what(), {std::string(name)});
    }
}

GenerationRequest judge_request(std::string_view role, std::string_view system, std::string schema)
{
    GenerationRequest r;
    r.role_label = std::string(role);
    r.system_context = std::string(system);
    r.schema_hint = std::move(schema);
    return r;
}

std::string item_line(const RubricItem& item)
{
    return item.item_id + " [" + (item.deliverable_id.empty() ? std::string(general_key) : item.deliverable_id) +
           ", " + std::string(to_string(item.source)) + ", " + std::to_string(item.points) + "pt] " + item.text + "\n";
}

json items_of(const json& body, const char* context)
{
    if (body.is_array())
        return body;
    if (!body.is_object() || !body.contains("items") || !body["items"].is_array())
        schema_violation(std::string(context) + " must be an object with an items list", {"items"});
    return body["items"];
}

// Reads the common item fields; problems go to `r` under "items[i].<field>".
RubricItem read_item(const json& j, std::size_t i, RecordReader& r)
{
    auto field = [&](const char* name) { return "items[" + std::to_string(i) + "]." + name; };
    RubricItem item;
    if (!j.is_object()) {
        r.mark_bad("items[" + std::to_string(i) + "]");
        return item;
    }
    item.text = trim(j.value("text", ""));
    if (item.text.empty())
        r.mark_bad(field("text"));
    const auto& p = j.contains("points") ? j["points"] : json();
    if (p.is_number_integer() && p.get<long long>() >= 1 && p.get<long long>() <= 1000)
        item.points = p.get<int>();
    else if (p.is_number_float() && p.get<double>() >= 1 && p.get<double>() == static_cast<int>(p.get<double>()))
        item.points = static_cast<int>(p.get<double>());
    else
        r.mark_bad(field("points"));
    try {
        item.source = rubric_source_from(j.value("source", ""), field("source"));
    } catch (const Error&) {
        r.mark_bad(field("source"));
    }
    if (j.contains("deliverable_id") && j["deliverable_id"].is_string())
        item.deliverable_id = trim(j["deliverable_id"].get<std::string>());
    if (to_lower(item.deliverable_id) == general_key)
        item.deliverable_id.clear();
    return item;
}

std::string numbered_id(const char* prefix, std::size_t n)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%si%03zu", prefix, n);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

RunView load_run_view(const fs::path& run_dir)
{
    RunView v;
    v.run_dir = run_dir;
    v.profile = load_file(run_dir, layout::profile, [](const fs::path& p) { return profile_from_json(read_json(p)); });
    if (!fs::exists(run_dir / std::string(layout::computer) / "manifest.json"))
        fail(ErrorCode::StageMissing, "the run has no computer", {std::string(layout::computer)});
    v.computer = load_computer(run_dir / std::string(layout::computer), run_dir / std::string(layout::private_store));
    auto os = v.computer.os_style;
    v.objectives = load_file(run_dir, layout::objectives,
                             [os](const fs::path& p) { return objectives_from_json(read_json(p), os); });
    v.collaborators = load_file(run_dir, layout::collaborators,
                                [](const fs::path& p) { return collaborators_from_json(read_json(p)); });
    v.simulation = load_simulation(run_dir);
    v.messages = load_messages(run_dir);
    v.run_id = v.simulation.run_id;
    return v;
}

// ---------------------------------------------------------------------------

std::string_view to_string(RubricSource source)
{
    switch (source) {
    case RubricSource::spec: return "spec";
    case RubricSource::interaction: return "interaction";
    case RubricSource::expertise: return "expertise";
    case RubricSource::reference: return "reference";
    case RubricSource::quality: return "quality";
    }
    return "spec";
}

RubricSource rubric_source_from(std::string_view text, const std::string& field)
{
    auto t = to_lower(trim(text));
    for (auto s: all_rubric_sources)
        if (t == to_string(s))
            return s;
    schema_violation("unknown rubric source '" + std::string(text) + "'", {field});
}

int Rubric::total_points() const
{
    int sum = 0;
    for (const auto& i: items)
        sum += i.points;
    return sum;
}

const RubricItem* Rubric::find(std::string_view item_id) const
{
    for (const auto& i: items)
        if (i.item_id == item_id)
            return &i;
    return nullptr;
}

std::map<RubricSource, int> Rubric::source_mix() const
{
    std::map<RubricSource, int> mix;
    for (auto s: all_rubric_sources)
        mix[s] = 0;
    for (const auto& i: items)
        ++mix[i.source];
    return mix;
}

json to_json(const Rubric& rubric)
{
    json mix = json::object();
    for (const auto& [s, n]: rubric.source_mix())
        mix[std::string(to_string(s))] = n;
    json items = json::array();
    for (const auto& i: rubric.items) {
        json item {{"item_id", i.item_id},
                   {"text", i.text},
                   {"points", i.points},
                   {"source", to_string(i.source)},
                   {"deliverable_id", i.deliverable_id.empty() ? json(nullptr) : json(i.deliverable_id)}};
        if (!i.sources.empty())
            item["sources"] = i.sources;
        items.push_back(std::move(item));
    }
    return {{"total_items", static_cast<long long>(rubric.items.size())},
            {"total_points", rubric.total_points()},
            {"source_mix", mix},
            {"flagged_keys", rubric.flagged_keys},
            {"items", items}};
}

Rubric rubric_from_json(const json& j)
{
    RecordReader r(j, "rubric");
    const auto& list = r.array("items");
    Rubric rubric;
    for (std::size_t i = 0; i < list.size(); ++i) {
        auto item = read_item(list[i], i, r);
        if (list[i].is_object()) {
            item.item_id = list[i].value("item_id", "");
            if (item.item_id.empty())
                r.mark_bad("items[" + std::to_string(i) + "].item_id");
            if (list[i].contains("sources") && list[i]["sources"].is_array())
                for (const auto& s: list[i]["sources"])
                    if (s.is_string())
                        item.sources.push_back(s.get<std::string>());
        }
        rubric.items.push_back(std::move(item));
    }
    if (j.contains("flagged_keys") && j["flagged_keys"].is_array())
        for (const auto& k: j["flagged_keys"])
            if (k.is_string())
                rubric.flagged_keys.push_back(k.get<std::string>());
    if (j.contains("total_points") && j["total_points"].is_number_integer() &&
        j["total_points"].get<long long>() != rubric.total_points())
        r.mark_bad("total_points");
    r.finish();
    validate_rubric(rubric);
    return rubric;
}

void validate_rubric(const Rubric& rubric, const ObjectiveSet* objectives)
{
    std::vector<std::string> bad;
    std::set<std::string> ids;
    if (rubric.items.empty())
        bad.push_back("items");
    for (std::size_t i = 0; i < rubric.items.size(); ++i) {
        const auto& item = rubric.items[i];
        auto f = [&](const char* name) { return "items[" + std::to_string(i) + "]." + name; };
        if (item.points < 1)
            bad.push_back(f("points"));
        if (trim(item.text).empty())
            bad.push_back(f("text"));
        if (!ids.insert(item.item_id).second)
            bad.push_back(f("item_id"));
        if (objectives && !item.deliverable_id.empty() && !objectives->find(item.deliverable_id))
            bad.push_back(f("deliverable_id"));
    }
    if (!bad.empty())
        schema_violation("rubric does not validate", bad);
}

// ---------------------------------------------------------------------------

std::string judge_context(const RunView& run)
{
    std::string s = "USER:\n" + profile_summary(run.profile) + "\n\nOBJECTIVES:\n";
    for (const auto& d: run.objectives.deliverables) {
        s += d.deliverable_id + ": " + d.title + " (target " + format_date(d.target_date) + ")\n" + d.description + "\n";
        for (const auto& m: d.milestones)
            s += "  W" + std::to_string(m.week_index) + ": " + m.summary + "\n";
        for (const auto& a: d.expected_artifacts)
            s += "  expected: " + a + "\n";
    }
    s += "\nCOLLABORATOR EXPECTATIONS:\n";
    for (const auto& c: run.collaborators.collaborators) {
        s += c.collab_id + ": " + c.name + ", " + std::string(to_string(c.relationship)) +
             (c.title.empty() ? "" : " (" + c.title + ")") + "\n  knows: " + c.knowledge +
             "\n  style: " + c.communication_style + "\n";
        for (const auto& m: run.messages)
            if (m.sender == c.collab_id)
                s += "  [" + m.message_id + "] " + m.subject + ": " + clip(m.body, message_excerpt_limit) + "\n";
    }
    s += "\nDELIVERABLE CONTENTS:\n";
    std::set<std::string> seen;
    for (const auto& d: run.objectives.deliverables)
        for (const auto& a: d.expected_artifacts) {
            if (!seen.insert(a).second)
                continue;
            s += "=== " + a + " (" + d.deliverable_id + ") ===\n";
            const auto* e = run.computer.find_by_path(a);
            auto host = e ? run.computer.root / e->physical_path : fs::path();
            if (e && fs::is_regular_file(host))
                s += clip(read_text(host), artifact_excerpt_limit) + "\n";
            else
                s += "(missing)\n";
        }
    return s;
}

Rubric draft_rubric(const RunView& run, int draft_index, Gateway& gateway)
{
    auto request = judge_request(roles::judge, rubric_prompt, "rubric");
    request.messages.push_back({"user", judge_context(run)});
    request.messages.push_back({"user", "TASK: rubric-draft\nRUN: " + run.run_id + "\nDRAFT: " +
                                            std::to_string(draft_index) + "\n"});
    auto response = gateway.complete(request);
    auto body = parse_model_json(response.text, "rubric draft");
    auto list = items_of(body, "rubric draft");
    const json none = json::object();
    RecordReader r(none, "rubric draft");
    Rubric rubric;
    auto prefix = "d" + std::to_string(draft_index) + ":";
    for (std::size_t i = 0; i < list.size(); ++i) {
        auto item = read_item(list[i], i, r);
        item.item_id = numbered_id(prefix.c_str(), i + 1);
        if (!item.deliverable_id.empty() && !run.objectives.find(item.deliverable_id))
            r.mark_bad("items[" + std::to_string(i) + "].deliverable_id");
        rubric.items.push_back(std::move(item));
    }
    if (list.empty())
        r.mark_bad("items");
    r.finish();
    validate_rubric(rubric, &run.objectives);
    return rubric;
}

Rubric merge_rubrics(const std::vector<Rubric>& drafts, Gateway& gateway)
{
    if (drafts.size() < 2)
        fail(ErrorCode::TooFewDrafts, "merging needs at least two draft rubrics, got " + std::to_string(drafts.size()));

    // key -> number of drafts mentioning it, in first-seen order
    std::vector<std::string> keys;
    std::map<std::string, int> presence;
    std::map<std::string, const RubricItem*> by_id;
    std::size_t total = 0;
    for (const auto& d: drafts) {
        validate_rubric(d);
        std::set<std::string> here;
        for (const auto& item: d.items) {
            if (!by_id.emplace(item.item_id, &item).second)
                schema_violation("draft item id '" + item.item_id + "' appears in two drafts", {item.item_id});
            if (here.insert(item.deliverable_id).second) {
                if (!presence.count(item.deliverable_id))
                    keys.push_back(item.deliverable_id);
                ++presence[item.deliverable_id];
            }
        }
        total += d.items.size();
    }

    Rubric merged;
    std::string listing = "TASK: rubric-merge\nDRAFTS: " + std::to_string(drafts.size()) + "\nITEMS: " +
                          std::to_string(total) + "\n";
    for (const auto& key: keys) {
        auto name = key.empty() ? std::string(general_key) : key;
        if (!key.empty() && 2 * presence[key] < static_cast<int>(drafts.size()))
            merged.flagged_keys.push_back(key);
        listing += "\nKEY: " + name + " (in " + std::to_string(presence[key]) + " of " +
                   std::to_string(drafts.size()) + " drafts)\n";
        for (const auto& d: drafts)
            for (const auto& item: d.items)
                if (item.deliverable_id == key)
                    listing += item_line(item);
    }

    auto request = judge_request(roles::judge, merge_prompt, "rubric_merge");
    request.messages.push_back({"user", listing});
    auto response = gateway.complete(request);
    auto list = items_of(parse_model_json(response.text, "merged rubric"), "merged rubric");

    const json none = json::object();
    RecordReader r(none, "merged rubric");
    for (std::size_t i = 0; i < list.size(); ++i) {
        auto f = [&](const char* name) { return "items[" + std::to_string(i) + "]." + name; };
        auto item = read_item(list[i], i, r);
        item.item_id = numbered_id("", i + 1);
        std::set<std::string> source_keys;
        if (list[i].is_object() && list[i].contains("sources") && list[i]["sources"].is_array()) {
            for (const auto& s: list[i]["sources"]) {
                auto id = s.is_string() ? trim(s.get<std::string>()) : std::string();
                auto it = by_id.find(id);
                if (it == by_id.end()) {
                    r.mark_bad(f("sources"));
                    continue;
                }
                if (std::find(item.sources.begin(), item.sources.end(), id) == item.sources.end())
                    item.sources.push_back(id);
                source_keys.insert(it->second->deliverable_id);
            }
        }
        if (item.sources.empty()) {
            r.mark_bad(f("sources"));
        } else {
            bool given = list[i].is_object() && list[i].contains("deliverable_id") &&
                         list[i]["deliverable_id"].is_string();
            if (!given)
                item.deliverable_id = by_id.at(item.sources.front())->deliverable_id;
            else if (!source_keys.count(item.deliverable_id))
                r.mark_bad(f("deliverable_id"));
        }
        merged.items.push_back(std::move(item));
    }
    if (list.empty())
        r.mark_bad("items");
    if (list.size() > total)
        r.mark_bad("items.count");
    r.finish();
    validate_rubric(merged);
    return merged;
}

// ---------------------------------------------------------------------------

json to_json(const ScoreReport& report)
{
    auto tally = [](const Tally& t) {
        return json {{"awarded", t.awarded}, {"possible", t.possible}, {"percentage", t.percentage()}};
    };
    json per_deliverable = json::object();
    for (const auto& [k, t]: report.per_deliverable)
        per_deliverable[k] = tally(t);
    json per_item = json::object();
    for (const auto& [k, v]: report.per_item)
        per_item[k] = v;
    json rationale = json::object();
    for (const auto& [k, v]: report.rationale)
        rationale[k] = v;
    return {{"aggregate", tally(report.aggregate)},
            {"per_deliverable", per_deliverable},
            {"per_item", per_item},
            {"rationale", rationale}};
}

ScoreReport score_from_json(const json& j)
{
    ScoreReport s;
    auto tally = [](const json& t) { return Tally {t.at("awarded").get<long long>(), t.at("possible").get<long long>()}; };
    s.aggregate = tally(j.at("aggregate"));
    for (const auto& [k, t]: j.at("per_deliverable").items())
        s.per_deliverable[k] = tally(t);
    for (const auto& [k, v]: j.at("per_item").items())
        s.per_item[k] = v.get<int>();
    const json rationale = j.value("rationale", json::object());
    for (const auto& [k, v]: rationale.items())
        s.rationale[k] = v.get<std::string>();
    long long sum = 0;
    for (const auto& [k, v]: s.per_item)
        sum += v;
    if (sum != s.aggregate.awarded)
        schema_violation("aggregate does not equal the per-item sum", {"aggregate.awarded"});
    return s;
}

ScoreReport aggregate_scores(const Rubric& rubric, const std::map<std::string, int>& awards)
{
    std::vector<std::string> bad;
    for (const auto& [id, v]: awards)
        if (!rubric.find(id))
            bad.push_back("awards." + id);
    ScoreReport report;
    for (const auto& item: rubric.items) {
        auto it = awards.find(item.item_id);
        if (it == awards.end() || it->second < 0 || it->second > item.points) {
            bad.push_back("awards." + item.item_id);
            continue;
        }
        report.per_item[item.item_id] = it->second;
        auto key = item.deliverable_id.empty() ? std::string(general_key) : item.deliverable_id;
        report.per_deliverable[key].awarded += it->second;
        report.per_deliverable[key].possible += item.points;
        report.aggregate.awarded += it->second;
        report.aggregate.possible += item.points;
    }
    if (!bad.empty())
        schema_violation("score awards do not match the rubric", bad);
    return report;
}

ScoreReport score_run(const Rubric& rubric, const RunView& run, Gateway& gateway)
{
    validate_rubric(rubric);
    std::string listing = "RUBRIC (" + std::to_string(rubric.items.size()) + " items, " +
                          std::to_string(rubric.total_points()) + " points):\n";
    for (const auto& item: rubric.items)
        listing += item_line(item);
    auto request = judge_request(roles::judge, score_prompt, "score");
    request.messages.push_back({"user", judge_context(run)});
    request.messages.push_back({"user", listing});
    request.messages.push_back({"user", "TASK: score\nRUN: " + run.run_id + "\nITEMS: " +
                                            std::to_string(rubric.items.size()) + "\n"});
    auto response = gateway.complete(request);
    auto body = parse_model_json(response.text, "score");
    if (!body.is_object() || !body.contains("awards"))
        schema_violation("score must be an object with awards", {"awards"});

    std::map<std::string, int> awards;
    std::map<std::string, std::string> rationale;
    std::vector<std::string> bad;
    auto take = [&](const std::string& id, const json& v) {
        if (!v.is_number_integer() || awards.count(id)) {
            bad.push_back("awards." + id);
            return;
        }
        awards[id] = v.get<int>();
    };
    const auto& a = body["awards"];
    if (a.is_object()) {
        for (const auto& [id, v]: a.items())
            take(id, v);
    } else if (a.is_array()) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!a[i].is_object() || !a[i].contains("item_id") || !a[i]["item_id"].is_string()) {
                bad.push_back("awards[" + std::to_string(i) + "]");
                continue;
            }
            auto id = a[i]["item_id"].get<std::string>();
            take(id, a[i].contains("awarded") ? a[i]["awarded"] : json());
            if (a[i].contains("rationale") && a[i]["rationale"].is_string())
                rationale[id] = a[i]["rationale"].get<std::string>();
        }
    } else {
        bad.push_back("awards");
    }
    if (!bad.empty())
        schema_violation("score awards are malformed", bad);
    auto report = aggregate_scores(rubric, awards);
    report.rationale = std::move(rationale);
    return report;
}

// ---------------------------------------------------------------------------

namespace {

std::string_view section_heading(std::string_view key)
{
    if (key == "executive_summary")
        return "1. Executive Summary";
    if (key == "per_deliverable_analysis")
        return "2. Deliverable-by-Deliverable Analysis";
    if (key == "collaborator_communication_analysis")
        return "3. Simulated-Collaborator Communication Analysis";
    if (key == "workflow_efficiency")
        return "4. Workflow & Efficiency";
    if (key == "domain_insights")
        return "5. Domain-Specific Insights";
    if (key == "recommendations")
        return "6. Actionable Recommendations";
    return "Appendix: Score Summary";
}

json evidence_json(const Evidence& e)
{
    return {{"turns", e.turns}, {"messages", e.messages}, {"paths", e.paths}};
}

std::vector<std::string> strings_at(const json& j, const char* key, RecordReader& r, const std::string& field)
{
    std::vector<std::string> out;
    if (!j.contains(key))
        return out;
    if (!j[key].is_array()) {
        r.mark_bad(field);
        return out;
    }
    for (const auto& v: j[key]) {
        if (v.is_string())
            out.push_back(trim(v.get<std::string>()));
        else
            r.mark_bad(field);
    }
    return out;
}

RetrospectiveReport parse_sections(const json& body, RecordReader& r)
{
    RetrospectiveReport report;
    const json& sections = body.contains("sections") && body["sections"].is_object() ? body["sections"] : body;
    for (auto key: retrospective_sections) {
        RetrospectiveSection s;
        s.key = std::string(key);
        auto field = "sections." + s.key;
        auto it = sections.find(s.key);
        if (it == sections.end()) {
            r.mark_bad(field);
        } else if (it->is_string()) {
            s.text = it->get<std::string>();
        } else if (it->is_object()) {
            s.text = it->value("text", "");
            if (it->contains("evidence")) {
                const auto& e = (*it)["evidence"];
                if (!e.is_object()) {
                    r.mark_bad(field + ".evidence");
                } else {
                    s.evidence.turns = strings_at(e, "turns", r, field + ".evidence.turns");
                    s.evidence.messages = strings_at(e, "messages", r, field + ".evidence.messages");
                    s.evidence.paths = strings_at(e, "paths", r, field + ".evidence.paths");
                }
            }
        } else {
            r.mark_bad(field);
        }
        if (it != sections.end() && trim(s.text).empty())
            r.mark_bad(field + ".text");
        report.sections.push_back(std::move(s));
    }
    return report;
}

std::string retrospective_context(const RunView& run, const ScoreReport& score)
{
    std::string s = "USER:\n" + profile_summary(run.profile) + "\n\nOBJECTIVES:\n";
    for (const auto& d: run.objectives.deliverables)
        s += d.deliverable_id + ": " + d.title + " (target " + format_date(d.target_date) + ")\n";
    s += "\nSCORE:\n";
    for (const auto& [k, t]: score.per_deliverable)
        s += k + ": " + tally_text(t) + "\n";
    s += "Total: " + tally_text(score.aggregate) + "\n";
    const auto& t = run.simulation.telemetry;
    s += "\nTELEMETRY: planning turns " + std::to_string(t.turns_weekly_planning) + ", execution turns " +
         std::to_string(t.turns_daily_execution) + ", error turns " + std::to_string(t.error_turns) + " (" +
         pct(100 * t.error_rate) + "), messages sent " + std::to_string(t.messages_sent) + ", received " +
         std::to_string(t.messages_received) + "\n";
    s += "\nDAYS:\n";
    for (const auto& d: run.simulation.days) {
        long long errors = std::count_if(d.turns.begin(), d.turns.end(), [](const TurnRecord& x) { return x.error; });
        s += format_date(d.date) + " (" + std::string(weekday_name(d.date)) + "): " + std::to_string(d.turns.size()) +
             " turns, " + std::to_string(errors) + " errors" + (d.truncated ? ", truncated" : "") + "\n";
        for (const auto& e: d.activity_log)
            s += "  " + format_time_of_day(e.time) + " " + e.text + "\n";
        for (const auto& p: d.file_diff.added)
            s += "  added " + p + "\n";
        for (const auto& p: d.file_diff.modified)
            s += "  modified " + p + "\n";
        for (std::size_t k = 0; k < d.turns.size(); ++k)
            for (const auto& c: d.turns[k].tool_calls)
                if (!c.ok)
                    s += "  turn " + format_date(d.date) + "#" + std::to_string(k) + " " + c.name + " failed: " +
                         clip(c.result, 200) + "\n";
    }
    s += "\nMESSAGES:\n";
    for (const auto& m: run.messages) {
        s += "[" + m.message_id + " " + format_timestamp(m.sent_at) + " " + m.sender + " -> " + m.recipient + "] " +
             m.subject + (trim(m.body).empty() ? " (BLANK)" : "") + "\n" + clip(m.body, 400) + "\n";
        for (const auto& a: m.attachments)
            s += "  attachment: " + a.filename + "\n";
    }
    return s;
}

}  // namespace

const RetrospectiveSection* RetrospectiveReport::find(std::string_view key) const
{
    for (const auto& s: sections)
        if (s.key == key)
            return &s;
    return nullptr;
}

json to_json(const RetrospectiveReport& report)
{
    json sections = json::object();
    for (const auto& s: report.sections)
        sections[s.key] = {{"heading", section_heading(s.key)}, {"text", s.text}, {"evidence", evidence_json(s.evidence)}};
    return {{"run_id", report.run_id},
            {"occupation", report.occupation},
            {"sections", sections},
            {"score", to_json(report.score)}};
}

RetrospectiveReport retrospective_from_json(const json& j)
{
    RecordReader r(j, "retrospective");
    auto run_id = r.text("run_id");
    auto occupation = r.optional_text("occupation");
    const auto& sections = r.object("sections");
    r.finish();
    RecordReader inner(j, "retrospective");
    auto report = parse_sections(json {{"sections", sections}}, inner);
    inner.finish();
    report.run_id = run_id;
    report.occupation = occupation;
    if (j.contains("score"))
        report.score = score_from_json(j["score"]);
    return report;
}

void check_evidence(const RetrospectiveReport& report, const RunView& run)
{
    std::set<std::string> message_ids;
    for (const auto& m: run.messages)
        message_ids.insert(m.message_id);
    std::map<std::string, std::size_t> day_turns;
    for (const auto& d: run.simulation.days)
        day_turns[format_date(d.date)] = d.turns.size();

    std::vector<std::string> dangling;
    for (const auto& s: report.sections) {
        for (const auto& id: s.evidence.messages)
            if (!message_ids.count(id))
                dangling.push_back(id);
        for (const auto& t: s.evidence.turns) {
            auto hash = t.find('#');
            bool ok = false;
            if (hash != std::string::npos) {
                auto it = day_turns.find(t.substr(0, hash));
                auto index = t.substr(hash + 1);
                if (it != day_turns.end() && !index.empty() && index.size() < 9 &&
                    std::all_of(index.begin(), index.end(), [](char c) { return c >= '0' && c <= '9'; }))
                    ok = std::stoul(index) < it->second;
            }
            if (!ok)
                dangling.push_back(t);
        }
        for (const auto& p: s.evidence.paths) {
            auto normalized = normalize_logical_path(p);
            bool ok = run.computer.find_by_path(normalized) != nullptr;
            if (!ok) {
                // run-store relative files (logs) are valid evidence too
                fs::path rel(p);
                bool inside = !p.empty() && rel.is_relative() &&
                              std::none_of(rel.begin(), rel.end(), [](const fs::path& c) { return c == ".."; });
                ok = inside && fs::is_regular_file(run.run_dir / rel) &&
                     rel.begin()->string() != std::string(layout::private_store);
            }
            if (!ok)
                dangling.push_back(p);
        }
    }
    if (!dangling.empty())
        fail(ErrorCode::DanglingReference,
             "retrospective cites " + std::to_string(dangling.size()) + " reference(s) missing from the run", dangling);
}

std::string render_markdown(const RetrospectiveReport& report, const RunView& run, const Rubric* rubric)
{
    std::string md = "# Retrospective Report: " + report.run_id + "\n\n";
    md += "**Subject:** " + run.profile.identity.full_name + ", " + run.profile.occupation +
          (run.profile.organization.empty() ? "" : ", " + run.profile.organization) + "  \n";
    if (!run.simulation.days.empty())
        md += "**Simulation Period:** " + format_date(run.simulation.days.front().date) + " to " +
              format_date(run.simulation.days.back().date) + " (" + std::to_string(run.simulation.days.size()) +
              " working days)  \n";
    md += "**Overall Score:** " + tally_text(report.score.aggregate) + "\n";
    for (const auto& s: report.sections) {
        md += "\n## " + std::string(section_heading(s.key)) + "\n\n" + trim(s.text) + "\n";
        if (s.key == "score_summary") {
            md += "\n";
            for (const auto& [k, t]: report.score.per_deliverable) {
                const auto* d = run.objectives.find(k);
                md += "- **" + k + (d ? ": " + d->title : std::string()) + "**: " + tally_text(t) + "\n";
            }
            md += "\n**Total: " + tally_text(report.score.aggregate) + ".**\n";
            if (rubric) {
                md += "\nRubric: " + std::to_string(rubric->items.size()) + " items, " +
                      std::to_string(rubric->total_points()) + " points.\n";
            }
        }
        const auto& e = s.evidence;
        if (!e.turns.empty() || !e.messages.empty() || !e.paths.empty()) {
            md += "\n*Evidence:*";
            auto join = [](const std::vector<std::string>& v) {
                std::string out;
                for (const auto& x: v)
                    out += (out.empty() ? "" : ", ") + x;
                return out;
            };
            if (!e.turns.empty())
                md += " turns " + join(e.turns) + ";";
            if (!e.messages.empty())
                md += " messages " + join(e.messages) + ";";
            if (!e.paths.empty())
                md += " paths " + join(e.paths) + ";";
            md.back() = '\n';
        }
    }
    return md;
}

RetrospectiveReport write_retrospective(const RunView& run, const ScoreReport& score, Gateway& gateway)
{
    auto request = judge_request(roles::analyst, retrospective_prompt, "retrospective");
    request.messages.push_back({"user", retrospective_context(run, score)});
    request.messages.push_back({"user", "TASK: retrospective\nRUN: " + run.run_id + "\nOCCUPATION: " +
                                            run.profile.occupation + "\n"});
    auto response = gateway.complete(request);
    auto body = parse_model_json(response.text, "retrospective");
    if (!body.is_object())
        schema_violation("retrospective must be a JSON object", {"sections"});
    RecordReader r(body, "retrospective");
    auto report = parse_sections(body, r);
    r.finish();
    report.run_id = run.run_id;
    report.occupation = run.profile.occupation;
    report.score = score;
    check_evidence(report, run);
    return report;
}

}  // namespace scs
