// SPDX-License-Identifier: Apache-2.0
#include "scs/experience.hpp"

#include "scs/error.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace scs {

namespace {

using boost::multiprecision::cpp_int;

constexpr std::string_view extract_prompt =
    "You are the analyst. From this retrospective report, extract experience items another agent doing the same "
    "kind of work could learn from: useful work patterns, lessons, warnings and common failure modes. Answer with "
    "{\"items\":[{\"kind\" (lesson|warning|failure_mode|work_pattern),\"text\"}]}.";

constexpr std::string_view partition_prompt =
    "You are the analyst. These experience items come from simulations of the same occupation. Merge items that "
    "express the same point. Every item id must appear in exactly one group. Answer with "
    "{\"groups\":[{\"text\" (one canonical statement),\"members\":[item ids]}]}.";

constexpr std::string_view skill_prompt =
    "You are the skill creator. Write one occupation-specific skill from the ranked experience below. Higher counts "
    "mean more common issues; give them priority. Answer with {\"trigger_scope\",\"sections\":[{\"heading\","
    "\"rules\":[{\"tag\",\"text\"}]}]}.";

GenerationRequest analyst_request(std::string_view system, std::string schema)
{
    GenerationRequest r;
    r.role_label = std::string(roles::analyst);
    r.system_context = std::string(system);
    r.schema_hint = std::move(schema);
    return r;
}

std::string report_text(const RetrospectiveReport& report)
{
    std::string s;
    for (const auto& section: report.sections)
        s += "## " + section.key + "\n" + section.text + "\n\n";
    return s;
}

cpp_int binomial(long long n, long long k)
{
    cpp_int c = 1;
    for (long long i = 1; i <= k; ++i)
        c = c * (n - k + i) / i;
    return c;
}

}  // namespace

std::string_view to_string(ExperienceKind kind)
{
    switch (kind) {
    case ExperienceKind::lesson: return "lesson";
    case ExperienceKind::warning: return "warning";
    case ExperienceKind::failure_mode: return "failure_mode";
    case ExperienceKind::work_pattern: return "work_pattern";
    }
    return "lesson";
}

ExperienceKind experience_kind_from(std::string_view text, const std::string& field)
{
    auto t = to_lower(trim(text));
    std::replace(t.begin(), t.end(), '-', '_');
    std::replace(t.begin(), t.end(), ' ', '_');
    for (auto k: {ExperienceKind::lesson, ExperienceKind::warning, ExperienceKind::failure_mode,
                  ExperienceKind::work_pattern})
        if (t == to_string(k))
            return k;
    schema_violation("unknown experience kind '" + std::string(text) + "'", {field});
}

json to_json(const ExperienceItem& item)
{
    return {{"item_id", item.item_id},
            {"kind", to_string(item.kind)},
            {"text", item.text},
            {"occupation", item.occupation},
            {"source_run", item.source_run}};
}

ExperienceItem experience_item_from_json(const json& j)
{
    RecordReader r(j, "experience item");
    ExperienceItem item;
    item.item_id = r.text("item_id");
    auto kind = r.text("kind");
    item.text = r.text("text");
    item.occupation = r.text("occupation");
    item.source_run = r.text("source_run");
    r.finish();
    item.kind = experience_kind_from(kind);
    return item;
}

std::string occupation_key(std::string_view occupation)
{
    return to_lower(trim(occupation));
}

std::vector<ExperienceItem> extract_items(const RetrospectiveReport& report, Gateway& gateway)
{
    if (trim(report.run_id).empty() || trim(report.occupation).empty())
        fail(ErrorCode::PreconditionViolation, "retrospective has no run id or occupation");
    auto request = analyst_request(extract_prompt, "experience_items");
    request.messages.push_back({"user", report_text(report)});
    request.messages.push_back(
        {"user", "TASK: extract-experience\nRUN: " + report.run_id + "\nOCCUPATION: " + report.occupation + "\n"});
    auto body = parse_model_json(gateway.complete(request).text, "experience items");
    json list = body.is_array() ? body : json();
    if (body.is_object() && body.contains("items") && body["items"].is_array())
        list = body["items"];
    if (!list.is_array() || list.empty())
        schema_violation("extraction must yield at least one experience item", {"items"});

    const json none = json::object();
    RecordReader r(none, "experience items");
    std::vector<ExperienceItem> out;
    for (std::size_t i = 0; i < list.size(); ++i) {
        auto field = [&](const char* name) { return "items[" + std::to_string(i) + "]." + name; };
        const auto& j = list[i];
        if (!j.is_object()) {
            r.mark_bad("items[" + std::to_string(i) + "]");
            continue;
        }
        ExperienceItem item;
        item.item_id = report.run_id + ":e" + std::to_string(i + 1);
        item.text = trim(j.value("text", ""));
        if (item.text.empty())
            r.mark_bad(field("text"));
        try {
            item.kind = experience_kind_from(j.value("kind", ""), field("kind"));
        } catch (const Error&) {
            r.mark_bad(field("kind"));
        }
        item.occupation = trim(report.occupation);
        item.source_run = report.run_id;
        out.push_back(std::move(item));
    }
    r.finish();
    return out;
}

void write_items(const fs::path& path, const std::vector<ExperienceItem>& items)
{
    std::string text;
    for (const auto& i: items)
        text += to_json(i).dump() + "\n";
    atomic_write_text(path, text);
}

std::vector<ExperienceItem> read_items(const fs::path& path)
{
    std::vector<ExperienceItem> out;
    for (const auto& j: read_jsonl(path))
        out.push_back(experience_item_from_json(j));
    return out;
}

int OccupationDigest::total() const
{
    int n = 0;
    for (const auto& g: groups)
        n += g.count();
    return n;
}

json to_json(const OccupationDigest& digest)
{
    json groups = json::array();
    for (std::size_t i = 0; i < digest.groups.size(); ++i) {
        const auto& g = digest.groups[i];
        groups.push_back({{"rank", i + 1}, {"text", g.canonical_text}, {"count", g.count()}, {"members", g.members}});
    }
    return {{"occupation", digest.occupation}, {"total_items", digest.total()}, {"groups", groups}};
}

OccupationDigest digest_from_json(const json& j)
{
    RecordReader r(j, "occupation digest");
    OccupationDigest d;
    d.occupation = r.text("occupation");
    const auto& groups = r.array("groups");
    r.finish();
    for (const auto& g: groups) {
        RecordReader gr(g, "digest group");
        DigestGroup group;
        group.canonical_text = gr.text("text");
        group.members = gr.texts("members");
        gr.finish();
        d.groups.push_back(std::move(group));
    }
    return d;
}

OccupationDigest digest_from_partition(const std::string& occupation, const std::vector<ExperienceItem>& items,
                                       const json& partition)
{
    const json* groups = nullptr;
    if (partition.is_array())
        groups = &partition;
    else if (partition.is_object() && partition.contains("groups") && partition["groups"].is_array())
        groups = &partition["groups"];
    if (!groups)
        schema_violation("partition must list groups", {"groups"});

    std::map<std::string, int> seen;
    for (const auto& i: items)
        seen[i.item_id] = 0;

    OccupationDigest digest;
    digest.occupation = occupation;
    std::vector<std::string> bad;
    const json none = json::object();
    RecordReader r(none, "partition");
    for (std::size_t gi = 0; gi < groups->size(); ++gi) {
        const auto& g = (*groups)[gi];
        auto field = "groups[" + std::to_string(gi) + "]";
        if (!g.is_object()) {
            r.mark_bad(field);
            continue;
        }
        DigestGroup group;
        group.canonical_text = trim(g.value("text", ""));
        if (group.canonical_text.empty())
            r.mark_bad(field + ".text");
        if (!g.contains("members") || !g["members"].is_array()) {
            r.mark_bad(field + ".members");
            continue;
        }
        for (const auto& m: g["members"]) {
            auto id = m.is_string() ? trim(m.get<std::string>()) : std::string();
            auto it = seen.find(id);
            if (it == seen.end()) {
                bad.push_back(id.empty() ? field + ".members" : id);
                continue;
            }
            if (++it->second == 2)
                bad.push_back(id);
            if (std::find(group.members.begin(), group.members.end(), id) == group.members.end())
                group.members.push_back(id);
        }
        if (!group.members.empty())
            digest.groups.push_back(std::move(group));
    }
    r.finish();
    for (const auto& [id, n]: seen)
        if (n == 0)
            bad.push_back(id);
    if (!bad.empty())
        fail(ErrorCode::PartitionInvalid, "partition must place every item in exactly one group", bad);

    std::stable_sort(digest.groups.begin(), digest.groups.end(),
                     [](const DigestGroup& a, const DigestGroup& b) { return a.count() > b.count(); });
    return digest;
}

std::map<std::string, OccupationDigest> group_merge_count(const std::vector<ExperienceItem>& items,
                                                          Gateway& gateway)
{
    if (items.empty())
        fail(ErrorCode::PreconditionViolation, "no experience items to group");
    std::map<std::string, std::vector<ExperienceItem>> by_occupation;
    for (const auto& i: items)
        by_occupation[occupation_key(i.occupation)].push_back(i);

    std::map<std::string, OccupationDigest> out;
    for (const auto& [key, group]: by_occupation) {
        auto name = trim(group.front().occupation);
        std::string listing = "ITEMS:\n";
        for (const auto& i: group)
            listing += i.item_id + " [" + std::string(to_string(i.kind)) + "] " + i.text + "\n";
        auto request = analyst_request(partition_prompt, "partition");
        request.messages.push_back({"user", listing});
        request.messages.push_back({"user", "TASK: group-experience\nOCCUPATION: " + name + "\nITEMS: " +
                                                std::to_string(group.size()) + "\n"});
        auto body = parse_model_json(gateway.complete(request).text, "partition");
        out[key] = digest_from_partition(name, group, body);
    }
    return out;
}

json to_json(const Skill& skill)
{
    json sections = json::array();
    for (const auto& s: skill.sections) {
        json rules = json::array();
        for (const auto& r: s.rules)
            rules.push_back({{"tag", r.tag}, {"text", r.text}});
        sections.push_back({{"heading", s.heading}, {"rules", rules}});
    }
    return {{"slug", skill.slug()},
            {"occupation", skill.occupation},
            {"trigger_scope", skill.trigger_scope},
            {"sections", sections}};
}

Skill skill_from_json(const json& j)
{
    if (!j.is_object())
        schema_violation("skill must be a JSON object", {"sections"});
    RecordReader r(j, "skill");
    Skill skill;
    skill.occupation = r.optional_text("occupation");
    skill.trigger_scope = r.text("trigger_scope");
    const auto& sections = r.array("sections");
    if (sections.is_array() && sections.empty())
        r.mark_bad("sections");
    for (std::size_t si = 0; si < sections.size(); ++si) {
        auto field = "sections[" + std::to_string(si) + "]";
        const auto& s = sections[si];
        if (!s.is_object()) {
            r.mark_bad(field);
            continue;
        }
        SkillSection section;
        section.heading = trim(s.value("heading", ""));
        if (section.heading.empty())
            r.mark_bad(field + ".heading");
        if (!s.contains("rules") || !s["rules"].is_array() || s["rules"].empty()) {
            r.mark_bad(field + ".rules");
            continue;
        }
        const auto& rules = s["rules"];
        for (std::size_t ri = 0; ri < rules.size(); ++ri) {
            SkillRule rule;
            if (rules[ri].is_string()) {
                rule.text = trim(rules[ri].get<std::string>());
            } else if (rules[ri].is_object()) {
                rule.tag = trim(rules[ri].value("tag", ""));
                rule.text = trim(rules[ri].value("text", ""));
            }
            if (rule.text.empty())
                r.mark_bad(field + ".rules[" + std::to_string(ri) + "]");
            section.rules.push_back(std::move(rule));
        }
        skill.sections.push_back(std::move(section));
    }
    r.finish();
    return skill;
}

std::string render_skill_markdown(const Skill& skill)
{
    std::string s = "# Skill: " + skill.slug() + "\n\n";
    s += "**Occupation:** " + skill.occupation + "\n\n";
    s += "**Trigger scope:** " + skill.trigger_scope + "\n";
    for (std::size_t i = 0; i < skill.sections.size(); ++i) {
        const auto& section = skill.sections[i];
        s += "\n## " + std::to_string(i + 1) + ". " + section.heading + "\n\n";
        for (const auto& r: section.rules)
            s += "- " + (r.tag.empty() ? std::string() : "**[" + r.tag + "]** ") + r.text + "\n";
    }
    return s;
}

SkillDocument skill_document(const Skill& skill)
{
    return {skill.slug(), skill.occupation, render_skill_markdown(skill)};
}

Skill build_skill(const OccupationDigest& digest, Gateway& gateway)
{
    if (digest.groups.empty() || trim(digest.occupation).empty())
        fail(ErrorCode::PreconditionViolation, "cannot build a skill from an empty digest");
    std::string ranked = "OCCUPATION: " + digest.occupation + "\nRANKED EXPERIENCE:\n";
    for (std::size_t i = 0; i < digest.groups.size(); ++i)
        ranked += std::to_string(i + 1) + ". (seen " + std::to_string(digest.groups[i].count()) + "x) " +
                  digest.groups[i].canonical_text + "\n";
    auto request = analyst_request(skill_prompt, "skill");
    request.messages.push_back({"user", ranked});
    request.messages.push_back({"user", "TASK: build-skill\nOCCUPATION: " + digest.occupation + "\n"});
    auto body = parse_model_json(gateway.complete(request).text, "skill");
    auto skill = skill_from_json(body);
    skill.occupation = trim(digest.occupation);
    return skill;
}

fs::path write_skill(const fs::path& dir, const Skill& skill)
{
    fs::create_directories(dir);
    auto md = dir / (skill.slug() + ".md");
    atomic_write_json(dir / (skill.slug() + ".json"), to_json(skill));
    atomic_write_text(md, render_skill_markdown(skill));
    return md;
}

std::vector<SkillDocument> load_skill_documents(const fs::path& dir)
{
    std::vector<SkillDocument> out;
    if (!fs::is_directory(dir))
        fail(ErrorCode::StageMissing, "skill directory " + dir.string() + " does not exist", {dir.string()});
    std::vector<fs::path> files;
    for (const auto& e: fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f: files) {
        auto skill = skill_from_json(read_json(f));
        if (trim(skill.occupation).empty())
            schema_violation(f.filename().string() + " names no occupation", {"occupation"});
        out.push_back(skill_document(skill));
    }
    return out;
}

SignTest sign_test(long long wins, long long losses)
{
    if (wins < 0 || losses < 0)
        fail(ErrorCode::PreconditionViolation, "sign test counts must be non-negative");
    SignTest t;
    t.n = wins + losses;
    if (t.n == 0)
        fail(ErrorCode::EmptySample, "sign test needs at least one non-tied pair");
    auto k0 = std::max(wins, losses);
    cpp_int tail = 0, c = binomial(t.n, k0);
    for (long long k = k0; k <= t.n; ++k) {
        tail += c;
        c = c * (t.n - k) / (k + 1);
    }
    t.tail_numerator = tail.str();
    // tail / 2^n: the integer conversion rounds once, the power-of-two scaling is exact
    t.p_one_sided = std::ldexp(tail.convert_to<double>(), static_cast<int>(-t.n));
    t.p_two_sided = std::min(1.0, 2.0 * t.p_one_sided);
    return t;
}

json to_json(const PairedComparison& c)
{
    return {{"pairs", c.pairs},
            {"wins", c.wins},
            {"losses", c.losses},
            {"ties", c.ties},
            {"mean_baseline", c.mean_baseline},
            {"mean_treatment", c.mean_treatment},
            {"mean_delta", c.mean_delta},
            {"p_one_sided", c.p_one_sided},
            {"p_two_sided", c.p_two_sided},
            {"degenerate", c.degenerate}};
}

PairedComparison paired_compare(const std::vector<std::pair<double, double>>& pairs)
{
    if (pairs.empty())
        fail(ErrorCode::EmptySample, "no score pairs to compare");
    PairedComparison c;
    std::vector<std::string> bad;
    double sum_b = 0, sum_t = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto [b, t] = pairs[i];
        auto ok = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 100.0; };
        if (!ok(b) || !ok(t)) {
            bad.push_back("pairs[" + std::to_string(i) + "]");
            continue;
        }
        sum_b += b;
        sum_t += t;
        if (t > b)
            ++c.wins;
        else if (t < b)
            ++c.losses;
        else
            ++c.ties;
    }
    if (!bad.empty())
        fail(ErrorCode::ScoreOutOfRange, "scores must be percentages in [0, 100]", bad);
    c.pairs = static_cast<int>(pairs.size());
    c.mean_baseline = sum_b / c.pairs;
    c.mean_treatment = sum_t / c.pairs;
    c.mean_delta = c.mean_treatment - c.mean_baseline;
    if (c.wins + c.losses == 0) {
        c.degenerate = true;
    } else {
        auto s = sign_test(c.wins, c.losses);
        c.p_one_sided = s.p_one_sided;
        c.p_two_sided = s.p_two_sided;
    }
    return c;
}

}  // namespace scs
