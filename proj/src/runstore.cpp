// SPDX-License-Identifier: Apache-2.0
#include "scs/runstore.hpp"

#include "scs/error.hpp"
#include "scs/evaluate.hpp"
#include "scs/experience.hpp"
#include "scs/layout.hpp"

#include <chrono>
#include <ctime>
#include <random>

namespace scs {

namespace {

std::string wall_clock_now()
{
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm {};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

OsStyle store_os(const fs::path& root)
{
    auto manifest = root / std::string(layout::computer) / "manifest.json";
    if (fs::exists(manifest))
        return os_style_from(read_json(manifest).value("os_style", "windows"));
    auto policy = root / std::string(layout::policy);
    if (fs::exists(policy))
        return policy_from_json(read_json(policy)).os_style;
    return OsStyle::windows;
}

// Structured stages validate from JSON alone.
void validate_json(Stage stage, const json& j, const fs::path& root)
{
    switch (stage) {
    case Stage::profile: profile_from_json(j); return;
    case Stage::policy: policy_from_json(j); return;
    case Stage::plan:
        if (has_fatal(validate_plan(plan_from_json(j))))
            fail(ErrorCode::PlanInvalid, "plan has fatal diagnostics");
        return;
    case Stage::objectives: objectives_from_json(j, store_os(root)); return;
    case Stage::collaborators: collaborators_from_json(j); return;
    case Stage::rubric: validate_rubric(rubric_from_json(j)); return;
    case Stage::score: score_from_json(j); return;
    case Stage::retrospective: retrospective_from_json(j); return;
    default: return;
    }
}

// Parses the stage's on-disk output with its own validator.
void validate_on_disk(Stage stage, const fs::path& root)
{
    auto file = root / std::string(stage_file(stage));
    switch (stage) {
    case Stage::persona:
        if (trim(read_text(file)).empty())
            fail(ErrorCode::EmptyPersona, "persona text is empty");
        return;
    case Stage::computer:
        load_computer(root / std::string(layout::computer), root / std::string(layout::private_store));
        return;
    case Stage::simulation: load_simulation(root); return;
    case Stage::experience:
        if (read_items(file).empty())
            schema_violation("no experience items", {"items"});
        return;
    default: validate_json(stage, read_json(file), root); return;
    }
}

}  // namespace

std::string_view to_string(Stage stage)
{
    switch (stage) {
    case Stage::persona: return "persona";
    case Stage::profile: return "profile";
    case Stage::policy: return "policy";
    case Stage::plan: return "plan";
    case Stage::computer: return "computer";
    case Stage::objectives: return "objectives";
    case Stage::collaborators: return "collaborators";
    case Stage::simulation: return "simulation";
    case Stage::rubric: return "rubric";
    case Stage::score: return "score";
    case Stage::retrospective: return "retrospective";
    case Stage::experience: return "experience";
    }
    return "persona";
}

Stage stage_from(std::string_view name)
{
    for (auto s: all_stages)
        if (to_string(s) == name)
            return s;
    fail(ErrorCode::StageMissing, "no stage named '" + std::string(name) + "'", {std::string(name)});
}

std::vector<Stage> prerequisites(Stage stage)
{
    switch (stage) {
    case Stage::persona: return {};
    case Stage::profile: return {Stage::persona};
    case Stage::policy: return {Stage::profile};
    case Stage::plan: return {Stage::policy};
    case Stage::computer: return {Stage::plan};
    case Stage::objectives: return {Stage::computer};
    case Stage::collaborators: return {Stage::objectives};
    case Stage::simulation: return {Stage::objectives, Stage::collaborators};
    case Stage::rubric: return {Stage::simulation};
    case Stage::score: return {Stage::rubric};
    case Stage::retrospective: return {Stage::score};
    case Stage::experience: return {Stage::retrospective};
    }
    return {};
}

std::string_view stage_file(Stage stage)
{
    switch (stage) {
    case Stage::persona: return layout::persona;
    case Stage::profile: return layout::profile;
    case Stage::policy: return layout::policy;
    case Stage::plan: return layout::plan;
    case Stage::computer: return "computer/manifest.json";
    case Stage::objectives: return layout::objectives;
    case Stage::collaborators: return layout::collaborators;
    case Stage::simulation: return layout::simulation;
    case Stage::rubric: return layout::rubric;
    case Stage::score: return layout::score;
    case Stage::retrospective: return layout::retrospective_index;
    case Stage::experience: return layout::experience_items;
    }
    return "";
}

std::string new_run_id()
{
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm {};
    gmtime_r(&t, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
    static constexpr char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";
    std::random_device rd;
    std::uniform_int_distribution<int> pick(0, sizeof alphabet - 2);
    std::string suffix;
    for (int i = 0; i < 6; ++i)
        suffix += alphabet[pick(rd)];
    return std::string(stamp) + "-" + suffix;
}

RunStore::RunStore(fs::path root, std::string run_id) : _root(std::move(root)), _run_id(std::move(run_id)) {}

RunStore RunStore::create(const fs::path& root, const std::string& run_id)
{
    if (fs::exists(root) && (!fs::is_directory(root) || !fs::is_empty(root)))
        fail(ErrorCode::RootNotEmpty, "run directory " + root.string() + " is not empty", {root.string()});
    fs::create_directories(root);
    RunStore store(root, run_id);
    store.write_stages({{"run_id", run_id}, {"stages", json::object()}, {"history", json::array()}});
    return store;
}

RunStore RunStore::open(const fs::path& root)
{
    auto file = root / std::string(layout::stages);
    if (!fs::exists(file))
        fail(ErrorCode::StageMissing, root.string() + " is not a run directory", {std::string(layout::stages)});
    json stages;
    try {
        stages = read_json(file);
    } catch (const std::exception& e) {
        fail(ErrorCode::ValidationFailed, std::string(layout::stages) + " does not parse: " + e.what(),
             {std::string(layout::stages)});
    }
    if (!stages.is_object() || !stages.contains("run_id") || !stages["run_id"].is_string() ||
        !stages.contains("stages") || !stages["stages"].is_object())
        fail(ErrorCode::ValidationFailed, std::string(layout::stages) + " is malformed", {std::string(layout::stages)});
    return RunStore(root, stages["run_id"].get<std::string>());
}

json RunStore::read_stages() const
{
    return read_json(path(layout::stages));
}

void RunStore::write_stages(const json& stages) const
{
    atomic_write_json(path(layout::stages), stages);
}

bool RunStore::complete(Stage stage) const
{
    const auto stages = read_stages();
    return stages["stages"].contains(std::string(to_string(stage)));
}

json RunStore::params(Stage stage) const
{
    const auto stages = read_stages();
    auto key = std::string(to_string(stage));
    if (!stages["stages"].contains(key))
        return json::object();
    return stages["stages"][key].value("params", json::object());
}

long long RunStore::gateway_calls(Stage stage) const
{
    const auto stages = read_stages();
    auto key = std::string(to_string(stage));
    if (!stages["stages"].contains(key))
        return 0;
    return stages["stages"][key].value("gateway_calls", 0LL);
}

void RunStore::begin(Stage stage, bool force)
{
    std::vector<std::string> missing;
    for (auto p: prerequisites(stage))
        if (!complete(p))
            missing.emplace_back(to_string(p));
    if (!missing.empty())
        fail(ErrorCode::StageMissing,
             std::string(to_string(stage)) + " needs the " + missing.front() + " stage first", missing);
    if (!complete(stage))
        return;
    if (!force)
        fail(ErrorCode::StageAlreadyComplete,
             std::string(to_string(stage)) + " is already complete; pass --force to redo it",
             {std::string(to_string(stage))});
    auto stages = read_stages();
    stages["stages"].erase(std::string(to_string(stage)));
    stages["history"].push_back(
        {{"stage", to_string(stage)}, {"event", "forced"}, {"wall_clock_at", wall_clock_now()}});
    write_stages(stages);
}

fs::path RunStore::save(Stage stage, const json& payload, const json& params, long long gateway_calls, bool force)
{
    if (stage == Stage::persona)
        return save_text(stage, payload.is_string() ? payload.get<std::string>() : payload.dump(), params,
                         gateway_calls, force);
    if (stage == Stage::computer || stage == Stage::simulation)
        fail(ErrorCode::PreconditionViolation,
             std::string(to_string(stage)) + " writes its own files; use mark_complete");
    begin(stage, force);
    auto file = path(stage_file(stage));
    if (stage == Stage::experience) {
        if (!payload.is_array())
            schema_violation("experience payload must be a list of items", {"items"});
        std::vector<ExperienceItem> items;
        for (const auto& j: payload)
            items.push_back(experience_item_from_json(j));
        if (items.empty())
            schema_violation("no experience items", {"items"});
        write_items(file, items);
    } else {
        validate_json(stage, payload, _root);
        atomic_write_json(file, payload);
    }
    mark_complete(stage, params, gateway_calls);
    return file;
}

fs::path RunStore::save_text(Stage stage, const std::string& text, const json& params, long long gateway_calls,
                             bool force)
{
    begin(stage, force);
    auto file = path(stage_file(stage));
    atomic_write_text(file, text);
    mark_complete(stage, params, gateway_calls);
    return file;
}

void RunStore::mark_complete(Stage stage, const json& params, long long gateway_calls)
{
    verify(stage);
    auto stages = read_stages();
    auto key = std::string(to_string(stage));
    stages["stages"][key] = {{"params", params}, {"gateway_calls", gateway_calls},
                             {"wall_clock_completed_at", wall_clock_now()}};
    stages["history"].push_back({{"stage", key}, {"event", "complete"}, {"wall_clock_at", wall_clock_now()}});
    write_stages(stages);
}

void RunStore::verify(Stage stage) const
{
    auto name = std::string(stage_file(stage));
    if (!fs::exists(path(name)))
        fail(ErrorCode::StageMissing, name + " is missing from " + _root.string(), {name});
    try {
        validate_on_disk(stage, _root);
    } catch (const Error& e) {
        fail(ErrorCode::ValidationFailed, name + " does not validate: " + e.what(), {name});
    } catch (const std::exception& e) {
        fail(ErrorCode::ValidationFailed, name + " does not validate: " + e.what(), {name});
    }
}

json RunStore::load(Stage stage) const
{
    if (!complete(stage))
        fail(ErrorCode::StageMissing, std::string(to_string(stage)) + " has not been run", {std::string(to_string(stage))});
    verify(stage);
    auto file = path(stage_file(stage));
    if (stage == Stage::persona)
        return read_text(file);
    if (stage == Stage::experience) {
        json items = json::array();
        for (const auto& j: read_jsonl(file))
            items.push_back(j);
        return items;
    }
    return read_json(file);
}

std::string RunStore::load_text(Stage stage) const
{
    if (!complete(stage))
        fail(ErrorCode::StageMissing, std::string(to_string(stage)) + " has not been run", {std::string(to_string(stage))});
    verify(stage);
    return read_text(path(stage_file(stage)));
}

}  // namespace scs
