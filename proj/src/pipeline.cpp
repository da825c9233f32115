// SPDX-License-Identifier: Apache-2.0
#include "scs/pipeline.hpp"

#include "scs/error.hpp"
#include "scs/layout.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace scs {

namespace {

// Gateway call counter for one stage.
class CallMeter {
public:
    explicit CallMeter(const Gateway& gw) : _gw(gw), _start(gw.calls()) {}
    long long used() const { return _gw.calls() - _start; }

private:
    const Gateway& _gw;
    long long _start;
};

fs::path file_of(const RunStore& store, std::string_view rel)
{
    return store.path(rel);
}

void remove_paths(const RunStore& store, std::initializer_list<std::string_view> rels)
{
    for (auto rel: rels)
        fs::remove_all(file_of(store, rel));
}

SyntheticComputer store_computer(const RunStore& store)
{
    return load_computer(file_of(store, layout::computer), file_of(store, layout::private_store));
}

UserProfile store_profile(const RunStore& store)
{
    return profile_from_json(store.load(Stage::profile));
}

json date_or_null(const std::optional<Date>& d)
{
    return d ? json(format_date(*d)) : json(nullptr);
}

void strip_wall_clock(json& j)
{
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end();) {
            if (it.key().rfind("wall_clock", 0) == 0) {
                it = j.erase(it);
            } else {
                strip_wall_clock(it.value());
                ++it;
            }
        }
    } else if (j.is_array()) {
        for (auto& v: j)
            strip_wall_clock(v);
    }
}

std::string fingerprint_text(const fs::path& file)
{
    auto text = read_text(file);
    auto ext = file.extension().string();
    try {
        if (ext == ".json") {
            auto j = json::parse(text);
            strip_wall_clock(j);
            return j.dump();
        }
        if (ext == ".jsonl") {
            std::istringstream in(text);
            std::string line, out;
            while (std::getline(in, line)) {
                if (line.empty())
                    continue;
                auto j = json::parse(line);
                strip_wall_clock(j);
                out += j.dump() + "\n";
            }
            return out;
        }
    } catch (const json::exception&) {
    }
    return text;
}

}  // namespace

std::shared_ptr<Gateway> run_gateway(const BackendChoice& choice, const RunStore& store)
{
    auto record = file_of(store, layout::transcript);
    if (choice.backend == "replay") {
        if (choice.transcript.empty())
            fail(ErrorCode::InvalidConfig, "the replay backend needs --transcript");
        if (fs::exists(record) && fs::exists(choice.transcript) && fs::equivalent(record, choice.transcript))
            fail(ErrorCode::InvalidConfig, "cannot replay a transcript into itself");
        return make_gateway("replay", choice.transcript, record);
    }
    if (choice.backend == "scripted") {
        if (choice.script.empty())
            fail(ErrorCode::InvalidConfig, "the scripted backend needs --script");
        return make_gateway("scripted", choice.script, record);
    }
    return make_gateway(choice.backend, {}, record);
}

void create_computer(RunStore& store, const std::string& persona_text, Gateway& gateway, const ComputerOptions& options)
{
    bool force = options.force;
    Persona persona {"persona", persona_text};
    if (trim(persona_text).empty())
        fail(ErrorCode::EmptyPersona, "persona text is empty");
    store.save_text(Stage::persona, persona_text, {{"persona_id", persona.id}}, 0, force);

    CallMeter profile_calls(gateway);
    auto profile = expand_persona(persona, gateway);
    store.save(Stage::profile, to_json(profile), json::object(), profile_calls.used(), force);

    auto os = options.os.value_or(OsStyle::windows);
    CallMeter policy_calls(gateway);
    auto policy = generate_policy(profile, os, gateway);
    store.save(Stage::policy, to_json(policy), {{"os", to_string(os)}}, policy_calls.used(), force);

    CallMeter plan_calls(gateway);
    auto plan = plan_filesystem(profile, policy, gateway);
    store.save(Stage::plan, to_json(plan), json::object(), plan_calls.used(), force);

    store.begin(Stage::computer, force);
    remove_paths(store, {layout::computer, layout::private_store, layout::stats_pre});
    MaterializeOptions m;
    if (!options.mirror_dir.empty())
        m.fetcher = mirror_fetcher(options.mirror_dir);
    else if (!options.allowed_hosts.empty())
        m.fetcher = live_fetcher(options.allowed_hosts);
    else
        m.fetcher = no_fetcher();
    m.user_summary = profile_summary(profile);
    CallMeter computer_calls(gateway);
    auto computer = materialize_computer(plan, file_of(store, layout::computer), file_of(store, layout::private_store), gateway, m);
    atomic_write_json(file_of(store, layout::stats_pre), to_json(computer_stats(computer.root)));
    store.mark_complete(Stage::computer,
                        {{"setup_run", store.run_id()},
                         {"mirror", options.mirror_dir.empty() ? json(nullptr) : json(fs::absolute(options.mirror_dir).string())},
                         {"allowed_hosts", options.allowed_hosts}},
                        computer_calls.used());
}

void run_setup(RunStore& store, Gateway& gateway, const SetupOptions& options)
{
    auto profile = store_profile(store);
    store.begin(Stage::objectives, options.force);
    auto computer = store_computer(store);

    CallMeter objective_calls(gateway);
    ObjectivesConfig config;
    config.start = options.start;
    config.working_days = options.working_days;
    auto objectives = create_objectives(profile, computer, gateway, config);
    store.save(Stage::objectives, to_json(objectives),
               {{"start", date_or_null(options.start)}, {"working_days", options.working_days}},
               objective_calls.used(), options.force);

    store.begin(Stage::collaborators, options.force);
    // private files of an earlier attempt would otherwise linger
    if (fs::exists(computer.private_store))
        for (const auto& e: fs::directory_iterator(computer.private_store))
            fs::remove_all(e.path());
    CallMeter collaborator_calls(gateway);
    auto collaborators = create_collaborators(profile, objectives, gateway, computer);
    store.save(Stage::collaborators, to_json(collaborators), json::object(), collaborator_calls.used(), options.force);
}

RunStore fork_setup(const fs::path& source, const fs::path& root, const std::string& run_id)
{
    auto src = RunStore::open(source);
    for (auto s: {Stage::persona, Stage::profile, Stage::policy, Stage::plan, Stage::computer, Stage::objectives,
                  Stage::collaborators})
        if (!src.complete(s))
            fail(ErrorCode::StageMissing, source.string() + " has no " + std::string(to_string(s)) + " stage",
                 {std::string(to_string(s))});
    if (src.complete(Stage::simulation))
        fail(ErrorCode::PreconditionViolation,
             source.string() + " has already been simulated; fork from a run whose computer is untouched");

    auto store = RunStore::create(root, run_id);
    auto copy = [&](std::string_view rel) {
        auto from = src.path(rel);
        if (!fs::exists(from))
            return;
        auto to = store.path(rel);
        fs::create_directories(to.parent_path());
        fs::copy(from, to, fs::copy_options::recursive | fs::copy_options::copy_symlinks);
    };
    for (auto rel: {layout::persona, layout::profile, layout::policy, layout::plan, layout::computer,
                    layout::private_store, layout::objectives, layout::collaborators, layout::stats_pre})
        copy(rel);
    // copying loses the virtual mtimes; restore them from the manifest
    auto computer = store_computer(store);
    for (const auto& [id, e]: computer.manifest)
        set_virtual_mtime(computer.root / e.physical_path, e.virtual_timestamp);

    auto origin = fs::absolute(source).lexically_normal().string();
    for (auto s: {Stage::persona, Stage::profile, Stage::policy, Stage::plan, Stage::computer, Stage::objectives,
                  Stage::collaborators}) {
        auto params = src.params(s);
        params["forked_from"] = origin;
        store.mark_complete(s, params, 0);
    }
    return store;
}

SimulationRecord simulate(RunStore& store, Gateway& gateway, const SimulateOptions& options)
{
    store.begin(Stage::simulation, options.force);
    remove_paths(store, {"days", "weeks", layout::messages, layout::simulation, layout::telemetry, layout::stats_post});

    SimulationInputs in;
    in.run_id = store.run_id();
    in.run_dir = store.root();
    in.profile = store_profile(store);
    in.computer = store_computer(store);
    in.objectives = objectives_from_json(store.load(Stage::objectives), in.computer.os_style);
    in.collaborators = collaborators_from_json(store.load(Stage::collaborators));

    EngineConfig config;
    config.working_days = options.working_days.value_or(in.objectives.working_days);
    config.seed = options.seed;
    config.day_turn_budget = options.day_turn_budget;
    config.global_turn_budget = options.global_turn_budget;
    if (!options.skills_dir.empty())
        config.skills = load_skill_documents(options.skills_dir);

    json params {{"working_days", config.working_days},
                 {"seed", config.seed},
                 {"day_turn_budget", config.day_turn_budget},
                 {"global_turn_budget", config.global_turn_budget},
                 {"skills_dir", options.skills_dir.empty() ? json(nullptr)
                                                           : json(fs::absolute(options.skills_dir).string())}};
    auto computer_root = in.computer.root;
    CallMeter calls(gateway);
    Simulation sim(std::move(in), config, gateway);
    auto finish = [&](bool exhausted) {
        atomic_write_json(file_of(store, layout::stats_post), to_json(computer_stats(computer_root)));
        params["budget_exhausted"] = exhausted;
        store.mark_complete(Stage::simulation, params, calls.used());
    };
    try {
        auto record = sim.run();
        finish(false);
        return record;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::BudgetExhausted)
            finish(true);
        throw;
    }
}

Rubric make_rubric(RunStore& store, Gateway& gateway, const RubricOptions& options)
{
    store.begin(Stage::rubric, options.force);
    if (options.drafts < 2)
        fail(ErrorCode::TooFewDrafts, "a rubric needs at least two drafts");
    std::vector<RunView> views {load_run_view(store.root())};
    json sources = json::array();
    for (const auto& r: options.from_runs) {
        views.push_back(load_run_view(r));
        sources.push_back(fs::absolute(r).lexically_normal().string());
    }
    auto drafts_dir = file_of(store, layout::rubric_drafts);
    fs::remove_all(drafts_dir);
    CallMeter calls(gateway);
    std::vector<Rubric> drafts;
    for (int k = 1; k <= options.drafts; ++k) {
        const auto& view = views[static_cast<std::size_t>(k - 1) % views.size()];
        drafts.push_back(draft_rubric(view, k, gateway));
        atomic_write_json(drafts_dir / ("draft_" + std::to_string(k) + ".json"), to_json(drafts.back()));
    }
    auto merged = merge_rubrics(drafts, gateway);
    validate_rubric(merged, &views.front().objectives);
    store.save(Stage::rubric, to_json(merged), {{"drafts", options.drafts}, {"from_runs", sources}}, calls.used(),
               options.force);
    return merged;
}

ScoreReport evaluate_run(RunStore& store, Gateway& gateway, bool force)
{
    store.begin(Stage::score, force);
    auto rubric = rubric_from_json(store.load(Stage::rubric));
    auto view = load_run_view(store.root());
    CallMeter calls(gateway);
    auto report = score_run(rubric, view, gateway);
    store.save(Stage::score, to_json(report), json::object(), calls.used(), force);
    return report;
}

RetrospectiveReport retrospect(RunStore& store, Gateway& gateway, bool force)
{
    store.begin(Stage::retrospective, force);
    auto rubric = rubric_from_json(store.load(Stage::rubric));
    auto score = score_from_json(store.load(Stage::score));
    auto view = load_run_view(store.root());
    CallMeter calls(gateway);
    auto report = write_retrospective(view, score, gateway);
    atomic_write_text(file_of(store, layout::retrospective), render_markdown(report, view, &rubric));
    store.save(Stage::retrospective, to_json(report), json::object(), calls.used(), force);
    return report;
}

std::vector<ExperienceItem> extract_experience(RunStore& store, Gateway& gateway, bool force)
{
    store.begin(Stage::experience, force);
    auto report = retrospective_from_json(store.load(Stage::retrospective));
    CallMeter calls(gateway);
    auto items = extract_items(report, gateway);
    json payload = json::array();
    for (const auto& i: items)
        payload.push_back(to_json(i));
    store.save(Stage::experience, payload, json::object(), calls.used(), force);
    return items;
}

SkillsResult extract_skills(const std::vector<fs::path>& runs, const fs::path& out, const GatewayFactory& per_run,
                            Gateway& shared, bool force)
{
    if (runs.empty())
        fail(ErrorCode::PreconditionViolation, "no runs to extract skills from");
    std::vector<ExperienceItem> all;
    for (const auto& r: runs) {
        auto store = RunStore::open(r);
        std::vector<ExperienceItem> items;
        if (store.complete(Stage::experience) && !force) {
            items = read_items(store.path(layout::experience_items));
        } else {
            auto gw = per_run(store);
            items = extract_experience(store, *gw, force);
        }
        all.insert(all.end(), items.begin(), items.end());
    }

    SkillsResult result;
    result.digests = group_merge_count(all, shared);
    auto experience_dir = out / "experience";
    fs::create_directories(experience_dir);
    write_items(experience_dir / "items.jsonl", all);
    for (const auto& [key, digest]: result.digests) {
        auto slug = slugify(digest.occupation);
        atomic_write_json(experience_dir / ("digest_" + slug + ".json"), to_json(digest));
        auto skill = build_skill(digest, shared);
        result.skill_files.push_back(write_skill(out, skill));
    }
    return result;
}

PairedComparison compare_runs(const std::vector<fs::path>& baseline, const std::vector<fs::path>& treatment,
                              json* pairs_out)
{
    struct Scored {
        std::string run_id;
        fs::path dir;
        double score;
    };
    auto collect = [](const std::vector<fs::path>& runs) {
        std::map<std::string, std::vector<Scored>> by_setup;
        for (const auto& r: runs) {
            auto store = RunStore::open(r);
            auto setup = store.params(Stage::computer).value("setup_run", store.run_id());
            auto score = score_from_json(store.load(Stage::score));
            by_setup[setup].push_back({store.run_id(), r, score.aggregate.percentage()});
        }
        for (auto& [k, v]: by_setup)
            std::sort(v.begin(), v.end(), [](const Scored& a, const Scored& b) { return a.run_id < b.run_id; });
        return by_setup;
    };
    auto base = collect(baseline);
    auto treat = collect(treatment);

    std::vector<std::pair<double, double>> pairs;
    std::vector<std::string> unpaired;
    json listing = json::array();
    for (const auto& [setup, runs]: base) {
        auto it = treat.find(setup);
        std::size_t matched = it == treat.end() ? 0 : std::min(runs.size(), it->second.size());
        for (std::size_t i = 0; i < matched; ++i) {
            pairs.emplace_back(runs[i].score, it->second[i].score);
            listing.push_back({{"setup_run", setup},
                               {"baseline_run", runs[i].run_id},
                               {"treatment_run", it->second[i].run_id},
                               {"baseline", runs[i].score},
                               {"treatment", it->second[i].score}});
        }
        for (std::size_t i = matched; i < runs.size(); ++i)
            unpaired.push_back(runs[i].dir.string());
    }
    for (const auto& [setup, runs]: treat) {
        auto it = base.find(setup);
        std::size_t matched = it == base.end() ? 0 : std::min(runs.size(), it->second.size());
        for (std::size_t i = matched; i < runs.size(); ++i)
            unpaired.push_back(runs[i].dir.string());
    }
    if (!unpaired.empty())
        fail(ErrorCode::PreconditionViolation, "runs without a partner on the same computer", unpaired);
    if (pairs_out)
        *pairs_out = listing;
    return paired_compare(pairs);
}

void replay_run(const fs::path& original, const fs::path& out)
{
    auto orig = RunStore::open(original);
    auto transcript = orig.path(layout::transcript);
    if (!fs::exists(transcript))
        fail(ErrorCode::StageMissing, original.string() + " has no transcript", {std::string(layout::transcript)});

    auto persona_params = orig.params(Stage::persona);
    std::optional<RunStore> store;
    if (persona_params.contains("forked_from")) {
        store = fork_setup(persona_params["forked_from"].get<std::string>(), out, orig.run_id());
    } else {
        store = RunStore::create(out, orig.run_id());
    }
    BackendChoice choice {"replay", {}, transcript};
    auto gw = run_gateway(choice, *store);

    if (!store->complete(Stage::persona) && orig.complete(Stage::persona)) {
        ComputerOptions c;
        auto policy = orig.params(Stage::policy);
        if (policy.contains("os"))
            c.os = os_style_from(policy["os"].get<std::string>());
        auto comp = orig.params(Stage::computer);
        if (comp.contains("mirror") && comp["mirror"].is_string())
            c.mirror_dir = comp["mirror"].get<std::string>();
        if (comp.contains("allowed_hosts"))
            c.allowed_hosts = comp["allowed_hosts"].get<std::vector<std::string>>();
        create_computer(*store, orig.load_text(Stage::persona), *gw, c);
    }
    if (!store->complete(Stage::objectives) && orig.complete(Stage::objectives)) {
        auto p = orig.params(Stage::objectives);
        SetupOptions s;
        if (p.contains("start") && p["start"].is_string())
            s.start = parse_date(p["start"].get<std::string>());
        s.working_days = p.value("working_days", 20);
        run_setup(*store, *gw, s);
    }
    if (orig.complete(Stage::simulation)) {
        auto p = orig.params(Stage::simulation);
        SimulateOptions s;
        s.working_days = p.value("working_days", 20);
        s.seed = p.value("seed", std::uint64_t {0});
        s.day_turn_budget = p.value("day_turn_budget", 400);
        s.global_turn_budget = p.value("global_turn_budget", 5000);
        if (p.contains("skills_dir") && p["skills_dir"].is_string())
            s.skills_dir = p["skills_dir"].get<std::string>();
        try {
            simulate(*store, *gw, s);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::BudgetExhausted || !p.value("budget_exhausted", false))
                throw;
        }
    }
    if (orig.complete(Stage::rubric)) {
        auto p = orig.params(Stage::rubric);
        RubricOptions r;
        r.drafts = p.value("drafts", 2);
        if (p.contains("from_runs"))
            for (const auto& f: p["from_runs"])
                r.from_runs.emplace_back(f.get<std::string>());
        make_rubric(*store, *gw, r);
    }
    if (orig.complete(Stage::score))
        evaluate_run(*store, *gw, false);
    if (orig.complete(Stage::retrospective))
        retrospect(*store, *gw, false);
    if (orig.complete(Stage::experience))
        extract_experience(*store, *gw, false);
}

std::map<std::string, std::string> run_fingerprint(const fs::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e: fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file())
            continue;
        auto rel = fs::relative(e.path(), root).generic_string();
        out[rel] = fingerprint_text(e.path());
    }
    return out;
}

}  // namespace scs
