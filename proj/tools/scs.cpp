// SPDX-License-Identifier: Apache-2.0
// scs: drives the synthetic-computer pipeline one stage at a time.
#include "scs/error.hpp"
#include "scs/layout.hpp"
#include "scs/pipeline.hpp"
#include "scs/stats.hpp"

#include <CLI11.hpp>

#include <glob.h>

#include <iostream>

using namespace scs;

namespace {

// Exit codes
constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_backend = 3;
constexpr int exit_budget = 4;

int exit_code_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::BackendUnavailable:
    case ErrorCode::ReplayMiss: return exit_backend;
    case ErrorCode::BudgetExhausted: return exit_budget;
    default: return exit_validation;
    }
}

struct Globals {
    std::string backend = "scripted";
    std::string transcript;
    std::string script;
    std::uint64_t seed = 0;
    bool force = false;

    BackendChoice choice() const { return {backend, script, transcript}; }
};

std::vector<fs::path> expand_runs(const std::vector<std::string>& patterns)
{
    std::vector<fs::path> out;
    for (const auto& p: patterns) {
        glob_t g {};
        if (::glob(p.c_str(), 0, nullptr, &g) == 0) {
            for (std::size_t i = 0; i < g.gl_pathc; ++i)
                if (fs::exists(fs::path(g.gl_pathv[i]) / std::string(layout::stages)))
                    out.emplace_back(g.gl_pathv[i]);
        }
        globfree(&g);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.empty())
        fail(ErrorCode::StageMissing, "no run directories match the given --runs");
    return out;
}

void report(const std::string& line)
{
    std::cout << line << "\n";
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app {"Synthetic computers at scale: persona to computer to simulated month to skills", "scs"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--backend", g.backend, "Generator backend")
        ->check(CLI::IsMember({"live", "replay", "scripted"}))
        ->capture_default_str();
    app.add_option("--transcript", g.transcript, "Recorded transcript to replay from");
    app.add_option("--script", g.script, "Rules file for the scripted backend");
    app.add_option("--seed", g.seed, "Simulation seed")->capture_default_str();
    app.add_flag("--force", g.force, "Redo a stage that is already complete");

    std::string run, run_id, persona, os, mirror, start, fork_from, skills, out;
    std::vector<std::string> hosts, from_runs, runs, baseline, treatment;
    int working_days = 0, drafts = 2, day_budget = 400, turn_budget = 5000;

    auto* create = app.add_subcommand("create-computer", "Persona to profile, policy, plan and materialized computer");
    create->add_option("--run", run, "New run directory")->required();
    create->add_option("--run-id", run_id, "Run id (default: timestamp and random suffix)");
    create->add_option("--persona", persona, "Persona text file")->required()->check(CLI::ExistingFile);
    create->add_option("--os", os, "windows or unix")->check(CLI::IsMember({"windows", "unix"}));
    create->add_option("--mirror", mirror, "Offline mirror for planned downloads")->check(CLI::ExistingDirectory);
    create->add_option("--allow-host", hosts, "Host live downloads may use");

    auto* setup = app.add_subcommand("setup", "Objectives and collaborators for a created computer");
    setup->add_option("--run", run, "Run directory")->required();
    setup->add_option("--start", start, "First day of the period (YYYY-MM-DD)");
    setup->add_option("--working-days", working_days, "Length of the period")->check(CLI::PositiveNumber);

    auto* sim = app.add_subcommand("simulate", "Run the work agent over the period");
    sim->add_option("--run", run, "Run directory (created when forking)")->required();
    sim->add_option("--fork-from", fork_from, "Set-up run whose computer is copied into --run");
    sim->add_option("--run-id", run_id, "Run id for a forked run");
    sim->add_option("--working-days", working_days, "Days to simulate (default: the whole period)")
        ->check(CLI::PositiveNumber);
    sim->add_option("--day-budget", day_budget, "Turns per day")->check(CLI::PositiveNumber)->capture_default_str();
    sim->add_option("--turn-budget", turn_budget, "Turns per run")->check(CLI::PositiveNumber)->capture_default_str();
    sim->add_option("--skills", skills, "Directory of skill files")->check(CLI::ExistingDirectory);

    auto* rubric = app.add_subcommand("make-rubric", "Draft rubrics and merge them");
    rubric->add_option("--run", run, "Run directory")->required();
    rubric->add_option("--drafts", drafts, "Number of drafts")->capture_default_str();
    rubric->add_option("--from-run", from_runs, "Further runs of the same setting to draft from");

    auto* evaluate = app.add_subcommand("evaluate", "Score the final deliverables against the rubric");
    evaluate->add_option("--run", run, "Run directory")->required();

    auto* retro = app.add_subcommand("retrospect", "Write the retrospective report");
    retro->add_option("--run", run, "Run directory")->required();

    auto* skills_cmd = app.add_subcommand("extract-skills", "Experience items, occupation digests and skills");
    skills_cmd->add_option("--runs", runs, "Run directories or globs")->required();
    skills_cmd->add_option("--out", out, "Output directory")->required();

    auto* compare = app.add_subcommand("compare", "Paired comparison of two arms run on the same computers");
    compare->add_option("--baseline", baseline, "Baseline runs or globs")->required();
    compare->add_option("--treatment", treatment, "Treatment runs or globs")->required();
    compare->add_option("--out", out, "Result file (default compare.json)");

    auto* stats = app.add_subcommand("stats", "Batch statistics");
    stats->add_option("--runs", runs, "Run directories or globs")->required();
    stats->add_option("--out", out, "summary.json or summary.md; both are written")->required();

    auto* replay = app.add_subcommand("replay", "Re-execute a run against its transcript and compare");
    replay->add_option("--run", run, "Original run directory")->required();
    replay->add_option("--out", out, "Directory for the replayed run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? exit_ok : exit_validation;
    }

    try {
        if (create->parsed()) {
            // an interrupted attempt resumes in place
            auto store = fs::exists(fs::path(run) / std::string(layout::stages))
                             ? RunStore::open(run)
                             : RunStore::create(run, run_id.empty() ? new_run_id() : run_id);
            auto gw = run_gateway(g.choice(), store);
            ComputerOptions c;
            if (!os.empty())
                c.os = os_style_from(os);
            c.mirror_dir = mirror;
            c.allowed_hosts = hosts;
            c.force = g.force;
            create_computer(store, read_text(persona), *gw, c);
            auto plan = store.load(Stage::plan);
            report(store.run_id() + ": computer with " + std::to_string(plan["files"].size()) + " planned files");
        } else if (setup->parsed()) {
            auto store = RunStore::open(run);
            auto gw = run_gateway(g.choice(), store);
            SetupOptions s;
            if (!start.empty())
                s.start = parse_date(start);
            if (working_days > 0)
                s.working_days = working_days;
            s.force = g.force;
            run_setup(store, *gw, s);
            auto c = store.load(Stage::collaborators);
            report(store.run_id() + ": " + std::to_string(store.load(Stage::objectives)["deliverables"].size()) +
                   " deliverables, " + std::to_string(c["collaborators"].size()) + " collaborators");
        } else if (sim->parsed()) {
            std::optional<RunStore> store;
            if (!fork_from.empty())
                store = fork_setup(fork_from, run, run_id.empty() ? new_run_id() : run_id);
            else
                store = RunStore::open(run);
            auto gw = run_gateway(g.choice(), *store);
            SimulateOptions s;
            if (working_days > 0)
                s.working_days = working_days;
            s.seed = g.seed;
            s.day_turn_budget = day_budget;
            s.global_turn_budget = turn_budget;
            s.skills_dir = skills;
            s.force = g.force;
            auto record = simulate(*store, *gw, s);
            report(store->run_id() + ": simulated " + std::to_string(record.days.size()) + " days");
        } else if (rubric->parsed()) {
            auto store = RunStore::open(run);
            auto gw = run_gateway(g.choice(), store);
            RubricOptions r;
            r.drafts = drafts;
            for (const auto& f: from_runs)
                r.from_runs.emplace_back(f);
            r.force = g.force;
            auto merged = make_rubric(store, *gw, r);
            report(store.run_id() + ": rubric with " + std::to_string(merged.items.size()) + " items, " +
                   std::to_string(merged.total_points()) + " points");
        } else if (evaluate->parsed()) {
            auto store = RunStore::open(run);
            auto gw = run_gateway(g.choice(), store);
            auto score = evaluate_run(store, *gw, g.force);
            char pct[32];
            std::snprintf(pct, sizeof pct, "%.1f%%", score.aggregate.percentage());
            report(store.run_id() + ": " + std::to_string(score.aggregate.awarded) + " / " +
                   std::to_string(score.aggregate.possible) + " (" + pct + ")");
        } else if (retro->parsed()) {
            auto store = RunStore::open(run);
            auto gw = run_gateway(g.choice(), store);
            retrospect(store, *gw, g.force);
            report(store.path(layout::retrospective).string());
        } else if (skills_cmd->parsed()) {
            auto dirs = expand_runs(runs);
            fs::create_directories(out);
            auto shared = make_gateway(g.backend, g.backend == "replay" ? fs::path(g.transcript) : fs::path(g.script),
                                       fs::path(out) / std::string(layout::transcript));
            auto choice = g.choice();
            auto per_run = [&](const RunStore& s) { return run_gateway(choice, s); };
            auto result = extract_skills(dirs, out, per_run, *shared, g.force);
            for (const auto& f: result.skill_files)
                report(f.string());
        } else if (compare->parsed()) {
            json pairs;
            auto cmp = compare_runs(expand_runs(baseline), expand_runs(treatment), &pairs);
            auto j = to_json(cmp);
            j["pairs_detail"] = pairs;
            auto path = out.empty() ? fs::path("compare.json") : fs::path(out);
            atomic_write_json(path, j);
            char line[160];
            std::snprintf(line, sizeof line, "%d pairs: %d wins, %d losses, %d ties; delta %+.1f pp; p = %.3f (two-sided)",
                          cmp.pairs, cmp.wins, cmp.losses, cmp.ties, cmp.mean_delta, cmp.p_two_sided);
            report(line);
        } else if (stats->parsed()) {
            auto summary = summarize_batch(expand_runs(runs));
            fs::path target(out);
            auto stem = target.parent_path() / target.stem();
            atomic_write_json(stem.string() + ".json", to_json(summary));
            atomic_write_text(stem.string() + ".md", render_markdown(summary));
            report(std::to_string(summary.runs.size()) + " runs summarized into " + stem.string() + ".{json,md}");
            if (!summary.inconsistent_runs.empty())
                return exit_validation;
        } else if (replay->parsed()) {
            replay_run(run, out);
            auto a = run_fingerprint(run);
            auto b = run_fingerprint(out);
            std::vector<std::string> differ;
            for (const auto& [rel, text]: a)
                if (!b.count(rel) || b.at(rel) != text)
                    differ.push_back(rel);
            for (const auto& [rel, text]: b)
                if (!a.count(rel))
                    differ.push_back(rel);
            if (!differ.empty()) {
                std::cerr << "scs: replay differs from the original in " << differ.size() << " file(s):\n";
                for (const auto& d: differ)
                    std::cerr << "  " << d << "\n";
                return exit_validation;
            }
            report("replay identical: " + std::to_string(a.size()) + " files");
        }
    } catch (const Error& e) {
        std::cerr << "scs: " << e.what() << "\n";
        for (const auto& d: e.details())
            std::cerr << "  " << d << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "scs: " << e.what() << "\n";
        return exit_validation;
    }
    return exit_ok;
}
