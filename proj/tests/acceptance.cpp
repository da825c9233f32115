// SPDX-License-Identifier: Apache-2.0
// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
#include "batch_fixture.hpp"
#include "episode_fixture.hpp"
#include "plan_oracles.hpp"
#include "test_support.hpp"

#include "scs/experience.hpp"
#include "scs/layout.hpp"
#include "scs/materialize.hpp"
#include "scs/pipeline.hpp"
#include "scs/stats.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

using namespace scs;
using namespace scs::testing;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects failed expectations without aborting the criterion.
class Check {
public:
    void expect(bool ok, const std::string& what)
    {
        if (!ok && _failures++ < 3)
            _notes += (_notes.empty() ? "" : "; ") + what;
    }
    Outcome done(std::string detail) const
    {
        if (_failures == 0)
            return {true, std::move(detail)};
        return {false, std::to_string(_failures) + " failed: " + _notes};
    }

private:
    int _failures = 0;
    std::string _notes;
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Outcome sign_test_values()
{
    Check c;
    auto s = sign_test(105, 67);
    auto one = fmt("%.3f", s.p_one_sided);
    auto two = fmt("%.3f", s.p_two_sided);
    c.expect(one == "0.002", "one-sided " + one);
    c.expect(two == "0.005", "two-sided " + two);
    c.expect(s.n == 172, "n");
    return c.done("p one-sided " + one + ", two-sided " + two);
}

Outcome score_aggregation()
{
    const std::vector<std::pair<std::string, int>> possible {{"D1", 168}, {"D2", 186}, {"D3", 166}, {"D4", 180}, {"D5", 146}};
    const std::map<std::string, int> awarded {{"D1", 127}, {"D2", 164}, {"D3", 97}, {"D4", 137}, {"D5", 80}};
    Rubric r;
    int n = 0;
    for (const auto& [d, total]: possible)
        for (int left = total; left > 0; left -= 4) {
            char id[16];
            std::snprintf(id, sizeof id, "i%03d", ++n);
            r.items.push_back({id, "requirement", std::min(4, left), RubricSource::spec, d, {}});
        }
    std::map<std::string, int> left = awarded, awards;
    for (const auto& i: r.items) {
        int give = std::min(i.points, left[i.deliverable_id]);
        awards[i.item_id] = give;
        left[i.deliverable_id] -= give;
    }
    auto report = aggregate_scores(r, awards);
    Check c;
    for (const auto& [d, total]: possible) {
        c.expect(report.per_deliverable[d].possible == total, d + " possible");
        c.expect(report.per_deliverable[d].awarded == awarded.at(d), d + " awarded");
    }
    c.expect(report.aggregate.awarded == 605 && report.aggregate.possible == 846, "aggregate 605/846");
    c.expect(std::abs(report.aggregate.percentage() - 71.5) <= 0.05, "percentage");
    return c.done(std::to_string(report.aggregate.awarded) + "/" + std::to_string(report.aggregate.possible) + " = " +
                  fmt("%.1f%%", report.aggregate.percentage()));
}

Outcome paired_comparison()
{
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 100; ++i) {
        double base = 61.6 + ((i % 5) - 2);
        double delta = i < 79 ? 9.0 : i < 83 ? 1.5 : -1.0;
        pairs.emplace_back(base, base + delta);
    }
    auto cmp = paired_compare(pairs);
    Check c;
    c.expect(std::abs(cmp.mean_baseline - 61.6) < 1e-9 && std::abs(cmp.mean_treatment - 68.6) < 1e-9, "means");
    c.expect(fmt("%+.1f", cmp.mean_delta) == "+7.0", "delta");
    c.expect(cmp.wins == 83 && cmp.losses == 17, "wins/losses");
    return c.done("delta " + fmt("%+.1f", cmp.mean_delta) + " pp, " + std::to_string(cmp.wins) + " wins, " +
                  std::to_string(cmp.losses) + " losses");
}

void write_turns(const fs::path& file, int count, int errors)
{
    std::string text;
    for (int i = 0; i < count; ++i) {
        TurnRecord t;
        t.index = i;
        t.role = "work-agent";
        t.time = parse_timestamp("2026-01-05T09:00");
        t.error = i < errors;
        text += to_json(t).dump() + "\n";
    }
    atomic_write_text(file, text);
}

Outcome telemetry()
{
    Check c;
    TempDir errors;
    write_turns(errors / "weeks/week_1.turns.jsonl", 14, 3);
    write_turns(errors / "days/2026-01-05/turns.jsonl", 5100, 210);
    auto e = compute_telemetry(errors.path());
    auto rate = fmt("%.1f%%", e.error_rate * 100);
    c.expect(e.turns_total == 5114 && e.error_turns == 213, "turn counts");
    c.expect(rate == "4.2%", "error rate " + rate);

    TempDir month;
    for (int w = 1; w <= 4; ++w)
        write_turns(month / ("weeks/week_" + std::to_string(w) + ".turns.jsonl"), w == 4 ? 12 : 17, 0);
    auto d = parse_date("2026-01-05");
    for (int i = 0; i < 20; ++i, d = next_working_day(d))
        write_turns(month / ("days/" + format_date(d) + "/turns.jsonl"), i < 9 ? 111 : 110, 0);
    auto t = compute_telemetry(month.path());
    c.expect(t.turns_weekly_planning == 63 && t.turns_daily_execution == 2209 && t.turns_total == 2272, "63 + 2209");
    return c.done("error rate " + rate + " of 5114; total " + std::to_string(t.turns_total));
}

Outcome instantiation_order_properties()
{
    Check c;
    std::mt19937_64 rng(2024);
    int small = 0;
    for (int round = 0; round < 1000; ++round) {
        auto plan = random_dag(rng, 50);
        auto order = instantiation_order(plan);
        std::map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < order.size(); ++i)
            pos[order[i]] = i;
        c.expect(order.size() == plan.files.size() && pos.size() == plan.files.size(), "permutation");
        for (const auto& e: plan.edges)
            c.expect(pos[e.from_id] < pos[e.to_id], "edge " + e.from_id + "->" + e.to_id);
        c.expect(order == instantiation_order(plan), "repeatable");
        if (plan.files.size() <= 8) {
            ++small;
            c.expect(order == priority_scan_oracle(plan), "oracle");
        }
    }
    return c.done("1000 DAGs, " + std::to_string(small) + " checked against the oracle");
}

Outcome path_round_trip()
{
    Check c;
    const std::string example = "D:/Research/VCMM/VCMM_ReturnProjections_Summary_2025.pdf";
    c.expect(map_logical_path(example, OsStyle::windows) ==
                 "drives/D/Research/VCMM/VCMM_ReturnProjections_Summary_2025.pdf",
             "worked example");
    std::mt19937_64 rng(99);
    const std::string alphabet = "abcXYZ019 _-.()&'#";
    for (int i = 0; i < 10000; ++i) {
        auto os = rng() % 2 ? OsStyle::windows : OsStyle::macos;
        LogicalPath lp;
        lp.mount = os == OsStyle::windows ? std::string(1, static_cast<char>('A' + rng() % 26)) : "/";
        int depth = static_cast<int>(rng() % 6);
        for (int d = 0; d < depth; ++d) {
            std::string part;
            int len = 1 + static_cast<int>(rng() % 10);
            for (int k = 0; k < len; ++k)
                part += alphabet[rng() % alphabet.size()];
            if (part == "." || part == "..")
                part += "x";
            lp.components.push_back(part);
        }
        auto text = format_logical_path(lp, os);
        c.expect(is_valid_logical_path(text, os), "valid " + text);
        c.expect(unmap_physical_path(map_logical_path(text, os), os) == text, "round trip " + text);
    }
    return c.done("10000 paths, worked example maps to drives/D/...");
}

Outcome confidentiality()
{
    Check c;
    auto w = make_world();
    const auto base = w->dir / "episode";
    auto planted = planted_notes(*w);
    c.expect(!planted.empty(), "fixture has planted notes");
    long long blocked = 0;
    for (int episode = 0; episode < 1000; ++episode) {
        auto ep = run_episode(*w, base, episode);
        for (const auto& p: confidentiality_problems(*ep, base, planted))
            c.expect(false, "episode " + std::to_string(episode) + ": " + p);
        for (const auto& d: ep->sim->record().days)
            for (const auto& t: d.turns)
                for (const auto& call: t.tool_calls)
                    blocked += !call.ok && call.arguments.dump().find("private") != std::string::npos;
    }
    return c.done("1000 episodes, " + std::to_string(blocked) + " private-store attempts blocked and logged");
}

Outcome end_to_end()
{
    Check c;
    TempDir dir;
    auto run = dir / "run";
    {
        auto store = RunStore::create(run, "adv-001");
        BackendChoice script {"scripted", fixture("advisor/pipeline_rules.json"), {}};
        auto gw = run_gateway(script, store);
        ComputerOptions computer;
        computer.mirror_dir = fixture("advisor/mirror");
        create_computer(store, read_text(fixture("advisor/persona.txt")), *gw, computer);
        run_setup(store, *gw, {});
        SimulateOptions sim;
        sim.working_days = 5;
        sim.seed = 42;
        simulate(store, *gw, sim);
        make_rubric(store, *gw, {});
        evaluate_run(store, *gw, false);
        retrospect(store, *gw, false);
        extract_experience(store, *gw, false);

        auto plan = store.load(Stage::plan);
        c.expect(plan["files"].size() >= 20, "planned files");
        c.expect(plan["edges"].size() >= 3, "dependency edges");
        c.expect(store.load(Stage::simulation)["days"].size() == 5, "five days");
        c.expect(store.load(Stage::collaborators)["collaborators"].size() >= 2, "collaborators");
        c.expect(fs::exists(store.path("eval/rubric_drafts/draft_2.json")), "two drafts");
        for (auto s: all_stages)
            c.expect(store.complete(s), std::string(to_string(s)) + " complete");
    }
    replay_run(run, dir / "replay");
    auto a = run_fingerprint(run);
    auto b = run_fingerprint(dir / "replay");
    c.expect(a == b, "replay differs");
    return c.done(std::to_string(a.size()) + " files identical after replay");
}

Outcome plan_diagnostics()
{
    Check c;
    auto expect_only = [&](const FilesystemPlan& p, const std::string& want) {
        auto got = codes(validate_plan(p));
        c.expect(got == std::vector<std::string> {want}, want);
    };
    auto cycle = small_plan();
    cycle.edges.push_back({"c", "a", Relation::references});
    cycle.files[2].virtual_timestamp = cycle.files[0].virtual_timestamp = cycle.files[1].virtual_timestamp;
    expect_only(cycle, "fatal:CycleDetected");

    auto unknown = small_plan();
    unknown.edges.push_back({"a", "zz", Relation::references});
    expect_only(unknown, "fatal:UnknownFileId");

    auto dup = small_plan();
    dup.files[1].logical_path = "D:/A/a.docx";
    expect_only(dup, "fatal:DuplicatePath");

    auto orphan = small_plan();
    orphan.files.push_back(file("d", "D:/B/d.txt", "2025-04-01"));
    expect_only(orphan, "fatal:OrphanDirectory");

    auto order = small_plan();
    order.edges = {{"a", "b", Relation::derived_from}};
    order.files[0].virtual_timestamp = parse_timestamp("2025-07-22");
    order.files[1].virtual_timestamp = parse_timestamp("2025-02-14");
    expect_only(order, "warning:TimestampOrderViolation");
    return c.done("5 fixtures, one diagnostic each");
}

Outcome batch_statistics()
{
    TempDir dir;
    auto make = [](long long f0, long long f1, long long d0, long long d1, double a0, double a1, long long m0,
                   long long m1, long long plan, long long exec, double hours, int collab, long long comm) {
        FakeRun r;
        r.pre = {f0, d0, a0, m0, {{".xlsx", f0 / 2}, {".docx", f0 - f0 / 2}}};
        r.post = {f1, d1, a1, m1, {}};
        r.planning = plan;
        r.execution = exec;
        r.wall_clock_seconds = hours * 3600;
        r.collaborators = collab;
        r.communications = comm;
        return r;
    };
    std::vector<fs::path> runs {
        fake_run(dir.path(), "a", make(80, 82, 20, 21, 2.0, 2.1, 4, 5, 63, 2209, 8, 7, 40)),
        fake_run(dir.path(), "b", make(90, 95, 25, 25, 3.0, 3.0, 6, 6, 60, 2000, 9, 5, 30)),
        fake_run(dir.path(), "c", make(100, 101, 30, 33, 2.5, 2.6, 5, 5, 70, 2400, 10, 9, 50)),
    };
    // mean, median (lower middle), min, max worked by hand
    const std::map<std::string, std::array<double, 4>> expected {
        {"files_pre", {90, 90, 80, 100}},
        {"files_post", {278.0 / 3, 95, 82, 101}},
        {"directories_pre", {25, 25, 20, 30}},
        {"directories_post", {79.0 / 3, 25, 21, 33}},
        {"avg_directory_depth_pre", {2.5, 2.5, 2.0, 3.0}},
        {"avg_directory_depth_post", {7.7 / 3, 2.6, 2.1, 3.0}},
        {"max_directory_depth_pre", {5, 5, 4, 6}},
        {"max_directory_depth_post", {16.0 / 3, 5, 5, 6}},
        {"turns_weekly_planning", {193.0 / 3, 63, 60, 70}},
        {"turns_daily_execution", {2203, 2209, 2000, 2400}},
        {"turns_total", {6802.0 / 3, 2272, 2060, 2470}},
        {"wall_clock_hours", {9, 9, 8, 10}},
        {"collaborators", {7, 7, 5, 9}},
        {"communications", {40, 40, 30, 50}},
    };
    auto s = summarize_batch(runs);
    Check c;
    for (const auto& info: batch_metrics()) {
        const auto& want = expected.at(info.key);
        const auto& got = s.metrics.at(info.key);
        std::array<double, 4> have {got.mean, got.median, got.min, got.max};
        for (int k = 0; k < 4; ++k)
            c.expect(std::abs(have[k] - want[k]) < 1e-9, info.key);
    }
    double total = 0;
    for (const auto& [ext, pct]: s.type_distribution)
        total += pct;
    c.expect(std::abs(total - 100.0) <= 0.1, "type distribution sums to " + fmt("%.3f", total));
    return c.done(std::to_string(batch_metrics().size()) + " metrics match; types sum to " + fmt("%.1f", total));
}

struct Criterion {
    int id;
    std::string name;
    double limit_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main()
{
    const std::vector<Criterion> criteria {
        {1, "sign test 105/67", 1, sign_test_values},
        {2, "score aggregation 605/846", 1, score_aggregation},
        {3, "paired comparison, 100 pairs", 1, paired_comparison},
        {4, "telemetry arithmetic", 5, telemetry},
        {5, "instantiation order properties", 10, instantiation_order_properties},
        {6, "path mapping round trip", 2, path_round_trip},
        {7, "confidentiality over 1000 episodes", 60, confidentiality},
        {8, "deterministic end-to-end and replay", 120, end_to_end},
        {9, "plan validation diagnostics", 1, plan_diagnostics},
        {10, "batch statistics", 5, batch_statistics},
    };
    int failed = 0;
    for (const auto& c: criteria) {
        auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (o.pass && secs > c.limit_seconds) {
            o.pass = false;
            o.detail += "; took longer than " + fmt("%.0f", c.limit_seconds) + " s";
        }
        failed += !o.pass;
        std::printf("%s %2d  %-38s %8.3f s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), secs,
                    o.detail.c_str());
    }
    std::printf("SKIP 11  live smoke test (needs SCS_API_BASE/SCS_API_KEY; not gating)\n");
    std::fflush(stdout);
    return failed == 0 ? 0 : 1;
}
