// SPDX-License-Identifier: Apache-2.0
#include "scs/engine.hpp"
#include "episode_fixture.hpp"
#include "sim_fixture.hpp"
#include "test_support.hpp"

#include <map>
#include <random>
#include <set>

using namespace scs;
using namespace scs::testing;

namespace {

std::map<std::string, std::string> tree_bytes(const fs::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e: fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file())
            continue;
        auto rel = fs::relative(e.path(), root).generic_string();
        auto text = read_text(e.path());
        if (e.path().extension() == ".json") {
            auto j = json::parse(text);
            j.erase("wall_clock_seconds");
            text = j.dump();
        }
        out[rel] = text;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(Engine, FiveDayScriptedRun)
{
    auto w = make_world();
    auto gw = scripted(five_day_rules());
    auto rec = run_simulation(w->in, five_days(), *gw);

    ASSERT_EQ(rec.weekly_plans.size(), 1u);
    ASSERT_EQ(rec.days.size(), 5u);
    EXPECT_EQ(format_date(rec.days.front().date), "2026-01-05");
    EXPECT_EQ(format_date(rec.days.back().date), "2026-01-09");
    EXPECT_FALSE(rec.truncated);
    for (const auto& d: rec.days)
        EXPECT_TRUE(d.finished);

    EXPECT_EQ(rec.days[0].file_diff.added, std::vector<std::string> {"D:/ModelPortfolios/Notes/Day1.txt"});
    EXPECT_EQ(rec.days[2].file_diff.added, std::vector<std::string> {"D:/Research/VCMM/" + patricia_file});
    auto computer = load_computer(w->in.computer.root, w->in.computer.private_store);
    const auto* saved = computer.find_by_path("D:/Research/VCMM/" + patricia_file);
    ASSERT_NE(saved, nullptr);
    EXPECT_EQ(saved->origin, "received");

    auto t = rec.telemetry;
    EXPECT_EQ(t.turns_weekly_planning, 1);
    // day 1: one tool turn, one closing turn, one collaborator reply turn; other days two turns
    EXPECT_EQ(t.turns_daily_execution, 3 + 2 * 4);
    EXPECT_EQ(t.turns_total, 12);
    EXPECT_EQ(t.messages_sent, 1);
    EXPECT_EQ(t.messages_received, 1);
    EXPECT_EQ(t.communications_total, 2);

    // recount straight from the JSONL logs
    long long planning = 0, daily = 0, errors = 0;
    for (const auto& e: fs::directory_iterator(w->in.run_dir / "weeks"))
        if (e.path().string().find(".turns.jsonl") != std::string::npos)
            for (const auto& row: read_jsonl(e.path())) {
                ++planning;
                errors += row.at("error").get<bool>();
            }
    for (const auto& e: fs::directory_iterator(w->in.run_dir / "days"))
        for (const auto& row: read_jsonl(e.path() / "turns.jsonl")) {
            ++daily;
            errors += row.at("error").get<bool>();
        }
    auto persisted = telemetry_from_json(read_json(w->in.run_dir / "telemetry.json"));
    EXPECT_EQ(persisted.turns_weekly_planning, planning);
    EXPECT_EQ(persisted.turns_daily_execution, daily);
    EXPECT_EQ(persisted.error_turns, errors);
    EXPECT_EQ(gw->calls(), planning + daily);

    auto loaded = load_simulation(w->in.run_dir);
    EXPECT_EQ(loaded.days.size(), 5u);
    EXPECT_EQ(loaded.weekly_plans.size(), 1u);
    EXPECT_EQ(to_json(loaded.weekly_plans[0]).dump(), to_json(rec.weekly_plans[0]).dump());
}

TEST(Engine, ZeroDayConfigRejected)
{
    auto w = make_world();
    auto gw = scripted(five_day_rules());
    EngineConfig c;
    c.working_days = 0;
    EXPECT_EQ(error_code_of([&] { run_simulation(w->in, c, *gw); }), ErrorCode::InvalidConfig);
    EXPECT_EQ(gw->calls(), 0);
    c = EngineConfig {};
    c.day_turn_budget = 0;
    EXPECT_EQ(error_code_of([&] { validate_engine_config(c); }), ErrorCode::InvalidConfig);
}

TEST(Engine, ReplayReproducesTheRun)
{
    auto a = make_world();
    auto transcript = a->dir / "transcript.jsonl";
    {
        Gateway gw(ScriptedBackend::from_json(five_day_rules()), std::make_shared<TranscriptWriter>(transcript));
        run_simulation(a->in, five_days(), gw);
    }
    auto b = make_world();
    Gateway replay(ReplayBackend::from_file(transcript));
    run_simulation(b->in, five_days(), replay);

    auto run_a = tree_bytes(a->in.run_dir), run_b = tree_bytes(b->in.run_dir);
    EXPECT_EQ(run_a.size(), run_b.size());
    EXPECT_TRUE(run_a == run_b);
    EXPECT_TRUE(tree_bytes(a->in.computer.root) == tree_bytes(b->in.computer.root));
}

TEST(Engine, GlobalBudgetStopsWithPartialRecord)
{
    auto w = make_world();
    auto gw = scripted(five_day_rules());
    auto c = five_days();
    c.global_turn_budget = 4;
    EXPECT_EQ(error_code_of([&] { run_simulation(w->in, c, *gw); }), ErrorCode::BudgetExhausted);
    EXPECT_EQ(gw->calls(), 4);
    auto sim = read_json(w->in.run_dir / "simulation.json");
    EXPECT_TRUE(sim.at("truncated").get<bool>());
    EXPECT_TRUE(fs::exists(w->in.run_dir / "days" / "2026-01-06" / "day.json"));
}

TEST(Engine, DayBudgetTruncatesTheDay)
{
    auto w = make_world();
    auto gw = scripted(json::array({tool_rule("TURN:", json::array({call("check_inbox", json::object())}))}));
    auto c = five_days();
    c.day_turn_budget = 3;
    Simulation sim(w->in, c, *gw);
    auto day = sim.run_day(parse_date("2026-01-05"), empty_plan({parse_date("2026-01-05")}));
    EXPECT_TRUE(day.truncated);
    EXPECT_FALSE(day.finished);
    EXPECT_EQ(day.turns.size(), 3u);
}

// ---------------------------------------------------------------------------

TEST(WeeklyPlan, Week1Fixture)
{
    auto w = make_world();
    auto gw = scripted(five_day_rules());
    Simulation sim(w->in, five_days(), *gw);
    auto weeks = sim.weeks();
    ASSERT_EQ(weeks.size(), 1u);
    auto plan = sim.plan_week(1, weeks[0]);
    ASSERT_EQ(plan.activities.size(), 5u);
    const auto& a = plan.activities[1];
    EXPECT_EQ(format_date(a.date), "2026-01-05");
    EXPECT_EQ(a.minute_of_day, 10 * 60 + 30);
    EXPECT_EQ(a.kind, ActivityKind::outreach);
    EXPECT_EQ(a.contacts, std::vector<std::string> {"patricia-huang"});
    EXPECT_EQ(a.deliverable_id, "D1");
    EXPECT_EQ(plan.activities[2].creates,
              std::vector<std::string> {"D:/ModelPortfolios/VCMM_2026/AllocationModel_Conservative_v3.xlsx"});
    EXPECT_TRUE(fs::exists(w->in.run_dir / "weeks" / "week_1.json"));
    EXPECT_EQ(read_jsonl(w->in.run_dir / "weeks" / "week_1.turns.jsonl").size(), 1u);
}

TEST(WeeklyPlan, RejectsWeekendAndUnknownDeliverable)
{
    auto w = make_world();
    const auto& in = w->in;
    std::vector<Date> days;
    for (auto d = parse_date("2026-01-05"); days.size() < 5; d = next_working_day(d))
        days.push_back(d);

    auto plan = week1_plan();
    plan["activities"][0]["date"] = "2026-01-10";
    auto e = error_of([&] { weekly_plan_from_json(plan, 1, days, in.objectives, in.collaborators); });
    EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    EXPECT_EQ(e.details(), std::vector<std::string> {"activities[0].date"});

    plan = week1_plan();
    plan["activities"][1]["deliverable_id"] = "D9";
    e = error_of([&] { weekly_plan_from_json(plan, 1, days, in.objectives, in.collaborators); });
    EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    EXPECT_EQ(e.details(), std::vector<std::string> {"activities[1].deliverable_id"});

    plan = week1_plan();
    plan["activities"][1]["time"] = "08:00";
    plan["activities"][3]["contacts"] = json::array({"Nobody Known"});
    e = error_of([&] { weekly_plan_from_json(plan, 1, days, in.objectives, in.collaborators); });
    EXPECT_EQ(e.details(), (std::vector<std::string> {"activities[1].time", "activities[3].contacts"}));
}

TEST(WeeklyPlan, PlanningToolsAreReadOnly)
{
    auto w = make_world();
    auto gw = scripted(json::array({
        tool_rule("TURN: 0", json::array({call("write_file", {{"path", "D:/x.txt"}, {"content", "x"}}),
                                          call("list_dir", {{"path", "D:/"}})})),
        rule("work-agent", "TASK: weekly-plan", week1_plan()),
    }));
    Simulation sim(w->in, five_days(), *gw);
    sim.plan_week(1, sim.weeks()[0]);
    auto turns = read_jsonl(w->in.run_dir / "weeks" / "week_1.turns.jsonl");
    ASSERT_EQ(turns.size(), 2u);
    EXPECT_TRUE(turns[0].at("error").get<bool>());
    EXPECT_FALSE(turns[0]["tool_calls"][0]["ok"].get<bool>());
    EXPECT_TRUE(turns[0]["tool_calls"][1]["ok"].get<bool>());
    EXPECT_FALSE(fs::exists(w->in.computer.root / "drives" / "D" / "x.txt"));
}

// ---------------------------------------------------------------------------

TEST(Tools, WriteThenFinishRecordsDiffAndActivity)
{
    auto w = make_world();
    auto gw = scripted(json::array({
        tool_rule("TURN: 0", json::array({
                                 call("write_file", {{"path", "D:\\Work\\Memo.txt"}, {"content", "memo"}}),
                                 call("log_activity", {{"text", "Wrote the memo."}}),
                                 call("finish_day", json::object()),
                             })),
    }));
    Simulation sim(w->in, five_days(), *gw);
    auto d = parse_date("2026-01-05");
    auto day = sim.run_day(d, empty_plan({d}));
    EXPECT_TRUE(day.finished);
    EXPECT_EQ(day.turns.size(), 1u);
    EXPECT_EQ(day.file_diff.added, std::vector<std::string> {"D:/Work/Memo.txt"});
    EXPECT_TRUE(day.file_diff.modified.empty());
    ASSERT_EQ(day.activity_log.size(), 1u);
    EXPECT_EQ(day.activity_log[0].files_created, std::vector<std::string> {"D:/Work/Memo.txt"});
    const auto* e = sim.computer().find_by_path("D:/Work/Memo.txt");
    ASSERT_NE(e, nullptr);
    EXPECT_EQ(e->origin, "authored");
    EXPECT_EQ(format_timestamp(e->virtual_timestamp), "2026-01-05T09:00");
    auto side = read_json(w->in.computer.root / "drives" / "D" / "Work" / "Memo.txt.meta.json");
    EXPECT_EQ(side.at("file_id"), e->file_id);
}

TEST(Tools, ZeroToolDayHasEmptyDiff)
{
    auto w = make_world();
    auto gw = scripted(json::array({rule("work-agent", "", "Nothing to do.")}));
    Simulation sim(w->in, five_days(), *gw);
    auto d = parse_date("2026-01-05");
    auto day = sim.run_day(d, empty_plan({d}));
    EXPECT_TRUE(day.finished);
    EXPECT_EQ(day.turns.size(), 1u);
    EXPECT_TRUE(day.file_diff.added.empty());
    EXPECT_TRUE(day.file_diff.modified.empty());
    EXPECT_TRUE(day.activity_log.empty());
}

TEST(Tools, ModifiedFileKeepsOrigin)
{
    auto w = make_world();
    auto gw = scripted(json::array({
        tool_rule("TURN: 0", json::array({call("write_file", {{"path", "D:/Research/Bloomberg.xlsx"}, {"content", "v2"}}),
                                          call("finish_day", json::object())})),
    }));
    Simulation sim(w->in, five_days(), *gw);
    auto d = parse_date("2026-01-06");
    auto day = sim.run_day(d, empty_plan({d}));
    EXPECT_EQ(day.file_diff.modified, std::vector<std::string> {"D:/Research/Bloomberg.xlsx"});
    EXPECT_TRUE(day.file_diff.added.empty());
    ASSERT_EQ(day.activity_log.size(), 1u);  // unlogged changes are still recorded
    EXPECT_EQ(day.activity_log[0].files_modified, std::vector<std::string> {"D:/Research/Bloomberg.xlsx"});
    EXPECT_EQ(sim.computer().manifest.at("bloomberg").origin, "authored");
}

TEST(Tools, PathsOutsideTheComputerAreRefused)
{
    auto w = make_world();
    auto gw = scripted(json::array());
    Simulation sim(w->in, five_days(), *gw);
    auto private_host = private_file_path(w->in.computer.private_store, "patricia-huang", patricia_file).string();
    for (const std::string path: {"private:patricia-huang/" + patricia_file, std::string("../private"),
                                  std::string("D:/../private"), private_host, std::string("E:/x"),
                                  std::string("D:/Research/Bloomberg.xlsx.meta.json")}) {
        auto r = sim.handle_tool_call({"list_dir", {{"path", path}}});
        if (path.find(".meta.json") == std::string::npos) {
            EXPECT_FALSE(r.ok) << path;
            EXPECT_EQ(r.error, ErrorCode::PathOutsideRoot) << path;
        }
        r = sim.handle_tool_call({"read_file", {{"path", path}}});
        EXPECT_FALSE(r.ok) << path;
        EXPECT_EQ(r.text.find("US Equity"), std::string::npos);
        r = sim.handle_tool_call({"write_file", {{"path", path}, {"content", "x"}}});
        EXPECT_FALSE(r.ok) << path;
        EXPECT_EQ(r.error, ErrorCode::PathOutsideRoot) << path;
    }
    auto r = sim.handle_tool_call({"read_file", {{"path", "D:/Research/Bloomberg.xlsx"}}});
    EXPECT_TRUE(r.ok);
    EXPECT_EQ(r.text, "Rate data Q3");
    r = sim.handle_tool_call({"list_dir", {{"path", "D:/"}}});
    EXPECT_EQ(r.text, "D:/:\nClientWork/\nResearch/\n");
}

TEST(Tools, BlankMessagesAreBlocked)
{
    auto w = make_world();
    auto gw = scripted(json::array());
    Simulation sim(w->in, five_days(), *gw);
    auto r = sim.handle_tool_call({"send_message", {{"recipient", "kevin-tran"}, {"subject", "hi"}, {"body", " \n\t"}}});
    EXPECT_FALSE(r.ok);
    EXPECT_EQ(r.error, ErrorCode::EmptyMessageBlocked);
    EXPECT_TRUE(sim.messages().empty());

    r = sim.handle_tool_call({"send_message", {{"recipient", "Nobody"}, {"body", "hello"}}});
    EXPECT_EQ(r.error, ErrorCode::PreconditionViolation);
    r = sim.handle_tool_call({"rm_rf", json::object()});
    EXPECT_EQ(r.error, ErrorCode::UnknownTool);

    auto c = five_days();
    c.blank_guard = false;
    Simulation unguarded(w->in, c, *gw);
    r = unguarded.handle_tool_call({"send_message", {{"recipient", "kevin-tran"}, {"body", ""}}});
    EXPECT_TRUE(r.ok);
    EXPECT_EQ(unguarded.messages().size(), 1u);
}

TEST(Tools, ReplyLatencyIsSeededAndBounded)
{
    auto w = make_world();
    auto gw = scripted(json::array({rule("collaborator", "", json {{"body", "On it."}}) }));
    auto c = five_days();
    Simulation sim(w->in, c, *gw);
    sim.set_clock(parse_timestamp("2026-01-05T10:30"));
    ASSERT_TRUE(sim.handle_tool_call({"send_message", {{"recipient", "Patricia Huang"}, {"body", "Dataset please"}}}).ok);
    const auto* patricia = w->in.collaborators.find("patricia-huang");
    ASSERT_NE(patricia, nullptr);
    auto replies = sim.collaborator_turn(*patricia);
    ASSERT_EQ(replies.size(), 1u);
    auto t = replies[0].sent_at;
    EXPECT_GE(t, parse_timestamp("2026-01-06T10:30"));
    EXPECT_LE(t, parse_timestamp("2026-01-07T10:30"));
    EXPECT_EQ(replies[0].in_reply_to, "m0001");
    EXPECT_EQ(*replies[0].deliver_at, t);

    // independent recomputation of the seeded draw
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char ch: std::string("m0001")) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ull;
    }
    std::mt19937_64 rng(42 ^ h);
    auto minutes = 24 * 60 + static_cast<long long>(rng() % (24 * 60 + 1));
    EXPECT_EQ(t, parse_timestamp("2026-01-05T10:30") + std::chrono::minutes {minutes});

    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Tools, AttachmentReadableOnlyAfterSave)
{
    auto w = make_world();
    auto gw = scripted(json::array({rule("collaborator", "",
                                         json {{"body", "Here it is."}, {"attach", json::array({patricia_file})}})}));
    Simulation sim(w->in, five_days(), *gw);
    sim.set_clock(parse_timestamp("2026-01-05T10:30"));
    sim.handle_tool_call({"send_message", {{"recipient", "patricia-huang"}, {"body", "Dataset please"}}});
    sim.collaborator_turn(*w->in.collaborators.find("patricia-huang"));
    auto dest = "D:/Research/VCMM/" + patricia_file;

    // not delivered yet on Monday
    auto r = sim.handle_tool_call({"save_attachment", {{"message_id", "m0002"}, {"dest", "D:/Research/VCMM/"}}});
    EXPECT_EQ(r.error, ErrorCode::UnknownMessageId);
    EXPECT_EQ(sim.handle_tool_call({"check_inbox", json::object()}).text, "[]");

    sim.set_clock(parse_timestamp("2026-01-07T09:00"));
    EXPECT_FALSE(sim.handle_tool_call({"read_file", {{"path", dest}}}).ok);
    auto inbox = json::parse(sim.handle_tool_call({"check_inbox", json::object()}).text);
    ASSERT_EQ(inbox.size(), 1u);
    EXPECT_EQ(inbox[0]["attachments"][0], patricia_file);
    r = sim.handle_tool_call({"save_attachment", {{"message_id", "m0002"}, {"dest", "D:/Research/VCMM/"}}});
    ASSERT_TRUE(r.ok) << r.text;
    auto saved = sim.handle_tool_call({"read_file", {{"path", dest}}});
    ASSERT_TRUE(saved.ok);
    EXPECT_EQ(saved.text, read_text(private_file_path(w->in.computer.private_store, "patricia-huang", patricia_file)));
    auto side = read_json(w->in.computer.root / "drives" / "D" / "Research" / "VCMM" / (patricia_file + ".meta.json"));
    EXPECT_EQ(side.at("origin"), "received");
    EXPECT_EQ(side.at("provenance").at("kind"), "shared_attachment");
    EXPECT_EQ(side.at("provenance").at("message_id"), "m0002");
    EXPECT_EQ(sim.computer().find_by_path(dest)->origin, "received");

    EXPECT_EQ(sim.handle_tool_call({"save_attachment", {{"message_id", "m0009"}, {"dest", "D:/x"}}}).error,
              ErrorCode::UnknownMessageId);
}

TEST(Tools, CollaboratorWithNothingPendingIsSilent)
{
    auto w = make_world();
    auto gw = scripted(json::array());
    Simulation sim(w->in, five_days(), *gw);
    EXPECT_TRUE(sim.collaborator_turn(*w->in.collaborators.find("kevin-tran")).empty());
    EXPECT_EQ(gw->calls(), 0);
}

TEST(Tools, UnknownAttachmentInReplyIsRejected)
{
    auto w = make_world();
    auto gw = scripted(json::array({rule("collaborator", "", json {{"body", "x"}, {"attach", json::array({"nope.pdf"})}})}));
    Simulation sim(w->in, five_days(), *gw);
    sim.handle_tool_call({"send_message", {{"recipient", "patricia-huang"}, {"body", "hi"}}});
    EXPECT_EQ(error_code_of([&] { sim.collaborator_turn(*w->in.collaborators.find("patricia-huang")); }),
              ErrorCode::SchemaViolation);
}

TEST(Calendar, NextWorkingDay)
{
    EXPECT_EQ(format_date(next_working_day(parse_date("2026-01-09"))), "2026-01-12");
    EXPECT_EQ(format_date(next_working_day(parse_date("2026-01-10"))), "2026-01-12");
    EXPECT_EQ(format_date(first_working_day_from(parse_date("2026-01-10"))), "2026-01-12");
}

TEST(Engine, WeeksStartOnMonday)
{
    auto w = make_world();
    auto gw = scripted(json::array());
    auto c = five_days();
    c.working_days = 20;
    w->in.objectives.period_start = parse_date("2026-01-07");
    Simulation sim(w->in, c, *gw);
    auto weeks = sim.weeks();
    ASSERT_EQ(weeks.size(), 5u);
    EXPECT_EQ(weeks[0].size(), 3u);
    EXPECT_EQ(weeks[4].size(), 2u);
    EXPECT_EQ(format_date(weeks[4].back()), "2026-02-03");
}

// ---------------------------------------------------------------------------
// Telemetry

namespace {

void write_turns(const fs::path& file, int count, int errors)
{
    fs::create_directories(file.parent_path());
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

}  // namespace

TEST(Telemetry, CountsFromLogs)
{
    TempDir dir;
    for (int w = 1; w <= 4; ++w)
        write_turns(dir / ("weeks/week_" + std::to_string(w) + ".turns.jsonl"), w == 4 ? 12 : 17, 0);
    auto d = parse_date("2026-01-05");
    for (int i = 0; i < 20; ++i, d = next_working_day(d))
        write_turns(dir / ("days/" + format_date(d) + "/turns.jsonl"), i < 9 ? 111 : 110, 0);
    auto t = compute_telemetry(dir.path());
    EXPECT_EQ(t.turns_weekly_planning, 63);
    EXPECT_EQ(t.turns_daily_execution, 2209);
    EXPECT_EQ(t.turns_total, 2272);
}

TEST(Telemetry, ErrorRate)
{
    TempDir dir;
    write_turns(dir / "weeks/week_1.turns.jsonl", 14, 3);
    write_turns(dir / "days/2026-01-05/turns.jsonl", 5100, 210);
    auto t = compute_telemetry(dir.path());
    EXPECT_EQ(t.turns_total, 5114);
    EXPECT_EQ(t.error_turns, 213);
    EXPECT_NEAR(t.error_rate * 100, 4.165, 0.001);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f%%", t.error_rate * 100);
    EXPECT_STREQ(buf, "4.2%");
}

TEST(Telemetry, EmptyRunIsZero)
{
    TempDir dir;
    auto t = compute_telemetry(dir.path());
    EXPECT_EQ(t.turns_total, 0);
    EXPECT_EQ(t.error_rate, 0.0);
    EXPECT_EQ(t.communications_total, 0);
}

TEST(Telemetry, GapInTurnIndicesIsCorrupt)
{
    TempDir dir;
    write_turns(dir / "days/2026-01-05/turns.jsonl", 3, 0);
    auto text = read_text(dir / "days/2026-01-05/turns.jsonl");
    text.replace(text.find("\"index\":1"), 9, "\"index\":7");
    atomic_write_text(dir / "days/2026-01-05/turns.jsonl", text);
    EXPECT_EQ(error_code_of([&] { compute_telemetry(dir.path()); }), ErrorCode::LogCorrupt);
    atomic_write_text(dir / "days/2026-01-05/turns.jsonl", "{not json\n");
    EXPECT_EQ(error_code_of([&] { compute_telemetry(dir.path()); }), ErrorCode::LogCorrupt);
}

TEST(Telemetry, SetupTurnsReportedSeparately)
{
    TempDir dir;
    write_turns(dir / "days/2026-01-05/turns.jsonl", 4, 0);
    json stages {{"run_id", "r"},
                 {"stages", {{"profile", {{"gateway_calls", 1}}}, {"computer", {{"gateway_calls", 22}}}}}};
    atomic_write_json(dir / "stages.json", stages);
    auto t = compute_telemetry(dir.path());
    EXPECT_EQ(t.turns_setup, 23);
    EXPECT_EQ(t.turns_total, 4);
}

// ---------------------------------------------------------------------------
// Randomized episodes

namespace {

std::set<std::string> as_set(const std::vector<std::string>& v)
{
    return {v.begin(), v.end()};
}

}  // namespace

TEST(Properties, ConfidentialityAndLogConsistency)
{
    auto w = make_world();
    const auto base = w->dir / "episode";
    auto planted = planted_notes(*w);
    ASSERT_FALSE(planted.empty());

    for (int episode = 0; episode < 1000; ++episode) {
        SCOPED_TRACE("episode " + std::to_string(episode));
        auto ep = run_episode(*w, base, episode);
        const auto& in = ep->in;
        const auto& sim = *ep->sim;
        const auto& config = ep->config;
        auto& gw = *ep->gateway;
        auto problems = confidentiality_problems(*ep, base, planted);
        EXPECT_TRUE(problems.empty()) << problems.size() << " problems, first: " << problems.front();

        for (const auto& d: sim.record().days) {
            // clock never runs backwards
            for (std::size_t i = 1; i < d.turns.size(); ++i)
                EXPECT_LE(d.turns[i - 1].time, d.turns[i].time);
            for (std::size_t i = 0; i < d.turns.size(); ++i)
                EXPECT_EQ(d.turns[i].index, static_cast<int>(i));
            // activity log and manifest diff agree
            std::set<std::string> created, modified;
            for (const auto& e: d.activity_log) {
                created.insert(e.files_created.begin(), e.files_created.end());
                modified.insert(e.files_modified.begin(), e.files_modified.end());
            }
            EXPECT_EQ(created, as_set(d.file_diff.added));
            EXPECT_EQ(modified, as_set(d.file_diff.modified));
            EXPECT_LE(static_cast<int>(std::count_if(d.turns.begin(), d.turns.end(),
                                                     [](const TurnRecord& t) { return t.role == "work-agent"; })),
                      config.day_turn_budget);
        }

        // the guard keeps blank messages out of the store
        for (const auto& m: sim.messages())
            if (m.sender == user_party)
                EXPECT_FALSE(trim(m.body).empty());

        auto t = compute_telemetry(in.run_dir);
        long long turns = 0;
        for (const auto& d: sim.record().days)
            turns += static_cast<long long>(d.turns.size());
        EXPECT_EQ(t.turns_daily_execution, turns);
        EXPECT_EQ(t.turns_daily_execution, gw.calls());

        if (::testing::Test::HasFailure())
            break;
    }
}
