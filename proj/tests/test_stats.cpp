// SPDX-License-Identifier: Apache-2.0
#include "batch_fixture.hpp"
#include "sim_fixture.hpp"

#include "scs/layout.hpp"
#include "scs/stats.hpp"

#include <fstream>
#include <random>

using namespace scs;
using namespace scs::testing;


TEST(Stats, ThreeRunBatch)
{
    TempDir dir;
    std::vector<fs::path> runs {
        fake_run(dir.path(), "a", 80, 63, 2209, 7, {{".xlsx", 30}, {".docx", 50}}),
        fake_run(dir.path(), "b", 90, 60, 2000, 5, {{".xlsx", 45}, {".pdf", 45}}),
        fake_run(dir.path(), "c", 100, 70, 2400, 9, {{".docx", 100}}),
    };
    auto s = summarize_batch(runs);
    const auto& files = s.metrics.at("files_pre");
    EXPECT_DOUBLE_EQ(files.mean, 90);
    EXPECT_DOUBLE_EQ(files.median, 90);
    EXPECT_DOUBLE_EQ(files.min, 80);
    EXPECT_DOUBLE_EQ(files.max, 100);
    EXPECT_DOUBLE_EQ(s.metrics.at("turns_total").max, 2470);
    EXPECT_DOUBLE_EQ(run_metrics(runs[0]).at("turns_total"), 2272);
    EXPECT_DOUBLE_EQ(s.metrics.at("collaborators").median, 7);
    EXPECT_DOUBLE_EQ(s.metrics.at("wall_clock_hours").mean, 2);

    // pooled counts: 75 xlsx, 150 docx, 45 pdf of 270
    EXPECT_EQ(s.type_counts.at(".docx"), 150);
    EXPECT_NEAR(s.type_distribution.at(".xlsx"), 100.0 * 75 / 270, 1e-9);
    double total = 0;
    for (const auto& [ext, pct]: s.type_distribution)
        total += pct;
    EXPECT_NEAR(total, 100.0, 0.1);
    EXPECT_TRUE(s.inconsistent_runs.empty());

    auto j = to_json(s);
    EXPECT_EQ(j["run_count"], 3);
    EXPECT_EQ(j["metrics"].size(), batch_metrics().size());
    auto md = render_markdown(s);
    EXPECT_NE(md.find("## Synthetic Computers"), std::string::npos);
    EXPECT_NE(md.find("| Files per computer (pre) | 90 | 90 | 80 | 100 |"), std::string::npos);
    EXPECT_NE(md.find("## File Types (pre-simulation, pooled)"), std::string::npos);
}

TEST(Stats, SingleRunCollapses)
{
    TempDir dir;
    auto s = summarize_batch({fake_run(dir.path(), "only", 42, 3, 40, 2, {{".txt", 42}})});
    for (const auto& [key, m]: s.metrics) {
        EXPECT_DOUBLE_EQ(m.mean, m.median) << key;
        EXPECT_DOUBLE_EQ(m.min, m.max) << key;
        EXPECT_DOUBLE_EQ(m.mean, m.min) << key;
    }
}

TEST(Stats, SummaryProperties)
{
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> value(0, 1000);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(1 + rng() % 20);
        for (auto& x: v)
            x = value(rng);
        auto m = summarize_values(v);
        EXPECT_LE(m.min, m.median);
        EXPECT_LE(m.median, m.max);
        EXPECT_LE(m.min, m.mean + 1e-9);
        EXPECT_LE(m.mean, m.max + 1e-9);
        auto sorted = v;
        std::sort(sorted.begin(), sorted.end());
        EXPECT_DOUBLE_EQ(m.median, sorted[(sorted.size() - 1) / 2]);
    }
    EXPECT_EQ(error_code_of([] { summarize_values({}); }), ErrorCode::PreconditionViolation);
    EXPECT_EQ(error_code_of([] { summarize_batch({}); }), ErrorCode::PreconditionViolation);
}

TEST(Stats, MissingOrBrokenInputs)
{
    TempDir dir;
    auto run = fake_run(dir.path(), "r", 10, 1, 1, 1, {{".txt", 10}});
    fs::remove(run / std::string(layout::stats_post));
    auto e = error_of([&] { run_metrics(run); });
    EXPECT_EQ(e.code(), ErrorCode::StageMissing);
    EXPECT_EQ(e.details().at(0), std::string(layout::stats_post));

    std::ofstream(run / std::string(layout::stats_post)) << "{";
    EXPECT_EQ(error_code_of([&] { run_metrics(run); }), ErrorCode::ValidationFailed);
}

TEST(Stats, PostCountMatchesDailyDiffsAfterASimulation)
{
    auto w = make_world();
    auto run = w->in.run_dir;
    auto computer_root = w->in.computer.root;
    atomic_write_json(run / std::string(layout::stats_pre), to_json(computer_stats(computer_root)));
    atomic_write_json(run / std::string(layout::collaborators), to_json(w->in.collaborators));
    auto gw = scripted(five_day_rules());
    Simulation sim(std::move(w->in), five_days(), *gw);
    sim.run();
    atomic_write_json(run / std::string(layout::stats_post), to_json(computer_stats(computer_root)));

    auto m = run_metrics(run);
    EXPECT_EQ(expected_post_files(run), static_cast<long long>(m.at("files_post")));
    EXPECT_GT(m.at("files_post"), m.at("files_pre"));
    EXPECT_DOUBLE_EQ(m.at("turns_total"), m.at("turns_weekly_planning") + m.at("turns_daily_execution"));
    EXPECT_DOUBLE_EQ(m.at("collaborators"), 7);

    // recomputing from disk gives the stored numbers
    EXPECT_EQ(to_json(computer_stats(computer_root)), read_json(run / std::string(layout::stats_post)));
    EXPECT_TRUE(summarize_batch({run}).inconsistent_runs.empty());

    // a file nobody logged breaks the consistency check
    atomic_write_text(computer_root / "drives" / "D" / "stray.txt", "x");
    atomic_write_json(run / std::string(layout::stats_post), to_json(computer_stats(computer_root)));
    EXPECT_EQ(summarize_batch({run}).inconsistent_runs.size(), 1u);
}
