// SPDX-License-Identifier: Apache-2.0
#include "scs/stats.hpp"

#include "scs/error.hpp"
#include "scs/layout.hpp"
#include "scs/materialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace scs {

namespace {

json required(const fs::path& run_dir, std::string_view rel)
{
    auto path = run_dir / std::string(rel);
    if (!fs::exists(path))
        fail(ErrorCode::StageMissing, run_dir.string() + " has no " + std::string(rel), {std::string(rel)});
    try {
        return read_json(path);
    } catch (const std::exception& e) {
        fail(ErrorCode::ValidationFailed, std::string(rel) + " does not parse: " + e.what(), {std::string(rel)});
    }
}

std::string number(double v)
{
    char buf[48];
    if (std::abs(v - std::round(v)) < 1e-9)
        std::snprintf(buf, sizeof buf, "%.0f", v);
    else
        std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

MetricSummary summarize_values(const std::vector<double>& values)
{
    if (values.empty())
        fail(ErrorCode::PreconditionViolation, "no values to summarize");
    MetricSummary m;
    m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    m.median = lower_median(values);
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    m.min = *lo;
    m.max = *hi;
    return m;
}

const std::vector<MetricInfo>& batch_metrics()
{
    static const std::vector<MetricInfo> metrics {
        {"files_pre", "Files per computer (pre)", "computers"},
        {"files_post", "Files per computer (post)", "computers"},
        {"directories_pre", "Directories (pre)", "computers"},
        {"directories_post", "Directories (post)", "computers"},
        {"avg_directory_depth_pre", "Avg directory depth (pre)", "computers"},
        {"avg_directory_depth_post", "Avg directory depth (post)", "computers"},
        {"max_directory_depth_pre", "Max directory depth (pre)", "computers"},
        {"max_directory_depth_post", "Max directory depth (post)", "computers"},
        {"turns_weekly_planning", "Turns: weekly planning", "simulations"},
        {"turns_daily_execution", "Turns: daily execution", "simulations"},
        {"turns_total", "Turns: total", "simulations"},
        {"wall_clock_hours", "Wall-clock (hours)", "simulations"},
        {"collaborators", "Collaborators", "simulations"},
        {"communications", "Communications", "simulations"},
    };
    return metrics;
}

std::map<std::string, double> run_metrics(const fs::path& run_dir)
{
    auto pre = computer_stats_from_json(required(run_dir, layout::stats_pre));
    auto post = computer_stats_from_json(required(run_dir, layout::stats_post));
    auto telemetry = required(run_dir, layout::telemetry);
    auto collaborators = required(run_dir, layout::collaborators);

    std::map<std::string, double> m;
    m["files_pre"] = static_cast<double>(pre.file_count);
    m["files_post"] = static_cast<double>(post.file_count);
    m["directories_pre"] = static_cast<double>(pre.directory_count);
    m["directories_post"] = static_cast<double>(post.directory_count);
    m["avg_directory_depth_pre"] = pre.avg_directory_depth;
    m["avg_directory_depth_post"] = post.avg_directory_depth;
    m["max_directory_depth_pre"] = static_cast<double>(pre.max_directory_depth);
    m["max_directory_depth_post"] = static_cast<double>(post.max_directory_depth);
    auto planning = telemetry.value("turns_weekly_planning", 0.0);
    auto execution = telemetry.value("turns_daily_execution", 0.0);
    m["turns_weekly_planning"] = planning;
    m["turns_daily_execution"] = execution;
    m["turns_total"] = planning + execution;
    m["wall_clock_hours"] = telemetry.value("wall_clock_seconds", 0.0) / 3600.0;
    const auto& list = collaborators.contains("collaborators") ? collaborators["collaborators"] : collaborators;
    m["collaborators"] = list.is_array() ? static_cast<double>(list.size()) : 0.0;
    m["communications"] = telemetry.value("communications_total", 0.0);
    return m;
}

long long expected_post_files(const fs::path& run_dir)
{
    auto pre = computer_stats_from_json(required(run_dir, layout::stats_pre));
    long long added = 0;
    auto days = run_dir / "days";
    if (fs::exists(days))
        for (const auto& e: fs::directory_iterator(days)) {
            auto day = e.path() / "day.json";
            if (!fs::exists(day))
                continue;
            const auto j = read_json(day);
            if (j.contains("file_diff") && j["file_diff"].contains("added"))
                added += static_cast<long long>(j["file_diff"]["added"].size());
        }
    return pre.file_count + added;
}

BatchSummary summarize_batch(const std::vector<fs::path>& runs)
{
    if (runs.empty())
        fail(ErrorCode::PreconditionViolation, "no runs to summarize");
    BatchSummary s;
    std::map<std::string, std::vector<double>> values;
    for (const auto& r: runs) {
        s.runs.push_back(r.filename().string());
        auto m = run_metrics(r);
        for (const auto& [k, v]: m)
            values[k].push_back(v);
        auto pre = computer_stats_from_json(required(r, layout::stats_pre));
        for (const auto& [ext, t]: pre.type_distribution)
            s.type_counts[ext] += t.count;
        if (expected_post_files(r) != static_cast<long long>(m["files_post"]))
            s.inconsistent_runs.push_back(r.filename().string());
    }
    for (const auto& info: batch_metrics())
        s.metrics[info.key] = summarize_values(values[info.key]);
    long long total = 0;
    for (const auto& [ext, n]: s.type_counts)
        total += n;
    for (const auto& [ext, n]: s.type_counts)
        s.type_distribution[ext] = total == 0 ? 0.0 : 100.0 * static_cast<double>(n) / static_cast<double>(total);
    return s;
}

json to_json(const BatchSummary& s)
{
    json metrics = json::object();
    for (const auto& info: batch_metrics()) {
        const auto& m = s.metrics.at(info.key);
        metrics[info.key] = {{"label", info.label}, {"mean", m.mean}, {"median", m.median}, {"min", m.min}, {"max", m.max}};
    }
    json types = json::object();
    for (const auto& [ext, pct]: s.type_distribution)
        types[ext] = {{"count", s.type_counts.at(ext)}, {"percentage", pct}};
    return {{"run_count", s.runs.size()},
            {"runs", s.runs},
            {"metrics", metrics},
            {"type_distribution", types},
            {"inconsistent_runs", s.inconsistent_runs}};
}

std::string render_markdown(const BatchSummary& s)
{
    std::string out = "# Batch Summary\n\nRuns: " + std::to_string(s.runs.size()) + "\n";
    auto table = [&](const std::string& key, const std::string& title) {
        out += "\n## " + title + "\n\n| Metric | Mean | Median | Min | Max |\n|---|---:|---:|---:|---:|\n";
        for (const auto& info: batch_metrics()) {
            if (info.table != key)
                continue;
            const auto& m = s.metrics.at(info.key);
            out += "| " + info.label + " | " + number(m.mean) + " | " + number(m.median) + " | " + number(m.min) +
                   " | " + number(m.max) + " |\n";
        }
    };
    table("computers", "Synthetic Computers");
    table("simulations", "Simulations");

    std::vector<std::pair<std::string, double>> types(s.type_distribution.begin(), s.type_distribution.end());
    std::stable_sort(types.begin(), types.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    out += "\n## File Types (pre-simulation, pooled)\n\n| Type | Files | Share |\n|---|---:|---:|\n";
    for (const auto& [ext, pct]: types) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f%%", pct);
        out += "| " + ext + " | " + std::to_string(s.type_counts.at(ext)) + " | " + buf + " |\n";
    }
    if (!s.inconsistent_runs.empty()) {
        out += "\nRuns whose post-simulation file count disagrees with their daily diffs:";
        for (const auto& r: s.inconsistent_runs)
            out += " " + r;
        out += "\n";
    }
    return out;
}

}  // namespace scs
