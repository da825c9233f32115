// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scs/json_io.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

// Population statistics over many run stores, recomputed from their files.
namespace scs {

struct MetricSummary {
    double mean = 0;
    double median = 0;  // lower-middle element
    double min = 0;
    double max = 0;
};

/// Throws PreconditionViolation on an empty sample.
MetricSummary summarize_values(const std::vector<double>& values);

struct MetricInfo {
    std::string key;
    std::string label;
    std::string table;  // "computers" or "simulations"
};

/// Every reported metric in table order.
const std::vector<MetricInfo>& batch_metrics();

struct BatchSummary {
    std::vector<std::string> runs;
    std::map<std::string, MetricSummary> metrics;
    std::map<std::string, long long> type_counts;     // pooled, pre-simulation
    std::map<std::string, double> type_distribution;  // percentages
    std::vector<std::string> inconsistent_runs;       // post files != pre + added
};

/// Per-run metric values read from stats/pre.json, stats/post.json,
/// telemetry.json and collaborators.json. Throws StageMissing.
std::map<std::string, double> run_metrics(const std::filesystem::path& run_dir);

/// Pre-simulation file count plus the files the daily diffs added.
long long expected_post_files(const std::filesystem::path& run_dir);

/// Throws StageMissing, PreconditionViolation.
BatchSummary summarize_batch(const std::vector<std::filesystem::path>& runs);

json to_json(const BatchSummary& summary);
std::string render_markdown(const BatchSummary& summary);

}  // namespace scs
