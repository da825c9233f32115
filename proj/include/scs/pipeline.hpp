// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scs/experience.hpp"
#include "scs/runstore.hpp"

#include <functional>
#include <memory>
#include <optional>

// Stage drivers over a run store. Each records its parameters so a run can be
// replayed from its transcript alone.
namespace scs {

struct BackendChoice {
    std::string backend = "scripted";  // live | replay | scripted
    fs::path script;                   // rules file for scripted
    fs::path transcript;               // recorded transcript for replay
};

/// Gateway recording into the run's transcript.jsonl. Throws InvalidConfig.
std::shared_ptr<Gateway> run_gateway(const BackendChoice& choice, const RunStore& store);

struct ComputerOptions {
    std::optional<OsStyle> os;
    fs::path mirror_dir;                    // offline stand-in for web downloads
    std::vector<std::string> allowed_hosts; // live downloads, live backend only
    bool force = false;
};

/// persona, profile, policy, plan and computer. Writes stats/pre.json.
void create_computer(RunStore& store, const std::string& persona_text, Gateway& gateway, const ComputerOptions& options);

struct SetupOptions {
    std::optional<Date> start;
    int working_days = 20;
    bool force = false;
};

/// objectives and collaborators.
void run_setup(RunStore& store, Gateway& gateway, const SetupOptions& options);

/// Copies the setup stages (and the pristine computer) of `source` into a fresh
/// store, so a second simulation can run on the same computer.
RunStore fork_setup(const fs::path& source, const fs::path& root, const std::string& run_id);

struct SimulateOptions {
    std::optional<int> working_days;  // default: the objectives' period
    std::uint64_t seed = 0;
    int day_turn_budget = 400;
    int global_turn_budget = 5000;
    fs::path skills_dir;
    bool force = false;
};

/// Runs the engine and writes stats/post.json. A truncated run is still saved;
/// BudgetExhausted is rethrown after the stage is recorded.
SimulationRecord simulate(RunStore& store, Gateway& gateway, const SimulateOptions& options);

struct RubricOptions {
    int drafts = 2;
    std::vector<fs::path> from_runs;  // further runs of the same setting
    bool force = false;
};

/// One draft per source run (cycling when fewer runs than drafts), then merge.
Rubric make_rubric(RunStore& store, Gateway& gateway, const RubricOptions& options);
ScoreReport evaluate_run(RunStore& store, Gateway& gateway, bool force);
RetrospectiveReport retrospect(RunStore& store, Gateway& gateway, bool force);
std::vector<ExperienceItem> extract_experience(RunStore& store, Gateway& gateway, bool force);

using GatewayFactory = std::function<std::shared_ptr<Gateway>(const RunStore&)>;

struct SkillsResult {
    std::map<std::string, OccupationDigest> digests;
    std::vector<fs::path> skill_files;
};

/// Extracts experience in every run (per-run gateways), then groups by
/// occupation and writes one skill per occupation under `out`, with digests
/// in <out>/experience/.
SkillsResult extract_skills(const std::vector<fs::path>& runs, const fs::path& out, const GatewayFactory& per_run,
                            Gateway& shared, bool force);

/// Pairs runs that share a computer and compares their aggregate scores.
/// Throws PreconditionViolation when a run has no partner, EmptySample.
PairedComparison compare_runs(const std::vector<fs::path>& baseline, const std::vector<fs::path>& treatment,
                              json* pairs_out = nullptr);

/// Re-executes every completed stage of `original` into `out` against the
/// original transcript. Throws ReplayMiss when a request was never recorded.
void replay_run(const fs::path& original, const fs::path& out);

/// Every file under `root` with JSON fields named wall_clock* removed, keyed by
/// relative path; used to compare a run with its replay.
std::map<std::string, std::string> run_fingerprint(const fs::path& root);

}  // namespace scs
