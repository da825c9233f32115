// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scs/json_io.hpp"

#include <filesystem>
#include <string>
#include <vector>

// One directory per run. Every stage writes its output once, records its
// parameters and gateway usage in stages.json, and refuses to overwrite a
// completed output unless forced.
namespace scs {

namespace fs = std::filesystem;

enum class Stage {
    persona,
    profile,
    policy,
    plan,
    computer,
    objectives,
    collaborators,
    simulation,
    rubric,
    score,
    retrospective,
    experience,
};

inline constexpr Stage all_stages[] = {Stage::persona,      Stage::profile,    Stage::policy,        Stage::plan,
                                       Stage::computer,     Stage::objectives, Stage::collaborators, Stage::simulation,
                                       Stage::rubric,       Stage::score,      Stage::retrospective, Stage::experience};

std::string_view to_string(Stage stage);
/// Throws StageMissing for names that are not stages.
Stage stage_from(std::string_view name);
/// Stages that must be complete before `stage` may be saved.
std::vector<Stage> prerequisites(Stage stage);
/// Primary output, relative to the run root.
std::string_view stage_file(Stage stage);

/// "YYYYMMDDTHHMMSSZ-xxxxxx" from the wall clock and a random suffix.
std::string new_run_id();

class RunStore {
public:
    /// Creates the root (which must be absent or empty) and stages.json.
    /// Throws RootNotEmpty.
    static RunStore create(const fs::path& root, const std::string& run_id);
    /// Throws StageMissing when the directory holds no run.
    static RunStore open(const fs::path& root);

    const fs::path& root() const { return _root; }
    const std::string& run_id() const { return _run_id; }
    fs::path path(std::string_view relative) const { return _root / std::string(relative); }

    bool complete(Stage stage) const;
    json params(Stage stage) const;
    long long gateway_calls(Stage stage) const;

    /// Checks prerequisites and write-once before a stage runs. A forced
    /// rerun drops the stage's completion mark.
    /// Throws StageMissing, StageAlreadyComplete.
    void begin(Stage stage, bool force);

    /// Validates the payload for the stage, writes it atomically and marks the
    /// stage complete. Throws SchemaViolation (or the validator's error),
    /// StageMissing, StageAlreadyComplete.
    fs::path save(Stage stage, const json& payload, const json& params = json::object(), long long gateway_calls = 0,
                  bool force = false);
    fs::path save_text(Stage stage, const std::string& text, const json& params = json::object(),
                       long long gateway_calls = 0, bool force = false);

    /// For stages that write their own files (computer, simulation, ...):
    /// validates what is on disk and marks the stage complete.
    void mark_complete(Stage stage, const json& params = json::object(), long long gateway_calls = 0);

    /// Re-reads and validates the stage output.
    /// Throws StageMissing, ValidationFailed naming the file.
    json load(Stage stage) const;
    std::string load_text(Stage stage) const;

    /// Runs the stage validator against what is on disk. Throws ValidationFailed.
    void verify(Stage stage) const;

private:
    RunStore(fs::path root, std::string run_id);
    json read_stages() const;
    void write_stages(const json& stages) const;

    fs::path _root;
    std::string _run_id;
};

}  // namespace scs
