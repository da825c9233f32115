// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scs/engine.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

// Rubric drafting and merging, deliverable scoring and the retrospective
// trajectory report. The judge proposes; every sum and percentage is computed
// here.
namespace scs {

/// Everything a judge may look at for one finished run.
struct RunView {
    fs::path run_dir;
    std::string run_id;
    UserProfile profile;
    SyntheticComputer computer;
    ObjectiveSet objectives;
    CollaboratorSet collaborators;
    SimulationRecord simulation;
    std::vector<Message> messages;
};

/// Loads a run store whose simulation has completed (possibly truncated).
/// Throws StageMissing, ValidationFailed, LogCorrupt.
RunView load_run_view(const fs::path& run_dir);

enum class RubricSource { spec, interaction, expertise, reference, quality };
std::string_view to_string(RubricSource source);
/// Throws SchemaViolation naming `field`.
RubricSource rubric_source_from(std::string_view text, const std::string& field = "source");
inline constexpr RubricSource all_rubric_sources[] = {RubricSource::spec, RubricSource::interaction,
                                                      RubricSource::expertise, RubricSource::reference,
                                                      RubricSource::quality};

struct RubricItem {
    std::string item_id;
    std::string text;
    int points = 1;
    RubricSource source = RubricSource::spec;
    std::string deliverable_id;        // empty: applies to the whole run
    std::vector<std::string> sources;  // draft item ids this merged item came from
};

struct Rubric {
    std::vector<RubricItem> items;
    std::vector<std::string> flagged_keys;  // deliverable keys seen in under half the drafts

    int total_points() const;
    const RubricItem* find(std::string_view item_id) const;
    std::map<RubricSource, int> source_mix() const;
};

json to_json(const Rubric& rubric);
/// Persisted form. Throws SchemaViolation.
Rubric rubric_from_json(const json& j);
/// Checks points, unique ids and deliverable references. Throws SchemaViolation.
void validate_rubric(const Rubric& rubric, const ObjectiveSet* objectives = nullptr);

/// Judge context: objectives, collaborator expectations and the canonical
/// content of every expected artifact.
std::string judge_context(const RunView& run);

/// One draft per run. Item ids are "d<draft_index>:i<nnn>". Throws SchemaViolation.
Rubric draft_rubric(const RunView& run, int draft_index, Gateway& gateway);

/// Merges drafts keyed by deliverable. Throws TooFewDrafts, SchemaViolation.
Rubric merge_rubrics(const std::vector<Rubric>& drafts, Gateway& gateway);

struct Tally {
    long long awarded = 0;
    long long possible = 0;
    double percentage() const { return possible == 0 ? 0.0 : 100.0 * static_cast<double>(awarded) / static_cast<double>(possible); }
};

inline constexpr std::string_view general_key = "general";

struct ScoreReport {
    std::map<std::string, int> per_item;
    std::map<std::string, std::string> rationale;
    std::map<std::string, Tally> per_deliverable;  // items without a deliverable count under "general"
    Tally aggregate;
};

json to_json(const ScoreReport& report);
ScoreReport score_from_json(const json& j);

/// Pure aggregation over per-item awards. Throws SchemaViolation when an item
/// is missing, unknown or out of range.
ScoreReport aggregate_scores(const Rubric& rubric, const std::map<std::string, int>& awards);

/// Throws SchemaViolation.
ScoreReport score_run(const Rubric& rubric, const RunView& run, Gateway& gateway);

inline constexpr std::string_view retrospective_sections[] = {
    "executive_summary", "per_deliverable_analysis", "collaborator_communication_analysis",
    "workflow_efficiency", "domain_insights",        "recommendations",
    "score_summary"};

struct Evidence {
    std::vector<std::string> turns;  // "YYYY-MM-DD#k"
    std::vector<std::string> messages;
    std::vector<std::string> paths;
};

struct RetrospectiveSection {
    std::string key;
    std::string text;
    Evidence evidence;
};

struct RetrospectiveReport {
    std::string run_id;
    std::string occupation;
    std::vector<RetrospectiveSection> sections;  // fixed order
    ScoreReport score;

    const RetrospectiveSection* find(std::string_view key) const;
};

json to_json(const RetrospectiveReport& report);
RetrospectiveReport retrospective_from_json(const json& j);
std::string render_markdown(const RetrospectiveReport& report, const RunView& run, const Rubric* rubric = nullptr);

/// Throws DanglingReference naming every reference that does not resolve.
void check_evidence(const RetrospectiveReport& report, const RunView& run);

/// Throws SchemaViolation, DanglingReference.
RetrospectiveReport write_retrospective(const RunView& run, const ScoreReport& score, Gateway& gateway);

}  // namespace scs
