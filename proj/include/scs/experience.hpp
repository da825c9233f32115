// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scs/evaluate.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

// Experience items from retrospectives, per-occupation digests, occupation
// skills and the paired sign-test comparison of baseline and skill runs.
namespace scs {

enum class ExperienceKind { lesson, warning, failure_mode, work_pattern };
std::string_view to_string(ExperienceKind kind);
/// Throws SchemaViolation naming `field`.
ExperienceKind experience_kind_from(std::string_view text, const std::string& field = "kind");

struct ExperienceItem {
    std::string item_id;  // "<run_id>:e<k>"
    ExperienceKind kind = ExperienceKind::lesson;
    std::string text;
    std::string occupation;
    std::string source_run;
};

json to_json(const ExperienceItem& item);
ExperienceItem experience_item_from_json(const json& j);

/// Occupations compare case-insensitively after trimming.
std::string occupation_key(std::string_view occupation);

/// Throws PreconditionViolation, SchemaViolation.
std::vector<ExperienceItem> extract_items(const RetrospectiveReport& report, Gateway& gateway);

void write_items(const fs::path& path, const std::vector<ExperienceItem>& items);
std::vector<ExperienceItem> read_items(const fs::path& path);

struct DigestGroup {
    std::string canonical_text;
    std::vector<std::string> members;
    int count() const { return static_cast<int>(members.size()); }
};

struct OccupationDigest {
    std::string occupation;
    std::vector<DigestGroup> groups;  // non-increasing by count

    int total() const;
};

json to_json(const OccupationDigest& digest);
OccupationDigest digest_from_json(const json& j);

/// Counts and ranks a proposed partition of one occupation's items.
/// `partition` is {"groups":[{"text","members":[item ids]}]}.
/// Throws PartitionInvalid, SchemaViolation.
OccupationDigest digest_from_partition(const std::string& occupation, const std::vector<ExperienceItem>& items,
                                       const json& partition);

/// One partition request per occupation. Keyed by occupation_key().
/// Throws PreconditionViolation, PartitionInvalid, SchemaViolation.
std::map<std::string, OccupationDigest> group_merge_count(const std::vector<ExperienceItem>& items,
                                                          Gateway& gateway);

struct SkillRule {
    std::string tag;
    std::string text;
};

struct SkillSection {
    std::string heading;
    std::vector<SkillRule> rules;
};

struct Skill {
    std::string occupation;
    std::string trigger_scope;
    std::vector<SkillSection> sections;

    std::string slug() const { return slugify(occupation); }
};

json to_json(const Skill& skill);
/// Throws SchemaViolation.
Skill skill_from_json(const json& j);
std::string render_skill_markdown(const Skill& skill);
SkillDocument skill_document(const Skill& skill);

/// Throws PreconditionViolation on an empty digest, SchemaViolation.
Skill build_skill(const OccupationDigest& digest, Gateway& gateway);

/// Writes <dir>/<slug>.md and <dir>/<slug>.json. Returns the markdown path.
fs::path write_skill(const fs::path& dir, const Skill& skill);
/// Loads every <slug>.json skill under `dir`.
std::vector<SkillDocument> load_skill_documents(const fs::path& dir);

struct SignTest {
    long long n = 0;
    std::string tail_numerator;  // exact Σ C(n,k) over the larger tail, decimal
    double p_one_sided = 1.0;
    double p_two_sided = 1.0;
};

/// Exact binomial sign test at p = 1/2. Throws EmptySample when wins + losses is 0.
SignTest sign_test(long long wins, long long losses);

struct PairedComparison {
    int pairs = 0;
    int wins = 0;
    int losses = 0;
    int ties = 0;
    double mean_baseline = 0;
    double mean_treatment = 0;
    double mean_delta = 0;
    double p_one_sided = 1.0;
    double p_two_sided = 1.0;
    bool degenerate = false;  // every pair tied
};

json to_json(const PairedComparison& c);

/// Scores are percentages. Throws EmptySample, ScoreOutOfRange.
PairedComparison paired_compare(const std::vector<std::pair<double, double>>& pairs);

}  // namespace scs
