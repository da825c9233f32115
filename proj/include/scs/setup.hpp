// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scs/materialize.hpp"
#include "scs/profile.hpp"

#include <optional>
#include <string>
#include <vector>

namespace scs {

struct Milestone {
    int week_index = 1;  // 1-based week of the period
    std::string summary;
};

struct Deliverable {
    std::string deliverable_id;
    std::string title;
    std::string description;
    Date target_date {};
    std::vector<Milestone> milestones;
    std::vector<std::string> expected_artifacts;
    std::vector<std::string> depends_on;
};

struct ObjectiveSet {
    Date period_start {};
    int working_days = 20;
    std::vector<Deliverable> deliverables;

    /// The working days of the period in order.
    std::vector<Date> working_dates() const;
    Date period_end() const;
    /// Number of Monday-started calendar weeks the period touches.
    int week_count() const;
    const Deliverable* find(std::string_view id) const;
};

json to_json(const ObjectiveSet& objectives);
/// Parses and validates. Throws SchemaViolation or DependencyCycle.
ObjectiveSet objectives_from_json(const json& j, OsStyle os);
void validate_objectives(const ObjectiveSet& objectives, OsStyle os);

struct ObjectivesConfig {
    std::optional<Date> start;  // otherwise the backend's, else the Monday after the newest file
    int working_days = 20;
};

ObjectiveSet create_objectives(const UserProfile& profile, const SyntheticComputer& computer, Gateway& gateway,
                               const ObjectivesConfig& config = {});

// ---------------------------------------------------------------------------

enum class Relationship { manager, peer, direct_report, client, compliance, external };
std::string_view to_string(Relationship r);
/// Lenient ("Manager (Managing Director)", "Direct report", "Compliance Officer"...).
Relationship relationship_from(std::string_view text, const std::string& field = "relationship");

struct PrivateFile {
    std::string filename;
    ArtifactType artifact_type = ArtifactType::other;
    std::string description;
    std::string planted_discrepancy;  // only ever written to the private sidecar
};

struct Collaborator {
    std::string collab_id;
    std::string name;
    Relationship relationship = Relationship::peer;
    std::string title;
    std::string background;
    std::string communication_style;
    std::string knowledge;
    double latency_min_hours = 24;
    double latency_max_hours = 48;
    std::vector<PrivateFile> private_files;
};

struct CollaboratorSet {
    std::vector<Collaborator> collaborators;

    const Collaborator* find(std::string_view collab_id) const;
    /// Matches a collab_id, or a name case-insensitively.
    const Collaborator* resolve(std::string_view id_or_name) const;
};

inline constexpr std::size_t max_collaborators = 12;

json to_json(const Collaborator& c);
json to_json(const CollaboratorSet& set);
/// Parses persisted or backend records; more than 12 entries are cut to 12
/// unless `strict`. Throws SchemaViolation.
CollaboratorSet collaborators_from_json(const json& j, bool strict = true);

/// Writes private files to <computer.private_store>/<collab_id>/ with sidecars.
/// Throws SchemaViolation.
CollaboratorSet create_collaborators(const UserProfile& profile, const ObjectiveSet& objectives, Gateway& gateway,
                                     const SyntheticComputer& computer);

/// Path of a private file in the store.
fs::path private_file_path(const fs::path& private_store, std::string_view collab_id, std::string_view filename);

/// Short plain-text description of a profile for stage prompts.
std::string profile_summary(const UserProfile& profile);

}  // namespace scs
