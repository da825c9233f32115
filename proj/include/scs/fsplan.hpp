// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scs/gateway.hpp"
#include "scs/profile.hpp"
#include "scs/vtime.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace scs {

enum class OsStyle { windows, macos };
std::string_view to_string(OsStyle os);
OsStyle os_style_from(std::string_view text);

// ---------------------------------------------------------------------------
// Logical paths
//
// Windows: "X:/a/b" with a single upper-case drive letter, "X:/" for the drive
// root. macOS: "/a/b", "/" for the root. Components are non-empty, never "."
// or "..", and contain no control characters; windows components also reject
// <>:"|?* and backslashes.

struct LogicalPath {
    std::string mount;                    // drive letter, or "/" on macos
    std::vector<std::string> components;  // below the mount
};

/// Throws Error(BadPathSyntax).
LogicalPath parse_logical_path(std::string_view text, OsStyle os);
bool is_valid_logical_path(std::string_view text, OsStyle os);
std::string format_logical_path(const LogicalPath& path, OsStyle os);
/// Lenient pre-pass for backend output: backslashes become slashes and
/// trailing separators are dropped ("D:\\Work\\" -> "D:/Work"). Drive roots
/// keep their slash.
std::string normalize_logical_path(std::string_view text);
/// Parent of a logical path; nullopt for a mount root.
std::optional<std::string> parent_logical_path(std::string_view text, OsStyle os);
bool is_mount_root(std::string_view text, OsStyle os);

// ---------------------------------------------------------------------------

enum class ArtifactType { docx, xlsx, pptx, pdf, txt, csv, png, other };
std::string_view to_string(ArtifactType type);
ArtifactType artifact_type_from_path(std::string_view path);
/// Lowercased extension without the dot ("" when there is none).
std::string extension_of(std::string_view path);

enum class FileOrigin { authored, web_download, received, system };
std::string_view to_string(FileOrigin origin);
FileOrigin file_origin_from(std::string_view text);

enum class ContentMode { full, stub };
std::string_view to_string(ContentMode mode);

enum class Relation { references, derived_from, later_version, extracted_from };
std::string_view to_string(Relation relation);
Relation relation_from(std::string_view text);

struct StoragePattern {
    std::string purpose;
    std::string directory;
};

struct NamingStyle {
    std::string description;
    std::vector<std::string> examples;
};

struct FilesystemPolicy {
    Timestamp system_start {};
    OsStyle os_style = OsStyle::windows;
    std::vector<std::string> drive_layout;
    std::vector<std::string> default_paths;
    std::vector<StoragePattern> storage_patterns;
    std::string organization_style;
    NamingStyle naming_style;
    std::string usage_patterns;
};

json to_json(const FilesystemPolicy& policy);
FilesystemPolicy policy_from_json(const json& j, std::optional<OsStyle> os = std::nullopt);

struct PlannedFile {
    std::string file_id;
    std::string logical_path;
    ArtifactType artifact_type = ArtifactType::other;
    std::string description;
    Timestamp virtual_timestamp {};
    FileOrigin origin = FileOrigin::authored;
    ContentMode content_mode = ContentMode::full;
    std::string source_url;  // web downloads only, may be empty
};

struct DependencyEdge {
    std::string from_id;
    std::string to_id;
    Relation relation = Relation::references;
};

struct FilesystemPlan {
    FilesystemPolicy policy;
    std::set<std::string> directories;
    std::vector<PlannedFile> files;
    std::vector<DependencyEdge> edges;

    const PlannedFile* find(std::string_view file_id) const;
    /// Predecessor ids of a file in edge order.
    std::vector<std::string> dependencies_of(std::string_view file_id) const;
};

json to_json(const PlannedFile& file);
json to_json(const FilesystemPlan& plan);
/// Structural parse only; semantic checks are validate_plan's job.
FilesystemPlan plan_from_json(const json& j);

enum class Severity { fatal, warning };
std::string_view to_string(Severity severity);

struct Diagnostic {
    Severity severity = Severity::fatal;
    std::string code;
    std::string subject;
};

using PlanDiagnostics = std::vector<Diagnostic>;

inline constexpr std::size_t max_planned_files = 5000;

/// Never throws. Fatal: CycleDetected, UnknownFileId, DuplicatePath,
/// DuplicateFileId, BadPathSyntax, OrphanDirectory, SelfEdge, PlanTooLarge.
/// Warning: TimestampOrderViolation, TimestampBeforeSystemStart.
PlanDiagnostics validate_plan(const FilesystemPlan& plan) noexcept;
bool has_fatal(const PlanDiagnostics& diagnostics);
json to_json(const Diagnostic& diagnostic);

/// Kahn's algorithm; among ready files the smallest (virtual_timestamp,
/// logical_path, file_id) goes first. Throws CycleDetected.
std::vector<std::string> instantiation_order(const FilesystemPlan& plan);

/// Adds every missing ancestor of the plan's files and directories.
void close_directories(FilesystemPlan& plan);

FilesystemPolicy generate_policy(const UserProfile& profile, OsStyle os, Gateway& gateway);
/// Throws PlanInvalid (details = fatal diagnostic codes) when the backend's
/// plan does not validate.
FilesystemPlan plan_filesystem(const UserProfile& profile, const FilesystemPolicy& policy, Gateway& gateway);

}  // namespace scs
