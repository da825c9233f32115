// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scs/fsplan.hpp"
#include "scs/gateway.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace scs {

namespace fs = std::filesystem;

/// "X:/rest" -> "drives/X/rest", "/rest" -> "root/rest". Throws BadPathSyntax.
std::string map_logical_path(std::string_view logical_path, OsStyle os);
/// Inverse of map_logical_path. Throws BadPathSyntax.
std::string unmap_physical_path(std::string_view physical_path, OsStyle os);

// ---------------------------------------------------------------------------
// Artifact content

struct Section {
    std::string heading;
    std::string body;
};

struct Sheet {
    std::string name;
    std::vector<std::vector<std::string>> rows;
};

struct Slide {
    std::string title;
    std::vector<std::string> bullets;
};

enum class ContentFamily { document, spreadsheet, presentation };
ContentFamily family_of(ArtifactType type);

struct ArtifactContent {
    ArtifactType artifact_type = ArtifactType::other;
    std::vector<Section> sections;
    std::vector<Sheet> sheets;
    std::vector<Slide> slides;
    std::optional<std::string> raw;
};

json to_json(const ArtifactContent& content);
/// Throws SchemaViolation unless exactly the part matching the type's family
/// is populated. `allow_raw` admits fetched bytes instead.
ArtifactContent content_from_json(const json& j, ArtifactType type, bool allow_raw = false);
void validate_content(const ArtifactContent& content, bool allow_raw = false);
/// Minimal content built from a description, used for stub-mode files.
ArtifactContent stub_content(ArtifactType type, std::string_view title, std::string_view description);

/// Turns content into the bytes written to disk.
using Renderer = std::function<std::string(const ArtifactContent&)>;
/// Built-in renderer: raw bytes verbatim, otherwise the canonical JSON text.
std::string render_canonical(const ArtifactContent& content);

struct ArtifactRequest {
    std::string file_id;
    std::string path;  // logical path, or "private:<collab>/<file>"
    ArtifactType artifact_type = ArtifactType::other;
    Timestamp timestamp {};
    std::string origin;
    std::string description;
    std::string user_summary;
    std::string predecessors;
};

/// One artifact-creator call; the response must match the type's family.
ArtifactContent synthesize_artifact(const ArtifactRequest& request, Gateway& gateway);

// ---------------------------------------------------------------------------
// Fetching

struct FetchResult {
    bool ok = false;
    std::string bytes;
    std::string error;
};

using Fetcher = std::function<FetchResult(const PlannedFile&)>;

/// Always fails; the default when no fetcher is configured.
Fetcher no_fetcher();
/// Serves files out of a local mirror directory. A file is served when
/// index.json maps its source_url to a mirror file, or when the mirror holds a
/// file with the planned file's basename. Nothing else is reachable.
Fetcher mirror_fetcher(fs::path mirror_dir);
/// HTTP(S) GET of source_url, restricted to the listed hosts.
Fetcher live_fetcher(std::vector<std::string> allowed_hosts);

// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string file_id;
    std::string logical_path;
    std::string physical_path;  // relative to the computer root
    Timestamp virtual_timestamp {};
    std::string origin;
    std::uintmax_t byte_size = 0;
    std::string content_sha256;
};

struct SyntheticComputer {
    fs::path root;
    OsStyle os_style = OsStyle::windows;
    std::vector<std::string> mounts;  // drive letters, or "/" on macos
    std::map<std::string, ManifestEntry> manifest;
    std::vector<std::string> order;  // instantiation trace
    fs::path private_store;

    const ManifestEntry* find_by_path(std::string_view logical_path) const;
    fs::path host_path(std::string_view logical_path) const;
};

json manifest_to_json(const SyntheticComputer& computer);
void save_manifest(const SyntheticComputer& computer);
SyntheticComputer load_computer(const fs::path& root, const fs::path& private_store);

/// Sets the host modification time to a virtual timestamp; false when the
/// host refuses.
bool set_virtual_mtime(const fs::path& path, Timestamp ts);

struct MaterializeOptions {
    Fetcher fetcher;
    Renderer renderer;
    std::size_t context_budget_bytes = 16 * 1024;
    std::string user_summary;  // free text added to every generation request
};

/// Creates the directory tree and every planned file in instantiation order.
/// Throws RootNotEmpty, FetchAndSynthesisFailed, PlanInvalid.
SyntheticComputer materialize_computer(const FilesystemPlan& plan, const fs::path& root,
                                       const fs::path& private_store, Gateway& gateway,
                                       const MaterializeOptions& options = {});

/// True when neither path is a prefix of the other.
bool paths_disjoint(const fs::path& a, const fs::path& b);

// ---------------------------------------------------------------------------

struct TypeShare {
    long long count = 0;
    double percentage = 0;
};

struct SizeStats {
    double mean_kb = 0;
    double median_kb = 0;
    double p95_kb = 0;
};

struct ComputerStats {
    long long file_count = 0;
    long long directory_count = 0;
    double avg_directory_depth = 0;
    long long max_directory_depth = 0;
    std::map<std::string, TypeShare> type_distribution;
    std::map<std::string, SizeStats> size_stats;
};

json to_json(const ComputerStats& stats);
ComputerStats computer_stats_from_json(const json& j);

/// Walks <root>/drives/* or <root>/root. Sidecars are not counted. Throws RootMissing.
ComputerStats computer_stats(const fs::path& root);

/// Lower-middle element of a sorted copy.
double lower_median(std::vector<double> values);
/// Nearest-rank percentile.
double nearest_rank(std::vector<double> values, double pct);

inline constexpr std::string_view sidecar_suffix = ".meta.json";

}  // namespace scs
