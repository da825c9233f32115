// SPDX-License-Identifier: Apache-2.0
#include "scs/fsplan.hpp"

#include "scs/error.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <tuple>

namespace scs {

namespace {

constexpr std::string_view policy_prompt =
    "You design the filesystem conventions of one user's computer. Respond with one JSON object with fields "
    "system_start (YYYY-MM-DD HH:MM), drive_layout[] (drive letters), default_paths[], "
    "storage_patterns[{purpose,directory}], organization_style, naming_style{description,examples[]}, "
    "usage_patterns. Paths use forward slashes.";

constexpr std::string_view plan_prompt =
    "You plan the files present on one user's computer. Respond with one JSON object with fields "
    "directories[] (logical paths), files[{file_id,path,description,timestamp,origin "
    "(authored|web_download|received|system),content_mode (full|stub),source_url?}], "
    "edges[{from,to,relation (references|derived_from|later_version|extracted_from)}] where from is the "
    "earlier file a later file builds on.";

bool bad_component_char(unsigned char c, OsStyle os)
{
    if (c < 0x20 || c == 0x7f)
        return true;
    if (os == OsStyle::windows)
        return std::string_view("<>:\"|?*\\").find(static_cast<char>(c)) != std::string_view::npos;
    return false;
}

[[noreturn]] void bad_path(std::string_view text, const std::string& why)
{
    fail(ErrorCode::BadPathSyntax, "bad logical path '" + std::string(text) + "': " + why, {std::string(text)});
}

std::string ts_text(Timestamp ts)
{
    return format_timestamp(ts);
}

}  // namespace

std::string_view to_string(OsStyle os)
{
    return os == OsStyle::windows ? "windows" : "macos";
}

OsStyle os_style_from(std::string_view text)
{
    auto t = to_lower(trim(text));
    if (t == "windows")
        return OsStyle::windows;
    if (t == "macos")
        return OsStyle::macos;
    fail(ErrorCode::InvalidConfig, "unknown os style '" + std::string(text) + "'");
}

LogicalPath parse_logical_path(std::string_view text, OsStyle os)
{
    LogicalPath out;
    std::string_view rest;
    if (os == OsStyle::windows) {
        if (text.size() < 3 || text[0] < 'A' || text[0] > 'Z' || text[1] != ':' || text[2] != '/')
            bad_path(text, "expected X:/...");
        out.mount = std::string(1, text[0]);
        rest = text.substr(3);
    } else {
        if (text.empty() || text[0] != '/')
            bad_path(text, "expected /...");
        out.mount = "/";
        rest = text.substr(1);
    }
    if (rest.empty())
        return out;
    std::size_t start = 0;
    while (true) {
        auto slash = rest.find('/', start);
        auto comp = rest.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start);
        if (comp.empty())
            bad_path(text, "empty component");
        if (comp == "." || comp == "..")
            bad_path(text, "relative component");
        for (unsigned char c: comp)
            if (bad_component_char(c, os))
                bad_path(text, "illegal character");
        out.components.emplace_back(comp);
        if (slash == std::string_view::npos)
            break;
        start = slash + 1;
    }
    return out;
}

bool is_valid_logical_path(std::string_view text, OsStyle os)
{
    try {
        parse_logical_path(text, os);
        return true;
    } catch (const Error&) {
        return false;
    }
}

std::string format_logical_path(const LogicalPath& path, OsStyle os)
{
    std::string out = os == OsStyle::windows ? path.mount + ":/" : "/";
    for (std::size_t i = 0; i < path.components.size(); ++i)
        out += (i ? "/" : "") + path.components[i];
    return out;
}

std::string normalize_logical_path(std::string_view text)
{
    std::string out = trim(text);
    std::replace(out.begin(), out.end(), '\\', '/');
    if (out.size() == 2 && out[1] == ':')
        out += '/';
    if (out.size() >= 2 && out[1] == ':' && out[0] >= 'a' && out[0] <= 'z')
        out[0] = static_cast<char>(out[0] - 'a' + 'A');
    auto min_len = (out.size() >= 3 && out[1] == ':') ? 3u : 1u;
    while (out.size() > min_len && out.back() == '/')
        out.pop_back();
    return out;
}

std::optional<std::string> parent_logical_path(std::string_view text, OsStyle os)
{
    auto p = parse_logical_path(text, os);
    if (p.components.empty())
        return std::nullopt;
    p.components.pop_back();
    return format_logical_path(p, os);
}

bool is_mount_root(std::string_view text, OsStyle os)
{
    return is_valid_logical_path(text, os) && parse_logical_path(text, os).components.empty();
}

// ---------------------------------------------------------------------------

std::string_view to_string(ArtifactType type)
{
    switch (type) {
    case ArtifactType::docx: return "docx";
    case ArtifactType::xlsx: return "xlsx";
    case ArtifactType::pptx: return "pptx";
    case ArtifactType::pdf: return "pdf";
    case ArtifactType::txt: return "txt";
    case ArtifactType::csv: return "csv";
    case ArtifactType::png: return "png";
    case ArtifactType::other: return "other";
    }
    return "other";
}

std::string extension_of(std::string_view path)
{
    auto slash = path.find_last_of('/');
    auto name = slash == std::string_view::npos ? path : path.substr(slash + 1);
    auto dot = name.find_last_of('.');
    if (dot == std::string_view::npos || dot == 0)
        return {};
    return to_lower(name.substr(dot + 1));
}

ArtifactType artifact_type_from_path(std::string_view path)
{
    static const std::map<std::string, ArtifactType, std::less<>> known {
        {"docx", ArtifactType::docx}, {"xlsx", ArtifactType::xlsx}, {"pptx", ArtifactType::pptx},
        {"pdf", ArtifactType::pdf},   {"txt", ArtifactType::txt},   {"csv", ArtifactType::csv},
        {"png", ArtifactType::png},
    };
    auto it = known.find(extension_of(path));
    return it == known.end() ? ArtifactType::other : it->second;
}

std::string_view to_string(FileOrigin origin)
{
    switch (origin) {
    case FileOrigin::authored: return "authored";
    case FileOrigin::web_download: return "web_download";
    case FileOrigin::received: return "received";
    case FileOrigin::system: return "system";
    }
    return "authored";
}

FileOrigin file_origin_from(std::string_view text)
{
    auto t = to_lower(trim(text));
    if (t == "authored" || t.empty())
        return FileOrigin::authored;
    if (t == "web_download" || t == "web download" || t == "download")
        return FileOrigin::web_download;
    if (t == "received")
        return FileOrigin::received;
    if (t == "system")
        return FileOrigin::system;
    schema_violation("unknown file origin '" + std::string(text) + "'", {"origin"});
}

std::string_view to_string(ContentMode mode)
{
    return mode == ContentMode::full ? "full" : "stub";
}

std::string_view to_string(Relation relation)
{
    switch (relation) {
    case Relation::references: return "references";
    case Relation::derived_from: return "derived_from";
    case Relation::later_version: return "later_version";
    case Relation::extracted_from: return "extracted_from";
    }
    return "references";
}

Relation relation_from(std::string_view text)
{
    auto t = to_lower(trim(text));
    std::replace(t.begin(), t.end(), ' ', '_');
    if (t == "references")
        return Relation::references;
    if (t == "derived_from")
        return Relation::derived_from;
    if (t == "later_version")
        return Relation::later_version;
    if (t == "extracted_from")
        return Relation::extracted_from;
    schema_violation("unknown relation '" + std::string(text) + "'", {"relation"});
}

std::string_view to_string(Severity severity)
{
    return severity == Severity::fatal ? "fatal" : "warning";
}

// ---------------------------------------------------------------------------
// Policy

json to_json(const FilesystemPolicy& p)
{
    json patterns = json::array();
    for (const auto& s: p.storage_patterns)
        patterns.push_back({{"purpose", s.purpose}, {"directory", s.directory}});
    return {
        {"system_start", ts_text(p.system_start)},
        {"os_style", to_string(p.os_style)},
        {"drive_layout", p.drive_layout},
        {"default_paths", p.default_paths},
        {"storage_patterns", patterns},
        {"organization_style", p.organization_style},
        {"naming_style", {{"description", p.naming_style.description}, {"examples", p.naming_style.examples}}},
        {"usage_patterns", p.usage_patterns},
    };
}

FilesystemPolicy policy_from_json(const json& j, std::optional<OsStyle> os)
{
    RecordReader r(j, "policy");
    FilesystemPolicy p;
    p.os_style = os ? *os : os_style_from(j.value("os_style", std::string("windows")));

    auto start = r.text("system_start");
    try {
        if (!start.empty())
            p.system_start = parse_timestamp(trim(start));
    } catch (const Error&) {
        r.mark_bad("system_start");
    }

    if (p.os_style == OsStyle::macos) {
        p.drive_layout = {"/"};
    } else {
        for (const auto& d: r.array("drive_layout")) {
            std::string letter;
            if (d.is_string())
                letter = d.get<std::string>();
            else if (d.is_object())
                letter = d.value("drive", d.value("letter", std::string()));
            letter = trim(letter);
            if (letter.size() == 2 && letter[1] == ':')
                letter.pop_back();
            if (letter.size() != 1 || letter[0] < 'A' || letter[0] > 'Z') {
                r.mark_bad("drive_layout");
                break;
            }
            if (std::find(p.drive_layout.begin(), p.drive_layout.end(), letter) == p.drive_layout.end())
                p.drive_layout.push_back(letter);
        }
        if (p.drive_layout.empty())
            r.mark_bad("drive_layout");
    }

    for (const auto& path: r.texts("default_paths")) {
        auto norm = normalize_logical_path(path);
        if (!is_valid_logical_path(norm, p.os_style)) {
            r.mark_bad("default_paths");
            break;
        }
        p.default_paths.push_back(norm);
    }
    for (const auto& s: r.optional_array("storage_patterns")) {
        if (!s.is_object()) {
            r.mark_bad("storage_patterns");
            break;
        }
        auto dir = normalize_logical_path(s.value("directory", std::string()));
        if (!is_valid_logical_path(dir, p.os_style)) {
            r.mark_bad("storage_patterns");
            break;
        }
        p.storage_patterns.push_back({s.value("purpose", std::string()), dir});
    }
    p.organization_style = r.text("organization_style");
    if (r.has("naming_style")) {
        const auto& n = j.at("naming_style");
        if (n.is_string()) {
            p.naming_style.description = n.get<std::string>();
        } else if (n.is_object()) {
            p.naming_style.description = n.value("description", std::string());
            for (const auto& e: n.value("examples", json::array()))
                if (e.is_string())
                    p.naming_style.examples.push_back(e.get<std::string>());
        } else {
            r.mark_bad("naming_style");
        }
    }
    p.usage_patterns = r.optional_text("usage_patterns");
    r.finish();
    return p;
}

FilesystemPolicy generate_policy(const UserProfile& profile, OsStyle os, Gateway& gateway)
{
    validate_profile(profile);
    GenerationRequest request;
    request.role_label = std::string(roles::setup_agent);
    request.system_context = std::string(policy_prompt);
    request.schema_hint = "fs_policy";
    request.messages.push_back({"user", "TASK: filesystem-policy\nos_style: " + std::string(to_string(os)) +
                                            "\nusername: " + profile.identity.username + "\n\nPROFILE:\n" +
                                            to_json(profile).dump(2)});
    auto response = gateway.complete(request);
    return policy_from_json(parse_model_json(response.text, "fs_policy"), os);
}

// ---------------------------------------------------------------------------
// Plan

const PlannedFile* FilesystemPlan::find(std::string_view file_id) const
{
    for (const auto& f: files)
        if (f.file_id == file_id)
            return &f;
    return nullptr;
}

std::vector<std::string> FilesystemPlan::dependencies_of(std::string_view file_id) const
{
    std::vector<std::string> out;
    for (const auto& e: edges)
        if (e.to_id == file_id && std::find(out.begin(), out.end(), e.from_id) == out.end())
            out.push_back(e.from_id);
    return out;
}

json to_json(const PlannedFile& f)
{
    json out {
        {"file_id", f.file_id},
        {"path", f.logical_path},
        {"artifact_type", to_string(f.artifact_type)},
        {"description", f.description},
        {"timestamp", ts_text(f.virtual_timestamp)},
        {"origin", to_string(f.origin)},
        {"content_mode", to_string(f.content_mode)},
    };
    if (!f.source_url.empty())
        out["source_url"] = f.source_url;
    return out;
}

json to_json(const FilesystemPlan& plan)
{
    json files = json::array();
    for (const auto& f: plan.files)
        files.push_back(to_json(f));
    json edges = json::array();
    for (const auto& e: plan.edges)
        edges.push_back({{"from", e.from_id}, {"to", e.to_id}, {"relation", to_string(e.relation)}});
    return {
        {"policy", to_json(plan.policy)},
        {"directories", plan.directories},
        {"files", files},
        {"edges", edges},
    };
}

namespace {

// Parses files/edges/directories; `policy` already resolved. Paths are kept
// verbatim (after normalization) so validate_plan can report them.
FilesystemPlan plan_body_from_json(const json& j, FilesystemPolicy policy)
{
    RecordReader r(j, "plan");
    FilesystemPlan plan;
    plan.policy = std::move(policy);
    for (const auto& d: r.optional_array("directories")) {
        if (!d.is_string()) {
            r.mark_bad("directories");
            break;
        }
        plan.directories.insert(normalize_logical_path(d.get<std::string>()));
    }
    std::size_t index = 0;
    for (const auto& fj: r.array("files")) {
        ++index;
        if (!fj.is_object()) {
            r.mark_bad("files");
            continue;
        }
        RecordReader fr(fj, "files[" + std::to_string(index - 1) + "]");
        PlannedFile f;
        f.file_id = fr.has("file_id") ? fr.text("file_id") : "f" + std::to_string(index);
        f.logical_path = normalize_logical_path(fr.has("path") ? fr.text("path") : fr.text("logical_path"));
        f.artifact_type = artifact_type_from_path(f.logical_path);
        f.description = fr.optional_text("description");
        auto ts = fr.has("timestamp") ? fr.text("timestamp") : fr.text("virtual_timestamp");
        try {
            if (!ts.empty())
                f.virtual_timestamp = parse_timestamp(trim(ts));
        } catch (const Error&) {
            fr.mark_bad("timestamp");
        }
        try {
            f.origin = file_origin_from(fr.optional_text("origin", "authored"));
        } catch (const Error&) {
            fr.mark_bad("origin");
        }
        auto mode = to_lower(trim(fr.optional_text("content_mode", "full")));
        if (mode == "stub")
            f.content_mode = ContentMode::stub;
        else if (mode != "full")
            fr.mark_bad("content_mode");
        f.source_url = fr.optional_text("source_url");
        for (const auto& p: fr.problems())
            r.mark_bad("files[" + std::to_string(index - 1) + "]." + p);
        plan.files.push_back(std::move(f));
    }

    std::map<std::string, std::string> id_by_path;
    for (const auto& f: plan.files)
        id_by_path.emplace(f.logical_path, f.file_id);
    auto resolve = [&](std::string ref) {
        if (plan.find(ref))
            return ref;
        auto it = id_by_path.find(normalize_logical_path(ref));
        return it == id_by_path.end() ? ref : it->second;
    };
    index = 0;
    for (const auto& ej: r.optional_array("edges")) {
        ++index;
        if (!ej.is_object() || !ej.contains("from") || !ej.contains("to") || !ej["from"].is_string() ||
            !ej["to"].is_string()) {
            r.mark_bad("edges[" + std::to_string(index - 1) + "]");
            continue;
        }
        DependencyEdge e;
        e.from_id = resolve(ej["from"].get<std::string>());
        e.to_id = resolve(ej["to"].get<std::string>());
        try {
            e.relation = relation_from(ej.value("relation", std::string("references")));
        } catch (const Error&) {
            r.mark_bad("edges[" + std::to_string(index - 1) + "].relation");
        }
        plan.edges.push_back(std::move(e));
    }
    r.finish();
    return plan;
}

}  // namespace

FilesystemPlan plan_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("policy"))
        schema_violation("plan record has no policy", {"policy"});
    return plan_body_from_json(j, policy_from_json(j.at("policy")));
}

bool has_fatal(const PlanDiagnostics& diagnostics)
{
    return std::any_of(diagnostics.begin(), diagnostics.end(),
                       [](const Diagnostic& d) { return d.severity == Severity::fatal; });
}

json to_json(const Diagnostic& d)
{
    return {{"severity", to_string(d.severity)}, {"code", d.code}, {"subject", d.subject}};
}

PlanDiagnostics validate_plan(const FilesystemPlan& plan) noexcept
{
    PlanDiagnostics out;
    try {
        auto os = plan.policy.os_style;
        auto add = [&out](Severity s, std::string code, std::string subject) {
            out.push_back({s, std::move(code), std::move(subject)});
        };

        if (plan.files.size() > max_planned_files)
            add(Severity::fatal, "PlanTooLarge", std::to_string(plan.files.size()) + " files");

        // directories: syntax and ancestry
        for (const auto& d: plan.directories) {
            if (!is_valid_logical_path(d, os)) {
                add(Severity::fatal, "BadPathSyntax", d);
                continue;
            }
            auto parent = parent_logical_path(d, os);
            if (parent && !is_mount_root(*parent, os) && !plan.directories.count(*parent))
                add(Severity::fatal, "OrphanDirectory", d);
        }

        std::map<std::string, const PlannedFile*> by_id;
        std::set<std::string> paths;
        for (const auto& f: plan.files) {
            if (!by_id.emplace(f.file_id, &f).second)
                add(Severity::fatal, "DuplicateFileId", f.file_id);
            if (!paths.insert(f.logical_path).second)
                add(Severity::fatal, "DuplicatePath", f.logical_path);
            if (!is_valid_logical_path(f.logical_path, os) || is_mount_root(f.logical_path, os)) {
                add(Severity::fatal, "BadPathSyntax", f.logical_path);
                continue;
            }
            if (plan.directories.count(f.logical_path))
                add(Severity::fatal, "DuplicatePath", f.logical_path);
            auto parent = parent_logical_path(f.logical_path, os);
            if (parent && !is_mount_root(*parent, os) && !plan.directories.count(*parent))
                add(Severity::fatal, "OrphanDirectory", f.logical_path);
            if (f.virtual_timestamp < plan.policy.system_start)
                add(Severity::warning, "TimestampBeforeSystemStart", f.file_id);
        }

        bool edges_ok = true;
        for (const auto& e: plan.edges) {
            auto from = by_id.find(e.from_id);
            auto to = by_id.find(e.to_id);
            if (from == by_id.end()) {
                add(Severity::fatal, "UnknownFileId", e.from_id);
                edges_ok = false;
            }
            if (to == by_id.end()) {
                add(Severity::fatal, "UnknownFileId", e.to_id);
                edges_ok = false;
            }
            if (from == by_id.end() || to == by_id.end())
                continue;
            if (e.from_id == e.to_id) {
                add(Severity::fatal, "CycleDetected", e.from_id);
                edges_ok = false;
                continue;
            }
            if (from->second->virtual_timestamp > to->second->virtual_timestamp)
                add(Severity::warning, "TimestampOrderViolation", e.from_id + "->" + e.to_id);
        }

        if (edges_ok) {
            // Kahn count over unique ids; leftover nodes sit on a cycle or behind one.
            std::map<std::string, int> indegree;
            std::map<std::string, std::vector<std::string>> succ;
            for (const auto& [id, f]: by_id)
                indegree[id] = 0;
            for (const auto& e: plan.edges) {
                succ[e.from_id].push_back(e.to_id);
                ++indegree[e.to_id];
            }
            std::vector<std::string> ready;
            for (const auto& [id, n]: indegree)
                if (n == 0)
                    ready.push_back(id);
            std::size_t seen = 0;
            while (!ready.empty()) {
                auto id = ready.back();
                ready.pop_back();
                ++seen;
                for (const auto& next: succ[id])
                    if (--indegree[next] == 0)
                        ready.push_back(next);
            }
            if (seen < indegree.size()) {
                std::string members;
                for (const auto& [id, n]: indegree)
                    if (n > 0)
                        members += (members.empty() ? "" : ",") + id;
                add(Severity::fatal, "CycleDetected", members);
            }
        }
    } catch (...) {
        out.push_back({Severity::fatal, "InternalError", "validation aborted"});
    }
    return out;
}

std::vector<std::string> instantiation_order(const FilesystemPlan& plan)
{
    using Key = std::tuple<Timestamp, std::string, std::string>;
    std::map<std::string, const PlannedFile*> by_id;
    for (const auto& f: plan.files)
        by_id.emplace(f.file_id, &f);

    std::map<std::string, int> indegree;
    std::map<std::string, std::vector<std::string>> succ;
    for (const auto& [id, f]: by_id)
        indegree[id] = 0;
    for (const auto& e: plan.edges) {
        if (!by_id.count(e.from_id) || !by_id.count(e.to_id))
            fail(ErrorCode::PlanInvalid, "edge references unknown file", {"UnknownFileId"});
        succ[e.from_id].push_back(e.to_id);
        ++indegree[e.to_id];
    }

    auto key = [&](const std::string& id) {
        const auto* f = by_id.at(id);
        return Key {f->virtual_timestamp, f->logical_path, f->file_id};
    };
    std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
    for (const auto& [id, n]: indegree)
        if (n == 0)
            ready.push(key(id));

    std::vector<std::string> order;
    order.reserve(by_id.size());
    while (!ready.empty()) {
        auto id = std::get<2>(ready.top());
        ready.pop();
        order.push_back(id);
        for (const auto& next: succ[id])
            if (--indegree[next] == 0)
                ready.push(key(next));
    }
    if (order.size() != by_id.size())
        fail(ErrorCode::CycleDetected, "dependency graph has a cycle", {"CycleDetected"});
    return order;
}

void close_directories(FilesystemPlan& plan)
{
    auto os = plan.policy.os_style;
    std::vector<std::string> pending(plan.directories.begin(), plan.directories.end());
    for (const auto& f: plan.files)
        if (is_valid_logical_path(f.logical_path, os))
            if (auto parent = parent_logical_path(f.logical_path, os))
                pending.push_back(*parent);
    while (!pending.empty()) {
        auto d = pending.back();
        pending.pop_back();
        if (!is_valid_logical_path(d, os) || is_mount_root(d, os))
            continue;
        plan.directories.insert(d);
        if (auto parent = parent_logical_path(d, os); parent && !plan.directories.count(*parent))
            pending.push_back(*parent);
    }
}

FilesystemPlan plan_filesystem(const UserProfile& profile, const FilesystemPolicy& policy, Gateway& gateway)
{
    GenerationRequest request;
    request.role_label = std::string(roles::setup_agent);
    request.system_context = std::string(plan_prompt);
    request.schema_hint = "fs_plan";
    request.messages.push_back({"user", "TASK: filesystem-plan\nos_style: " + std::string(to_string(policy.os_style)) +
                                            "\nusername: " + profile.identity.username + "\n\nPROFILE:\n" +
                                            to_json(profile).dump(2) + "\n\nPOLICY:\n" + to_json(policy).dump(2)});
    auto response = gateway.complete(request);
    auto plan = plan_body_from_json(parse_model_json(response.text, "fs_plan"), policy);
    for (const auto& d: policy.default_paths)
        if (!is_mount_root(d, policy.os_style))
            plan.directories.insert(d);
    for (const auto& s: policy.storage_patterns)
        if (!is_mount_root(s.directory, policy.os_style))
            plan.directories.insert(s.directory);
    close_directories(plan);

    auto diagnostics = validate_plan(plan);
    if (has_fatal(diagnostics)) {
        std::vector<std::string> codes;
        std::string message = "filesystem plan failed validation:";
        for (const auto& d: diagnostics) {
            if (d.severity != Severity::fatal)
                continue;
            if (std::find(codes.begin(), codes.end(), d.code) == codes.end())
                codes.push_back(d.code);
            message += " " + d.code + "(" + d.subject + ")";
        }
        fail(ErrorCode::PlanInvalid, message, codes);
    }
    return plan;
}

}  // namespace scs
