// SPDX-License-Identifier: Apache-2.0
#include "scs/materialize.hpp"

#include "scs/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace scs {

namespace {

constexpr std::string_view artifact_prompt =
    "You create the content of one file on a user's computer. Respond with one JSON object. Documents use "
    "sections[{heading,body}], spreadsheets use sheets[{name,rows[[cells]]}], presentations use "
    "slides[{title,bullets[]}]. Build on the predecessor files shown; keep names, figures and dates consistent "
    "with them.";

std::string family_name(ContentFamily f)
{
    switch (f) {
    case ContentFamily::document: return "document";
    case ContentFamily::spreadsheet: return "spreadsheet";
    case ContentFamily::presentation: return "presentation";
    }
    return "document";
}

// Cuts at most `limit` bytes without splitting a UTF-8 sequence.
std::string utf8_prefix(const std::string& text, std::size_t limit)
{
    if (text.size() <= limit)
        return text;
    auto cut = limit;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80)
        --cut;
    return text.substr(0, cut);
}

std::string generic(const fs::path& p)
{
    return p.generic_string();
}

}  // namespace

std::string map_logical_path(std::string_view logical_path, OsStyle os)
{
    auto p = parse_logical_path(logical_path, os);
    std::string out = os == OsStyle::windows ? "drives/" + p.mount : "root";
    for (const auto& c: p.components)
        out += "/" + c;
    return out;
}

std::string unmap_physical_path(std::string_view physical_path, OsStyle os)
{
    auto bad = [&] {
        fail(ErrorCode::BadPathSyntax, "not a mapped physical path: '" + std::string(physical_path) + "'",
             {std::string(physical_path)});
    };
    std::string logical;
    std::string_view rest;
    if (os == OsStyle::windows) {
        if (physical_path.substr(0, 7) != "drives/" || physical_path.size() < 8)
            bad();
        auto letter = physical_path[7];
        if (physical_path.size() > 8 && physical_path[8] != '/')
            bad();
        logical = std::string(1, letter) + ":/";
        rest = physical_path.size() > 9 ? physical_path.substr(9) : std::string_view {};
        if (physical_path.size() == 9)
            bad();
    } else {
        if (physical_path.substr(0, 4) != "root")
            bad();
        if (physical_path.size() > 4 && physical_path[4] != '/')
            bad();
        if (physical_path.size() == 5)
            bad();
        logical = "/";
        rest = physical_path.size() > 5 ? physical_path.substr(5) : std::string_view {};
    }
    logical += rest;
    parse_logical_path(logical, os);
    return logical;
}

// ---------------------------------------------------------------------------

ContentFamily family_of(ArtifactType type)
{
    switch (type) {
    case ArtifactType::xlsx:
    case ArtifactType::csv: return ContentFamily::spreadsheet;
    case ArtifactType::pptx: return ContentFamily::presentation;
    default: return ContentFamily::document;
    }
}

json to_json(const ArtifactContent& c)
{
    json out {{"artifact_type", to_string(c.artifact_type)}};
    if (c.raw) {
        out["raw_size"] = c.raw->size();
        return out;
    }
    if (!c.sections.empty()) {
        json a = json::array();
        for (const auto& s: c.sections)
            a.push_back({{"heading", s.heading}, {"body", s.body}});
        out["sections"] = a;
    }
    if (!c.sheets.empty()) {
        json a = json::array();
        for (const auto& s: c.sheets)
            a.push_back({{"name", s.name}, {"rows", s.rows}});
        out["sheets"] = a;
    }
    if (!c.slides.empty()) {
        json a = json::array();
        for (const auto& s: c.slides)
            a.push_back({{"title", s.title}, {"bullets", s.bullets}});
        out["slides"] = a;
    }
    return out;
}

namespace {

std::string cell_text(const json& cell)
{
    if (cell.is_string())
        return cell.get<std::string>();
    if (cell.is_null())
        return {};
    return cell.dump();
}

}  // namespace

ArtifactContent content_from_json(const json& j, ArtifactType type, bool allow_raw)
{
    if (!j.is_object())
        schema_violation("artifact content must be a JSON object", {"content"});
    ArtifactContent c;
    c.artifact_type = type;
    std::vector<std::string> bad;
    if (j.contains("sections")) {
        if (!j["sections"].is_array())
            bad.emplace_back("sections");
        else
            for (const auto& s: j["sections"]) {
                if (!s.is_object()) {
                    bad.emplace_back("sections");
                    break;
                }
                c.sections.push_back({s.value("heading", std::string()), s.value("body", std::string())});
            }
    }
    if (j.contains("sheets")) {
        if (!j["sheets"].is_array())
            bad.emplace_back("sheets");
        else
            for (const auto& s: j["sheets"]) {
                if (!s.is_object() || !s.value("rows", json::array()).is_array()) {
                    bad.emplace_back("sheets");
                    break;
                }
                Sheet sheet {s.value("name", std::string("Sheet1")), {}};
                for (const auto& row: s.value("rows", json::array())) {
                    std::vector<std::string> cells;
                    if (row.is_array())
                        for (const auto& cell: row)
                            cells.push_back(cell_text(cell));
                    else
                        cells.push_back(cell_text(row));
                    sheet.rows.push_back(std::move(cells));
                }
                c.sheets.push_back(std::move(sheet));
            }
    }
    if (j.contains("slides")) {
        if (!j["slides"].is_array())
            bad.emplace_back("slides");
        else
            for (const auto& s: j["slides"]) {
                if (!s.is_object()) {
                    bad.emplace_back("slides");
                    break;
                }
                Slide slide {s.value("title", std::string()), {}};
                for (const auto& b: s.value("bullets", json::array()))
                    slide.bullets.push_back(cell_text(b));
                c.slides.push_back(std::move(slide));
            }
    }
    if (!bad.empty())
        schema_violation("ill-formed artifact content", bad);
    if (allow_raw && j.contains("raw") && j["raw"].is_string())
        c.raw = j["raw"].get<std::string>();
    validate_content(c, allow_raw);
    return c;
}

void validate_content(const ArtifactContent& c, bool allow_raw)
{
    int populated = !c.sections.empty() + !c.sheets.empty() + !c.slides.empty() + c.raw.has_value();
    if (populated != 1)
        schema_violation("artifact content must populate exactly one of sections, sheets, slides, raw",
                         {"content"});
    if (c.raw) {
        if (!allow_raw)
            schema_violation("raw content is only allowed for fetched files", {"raw"});
        return;
    }
    auto family = family_of(c.artifact_type);
    bool ok = (family == ContentFamily::document && !c.sections.empty()) ||
              (family == ContentFamily::spreadsheet && !c.sheets.empty()) ||
              (family == ContentFamily::presentation && !c.slides.empty());
    if (!ok) {
        const char* want = family == ContentFamily::document      ? "sections"
                           : family == ContentFamily::spreadsheet ? "sheets"
                                                                  : "slides";
        schema_violation("content does not match artifact type " + std::string(to_string(c.artifact_type)),
                         {want});
    }
}

ArtifactContent stub_content(ArtifactType type, std::string_view title, std::string_view description)
{
    ArtifactContent c;
    c.artifact_type = type;
    switch (family_of(type)) {
    case ContentFamily::document: c.sections.push_back({std::string(title), std::string(description)}); break;
    case ContentFamily::spreadsheet:
        c.sheets.push_back({"Sheet1", {{"Description"}, {std::string(description)}}});
        break;
    case ContentFamily::presentation: c.slides.push_back({std::string(title), {std::string(description)}}); break;
    }
    return c;
}

std::string render_canonical(const ArtifactContent& content)
{
    if (content.raw)
        return *content.raw;
    return dump_pretty(to_json(content));
}

ArtifactContent synthesize_artifact(const ArtifactRequest& a, Gateway& gateway)
{
    GenerationRequest request;
    request.role_label = std::string(roles::artifact_creator);
    request.system_context = std::string(artifact_prompt);
    request.schema_hint = "artifact_content";
    std::string msg = "TASK: create-artifact\nfile_id: " + a.file_id + "\npath: " + a.path +
                      "\nartifact_type: " + std::string(to_string(a.artifact_type)) +
                      "\nfamily: " + family_name(family_of(a.artifact_type)) +
                      "\ntimestamp: " + format_timestamp(a.timestamp) + "\norigin: " + a.origin +
                      "\ndescription: " + a.description;
    if (!a.user_summary.empty())
        msg += "\n\nUSER:\n" + a.user_summary;
    if (!a.predecessors.empty())
        msg += "\n\nPREDECESSORS:\n" + a.predecessors;
    request.messages.push_back({"user", msg});
    auto response = gateway.complete(request);
    return content_from_json(parse_model_json(response.text, "artifact_content"), a.artifact_type);
}

// ---------------------------------------------------------------------------

Fetcher no_fetcher()
{
    return [](const PlannedFile&) { return FetchResult {false, {}, "no fetcher configured"}; };
}

Fetcher mirror_fetcher(fs::path mirror_dir)
{
    json index = json::object();
    if (fs::exists(mirror_dir / "index.json"))
        index = read_json(mirror_dir / "index.json");
    return [mirror_dir, index](const PlannedFile& file) {
        fs::path source;
        if (!file.source_url.empty() && index.contains(file.source_url) && index[file.source_url].is_string())
            source = mirror_dir / index[file.source_url].get<std::string>();
        else {
            auto slash = file.logical_path.find_last_of('/');
            source = mirror_dir / file.logical_path.substr(slash + 1);
        }
        if (source.filename() == "index.json" || !fs::is_regular_file(source))
            return FetchResult {false, {}, "not in mirror"};
        return FetchResult {true, read_text(source), {}};
    };
}

// ---------------------------------------------------------------------------

const ManifestEntry* SyntheticComputer::find_by_path(std::string_view logical_path) const
{
    for (const auto& [id, e]: manifest)
        if (e.logical_path == logical_path)
            return &e;
    return nullptr;
}

fs::path SyntheticComputer::host_path(std::string_view logical_path) const
{
    return root / map_logical_path(logical_path, os_style);
}

json manifest_to_json(const SyntheticComputer& c)
{
    json files = json::object();
    for (const auto& [id, e]: c.manifest)
        files[id] = {
            {"logical_path", e.logical_path},
            {"physical_path", e.physical_path},
            {"virtual_timestamp", format_timestamp(e.virtual_timestamp)},
            {"origin", e.origin},
            {"byte_size", e.byte_size},
            {"content_sha256", e.content_sha256},
        };
    return {{"os_style", to_string(c.os_style)}, {"mounts", c.mounts}, {"order", c.order}, {"files", files}};
}

void save_manifest(const SyntheticComputer& c)
{
    atomic_write_json(c.root / "manifest.json", manifest_to_json(c));
}

SyntheticComputer load_computer(const fs::path& root, const fs::path& private_store)
{
    if (!fs::is_directory(root))
        fail(ErrorCode::RootMissing, "computer root does not exist: " + root.string());
    auto j = read_json(root / "manifest.json");
    SyntheticComputer c;
    c.root = root;
    c.private_store = private_store;
    try {
        c.os_style = os_style_from(j.at("os_style").get<std::string>());
        c.mounts = j.at("mounts").get<std::vector<std::string>>();
        c.order = j.at("order").get<std::vector<std::string>>();
        for (const auto& [id, e]: j.at("files").items()) {
            ManifestEntry m;
            m.file_id = id;
            m.logical_path = e.at("logical_path").get<std::string>();
            m.physical_path = e.at("physical_path").get<std::string>();
            m.virtual_timestamp = parse_timestamp(e.at("virtual_timestamp").get<std::string>());
            m.origin = e.at("origin").get<std::string>();
            m.byte_size = e.at("byte_size").get<std::uintmax_t>();
            m.content_sha256 = e.value("content_sha256", std::string());
            c.manifest.emplace(id, std::move(m));
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::ValidationFailed, "manifest " + (root / "manifest.json").string() + " is malformed: " + e.what(),
             {(root / "manifest.json").string()});
    }
    return c;
}

bool set_virtual_mtime(const fs::path& path, Timestamp ts)
{
    std::error_code ec;
    auto sys = std::chrono::time_point_cast<std::chrono::system_clock::duration>(ts);
    fs::last_write_time(path, std::chrono::file_clock::from_sys(sys), ec);
    return !ec;
}

bool paths_disjoint(const fs::path& a, const fs::path& b)
{
    auto norm = [](const fs::path& p) {
        auto s = fs::weakly_canonical(fs::absolute(p)).lexically_normal().generic_string();
        if (s.empty() || s.back() != '/')
            s += '/';
        return s;
    };
    auto x = norm(a), y = norm(b);
    return x.compare(0, y.size(), y) != 0 && y.compare(0, x.size(), x) != 0;
}

SyntheticComputer materialize_computer(const FilesystemPlan& plan, const fs::path& root,
                                       const fs::path& private_store, Gateway& gateway,
                                       const MaterializeOptions& options)
{
    if (fs::exists(root) && !(fs::is_directory(root) && fs::is_empty(root)))
        fail(ErrorCode::RootNotEmpty, "computer root is not empty: " + root.string());
    if (!private_store.empty() && !paths_disjoint(root, private_store))
        fail(ErrorCode::PreconditionViolation, "private store overlaps the computer root");
    auto diagnostics = validate_plan(plan);
    if (has_fatal(diagnostics)) {
        std::vector<std::string> codes;
        for (const auto& d: diagnostics)
            if (d.severity == Severity::fatal)
                codes.push_back(d.code);
        fail(ErrorCode::PlanInvalid, "plan does not validate", codes);
    }

    auto os = plan.policy.os_style;
    auto fetch = options.fetcher ? options.fetcher : no_fetcher();
    auto render = options.renderer ? options.renderer : Renderer(render_canonical);

    SyntheticComputer computer;
    computer.root = root;
    computer.os_style = os;
    computer.private_store = private_store;
    computer.mounts = plan.policy.drive_layout;
    fs::create_directories(root);
    for (const auto& m: computer.mounts)
        fs::create_directories(root / (os == OsStyle::windows ? "drives/" + m : std::string("root")));
    for (const auto& d: plan.directories)
        fs::create_directories(root / map_logical_path(d, os));

    std::map<std::string, std::string> rendered;  // file_id -> bytes on disk
    for (const auto& id: instantiation_order(plan)) {
        const auto& file = *plan.find(id);
        auto physical = map_logical_path(file.logical_path, os);
        auto host = root / physical;
        fs::create_directories(host.parent_path());

        json relations = json::array();
        for (const auto& e: plan.edges)
            if (e.to_id == id)
                relations.push_back({{"from", e.from_id}, {"relation", to_string(e.relation)}});
        auto deps = plan.dependencies_of(id);

        std::string origin(to_string(file.origin));
        json fetch_info = nullptr;
        std::optional<ArtifactContent> content;
        if (file.origin == FileOrigin::web_download) {
            auto fetched = fetch(file);
            fetch_info = {{"attempted", true}, {"ok", fetched.ok}};
            if (fetched.ok) {
                ArtifactContent c;
                c.artifact_type = file.artifact_type;
                c.raw = std::move(fetched.bytes);
                content = std::move(c);
            } else {
                fetch_info["error"] = fetched.error;
                origin = "web_download(fallback=synthesized)";
            }
        }

        std::size_t context_bytes = 0;
        bool truncated = false;
        if (!content && file.content_mode == ContentMode::stub) {
            auto slash = file.logical_path.find_last_of('/');
            content = stub_content(file.artifact_type, file.logical_path.substr(slash + 1), file.description);
        }
        if (!content) {
            std::string predecessors;
            auto budget = options.context_budget_bytes;
            for (const auto& dep: deps) {
                const auto& text = rendered.at(dep);
                auto header = "### " + plan.find(dep)->logical_path + "\n";
                auto room = budget > context_bytes ? budget - context_bytes : 0;
                auto part = utf8_prefix(text, room);
                if (part.size() < text.size())
                    truncated = true;
                context_bytes += part.size();
                predecessors += header + part + "\n";
            }
            ArtifactRequest request {file.file_id, file.logical_path, file.artifact_type, file.virtual_timestamp,
                                     origin,       file.description,  options.user_summary, predecessors};
            try {
                content = synthesize_artifact(request, gateway);
            } catch (const Error& e) {
                if (file.origin != FileOrigin::web_download ||
                    (e.code() != ErrorCode::SchemaViolation && e.code() != ErrorCode::BackendUnavailable))
                    throw;
                json report = manifest_to_json(computer);
                report["complete"] = false;
                report["failed_file"] = id;
                atomic_write_json(root / "manifest.json", report);
                fail(ErrorCode::FetchAndSynthesisFailed,
                     "fetch and synthesis both failed for " + file.logical_path + ": " + e.what(), {id});
            }
        }

        auto bytes = render(*content);
        atomic_write_text(host, bytes);
        set_virtual_mtime(host, file.virtual_timestamp);
        rendered[id] = bytes;

        ManifestEntry entry {id,     file.logical_path, physical, file.virtual_timestamp,
                             origin, bytes.size(),      sha256_hex(bytes)};
        json sidecar {
            {"file_id", id},
            {"logical_path", file.logical_path},
            {"artifact_type", to_string(file.artifact_type)},
            {"origin", origin},
            {"virtual_timestamp", format_timestamp(file.virtual_timestamp)},
            {"description", file.description},
            {"content_mode", to_string(file.content_mode)},
            {"dependencies", deps},
            {"relations", relations},
            {"context", {{"predecessor_bytes", context_bytes}, {"truncated", truncated}}},
            {"content_sha256", entry.content_sha256},
        };
        if (!fetch_info.is_null())
            sidecar["fetch"] = fetch_info;
        auto sidecar_path = host;
        sidecar_path += std::string(sidecar_suffix);
        atomic_write_json(sidecar_path, sidecar);
        computer.manifest.emplace(id, std::move(entry));
        computer.order.push_back(id);
    }
    save_manifest(computer);
    return computer;
}

// ---------------------------------------------------------------------------

double lower_median(std::vector<double> values)
{
    if (values.empty())
        return 0;
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];
}

double nearest_rank(std::vector<double> values, double pct)
{
    if (values.empty())
        return 0;
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

json to_json(const ComputerStats& s)
{
    json types = json::object();
    for (const auto& [ext, t]: s.type_distribution)
        types[ext] = {{"count", t.count}, {"percentage", t.percentage}};
    json sizes = json::object();
    for (const auto& [ext, z]: s.size_stats)
        sizes[ext] = {{"mean_kb", z.mean_kb}, {"median_kb", z.median_kb}, {"p95_kb", z.p95_kb}};
    return {
        {"file_count", s.file_count},
        {"directory_count", s.directory_count},
        {"avg_directory_depth", s.avg_directory_depth},
        {"max_directory_depth", s.max_directory_depth},
        {"type_distribution", types},
        {"size_stats", sizes},
    };
}

ComputerStats computer_stats_from_json(const json& j)
{
    ComputerStats s;
    try {
        s.file_count = j.at("file_count").get<long long>();
        s.directory_count = j.at("directory_count").get<long long>();
        s.avg_directory_depth = j.at("avg_directory_depth").get<double>();
        s.max_directory_depth = j.at("max_directory_depth").get<long long>();
        for (const auto& [ext, t]: j.at("type_distribution").items())
            s.type_distribution[ext] = {t.at("count").get<long long>(), t.at("percentage").get<double>()};
        const json sizes = j.value("size_stats", json::object());
        for (const auto& [ext, z]: sizes.items())
            s.size_stats[ext] = {z.at("mean_kb").get<double>(), z.at("median_kb").get<double>(),
                                 z.at("p95_kb").get<double>()};
    } catch (const json::exception& e) {
        fail(ErrorCode::ValidationFailed, std::string("malformed computer stats: ") + e.what());
    }
    return s;
}

ComputerStats computer_stats(const fs::path& root)
{
    if (!fs::is_directory(root))
        fail(ErrorCode::RootMissing, "computer root does not exist: " + root.string());
    std::vector<fs::path> mounts;
    if (fs::is_directory(root / "drives"))
        for (const auto& d: fs::directory_iterator(root / "drives"))
            if (d.is_directory())
                mounts.push_back(d.path());
    if (fs::is_directory(root / "root"))
        mounts.push_back(root / "root");
    std::sort(mounts.begin(), mounts.end());

    ComputerStats s;
    std::map<std::string, std::vector<double>> sizes;
    long long depth_sum = 0;
    for (const auto& mount: mounts) {
        for (const auto& entry: fs::recursive_directory_iterator(mount)) {
            auto rel = entry.path().lexically_relative(mount);
            long long depth = std::distance(rel.begin(), rel.end());
            if (entry.is_directory()) {
                ++s.directory_count;
                depth_sum += depth;
                s.max_directory_depth = std::max(s.max_directory_depth, depth);
            } else if (entry.is_regular_file()) {
                auto name = entry.path().filename().string();
                if (name.size() > sidecar_suffix.size() &&
                    name.compare(name.size() - sidecar_suffix.size(), sidecar_suffix.size(), sidecar_suffix) == 0)
                    continue;
                ++s.file_count;
                auto ext = extension_of(generic(entry.path().filename()));
                if (ext.empty())
                    ext = "(none)";
                sizes[ext].push_back(static_cast<double>(entry.file_size()) / 1024.0);
            }
        }
    }
    if (s.directory_count > 0)
        s.avg_directory_depth = static_cast<double>(depth_sum) / static_cast<double>(s.directory_count);
    for (auto& [ext, v]: sizes) {
        auto n = static_cast<long long>(v.size());
        s.type_distribution[ext] = {n, 100.0 * static_cast<double>(n) / static_cast<double>(s.file_count)};
        double sum = 0;
        for (double x: v)
            sum += x;
        s.size_stats[ext] = {sum / static_cast<double>(n), lower_median(v), nearest_rank(v, 95)};
    }
    return s;
}

}  // namespace scs
