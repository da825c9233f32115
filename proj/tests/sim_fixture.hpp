// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scs/engine.hpp"
#include "test_support.hpp"

#include <memory>

// A small advisor computer with the fixture collaborators, and a scripted
// five-day run over it.
namespace scs::testing {

struct World {
    TempDir dir;
    SimulationInputs in;
};

inline void put_file(SyntheticComputer& c, const std::string& id, const std::string& logical, const std::string& bytes,
              const std::string& when)
{
    ManifestEntry e;
    e.file_id = id;
    e.logical_path = logical;
    e.physical_path = map_logical_path(logical, c.os_style);
    e.virtual_timestamp = parse_timestamp(when);
    e.origin = "authored";
    e.byte_size = bytes.size();
    e.content_sha256 = sha256_hex(bytes);
    auto host = c.root / e.physical_path;
    fs::create_directories(host.parent_path());
    atomic_write_text(host, bytes);
    c.manifest[id] = e;
    c.order.push_back(id);
}

inline json setup_rules()
{
    return json::array({
        rule("setup-agent", "TASK: collaborators", read_json(fixture("advisor/collaborators.json"))),
        rule("artifact-creator", "",
             json {{"sheets", json::array({{{"name", "Q1"}, {"rows", json::array({json::array({"Asset", "Return"}), json::array({"US Equity", "4.1%"})})}}})}}),
    });
}

inline std::unique_ptr<World> make_world()
{
    auto w = std::make_unique<World>();
    auto& in = w->in;
    in.run_id = "run-test";
    in.run_dir = w->dir / "run";
    in.profile = profile_from_json(read_json(fixture("advisor/profile.json")));
    auto& c = in.computer;
    c.root = w->dir / "computer";
    c.private_store = w->dir / "private";
    c.os_style = OsStyle::windows;
    c.mounts = {"C", "D"};
    fs::create_directories(c.root);
    put_file(c, "bloomberg", "D:/Research/Bloomberg.xlsx", "Rate data Q3", "2025-12-17T10:00");
    put_file(c, "ic_minutes", "D:/ClientWork/InvestmentCommittee/IC_Minutes_2025-12-10.docx", "IC minutes",
             "2025-12-10T16:00");
    put_file(c, "notes", "C:/Users/mforsythe/Documents/notes.txt", "To do", "2025-12-20T09:00");
    save_manifest(c);
    in.objectives = objectives_from_json(read_json(fixture("advisor/objectives.json")), OsStyle::windows);
    auto gw = scripted(setup_rules());
    in.collaborators = create_collaborators(in.profile, in.objectives, *gw, c);
    return w;
}

inline json call(const std::string& name, json args)
{
    return {{"name", name}, {"arguments", std::move(args)}};
}

inline json tool_rule(const std::string& contains, json calls)
{
    return {{"role", "work-agent"}, {"contains", contains}, {"response", {{"text", ""}, {"tool_calls", std::move(calls)}}}};
}

inline json week1_plan()
{
    return read_json(fixture("advisor/week1_plan.json"));
}

inline const std::string patricia_file = "VCMM_2026_AssetClassProjections_Q1.xlsx";

inline json five_day_rules()
{
    return json::array({
        rule("work-agent", "TASK: weekly-plan", week1_plan()),
        tool_rule("DATE: 2026-01-05\nTURN: 0",
                  json::array({
                      call("write_file", {{"path", "D:/ModelPortfolios/Notes/Day1.txt"}, {"content", "VCMM notes"}}),
                      call("send_message", {{"recipient", "Patricia Huang"},
                                            {"subject", "VCMM 2026 dataset"},
                                            {"body", "Could you send the Q1 projections?"}}),
                      call("log_activity", {{"text", "Drafted notes; asked Patricia for the VCMM data."}}),
                  })),
        tool_rule("DATE: 2026-01-07\nTURN: 0",
                  json::array({
                      call("check_inbox", json::object()),
                      call("save_attachment", {{"message_id", "m0002"}, {"index", 0}, {"dest", "D:/Research/VCMM/"}}),
                      call("log_activity", {{"text", "Saved the VCMM dataset."}}),
                  })),
        tool_rule("TURN: 0", json::array({call("check_inbox", json::object())})),
        rule("work-agent", "", "Done for today."),
        rule("collaborator", "COLLABORATOR: patricia-huang",
             json {{"subject", "VCMM 2026 Q1"}, {"body", "Attached."}, {"attach", json::array({patricia_file})}}),
        rule("collaborator", "", json {{"skip", true}}),
    });
}

inline EngineConfig five_days()
{
    EngineConfig c;
    c.working_days = 5;
    c.seed = 42;
    return c;
}

}  // namespace scs::testing
