// SPDX-License-Identifier: Apache-2.0
#include "scs/profile.hpp"
#include "test_support.hpp"

using namespace scs;
using namespace scs::testing;

namespace {

json advisor_profile()
{
    return read_json(fixture("advisor/profile.json"));
}

std::shared_ptr<Gateway> profile_gateway(const json& profile)
{
    return scripted(json::array({rule("setup-agent", "TASK: expand-persona", profile)}));
}

Persona advisor_persona()
{
    return load_persona(fixture("advisor/persona.txt"));
}

}  // namespace

TEST(Profile, ExpandsFinancialAdvisorPersona)
{
    auto gw = profile_gateway(advisor_profile());
    auto p = expand_persona(advisor_persona(), *gw);
    EXPECT_EQ(p.occupation, "Senior Financial Advisor");
    EXPECT_EQ(p.identity.username, "mforsythe");
    EXPECT_EQ(p.identity.full_name, "Margaret Elaine Forsythe");
    EXPECT_EQ(p.organization_style.rfind("Tidy and systematic", 0), 0u);
    EXPECT_EQ(p.technical_level, TechnicalLevel::intermediate);
    EXPECT_EQ(p.computer_usage_level, UsageLevel::high);
    EXPECT_EQ(p.current_projects.size(), 5u);
    EXPECT_EQ(p.persona_id, "persona");
    EXPECT_EQ(p.persona_sha256, sha256_hex(advisor_persona().text));
}

TEST(Profile, WhitespacePersonaIsEmpty)
{
    auto gw = profile_gateway(advisor_profile());
    EXPECT_EQ(error_code_of([&] { expand_persona(Persona {"p", "  \n\t  "}, *gw); }), ErrorCode::EmptyPersona);
    EXPECT_EQ(gw->calls(), 0);
}

TEST(Profile, MissingNamingPreferencesListsTheField)
{
    auto j = advisor_profile();
    j.erase("naming_preferences");
    auto gw = profile_gateway(j);
    auto e = error_of([&] { expand_persona(advisor_persona(), *gw); });
    EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    EXPECT_EQ(e.details(), std::vector<std::string> {"naming_preferences"});
}

TEST(Profile, ReportsEveryMissingField)
{
    auto j = advisor_profile();
    j.erase("occupation");
    j.erase("organization_style");
    j["current_projects"] = json::array();
    auto e = error_of([&] { profile_from_json(j); });
    EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    EXPECT_EQ(e.details(), (std::vector<std::string> {"occupation", "current_projects", "organization_style"}));
}

TEST(Profile, UsernameFallbackAndOccupationNormalization)
{
    auto j = advisor_profile();
    j["identity"].erase("username");
    j["occupation"] = "  senior   financial advisor ";
    auto p = profile_from_json(j);
    EXPECT_EQ(p.identity.username, "mforsythe");
    EXPECT_EQ(p.occupation, "Senior Financial Advisor");
    EXPECT_EQ(derive_username("Cher"), "cher");
    EXPECT_EQ(derive_username("Jean-Luc O'Neil"), "joneil");
}

TEST(Profile, LenientLevelMapping)
{
    EXPECT_EQ(technical_level_from("Intermediate"), TechnicalLevel::intermediate);
    EXPECT_EQ(technical_level_from("Advanced user"), TechnicalLevel::high);
    EXPECT_EQ(technical_level_from("basic"), TechnicalLevel::low);
    EXPECT_EQ(usage_level_from("Moderate"), UsageLevel::medium);
    EXPECT_EQ(usage_level_from("Heavy"), UsageLevel::high);
    EXPECT_EQ(error_code_of([] { technical_level_from("purple"); }), ErrorCode::SchemaViolation);
}

TEST(Profile, RoundTripRevalidates)
{
    auto gw = profile_gateway(advisor_profile());
    auto p = expand_persona(advisor_persona(), *gw);
    auto text = dump_pretty(to_json(p));
    auto back = profile_from_json(json::parse(text));
    EXPECT_EQ(dump_pretty(to_json(back)), text);
}

TEST(Profile, ReplayGivesIdenticalBytes)
{
    TempDir dir;
    auto t = dir / "t.jsonl";
    std::string first;
    {
        Gateway gw(ScriptedBackend::from_json(json::array({rule("setup-agent", "", advisor_profile())})),
                   std::make_shared<TranscriptWriter>(t));
        first = dump_pretty(to_json(expand_persona(advisor_persona(), gw)));
    }
    Gateway replay(ReplayBackend::from_file(t));
    EXPECT_EQ(dump_pretty(to_json(expand_persona(advisor_persona(), replay))), first);
}
