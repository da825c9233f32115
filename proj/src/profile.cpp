// SPDX-License-Identifier: Apache-2.0
#include "scs/profile.hpp"

#include "scs/error.hpp"

#include <cctype>
#include <sstream>

namespace scs {

namespace {

constexpr std::string_view expand_prompt =
    "You expand a short persona into a detailed user profile for a synthetic computer. Respond with one JSON "
    "object with fields identity{full_name,username,location}, occupation, organization, career_stage, "
    "responsibilities[], recent_work_history[{period,summary}], current_projects[], "
    "collaborators[{name,relationship}], common_work_products[], technical_level (low|intermediate|high), "
    "computer_usage_level (low|medium|high), preferred_tools[], document_habits, spreadsheet_usage, "
    "attachment_saving, naming_preferences, organization_style.";

bool contains_any(const std::string& text, std::initializer_list<std::string_view> words)
{
    for (auto w: words)
        if (text.find(w) != std::string::npos)
            return true;
    return false;
}

}  // namespace

std::string_view to_string(TechnicalLevel level)
{
    switch (level) {
    case TechnicalLevel::low: return "low";
    case TechnicalLevel::intermediate: return "intermediate";
    case TechnicalLevel::high: return "high";
    }
    return "intermediate";
}

std::string_view to_string(UsageLevel level)
{
    switch (level) {
    case UsageLevel::low: return "low";
    case UsageLevel::medium: return "medium";
    case UsageLevel::high: return "high";
    }
    return "medium";
}

TechnicalLevel technical_level_from(std::string_view text, const std::string& field)
{
    auto t = to_lower(trim(text));
    if (contains_any(t, {"intermediate", "medium", "moderate", "average"}))
        return TechnicalLevel::intermediate;
    if (contains_any(t, {"high", "advanced", "expert"}))
        return TechnicalLevel::high;
    if (contains_any(t, {"low", "basic", "novice", "beginner"}))
        return TechnicalLevel::low;
    schema_violation("unrecognized technical level '" + std::string(text) + "'", {field});
}

UsageLevel usage_level_from(std::string_view text, const std::string& field)
{
    auto t = to_lower(trim(text));
    if (contains_any(t, {"medium", "moderate", "intermediate", "average"}))
        return UsageLevel::medium;
    if (contains_any(t, {"high", "heavy", "intensive"}))
        return UsageLevel::high;
    if (contains_any(t, {"low", "light", "minimal"}))
        return UsageLevel::low;
    schema_violation("unrecognized usage level '" + std::string(text) + "'", {field});
}

std::string normalize_occupation(std::string_view text)
{
    std::istringstream words {std::string(text)};
    std::string word, out;
    while (words >> word) {
        word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
        out += (out.empty() ? "" : " ") + word;
    }
    return out;
}

std::string derive_username(std::string_view full_name)
{
    std::istringstream words {std::string(full_name)};
    std::vector<std::string> parts;
    std::string w;
    while (words >> w)
        parts.push_back(w);
    if (parts.empty())
        return {};
    std::string out;
    auto keep = [&out](std::string_view s) {
        for (char c: s)
            if (std::isalnum(static_cast<unsigned char>(c)))
                out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    };
    if (parts.size() == 1) {
        keep(parts[0]);
        return out;
    }
    keep(parts.front().substr(0, 1));
    keep(parts.back());
    return out;
}

json to_json(const UserProfile& p)
{
    json history = json::array();
    for (const auto& h: p.recent_work_history)
        history.push_back({{"period", h.period}, {"summary", h.summary}});
    json contacts = json::array();
    for (const auto& c: p.collaborators)
        contacts.push_back({{"name", c.name}, {"relationship", c.relationship}});
    json out {
        {"identity", {{"full_name", p.identity.full_name}, {"username", p.identity.username}, {"location", p.identity.location}}},
        {"occupation", p.occupation},
        {"organization", p.organization},
        {"career_stage", p.career_stage},
        {"responsibilities", p.responsibilities},
        {"recent_work_history", history},
        {"current_projects", p.current_projects},
        {"collaborators", contacts},
        {"common_work_products", p.common_work_products},
        {"technical_level", to_string(p.technical_level)},
        {"computer_usage_level", to_string(p.computer_usage_level)},
        {"preferred_tools", p.preferred_tools},
        {"document_habits", p.document_habits},
        {"spreadsheet_usage", p.spreadsheet_usage},
        {"attachment_saving", p.attachment_saving},
        {"naming_preferences", p.naming_preferences},
        {"organization_style", p.organization_style},
    };
    if (!p.persona_id.empty())
        out["provenance"] = {{"persona_id", p.persona_id}, {"persona_sha256", p.persona_sha256}};
    return out;
}

UserProfile profile_from_json(const json& j)
{
    RecordReader r(j, "profile");
    UserProfile p;
    const auto& identity = r.object("identity");
    p.identity.full_name = identity.value("full_name", "");
    p.identity.username = identity.value("username", "");
    p.identity.location = identity.value("location", "");
    if (trim(p.identity.full_name).empty())
        r.mark_bad("identity.full_name");
    p.occupation = normalize_occupation(r.text("occupation"));
    p.organization = r.text("organization");
    p.career_stage = r.optional_text("career_stage");
    p.responsibilities = r.optional_texts("responsibilities");
    for (const auto& h: r.optional_array("recent_work_history")) {
        if (h.is_object())
            p.recent_work_history.push_back({h.value("period", ""), h.value("summary", "")});
        else if (h.is_string())
            p.recent_work_history.push_back({"", h.get<std::string>()});
    }
    p.current_projects = r.texts("current_projects");
    for (const auto& c: r.optional_array("collaborators")) {
        if (c.is_object())
            p.collaborators.push_back({c.value("name", ""), c.value("relationship", "")});
        else if (c.is_string())
            p.collaborators.push_back({c.get<std::string>(), ""});
    }
    p.common_work_products = r.optional_texts("common_work_products");
    auto tech = r.text("technical_level");
    auto usage = r.text("computer_usage_level");
    p.preferred_tools = r.optional_texts("preferred_tools");
    p.document_habits = r.optional_text("document_habits");
    p.spreadsheet_usage = r.optional_text("spreadsheet_usage");
    p.attachment_saving = r.optional_text("attachment_saving");
    p.naming_preferences = r.text("naming_preferences");
    p.organization_style = r.text("organization_style");
    r.finish();

    p.technical_level = technical_level_from(tech);
    p.computer_usage_level = usage_level_from(usage);
    if (trim(p.identity.username).empty())
        p.identity.username = derive_username(p.identity.full_name);
    if (j.contains("provenance")) {
        p.persona_id = j["provenance"].value("persona_id", "");
        p.persona_sha256 = j["provenance"].value("persona_sha256", "");
    }
    validate_profile(p);
    return p;
}

void validate_profile(const UserProfile& p)
{
    std::vector<std::string> bad;
    if (trim(p.occupation).empty())
        bad.emplace_back("occupation");
    if (trim(p.identity.username).empty())
        bad.emplace_back("identity.username");
    if (trim(p.organization_style).empty())
        bad.emplace_back("organization_style");
    if (p.current_projects.empty())
        bad.emplace_back("current_projects");
    if (!bad.empty())
        schema_violation("profile invariants violated", bad);
}

Persona load_persona(const std::filesystem::path& path)
{
    return Persona {path.stem().string(), read_text(path)};
}

UserProfile expand_persona(const Persona& persona, Gateway& gateway)
{
    auto text = trim(persona.text);
    if (text.empty())
        fail(ErrorCode::EmptyPersona, "persona '" + persona.id + "' has no text");
    if (text.size() < 20)
        fail(ErrorCode::PreconditionViolation, "persona '" + persona.id + "' is shorter than 20 characters");

    GenerationRequest request;
    request.role_label = std::string(roles::setup_agent);
    request.system_context = std::string(expand_prompt);
    request.schema_hint = "profile";
    request.messages.push_back({"user", "TASK: expand-persona\npersona_id: " + persona.id + "\n\n" + text});
    auto response = gateway.complete(request);

    auto profile = profile_from_json(parse_model_json(response.text, "profile"));
    profile.persona_id = persona.id;
    profile.persona_sha256 = sha256_hex(persona.text);
    return profile;
}

}  // namespace scs
