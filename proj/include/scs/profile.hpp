// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scs/gateway.hpp"
#include "scs/json_io.hpp"

#include <string>
#include <vector>

namespace scs {

struct Persona {
    std::string id;
    std::string text;
};

enum class TechnicalLevel { low, intermediate, high };
enum class UsageLevel { low, medium, high };

std::string_view to_string(TechnicalLevel level);
std::string_view to_string(UsageLevel level);
/// Lenient mappers from free text ("Intermediate", "advanced", "Moderate"...).
/// Throw SchemaViolation naming `field` when nothing matches.
TechnicalLevel technical_level_from(std::string_view text, const std::string& field = "technical_level");
UsageLevel usage_level_from(std::string_view text, const std::string& field = "computer_usage_level");

struct Identity {
    std::string full_name;
    std::string username;
    std::string location;
};

struct WorkPeriod {
    std::string period;
    std::string summary;
};

struct ProfileContact {
    std::string name;
    std::string relationship;
};

struct UserProfile {
    Identity identity;
    std::string occupation;
    std::string organization;
    std::string career_stage;
    std::vector<std::string> responsibilities;
    std::vector<WorkPeriod> recent_work_history;
    std::vector<std::string> current_projects;
    std::vector<ProfileContact> collaborators;
    std::vector<std::string> common_work_products;
    TechnicalLevel technical_level = TechnicalLevel::intermediate;
    UsageLevel computer_usage_level = UsageLevel::medium;
    std::vector<std::string> preferred_tools;
    std::string document_habits;
    std::string spreadsheet_usage;
    std::string attachment_saving;
    std::string naming_preferences;
    std::string organization_style;

    // provenance link back to the persona this profile expands
    std::string persona_id;
    std::string persona_sha256;
};

json to_json(const UserProfile& profile);
/// Parses and validates a profile record (backend output or persisted file).
UserProfile profile_from_json(const json& j);
/// Throws SchemaViolation if a required field is empty.
void validate_profile(const UserProfile& profile);

/// Trimmed, whitespace-collapsed, first letter of every word upper-cased.
std::string normalize_occupation(std::string_view text);
/// First initial plus surname, lowercased alphanumerics ("Margaret Elaine Forsythe" -> "mforsythe").
std::string derive_username(std::string_view full_name);

Persona load_persona(const std::filesystem::path& path);

UserProfile expand_persona(const Persona& persona, Gateway& gateway);

}  // namespace scs
