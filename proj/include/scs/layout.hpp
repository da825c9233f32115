// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string_view>

// File and directory names inside a run store.
namespace scs::layout {

inline constexpr std::string_view persona = "persona.txt";
inline constexpr std::string_view profile = "profile.json";
inline constexpr std::string_view policy = "policy.json";
inline constexpr std::string_view plan = "plan.json";
inline constexpr std::string_view computer = "computer";
inline constexpr std::string_view private_store = "private";
inline constexpr std::string_view objectives = "objectives.json";
inline constexpr std::string_view collaborators = "collaborators.json";
inline constexpr std::string_view messages = "messages.jsonl";
inline constexpr std::string_view simulation = "simulation.json";
inline constexpr std::string_view telemetry = "telemetry.json";
inline constexpr std::string_view transcript = "transcript.jsonl";
inline constexpr std::string_view stages = "stages.json";
inline constexpr std::string_view stats_pre = "stats/pre.json";
inline constexpr std::string_view stats_post = "stats/post.json";
inline constexpr std::string_view rubric_drafts = "eval/rubric_drafts";
inline constexpr std::string_view rubric = "eval/rubric.json";
inline constexpr std::string_view score = "eval/score.json";
inline constexpr std::string_view retrospective = "eval/retrospective.md";
inline constexpr std::string_view retrospective_index = "eval/retrospective.index.json";
inline constexpr std::string_view experience_items = "experience/items.jsonl";

}  // namespace scs::layout
