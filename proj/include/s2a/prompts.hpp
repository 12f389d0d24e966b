#pragma once

#include <string>

#include "s2a/core.hpp"

namespace s2a {

/// Prompt templates for the scene-analysis chain.
struct PromptSet {
  std::string sonic_objects =
      "Describe this image with respect to the sound-making objects in the scene.";
  std::string action_phrase =
      "Only provide a noun+verb like phrase such that the noun is the sound making object and "
      "the verb is the possible action on or by the object that could create a sound";
  std::string event_label =
      "At the end of each noun+verb phrase, attach a label 'discrete' or 'continuous' depending "
      "on whether the sound produced by the object is generally discrete or continuous.";
  std::string brief_description =
      "Provide a short sentence (<10 words) describing the scene to a blind person";
  // Reconstructed: elicits the per-object positional sentences used by the
  // Detail (overlay-concat) mode.
  std::string positional_description =
      "For each noun+verb phrase listed below, write one sentence describing that object and "
      "where it is relative to the viewer (ahead, to your left, to your right, in the "
      "distance). Answer with one line per object in the form '<phrase>: <sentence>'.";

  bool operator==(const PromptSet&) const = default;
};

inline void validate_prompts(const PromptSet& p) {
  if (p.sonic_objects.empty() || p.action_phrase.empty() || p.event_label.empty() ||
      p.brief_description.empty() || p.positional_description.empty())
    throw ConfigError("all five prompts must be non-empty");
}

/// Reads a prompt file (flat `key = value` lines). Missing keys keep their
/// defaults.
inline PromptSet parse_prompts(std::string_view text, PromptSet base = {}) {
  for (const auto& [key, value] : kv::parse(text)) {
    if (key == "sonic_objects") base.sonic_objects = value;
    else if (key == "action_phrase") base.action_phrase = value;
    else if (key == "event_label") base.event_label = value;
    else if (key == "brief_description") base.brief_description = value;
    else if (key == "positional_description") base.positional_description = value;
    else throw ConfigError("unknown prompt key: " + key);
  }
  validate_prompts(base);
  return base;
}

inline PromptSet load_prompts(const std::string& path) { return parse_prompts(kv::read_file(path)); }

}  // namespace s2a
