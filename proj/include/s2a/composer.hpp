#pragma once

// Audio scene composition: discrete objects form the foreground layer,
// continuous objects the background layer, mixed at fixed gains.

#include <string>
#include <vector>

#include "s2a/candidates.hpp"

namespace s2a {

struct PlannedStem {
  std::size_t object_index = 0;  // position in SceneAnalysis::objects
  SonicObject object;
  AudioBuffer stem;  // peak-normalized
};

struct CompositionPlan {
  std::vector<PlannedStem> foreground;  // Discrete objects
  std::vector<PlannedStem> background;  // Continuous objects
  std::size_t target_len_samples = 0;
  std::vector<CandidateSet> candidate_sets;
  std::vector<std::string> warnings;

  std::size_t stem_count() const { return foreground.size() + background.size(); }

  /// Stem for the object at `object_index`, if planned.
  const AudioBuffer* stem_for(std::size_t object_index) const {
    for (const auto* layer : {&foreground, &background})
      for (const auto& p : *layer)
        if (p.object_index == object_index) return &p.stem;
    return nullptr;
  }
};

/// Routes each object by event type: Discrete objects go through candidate
/// selection, Continuous objects get one direct generation. Every stem is
/// peak-normalized.
inline CompositionPlan build_plan(const SceneAnalysis& analysis, const PipelineConfig& cfg,
                                  AudioGenBackend& gen, bool parallel = false) {
  validate_config(cfg);
  if (analysis.objects.empty()) throw EmptyScene();
  CompositionPlan plan;
  plan.target_len_samples = samples_for(cfg.clip_seconds);
  for (std::size_t i = 0; i < analysis.objects.size(); ++i) {
    const SonicObject& obj = analysis.objects[i];
    if (obj.event_type == EventType::Discrete) {
      CandidateSet set = select_discrete(obj.phrase, cfg, gen, parallel);
      plan.foreground.push_back({i, obj, dsp::peak_normalize(set.selected())});
      plan.warnings.insert(plan.warnings.end(), set.warnings.begin(), set.warnings.end());
      plan.candidate_sets.push_back(std::move(set));
    } else {
      AudioBuffer clip = gen.generate(obj.phrase, cfg.clip_seconds, cfg.rng_seed);
      plan.background.push_back({i, obj, dsp::peak_normalize(clip)});
    }
  }
  return plan;
}

/// Sums each layer (foreground stems padded, background stems looped to the
/// target length) and mixes the two buses at the configured gains:
/// out = fg_weight * sum(fg) + bg_weight * sum(bg), rescued to the headroom
/// peak only when that sum would clip.
inline AudioBuffer compose(const CompositionPlan& plan, const PipelineConfig& cfg) {
  if (plan.stem_count() == 0) throw EmptyScene();
  const std::size_t len = plan.target_len_samples;
  if (len == 0) throw PreconditionError("plan has no target length");

  auto bus = [len](const std::vector<PlannedStem>& layer, dsp::FitMode fit) {
    std::vector<double> acc(len, 0.0);
    for (const auto& p : layer) {
      const AudioBuffer fitted = dsp::fit_length(p.stem, len, fit);
      for (std::size_t i = 0; i < len; ++i) acc[i] += fitted[i];
    }
    return AudioBuffer(std::move(acc));
  };

  std::vector<dsp::Stem> buses;
  if (!plan.foreground.empty())
    buses.push_back({bus(plan.foreground, dsp::FitMode::Pad), cfg.foreground_weight, dsp::FitMode::Pad});
  if (!plan.background.empty())
    buses.push_back({bus(plan.background, dsp::FitMode::Loop), cfg.background_weight, dsp::FitMode::Pad});
  return dsp::mix(buses, len, cfg.output_headroom_peak);
}

}  // namespace s2a
