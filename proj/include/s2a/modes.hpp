#pragma once

// The four presentation modes and end-to-end bundle assembly.
//
//   app name   study condition
//   Brief      Overlay         speech over the ducked scene audio
//   Detail     OverlayConcat   per-object sentence over that object's sound,
//                              segments played in sequence
//   Speech     SpeechOnly      spoken brief description
//   Audio      AudioOnly       non-verbal scene audio

#include <array>
#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "s2a/composer.hpp"
#include "s2a/scene_analysis.hpp"

namespace s2a {

enum class Mode { Brief, Detail, Speech, Audio };

inline constexpr std::array<Mode, 4> kAllModes = {Mode::Brief, Mode::Detail, Mode::Speech,
                                                  Mode::Audio};

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Brief: return "brief";
    case Mode::Detail: return "detail";
    case Mode::Speech: return "speech";
    case Mode::Audio: return "audio";
  }
  return "";
}

inline std::string_view study_condition(Mode m) {
  switch (m) {
    case Mode::Brief: return "overlay";
    case Mode::Detail: return "overlay_concat";
    case Mode::Speech: return "speech_only";
    case Mode::Audio: return "audio_only";
  }
  return "";
}

/// Exact, lowercase app-facing name; "detailed" is not "detail".
inline std::optional<Mode> parse_mode(std::string_view s) {
  for (Mode m : kAllModes)
    if (to_string(m) == s) return m;
  return std::nullopt;
}

inline constexpr double kOverlayTailSeconds = 0.5;

inline AudioBuffer assemble_speech_only(const SceneAnalysis& analysis, SpeechBackend& tts) {
  if (analysis.brief_description.empty()) throw PreconditionError("brief description is empty");
  return tts.synthesize(analysis.brief_description);
}

inline AudioBuffer assemble_audio_only(const CompositionPlan& plan, const PipelineConfig& cfg) {
  return compose(plan, cfg);
}

/// Speech at unit gain over the scene bed looped and ducked to
/// overlay_background_duck, followed by a 0.5 s tail.
inline AudioBuffer assemble_overlay(const AudioBuffer& speech, const AudioBuffer& scene,
                                    const PipelineConfig& cfg) {
  if (speech.empty() || scene.empty()) throw EmptyAudio();
  const std::size_t target =
      std::max(speech.size(), scene.size()) + samples_for(kOverlayTailSeconds);
  const std::array<dsp::Stem, 2> stems = {
      dsp::Stem{speech, 1.0, dsp::FitMode::Pad},
      dsp::Stem{scene, cfg.overlay_background_duck, dsp::FitMode::Loop}};
  return dsp::mix(stems, target, cfg.output_headroom_peak);
}

struct OverlayConcatResult {
  AudioBuffer audio;
  std::size_t segments = 0;
  std::vector<std::string> warnings;
};

/// One overlay segment per object that has a positional sentence (spoken over
/// that object's own stem), joined in object order with concat_gap_seconds of
/// silence. `stems[i]` belongs to `objects[i]`.
inline OverlayConcatResult assemble_overlay_concat(std::span<const SonicObject> objects,
                                                   std::span<const AudioBuffer> stems,
                                                   SpeechBackend& tts, const PipelineConfig& cfg) {
  if (objects.size() != stems.size()) throw PreconditionError("one stem per object required");
  OverlayConcatResult out;
  std::vector<AudioBuffer> segments;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (!objects[i].position_sentence) {
      out.warnings.push_back("detail mode skipped '" + objects[i].phrase +
                             "': no positional sentence");
      continue;
    }
    segments.push_back(assemble_overlay(tts.synthesize(*objects[i].position_sentence), stems[i], cfg));
  }
  if (segments.empty()) throw PreconditionError("no object has a positional sentence");
  out.segments = segments.size();
  out.audio = dsp::concat(segments, cfg.concat_gap_seconds);
  return out;
}

/// Milliseconds from an arbitrary origin. Injectable for tests.
using Clock = std::function<double()>;

inline Clock steady_clock_ms() {
  return [] {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
  };
}

struct ModeBundle {
  std::array<std::optional<AudioBuffer>, 4> audio;  // indexed by Mode
  SceneAnalysis analysis;
  std::map<std::string, double> timings_ms;
  std::vector<std::string> warnings;
  std::optional<CompositionPlan> plan;

  const std::optional<AudioBuffer>& operator[](Mode m) const {
    return audio[static_cast<std::size_t>(m)];
  }
  std::optional<AudioBuffer>& operator[](Mode m) { return audio[static_cast<std::size_t>(m)]; }
  bool audio_absent() const { return !(*this)[Mode::Audio].has_value(); }
};

struct BundleOptions {
  PromptSet prompts;
  bool parallel_generation = false;
  Clock clock = steady_clock_ms();
};

namespace bundle_detail {

/// Forwards to a speech backend while accumulating time spent in it.
class TimedSpeech : public SpeechBackend {
 public:
  TimedSpeech(SpeechBackend& inner, const Clock& clock) : inner_(inner), clock_(clock) {}
  AudioBuffer synthesize(std::string_view sentence) override {
    const double t0 = clock_();
    AudioBuffer out = inner_.synthesize(sentence);
    elapsed_ms_ += clock_() - t0;
    return out;
  }
  double elapsed_ms() const { return elapsed_ms_; }

 private:
  SpeechBackend& inner_;
  const Clock& clock_;
  double elapsed_ms_ = 0.0;
};

}  // namespace bundle_detail

/// Image to four mode renditions. Stage timings are recorded under
/// analysis, generation, composition, tts, assembly and total. A scene
/// without sonic objects yields speech content in Brief/Detail/Speech and no
/// Audio rendition.
inline ModeBundle build_bundle(const ImageRef& image, const PipelineConfig& cfg,
                               const Backends& backends, const BundleOptions& opts = {}) {
  validate_config(cfg);
  if (!backends.vision || !backends.audio || !backends.speech)
    throw PreconditionError("all three pipeline backends are required");
  const Clock& clock = opts.clock;
  bundle_detail::TimedSpeech tts(*backends.speech, clock);
  ModeBundle bundle;
  const double start = clock();

  double t = clock();
  bundle.analysis = analyze_scene(image, opts.prompts, *backends.vision);
  bundle.timings_ms["analysis"] = clock() - t;
  bundle.warnings = bundle.analysis.warnings;

  if (bundle.analysis.objects.empty()) {
    bundle.timings_ms["generation"] = 0.0;
    bundle.timings_ms["composition"] = 0.0;
    t = clock();
    AudioBuffer speech = assemble_speech_only(bundle.analysis, tts);
    bundle[Mode::Speech] = speech;
    bundle[Mode::Brief] = speech;
    bundle[Mode::Detail] = std::move(speech);
    bundle.timings_ms["tts"] = tts.elapsed_ms();
    bundle.timings_ms["assembly"] = clock() - t - tts.elapsed_ms();
    bundle.warnings.push_back("audio mode absent: no sonic objects in scene");
    bundle.timings_ms["total"] = clock() - start;
    return bundle;
  }

  t = clock();
  CompositionPlan plan = build_plan(bundle.analysis, cfg, *backends.audio, opts.parallel_generation);
  bundle.timings_ms["generation"] = clock() - t;
  bundle.warnings.insert(bundle.warnings.end(), plan.warnings.begin(), plan.warnings.end());

  t = clock();
  AudioBuffer scene = assemble_audio_only(plan, cfg);
  bundle.timings_ms["composition"] = clock() - t;

  t = clock();
  AudioBuffer speech = assemble_speech_only(bundle.analysis, tts);
  bundle[Mode::Speech] = speech;
  bundle[Mode::Brief] = assemble_overlay(speech, scene, cfg);

  std::vector<AudioBuffer> stems;
  for (std::size_t i = 0; i < bundle.analysis.objects.size(); ++i) stems.push_back(*plan.stem_for(i));
  const bool any_position = std::any_of(bundle.analysis.objects.begin(), bundle.analysis.objects.end(),
                                        [](const SonicObject& o) { return o.position_sentence.has_value(); });
  if (any_position) {
    auto detail = assemble_overlay_concat(bundle.analysis.objects, stems, tts, cfg);
    bundle[Mode::Detail] = std::move(detail.audio);
    bundle.warnings.insert(bundle.warnings.end(), detail.warnings.begin(), detail.warnings.end());
  } else {
    bundle[Mode::Detail] = speech;
    bundle.warnings.push_back("detail mode fell back to speech: no positional sentences");
  }
  bundle[Mode::Audio] = std::move(scene);
  bundle.timings_ms["tts"] = tts.elapsed_ms();
  bundle.timings_ms["assembly"] = clock() - t - tts.elapsed_ms();
  bundle.plan = std::move(plan);
  bundle.timings_ms["total"] = clock() - start;
  return bundle;
}

}  // namespace s2a
