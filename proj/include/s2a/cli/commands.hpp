#pragma once

// Library side of the command-line tool. Each command is a function here;
// tools/s2a.cpp only parses flags and maps exceptions to exit codes.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "s2a/backend_set.hpp"
#include "s2a/json_io.hpp"
#include "s2a/wav.hpp"

namespace s2a::cli {

inline constexpr std::string_view kSilentSceneNotice =
    "notice: audio.wav not written: the scene has no sonic objects, so only spoken descriptions exist";

struct PipelineOptions {
  std::string backend = "fixture";
  std::optional<std::string> config_path;
  std::optional<std::string> prompts_path;
  std::optional<std::uint64_t> seed;  // overrides the config file
};

inline PipelineConfig resolve_config(const PipelineOptions& opts) {
  PipelineConfig cfg = opts.config_path ? load_config(*opts.config_path) : PipelineConfig{};
  if (opts.seed) cfg.rng_seed = *opts.seed;
  return validate_config(cfg), cfg;
}

inline PromptSet resolve_prompts(const PipelineOptions& opts) {
  return opts.prompts_path ? load_prompts(*opts.prompts_path) : PromptSet{};
}

inline ImageRef load_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw PreconditionError("cannot read image " + path);
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  return ImageRef::from_bytes(std::move(bytes));
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Error("cannot write " + path.string());
}

struct RunResult {
  ModeBundle bundle;
  std::vector<std::filesystem::path> files;
  std::vector<std::string> notices;
};

/// Writes <mode>.wav for each present mode, analysis.json (deterministic) and
/// timings.json (wall clock) into `dir`.
inline RunResult write_bundle(ModeBundle bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  RunResult out;
  for (Mode m : kAllModes) {
    const auto path = dir / (std::string(to_string(m)) + ".wav");
    if (!bundle[m]) {
      std::filesystem::remove(path);
      out.notices.emplace_back(kSilentSceneNotice);
      continue;
    }
    wav::write_file(path.string(), *bundle[m]);
    out.files.push_back(path);
  }
  write_text(dir / "analysis.json", json_io::bundle_summary(bundle).dump(2) + "\n");
  write_text(dir / "timings.json", json_io::timings_json(bundle.timings_ms).dump(2) + "\n");
  out.files.push_back(dir / "analysis.json");
  out.files.push_back(dir / "timings.json");
  out.bundle = std::move(bundle);
  return out;
}

/// `run <image>`
inline RunResult run(const std::string& image_path, const std::filesystem::path& out_dir,
                     const PipelineOptions& opts) {
  const PipelineConfig cfg = resolve_config(opts);
  const PromptSet prompts = resolve_prompts(opts);
  const ImageRef image = load_image(image_path);
  BackendSet backends = make_backends(opts.backend, cfg.rng_seed, prompts);
  BundleOptions bo;
  bo.prompts = prompts;
  return write_bundle(build_bundle(image, cfg, backends.view(), bo), out_dir);
}

struct EventReport {
  std::vector<std::size_t> frames;
  std::vector<double> times_s;
};

/// `count-events <wav>`
inline EventReport count_events_file(const std::string& wav_path, const PipelineConfig& cfg = {}) {
  const AudioBuffer audio = wav::read_file(wav_path);
  const auto env = dsp::onset_strength(audio, cfg.hop_length_samples);
  EventReport r;
  r.frames = dsp::detect_events(env);
  for (auto f : r.frames) r.times_s.push_back(env.frame_time(f));
  return r;
}

inline std::string format_events(const EventReport& r) {
  std::ostringstream out;
  out << r.frames.size() << "\n";
  for (double t : r.times_s) out << std::fixed << std::setprecision(3) << t << "\n";
  return out.str();
}

/// `bench --n N <image>`: N sequential end-to-end builds.
inline eval::BenchmarkResult bench(const std::string& image_path, std::size_t n, const PipelineOptions& opts,
                                   const Clock& clock = steady_clock_ms()) {
  const PipelineConfig cfg = resolve_config(opts);
  const PromptSet prompts = resolve_prompts(opts);
  const ImageRef image = load_image(image_path);
  BackendSet backends = make_backends(opts.backend, cfg.rng_seed, prompts);
  BundleOptions bo;
  bo.prompts = prompts;
  bo.clock = clock;
  return eval::latency_benchmark([&] { build_bundle(image, cfg, backends.view(), bo); }, n, clock);
}

inline nlohmann::json bench_json(const eval::BenchmarkResult& r) {
  return {{"durations_ms", r.durations_ms}, {"stats", json_io::to_json(r.stats)}};
}

inline std::string format_bench(const eval::BenchmarkResult& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "run      ms\n";
  for (std::size_t i = 0; i < r.durations_ms.size(); ++i)
    out << std::left << std::setw(8) << (i + 1) << ' ' << r.durations_ms[i] << "\n";
  out << "\nn     " << r.stats.n << "\n"
      << "mean  " << r.stats.mean_ms << "\n"
      << "sd    " << r.stats.sd_ms << "\n"
      << "min   " << r.stats.min_ms << "\n"
      << "max   " << r.stats.max_ms << "\n";
  return out.str();
}

/// `eval <metric> <input.jsonl>`
inline nlohmann::json evaluate_file(std::string_view metric, const std::string& path, EmbeddingBackend& embedder) {
  std::ifstream f(path);
  if (!f) throw PreconditionError("cannot read corpus " + path);
  return json_io::evaluate_corpus(metric, f, embedder);
}

}  // namespace s2a::cli
