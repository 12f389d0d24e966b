#pragma once

// Signal-processing primitives: onset-strength envelope, peak-picking event
// detection, peak normalization, length fitting, mixing and concatenation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "s2a/core.hpp"
#include "s2a/fft.hpp"

namespace s2a::dsp {

inline constexpr std::size_t kFftSize = 2048;
inline constexpr std::size_t kMelBands = 128;
inline constexpr double kAmin = 1e-10;
inline constexpr double kTopDb = 80.0;

struct OnsetEnvelope {
  std::vector<double> values;
  int hop_length_samples = 512;
  int sample_rate_hz = kSampleRate;

  std::size_t size() const noexcept { return values.size(); }
  double frame_time(std::size_t frame) const {
    return static_cast<double>(frame) * hop_length_samples / sample_rate_hz;
  }
};

/// Peak picker windows in seconds; converted to frames with
/// ceil(seconds * sr / hop), post windows extended by one frame.
struct PeakPickParams {
  double pre_max_s = 0.03;
  double post_max_s = 0.03;
  double pre_avg_s = 0.10;
  double post_avg_s = 0.10;
  double wait_s = 0.03;
  double delta = 0.07;
};

/// PeakPickParams converted to whole frames.
struct PeakPickFrames {
  std::size_t pre_max = 0;
  std::size_t post_max = 0;
  std::size_t pre_avg = 0;
  std::size_t post_avg = 0;
  std::size_t wait = 0;
  double delta = 0.07;
};

inline PeakPickFrames to_frames(const PeakPickParams& p, int sample_rate_hz, int hop) {
  if (p.pre_max_s < 0 || p.post_max_s < 0 || p.pre_avg_s < 0 || p.post_avg_s < 0 ||
      p.wait_s < 0)
    throw PreconditionError("peak-pick windows must be >= 0");
  if (!(p.delta > 0)) throw PreconditionError("peak-pick delta must be > 0");
  const double frames_per_s = static_cast<double>(sample_rate_hz) / hop;
  // Guard against 2.0000000001-style rounding turning exact counts into n+1.
  auto frames = [&](double s) {
    return static_cast<std::size_t>(std::max(0.0, std::ceil(s * frames_per_s - 1e-9)));
  };
  return {frames(p.pre_max_s), frames(p.post_max_s) + 1, frames(p.pre_avg_s),
          frames(p.post_avg_s) + 1, frames(p.wait_s), p.delta};
}

/// Slaney-style mel filterbank (area-normalized triangles) stored sparsely.
class MelFilterbank {
 public:
  MelFilterbank(int sample_rate_hz, std::size_t n_fft, std::size_t n_mels)
      : bands_(n_mels) {
    const std::size_t n_bins = n_fft / 2 + 1;
    const double nyquist = sample_rate_hz / 2.0;
    const double mel_max = hz_to_mel(nyquist);
    std::vector<double> edges(n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
      edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));

    for (std::size_t m = 0; m < n_mels; ++m) {
      const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
      const double enorm = 2.0 / (hi - lo);
      Band& band = bands_[m];
      for (std::size_t k = 0; k < n_bins; ++k) {
        const double f = nyquist * static_cast<double>(k) / static_cast<double>(n_bins - 1);
        const double w = std::max(0.0, std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid)));
        if (w <= 0.0) continue;
        if (band.weights.empty()) band.first_bin = k;
        band.weights.resize(k - band.first_bin + 1, 0.0);
        band.weights[k - band.first_bin] = w * enorm;
      }
    }
  }

  std::size_t band_count() const noexcept { return bands_.size(); }

  /// Projects a power spectrum onto the mel bands.
  void apply(std::span<const double> power, std::span<double> out) const {
    for (std::size_t m = 0; m < bands_.size(); ++m) {
      const Band& b = bands_[m];
      double acc = 0.0;
      for (std::size_t j = 0; j < b.weights.size(); ++j) acc += b.weights[j] * power[b.first_bin + j];
      out[m] = acc;
    }
  }

  // Slaney scale: linear below 1 kHz, logarithmic above.
  static double hz_to_mel(double hz) {
    constexpr double f_sp = 200.0 / 3.0;
    constexpr double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (hz < min_log_hz) return hz / f_sp;
    return min_log_mel + std::log(hz / min_log_hz) / logstep;
  }

  static double mel_to_hz(double mel) {
    constexpr double f_sp = 200.0 / 3.0;
    constexpr double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (mel < min_log_mel) return mel * f_sp;
    return min_log_hz * std::exp(logstep * (mel - min_log_mel));
  }

 private:
  struct Band {
    std::size_t first_bin = 0;
    std::vector<double> weights;
  };
  std::vector<Band> bands_;
};

/// Periodic Hann window.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  return w;
}

/// Log-power mel spectrogram, frames-major: result[t][band].
///
/// Frames are centered (the signal is zero-padded by n_fft/2 on both sides),
/// so frame t is centred on sample t * hop. Power is converted to dB against
/// a unit reference with an amin floor and clamped to (max - 80 dB).
inline std::vector<std::vector<double>> log_mel_spectrogram(const AudioBuffer& audio, int hop) {
  static const MelFilterbank mel(kSampleRate, kFftSize, kMelBands);
  static const std::vector<double> window = hann_window(kFftSize);
  static const Fft fft(kFftSize);

  const auto samples = audio.samples();
  const std::size_t half = kFftSize / 2;
  const std::size_t frames = 1 + samples.size() / static_cast<std::size_t>(hop);
  std::vector<std::vector<double>> out(frames, std::vector<double>(kMelBands));
  std::vector<std::complex<double>> buf(kFftSize);
  std::vector<double> power(half + 1);
  double max_db = -std::numeric_limits<double>::infinity();

  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t center = t * static_cast<std::size_t>(hop);
    for (std::size_t k = 0; k < kFftSize; ++k) {
      // Padded index center + k maps to original index center + k - half.
      const std::size_t padded = center + k;
      const double x = (padded >= half && padded - half < samples.size()) ? samples[padded - half] : 0.0;
      buf[k] = {x * window[k], 0.0};
    }
    fft.forward(buf);
    for (std::size_t k = 0; k <= half; ++k) power[k] = std::norm(buf[k]);
    mel.apply(power, out[t]);
    for (double& v : out[t]) {
      v = 10.0 * std::log10(std::max(kAmin, v));
      max_db = std::max(max_db, v);
    }
  }
  const double floor_db = max_db - kTopDb;
  for (auto& row : out)
    for (double& v : row) v = std::max(v, floor_db);
  return out;
}

/// Spectral-flux onset strength: mean over mel bands of the positive
/// first-order difference of the log-power mel spectrogram. Frame 0 is 0.
inline OnsetEnvelope onset_strength(const AudioBuffer& audio, int hop) {
  if (audio.empty()) throw EmptyAudio();
  if (hop <= 0) throw PreconditionError("hop must be > 0");
  const auto spec = log_mel_spectrogram(audio, hop);
  OnsetEnvelope env;
  env.hop_length_samples = hop;
  env.sample_rate_hz = kSampleRate;
  env.values.assign(spec.size(), 0.0);
  for (std::size_t t = 1; t < spec.size(); ++t) {
    double acc = 0.0;
    for (std::size_t b = 0; b < kMelBands; ++b) acc += std::max(0.0, spec[t][b] - spec[t - 1][b]);
    env.values[t] = acc / static_cast<double>(kMelBands);
  }
  return env;
}

/// Frame indices of detected events, strictly increasing.
///
/// The envelope is max-normalized first; frame i is an event iff it is the
/// maximum of [i - pre_max, i + post_max], is at least delta above the mean of
/// [i - pre_avg, i + post_avg], and lies at least `wait` frames after the
/// previous event. Windows are clipped to the envelope.
inline std::vector<std::size_t> detect_events(std::span<const double> envelope,
                                              const PeakPickFrames& p) {
  std::vector<std::size_t> events;
  const std::size_t n = envelope.size();
  if (n == 0) return events;
  const double peak = *std::max_element(envelope.begin(), envelope.end());
  if (!(peak > 0.0)) return events;

  std::vector<double> x(envelope.begin(), envelope.end());
  for (double& v : x) v /= peak;

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t max_lo = i >= p.pre_max ? i - p.pre_max : 0;
    const std::size_t max_hi = std::min(n - 1, i + p.post_max);
    const double local_max = *std::max_element(x.begin() + static_cast<std::ptrdiff_t>(max_lo),
                                               x.begin() + static_cast<std::ptrdiff_t>(max_hi) + 1);
    if (x[i] < local_max) continue;

    const std::size_t avg_lo = i >= p.pre_avg ? i - p.pre_avg : 0;
    const std::size_t avg_hi = std::min(n - 1, i + p.post_avg);
    const double sum = std::accumulate(x.begin() + static_cast<std::ptrdiff_t>(avg_lo),
                                       x.begin() + static_cast<std::ptrdiff_t>(avg_hi) + 1, 0.0);
    const double mean = sum / static_cast<double>(avg_hi - avg_lo + 1);
    if (x[i] < mean + p.delta) continue;

    if (!events.empty() && i - events.back() < p.wait) continue;
    events.push_back(i);
  }
  return events;
}

inline std::vector<std::size_t> detect_events(const OnsetEnvelope& env,
                                              const PeakPickParams& params = {}) {
  return detect_events(env.values, to_frames(params, env.sample_rate_hz, env.hop_length_samples));
}

/// Number of discrete events found by the default peak picker.
inline std::size_t count_events(const AudioBuffer& audio, const PipelineConfig& cfg) {
  return detect_events(onset_strength(audio, cfg.hop_length_samples)).size();
}

/// Divides by the absolute peak; silent input is returned unchanged.
inline AudioBuffer peak_normalize(const AudioBuffer& audio) {
  if (audio.empty()) throw EmptyAudio();
  const double p = audio.peak();
  if (p == 0.0) return audio;
  std::vector<double> out(audio.samples().begin(), audio.samples().end());
  for (double& s : out) s /= p;
  return AudioBuffer(std::move(out));
}

enum class FitMode { Loop, Pad };

inline constexpr double kLoopCrossfadeSeconds = 0.05;

/// Returns exactly `target_len` samples. Pad truncates or appends silence;
/// Loop repeats the clip with equal-power crossfades at the seams.
inline AudioBuffer fit_length(const AudioBuffer& audio, std::size_t target_len, FitMode mode) {
  if (audio.empty()) throw EmptyAudio();
  if (target_len == 0) throw PreconditionError("target length must be > 0");
  if (audio.size() == target_len) return audio;

  const auto src = audio.samples();
  std::vector<double> out(src.begin(), src.end());
  if (mode == FitMode::Loop && out.size() < target_len) {
    const std::size_t xf = std::min(samples_for(kLoopCrossfadeSeconds), src.size() / 2);
    while (out.size() < target_len) {
      const std::size_t base = out.size() - xf;
      for (std::size_t k = 0; k < xf; ++k) {
        const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(xf);
        const double fade_out = std::cos(t * std::numbers::pi / 2.0);
        const double fade_in = std::sin(t * std::numbers::pi / 2.0);
        out[base + k] = out[base + k] * fade_out + src[k] * fade_in;
      }
      out.insert(out.end(), src.begin() + static_cast<std::ptrdiff_t>(xf), src.end());
    }
  }
  out.resize(target_len, 0.0);
  return AudioBuffer(std::move(out));
}

struct Stem {
  AudioBuffer audio;
  double gain = 1.0;
  FitMode fit = FitMode::Pad;
};

/// Weighted sum of length-fitted stems. When the summed peak exceeds full
/// scale the whole mix is rescaled so its peak equals `headroom`; otherwise
/// the samples are exactly the weighted sum.
inline AudioBuffer mix(std::span<const Stem> stems, std::size_t target_len, double headroom) {
  if (stems.empty()) throw PreconditionError("mix needs at least one stem");
  if (target_len == 0) throw PreconditionError("target length must be > 0");
  std::vector<double> acc(target_len, 0.0);
  for (const Stem& stem : stems) {
    const AudioBuffer fitted = fit_length(stem.audio, target_len, stem.fit);
    const auto s = fitted.samples();
    for (std::size_t i = 0; i < target_len; ++i) acc[i] += stem.gain * s[i];
  }
  double peak = 0.0;
  for (double v : acc) peak = std::max(peak, std::abs(v));
  if (peak > 1.0) {
    const double scale = headroom / peak;
    for (double& v : acc) v *= scale;
  }
  return AudioBuffer(std::move(acc));
}

/// Joins clips in order with `gap_seconds` of silence between neighbours.
inline AudioBuffer concat(std::span<const AudioBuffer> clips, double gap_seconds) {
  if (clips.empty()) throw PreconditionError("concat needs at least one clip");
  if (!(gap_seconds >= 0.0)) throw PreconditionError("gap must be >= 0");
  const std::size_t gap = samples_for(gap_seconds);
  std::vector<double> out;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (i > 0) out.insert(out.end(), gap, 0.0);
    out.insert(out.end(), clips[i].samples().begin(), clips[i].samples().end());
  }
  return AudioBuffer(std::move(out));
}

/// Sample-wise scaling.
inline AudioBuffer scale(const AudioBuffer& audio, double gain) {
  std::vector<double> out(audio.samples().begin(), audio.samples().end());
  for (double& s : out) s *= gain;
  return AudioBuffer(std::move(out));
}

}  // namespace s2a::dsp
