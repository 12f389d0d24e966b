#pragma once

// Measurement machinery: label agreement, multi-run consistency, intent
// similarity and latency statistics.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "s2a/backends.hpp"

namespace s2a::eval {

struct LabelPair {
  EventType predicted;
  EventType truth;
};

inline double accuracy(std::span<const LabelPair> pairs) {
  if (pairs.empty()) throw EmptyInput("accuracy needs at least one label pair");
  const auto hits = std::count_if(pairs.begin(), pairs.end(),
                                  [](const LabelPair& p) { return p.predicted == p.truth; });
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

/// Cohen's kappa over the two event types: (p_o - p_e) / (1 - p_e), with p_e
/// from the marginal label frequencies of each rater.
inline double cohen_kappa(std::span<const LabelPair> pairs) {
  if (pairs.empty()) throw EmptyInput("kappa needs at least one label pair");
  const double n = static_cast<double>(pairs.size());
  double agree = 0, pred_d = 0, truth_d = 0;
  for (const auto& p : pairs) {
    agree += p.predicted == p.truth;
    pred_d += p.predicted == EventType::Discrete;
    truth_d += p.truth == EventType::Discrete;
  }
  const double p_o = agree / n;
  const double p_e = (pred_d / n) * (truth_d / n) + ((n - pred_d) / n) * ((n - truth_d) / n);
  if (p_e == 1.0) {
    if (p_o == 1.0) return 1.0;
    throw DegenerateMarginals();
  }
  return (p_o - p_e) / (1.0 - p_e);
}

struct RunObject {
  std::string phrase;
  EventType event_type;
};

using Run = std::vector<RunObject>;

/// Repeated analyses of one image.
struct ImageRuns {
  std::string image;
  std::vector<Run> runs;
};

using RunSet = std::vector<ImageRuns>;

/// Mean and sample standard deviation over images, with per-image values.
struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> per_image;
};

inline double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline Summary summarize(std::vector<double> per_image) {
  Summary s;
  s.mean = std::accumulate(per_image.begin(), per_image.end(), 0.0) /
           static_cast<double>(per_image.size());
  s.sd = sample_sd(per_image);
  s.per_image = std::move(per_image);
  return s;
}

namespace detail {

inline void require_runs(const ImageRuns& img) {
  if (img.runs.size() < 2)
    throw EmptyInput("image '" + img.image + "' needs at least two runs");
}

/// Runs sorted by content so greedy matching is independent of run order.
inline std::vector<const Run*> canonical_order(const std::vector<Run>& runs) {
  std::vector<const Run*> order;
  for (const auto& r : runs) order.push_back(&r);
  auto key = [](const Run* r) {
    std::vector<std::tuple<std::string, int>> k;
    for (const auto& o : *r) k.emplace_back(o.phrase, static_cast<int>(o.event_type));
    return k;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](const Run* a, const Run* b) { return key(a) < key(b); });
  return order;
}

}  // namespace detail

inline constexpr double kMatchThreshold = 0.6;

/// Event-type agreement: objects are matched across runs by greedy
/// best-cosine alignment of their phrase embeddings (cosine >= threshold,
/// one object per run per match). Each matched object scores
/// freq(modal label) / run_count; scores are averaged over objects, then
/// over images.
inline Summary event_type_agreement(const RunSet& runs, EmbeddingBackend& embedder,
                                    double threshold = kMatchThreshold) {
  if (runs.empty()) throw EmptyInput("agreement needs at least one image");
  std::vector<double> per_image;
  for (const auto& img : runs) {
    detail::require_runs(img);
    struct Cluster {
      std::vector<double> anchor;
      std::size_t discrete = 0;
      std::size_t continuous = 0;
    };
    std::vector<Cluster> clusters;
    for (const Run* run : detail::canonical_order(img.runs)) {
      std::vector<std::vector<double>> emb;
      for (const auto& o : *run) emb.push_back(embedder.embed(o.phrase));
      std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;  // (-cos, obj, cluster)
      for (std::size_t j = 0; j < emb.size(); ++j)
        for (std::size_t c = 0; c < clusters.size(); ++c) {
          const double cs = cosine(emb[j], clusters[c].anchor);
          if (cs >= threshold) pairs.emplace_back(-cs, j, c);
        }
      std::sort(pairs.begin(), pairs.end());
      std::vector<std::optional<std::size_t>> assigned(emb.size());
      std::vector<bool> taken(clusters.size(), false);
      for (const auto& [neg, j, c] : pairs) {
        if (assigned[j] || taken[c]) continue;
        assigned[j] = c;
        taken[c] = true;
      }
      for (std::size_t j = 0; j < emb.size(); ++j) {
        if (!assigned[j]) {
          clusters.push_back({emb[j], 0, 0});
          assigned[j] = clusters.size() - 1;
        }
        auto& cl = clusters[*assigned[j]];
        ((*run)[j].event_type == EventType::Discrete ? cl.discrete : cl.continuous) += 1;
      }
    }
    if (clusters.empty()) continue;
    double acc = 0.0;
    for (const auto& cl : clusters)
      acc += static_cast<double>(std::max(cl.discrete, cl.continuous)) /
             static_cast<double>(img.runs.size());
    per_image.push_back(acc / static_cast<double>(clusters.size()));
  }
  if (per_image.empty()) throw EmptyInput("no objects in any run");
  return summarize(std::move(per_image));
}

/// Phrase consistency: for every phrase of every run, the best cosine
/// (floored at 0) against the phrases of all other runs; averaged over all
/// (phrase, run) of an image, then over images.
inline Summary phrase_consistency(const RunSet& runs, EmbeddingBackend& embedder) {
  if (runs.empty()) throw EmptyInput("phrase consistency needs at least one image");
  std::vector<double> per_image;
  for (const auto& img : runs) {
    detail::require_runs(img);
    std::vector<std::vector<std::vector<double>>> emb(img.runs.size());
    for (std::size_t r = 0; r < img.runs.size(); ++r)
      for (const auto& o : img.runs[r]) emb[r].push_back(embedder.embed(o.phrase));
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < emb.size(); ++r) {
      for (const auto& e : emb[r]) {
        double best = 0.0;
        for (std::size_t other = 0; other < emb.size(); ++other) {
          if (other == r) continue;
          for (const auto& f : emb[other]) best = std::max(best, std::clamp(cosine(e, f), 0.0, 1.0));
        }
        acc += best;
        ++count;
      }
    }
    if (count > 0) per_image.push_back(acc / static_cast<double>(count));
  }
  if (per_image.empty()) throw EmptyInput("no phrases in any run");
  return summarize(std::move(per_image));
}

/// 1 + 6 * clamp(cosine, 0, 1): a comprehension score on the 1..7 scale.
inline double intent_similarity(std::string_view user_text, std::string_view reference_text,
                                EmbeddingBackend& embedder) {
  if (kv::trim(user_text).empty() || kv::trim(reference_text).empty())
    throw EmptyInput("intent similarity needs two non-empty texts");
  const auto a = embedder.embed(user_text);
  const auto b = embedder.embed(reference_text);
  return 1.0 + 6.0 * std::clamp(cosine(a, b), 0.0, 1.0);
}

struct LatencyStats {
  double mean_ms = 0.0;
  double sd_ms = 0.0;  // sample (n - 1); 0 when n == 1
  double min_ms = 0.0;
  double max_ms = 0.0;
  std::size_t n = 0;
};

inline LatencyStats latency_stats(std::span<const double> durations_ms) {
  if (durations_ms.empty()) throw EmptyInput("latency stats need at least one duration");
  LatencyStats s;
  s.n = durations_ms.size();
  s.mean_ms = std::accumulate(durations_ms.begin(), durations_ms.end(), 0.0) / static_cast<double>(s.n);
  s.sd_ms = sample_sd(durations_ms);
  const auto [lo, hi] = std::minmax_element(durations_ms.begin(), durations_ms.end());
  s.min_ms = *lo;
  s.max_ms = *hi;
  return s;
}

struct BenchmarkResult {
  LatencyStats stats;
  std::vector<double> durations_ms;
};

/// Runs `once` n times strictly sequentially, timing each run with `clock`
/// (milliseconds). The first exception aborts the benchmark.
inline BenchmarkResult latency_benchmark(const std::function<void()>& once, std::size_t n,
                                         const std::function<double()>& clock) {
  if (n < 1) throw PreconditionError("benchmark needs n >= 1");
  BenchmarkResult out;
  for (std::size_t i = 0; i < n; ++i) {
    const double t0 = clock();
    once();
    out.durations_ms.push_back(clock() - t0);
  }
  out.stats = latency_stats(out.durations_ms);
  return out;
}

// User Experience Questionnaire items, low pole first.
inline constexpr std::array<std::string_view, 8> kUeqItems = {
    "obstructive_supportive", "complicated_easy",           "inefficient_efficient",
    "confusing_clear",        "boring_exciting",            "not_interesting_interesting",
    "conventional_inventive", "usual_leading_edge"};

struct UeqItemSummary {
  std::string_view item;
  double mean = 0.0;
  double sd = 0.0;
};

/// Mean and sample SD of each UEQ item across responses.
inline std::array<UeqItemSummary, 8> ueq_summary(std::span<const std::array<int, 8>> responses) {
  if (responses.empty()) throw EmptyInput("no UEQ responses");
  std::array<UeqItemSummary, 8> out;
  for (std::size_t k = 0; k < 8; ++k) {
    std::vector<double> xs;
    for (const auto& r : responses) xs.push_back(r[k]);
    out[k] = {kUeqItems[k], std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size()),
              sample_sd(xs)};
  }
  return out;
}

}  // namespace s2a::eval
