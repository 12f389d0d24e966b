// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Fixture backends only; the CLI binary is exercised as a subprocess.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "s2a/cli/commands.hpp"
#include "s2a/service/server.hpp"

using namespace s2a;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  std::string name;
  std::vector<std::string> failures;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    else if (!ok) failures.back() = "... (more failures)";
  }
};

int g_failed = 0;

template <typename F>
void check(const std::string& name, F&& body) {
  Criterion c{name, {}, {}};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char secs[32];
  std::snprintf(secs, sizeof secs, "%.2fs", s);
  if (c.failures.empty()) {
    std::cout << "PASS " << name << " [" << secs << "]" << (c.detail.empty() ? "" : " " + c.detail) << "\n";
  } else {
    ++g_failed;
    std::cout << "FAIL " << name << " [" << secs << "]\n";
    for (const auto& f : c.failures) std::cout << "    " << f << "\n";
  }
  std::cout.flush();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

int sh(const std::string& cmd) { return std::system(cmd.c_str()); }

AudioBuffer click_train(int k) {
  std::vector<double> s(samples_for(5.0), 0.0);
  for (int i = 0; i < k; ++i) s[samples_for(0.25 + 0.5 * i)] = 1.0;
  return AudioBuffer(std::move(s));
}

// Non-silent test signals of several shapes: click trains, tone bursts,
// noise bursts and decaying strikes at random positions and levels.
AudioBuffer random_buffer(SplitMix& rng) {
  const std::size_t n = samples_for(rng.uniform(1.0, 5.0));
  std::vector<double> s(n, 0.0);
  const int kind = static_cast<int>(rng.next() % 4);
  const int events = 1 + static_cast<int>(rng.next() % 6);
  for (int e = 0; e < events; ++e) {
    const std::size_t at = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n - 1));
    const double amp = rng.uniform(0.05, 0.9);
    const double freq = rng.uniform(150.0, 3000.0);
    const std::size_t len = kind == 0 ? 1 : samples_for(rng.uniform(0.02, 0.3));
    for (std::size_t i = 0; i < len && at + i < n; ++i) {
      const double t = static_cast<double>(i) / kSampleRate;
      double v = 0.0;
      switch (kind) {
        case 0: v = amp; break;
        case 1: v = amp * std::sin(2 * std::numbers::pi * freq * t); break;
        case 2: v = amp * rng.uniform(-1.0, 1.0); break;
        default: v = amp * std::exp(-t * 30.0) * std::sin(2 * std::numbers::pi * freq * t); break;
      }
      s[at + i] = std::clamp(s[at + i] + v, -1.0, 1.0);
    }
  }
  return AudioBuffer(std::move(s));
}

std::string random_prompt(SplitMix& rng) {
  static const std::vector<std::string> nouns = {"dog", "bell", "door", "hammer", "bird", "drum", "car", "gong",
                                                 "cup", "train", "horse", "clock"};
  static const std::vector<std::string> verbs = {"barking", "ringing", "slamming", "knocking", "chirping",
                                                 "beating", "honking", "striking", "clinking", "tolling"};
  return nouns[rng.next() % nouns.size()] + " " + verbs[rng.next() % verbs.size()] + " " +
         std::to_string(rng.next() % 100000);
}

}  // namespace

int main() {
  const std::string cli = S2A_CLI;
  const std::string fixtures = S2A_FIXTURES;
  const fs::path work = fs::temp_directory_path() / ("s2a_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(work);
  fs::create_directories(work);
  const auto started = std::chrono::steady_clock::now();

  check("event-counting", [](Criterion& c) {
    PipelineConfig cfg;
    const auto t0 = std::chrono::steady_clock::now();
    for (int k = 1; k <= 8; ++k) {
      const auto n = dsp::count_events(click_train(k), cfg);
      c.expect(n == static_cast<std::size_t>(k), "k=" + std::to_string(k) + " counted " + std::to_string(n));
    }
    c.expect(dsp::count_events(AudioBuffer::silence(samples_for(5.0)), cfg) == 0, "silence is not 0");
    std::vector<double> tone(samples_for(5.0));
    for (std::size_t i = 0; i < tone.size(); ++i)
      tone[i] = 0.5 * std::sin(2 * std::numbers::pi * 440.0 * static_cast<double>(i) / kSampleRate);
    const auto nt = dsp::count_events(AudioBuffer(tone), cfg);
    c.expect(nt <= 1, "440 Hz tone counted " + std::to_string(nt));
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(s < 5.0, "runtime " + std::to_string(s) + " s >= 5 s");
  });

  check("amplitude-invariance", [](Criterion& c) {
    PipelineConfig cfg;
    SplitMix rng(2024);
    int cases = 0;
    for (int i = 0; i < 100; ++i) {
      const AudioBuffer x = random_buffer(rng);
      const auto base = dsp::count_events(x, cfg);
      for (double g : {0.1, 0.5, 2.0}) {
        const auto n = dsp::count_events(dsp::scale(x, g), cfg);
        c.expect(n == base, "buffer " + std::to_string(i) + " gain " + std::to_string(g) + ": " +
                                std::to_string(n) + " vs " + std::to_string(base));
        ++cases;
      }
    }
    c.detail = std::to_string(cases) + " cases";
  });

  check("candidate-selection", [](Criterion& c) {
    PipelineConfig cfg;
    fixture::FixtureAudio gen;
    SplitMix rng(77);
    for (int trial = 0; trial < 200; ++trial) {
      const std::string prompt = random_prompt(rng);
      gen.register_prompt(prompt, EventType::Discrete);
      PipelineConfig tc = cfg;
      tc.rng_seed = rng.next() % 1000000;
      // Oracle: arg-min over truth counts >= 1, lowest index on ties.
      std::size_t best = 0;
      int best_count = -1;
      for (std::size_t i = 0; i < static_cast<std::size_t>(tc.candidate_count); ++i) {
        const int t = gen.truth_count(prompt, tc.rng_seed + i);
        if (t >= 1 && (best_count < 0 || t < best_count)) best = i, best_count = t;
      }
      const auto set = select_discrete(prompt, tc, gen);
      c.expect(set.selected_index == best && !set.zero_event_fallback,
               "'" + prompt + "' seed " + std::to_string(tc.rng_seed) + ": selected " +
                   std::to_string(set.selected_index) + ", oracle " + std::to_string(best));
    }
    fixture::FixtureAudio beds(fixture::FixtureAudio::Options{true});
    const auto set = select_discrete("church bell ringing", cfg, beds);
    c.expect(set.zero_event_fallback, "all-continuous fixture did not trigger the fallback");
    bool warned = false;
    for (const auto& w : set.warnings) warned |= w.find("ZeroEventFallback") != std::string::npos;
    c.expect(warned, "fallback did not warn");
    c.detail = "200 prompts";
  });

  check("mixing-arithmetic", [](Criterion& c) {
    PipelineConfig cfg;
    SplitMix rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      CompositionPlan plan;
      plan.target_len_samples = 4000;
      const int nf = static_cast<int>(rng.next() % 3), nb = static_cast<int>(rng.next() % 3);
      if (nf + nb == 0) continue;
      std::vector<double> fg(4000, 0.0), bg(4000, 0.0);
      auto stem = [&](std::vector<double>& sum, double scale) {
        std::vector<double> s(4000);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = scale * rng.uniform(-1.0, 1.0);
        for (std::size_t i = 0; i < s.size(); ++i) sum[i] += s[i];
        return AudioBuffer(std::move(s));
      };
      // Small stems: the weighted sum stays within [-1, 1].
      for (int i = 0; i < nf; ++i)
        plan.foreground.push_back({static_cast<std::size_t>(i), {"fg sound", EventType::Discrete, {}}, stem(fg, 0.5)});
      for (int i = 0; i < nb; ++i)
        plan.background.push_back({static_cast<std::size_t>(i), {"bg sound", EventType::Continuous, {}}, stem(bg, 0.5)});
      const auto out = compose(plan, cfg);
      for (std::size_t i = 0; i < 4000; ++i)
        if (out[i] != 0.8 * fg[i] + 0.2 * bg[i]) {
          c.expect(false, "trial " + std::to_string(trial) + " sample " + std::to_string(i) + " differs");
          break;
        }
    }
    // Headroom: engages only above 1.
    for (double level : {0.9, 1.0, 1.3, 2.0, 5.0}) {
      CompositionPlan plan;
      plan.target_len_samples = 100;
      std::vector<double> s(100, 0.0);
      s[10] = level / 0.8;
      plan.foreground.push_back({0, {"fg sound", EventType::Discrete, {}}, AudioBuffer(std::vector<double>(100, 0.0))});
      plan.foreground[0].stem = AudioBuffer(std::vector<double>(s.begin(), s.end()));
      const double pre = 0.8 * s[10];
      const auto out = compose(plan, cfg);
      if (pre > 1.0)
        c.expect(std::abs(out.peak() - 0.95) <= 1e-6, "level " + std::to_string(level) + " peak " + std::to_string(out.peak()));
      else
        c.expect(out[10] == pre, "level " + std::to_string(level) + " was rescaled");
    }
  });

  check("metric-oracles", [](Criterion& c) {
    std::vector<eval::LabelPair> table;
    auto add = [&](int n, EventType p, EventType t) { table.insert(table.end(), n, {p, t}); };
    const auto D = EventType::Discrete, C = EventType::Continuous;
    add(45, D, D), add(5, D, C), add(5, C, D), add(45, C, C);
    c.expect(std::abs(eval::cohen_kappa(table) - 0.8) <= 1e-9, "kappa " + std::to_string(eval::cohen_kappa(table)));
    std::vector<eval::LabelPair> acc;
    for (int i = 0; i < 100; ++i) acc.push_back({i < 96 ? D : C, D});
    c.expect(eval::accuracy(acc) == 0.96, "accuracy");

    // Crafted 5-run corpus on a fixed embedding table.
    class Table : public EmbeddingBackend {
     public:
      std::vector<double> embed(std::string_view t) override {
        if (t == "cows mooing") return {1, 0, 0};
        if (t == "cattle mooing") return {0.8, 0.6, 0};
        if (t == "wind blowing") return {0, 0, 1};
        return {0, 1, 0};
      }
    } emb;
    auto run = [](std::vector<eval::RunObject> objs) { return objs; };
    eval::RunSet corpus = {{"img",
                            {run({{"cows mooing", D}, {"wind blowing", C}}),
                             run({{"cattle mooing", D}, {"wind blowing", C}}),
                             run({{"cows mooing", C}, {"wind blowing", C}}),
                             run({{"cows mooing", D}, {"wind blowing", D}}),
                             run({{"cows mooing", D}})}}};
    // By hand: the cow cluster is D,D,C,D,D -> 4/5; the wind cluster is
    // C,C,C,D over 5 runs -> 3/5; mean 0.7.
    const double agr = eval::event_type_agreement(corpus, emb).mean;
    c.expect(std::abs(agr - 0.7) <= 1e-9, "agreement " + std::to_string(agr));

    // Two runs; brute-force max cosine enumeration.
    eval::RunSet two = {{"img", {run({{"cows mooing", D}, {"wind blowing", C}}), run({{"cattle mooing", D}})}}};
    std::vector<std::pair<int, std::string>> flat = {{0, "cows mooing"}, {0, "wind blowing"}, {1, "cattle mooing"}};
    double sum = 0;
    for (const auto& [r, p] : flat) {
      double best = 0;
      for (const auto& [r2, p2] : flat)
        if (r2 != r) best = std::max(best, std::clamp(cosine(emb.embed(p), emb.embed(p2)), 0.0, 1.0));
      sum += best;
    }
    const double pc = eval::phrase_consistency(two, emb).mean;
    c.expect(std::abs(pc - sum / 3) <= 1e-9, "phrase consistency " + std::to_string(pc));
  });

  check("end-to-end-determinism", [&](Criterion& c) {
    const std::vector<std::string> scenes = {"countryside", "seabeach", "foodcourt", "silent-night-sky"};
    for (const auto& s : scenes) {
      for (const char* pass : {"a", "b"}) {
        const auto out = work / ("run_" + s + "_" + pass);
        const int rc = sh(cli + " run " + fixtures + "/" + s + ".png --seed 42 --out " + out.string() + " > " +
                          (out.string() + ".stdout") + " 2> " + (out.string() + ".stderr"));
        c.expect(rc == 0, s + " run exited " + std::to_string(rc));
      }
      const auto a = work / ("run_" + s + "_a"), b = work / ("run_" + s + "_b");
      for (const char* f : {"brief.wav", "detail.wav", "speech.wav", "audio.wav", "analysis.json"}) {
        const bool ea = fs::exists(a / f), eb = fs::exists(b / f);
        c.expect(ea == eb, s + "/" + f + " present in one run only");
        if (ea && eb) c.expect(slurp(a / f) == slurp(b / f), s + "/" + f + " differs between runs");
      }
    }
    const auto summary = json::parse(slurp(work / "run_countryside_a" / "analysis.json"));
    std::multiset<std::string> fg, bg;
    for (const auto& p : summary["plan"]["foreground"]) fg.insert(p.get<std::string>());
    for (const auto& p : summary["plan"]["background"]) bg.insert(p.get<std::string>());
    c.expect(fg == std::multiset<std::string>{"cows mooing", "church bell ringing", "birds chirping"},
             "countryside foreground roster");
    c.expect(bg == std::multiset<std::string>{"leaves rustling"}, "countryside background roster");
    const auto night = work / "run_silent-night-sky_a";
    c.expect(!fs::exists(night / "audio.wav"), "silent scene wrote audio.wav");
    c.expect(fs::exists(night / "brief.wav") && fs::exists(night / "speech.wav"), "silent scene missing speech modes");
    c.expect(slurp(night.string() + ".stderr").find(cli::kSilentSceneNotice) != std::string::npos,
             "silent scene notice not printed");
  });

  check("latency-protocol", [&](Criterion& c) {
    const auto timings = work / "bench.json";
    const int rc = sh(cli + " bench --n 50 " + fixtures + "/countryside.png --timings " + timings.string() +
                      " > " + (work / "bench.stdout").string());
    c.expect(rc == 0, "bench exited " + std::to_string(rc));
    const auto j = json::parse(slurp(timings));
    const auto d = j["durations_ms"].get<std::vector<double>>();
    c.expect(d.size() == 50 && j["stats"]["n"] == 50, "n != 50");
    long double mean = 0;
    for (double x : d) mean += x;
    mean /= d.size();
    long double ss = 0;
    for (double x : d) ss += (x - mean) * (x - mean);
    const double sd = static_cast<double>(std::sqrt(ss / (d.size() - 1)));
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
    const double rm = j["stats"]["mean_ms"].get<double>(), rs = j["stats"]["sd_ms"].get<double>();
    c.expect(rel(rm, static_cast<double>(mean)) <= 1e-9, "mean mismatch");
    c.expect(rel(rs, sd) <= 1e-9, "sd mismatch");
    char buf[96];
    std::snprintf(buf, sizeof buf, "mean %.1f ms sd %.1f ms", rm, rs);
    c.detail = buf;
  });

  check("service-contract", [&](Criterion& c) {
    service::ServiceConfig cfg;
    cfg.storage_root = work / "service";
    cfg.host = "127.0.0.1";
    cfg.port = 0;
    std::ostringstream log;
    service::Service svc(cfg, make_fixture_backends(cfg.pipeline.rng_seed), steady_clock_ms(), &log);
    httplib::Client http("127.0.0.1", svc.start());
    http.set_read_timeout(60, 0);
    auto upload = [&](const std::string& name) {
      httplib::MultipartFormDataItems items = {{"image", slurp(fixtures + "/" + name), name, "image/png"}};
      return http.Post("/scenes", items);
    };
    auto status = [&](const std::string& path) {
      auto r = http.Get(path);
      return r ? r->status : -1;
    };

    svc.set_paused(true);
    auto r = upload("countryside.png");
    c.expect(r && r->status == 202, "POST /scenes did not return 202");
    const std::string id = json::parse(r->body)["scene_id"];
    c.expect(status("/scenes/" + id + "/audio/brief") == 409, "not-ready audio is not 409");
    svc.set_paused(false);
    svc.wait_idle();
    const auto scene = json::parse(http.Get("/scenes/" + id)->body);
    c.expect(scene["status"] == "ready", "scene not ready");
    for (const char* mode : {"brief", "detail", "speech", "audio"}) {
      auto w = http.Get("/scenes/" + id + "/audio/" + mode);
      c.expect(w && w->status == 200, std::string(mode) + " download failed");
      if (!w) continue;
      const std::vector<std::uint8_t> bytes(w->body.begin(), w->body.end());
      const auto raw = wav::decode_raw(bytes);
      c.expect(raw.sample_rate_hz == 16000 && raw.channels == 1 && raw.bits_per_sample == 16 && !raw.is_float,
               std::string(mode) + " is not PCM16/16 kHz/mono");
    }
    c.expect(status("/scenes/does-not-exist") == 404, "unknown scene is not 404");
    c.expect(status("/scenes/" + id + "/audio/loud") == 404, "unknown mode is not 404");
    auto night = upload("silent-night-sky.png");
    svc.wait_idle();
    c.expect(status("/scenes/" + json::parse(night->body)["scene_id"].get<std::string>() + "/audio/audio") == 410,
             "absent audio mode is not 410");

    json fb = {{"clearest_mode", "brief"},      {"least_clear_mode", "audio"}, {"most_enjoyable_mode", "detail"},
               {"least_enjoyable_mode", "speech"}, {"preferred_mode", "brief"},  {"why", "clear"},
               {"wanted_info", "distance"},      {"got_info", true},            {"satisfaction", 5}};
    auto post = [&](const std::string& kind, const json& body) {
      auto p = http.Post("/scenes/" + id + "/" + kind, body.dump(), "application/json");
      return p ? p->status : -1;
    };
    c.expect(post("feedback", fb) == 201, "valid feedback rejected");
    for (int bad : {0, 8}) {
      json b = fb;
      b["satisfaction"] = bad;
      c.expect(post("feedback", b) == 400, "satisfaction " + std::to_string(bad) + " accepted");
    }
    json ueq;
    for (auto item : eval::kUeqItems) ueq[std::string(item)] = 4;
    c.expect(post("ueq", ueq) == 201, "valid UEQ rejected");
    for (int bad : {0, 8}) {
      json b = ueq;
      b["confusing_clear"] = bad;
      c.expect(post("ueq", b) == 400, "UEQ item " + std::to_string(bad) + " accepted");
    }
    c.expect(svc.replay_audit(id), "replay audit bytes differ");
    svc.stop();
  });

  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  check("suite-under-3-minutes", [&](Criterion& c) {
    c.expect(total < 180.0, "suite took " + std::to_string(total) + " s");
    c.detail = std::to_string(static_cast<int>(total)) + " s";
  });

  fs::remove_all(work);
  std::cout << (g_failed ? "acceptance: FAILED " + std::to_string(g_failed) : std::string("acceptance: all passed"))
            << "\n";
  return g_failed ? 1 : 0;
}
