#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "s2a/backend_set.hpp"
#include "s2a/cli/commands.hpp"
#include "s2a/json_io.hpp"

using namespace s2a;
namespace fs = std::filesystem;

namespace {

ImageRef fixture_image(const std::string& name) {
  return cli::load_image(std::string(S2A_FIXTURES) + "/" + name + ".png");
}

AudioBuffer clicks(int k, double seconds = 5.0) {
  std::vector<double> s(samples_for(seconds), 0.0);
  for (int i = 1; i <= k; ++i) s[samples_for(0.5 * i)] = 1.0;
  return AudioBuffer(std::move(s));
}

// Returns a k-click train for seed offsets following a fixed script.
class ScriptedAudio : public AudioGenBackend {
 public:
  ScriptedAudio(std::vector<int> counts, std::uint64_t base) : counts_(std::move(counts)), base_(base) {}
  AudioBuffer generate(std::string_view, double seconds, std::uint64_t seed) override {
    ++calls;
    const int k = counts_.at(seed - base_);
    return k == 0 ? AudioBuffer::silence(samples_for(seconds)) : clicks(k, seconds);
  }
  int calls = 0;

 private:
  std::vector<int> counts_;
  std::uint64_t base_;
};

// Always returns the same buffer, scaled per object phrase.
class ConstantAudio : public AudioGenBackend {
 public:
  explicit ConstantAudio(AudioBuffer a) : a_(std::move(a)) {}
  AudioBuffer generate(std::string_view, double, std::uint64_t) override { return a_; }

 private:
  AudioBuffer a_;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("s2a_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Fixture backends

TEST(FixtureVision, CountrysideLabelsAndDeterminism) {
  fixture::FixtureVision v(42);
  PromptSet p;
  const auto img = fixture_image("countryside");
  const std::string labelled = v.query(img, p.event_label + "\n\nPhrases:\nx");
  for (const char* s : {"Cows mooing\", discrete", "Leaves rustling\", continuous",
                        "Church bell ringing\", discrete", "Birds chirping\", discrete"})
    EXPECT_NE(labelled.find(s), std::string::npos) << s;
  EXPECT_EQ(labelled, v.query(img, p.event_label + "\n\nPhrases:\nx"));
  EXPECT_THROW(v.query(img, "something else entirely"), BackendError);
  EXPECT_THROW(v.query(img, ""), PreconditionError);
}

TEST(FixtureVision, UntaggedImagesMapToAudibleScenes) {
  const auto img = cli::load_image(std::string(S2A_FIXTURES) + "/untagged.jpg");
  const auto& a = fixture::scene_for(img, 42);
  EXPECT_FALSE(a.objects.empty());
  EXPECT_EQ(&a, &fixture::scene_for(img, 42));
}

TEST(FixtureAudio, DiscreteTruthCountsAreDetected) {
  fixture::FixtureAudio gen;
  PipelineConfig cfg;
  for (const char* prompt : {"church bell ringing", "cows mooing", "birds chirping", "cutlery clinking"}) {
    for (std::uint64_t seed = 40; seed < 50; ++seed) {
      const auto a = gen.generate(prompt, 5.0, seed);
      ASSERT_EQ(a.size(), 80000u);
      ASSERT_TRUE(satisfies_invariants(a));
      const int truth = gen.truth_count(prompt, seed);
      ASSERT_GE(truth, 1);
      ASSERT_LE(truth, 8);
      EXPECT_EQ(dsp::count_events(a, cfg), static_cast<std::size_t>(truth)) << prompt << " " << seed;
      EXPECT_EQ(a, gen.generate(prompt, 5.0, seed));
    }
  }
}

TEST(FixtureAudio, ContinuousBedsHaveAtMostOneEvent) {
  fixture::FixtureAudio gen;
  PipelineConfig cfg;
  for (const char* prompt : {"wind blowing", "waves crashing", "leaves rustling"})
    for (std::uint64_t seed = 0; seed < 5; ++seed)
      EXPECT_LE(dsp::count_events(gen.generate(prompt, 5.0, seed), cfg), 1u) << prompt;
  EXPECT_EQ(gen.truth_count("wind blowing", 1), 0);
  EXPECT_EQ(gen.truth_count("an unknown prompt", 1), 0);
  EXPECT_EQ(gen.generate("an unknown prompt", 5.0, 1), gen.generate("an unknown prompt", 5.0, 1));
  EXPECT_THROW(gen.generate("", 5.0, 1), PreconditionError);
  EXPECT_THROW(gen.generate("x y", 0.0, 1), PreconditionError);
}

TEST(FixtureSpeech, DurationFollowsWordRule) {
  fixture::FixtureSpeech tts;
  const auto a = tts.synthesize("one two three four five six seven eight nine ten");
  EXPECT_EQ(a.size(), 10 * samples_for(0.080) + 9 * samples_for(0.020));
  EXPECT_EQ(a, tts.synthesize("one two three four five six seven eight nine ten"));
  EXPECT_THROW(tts.synthesize(""), PreconditionError);
  EXPECT_THROW(tts.synthesize("   "), PreconditionError);
}

TEST(FixtureEmbedder, IdentityDisjointAndNorm) {
  fixture::FixtureEmbedder e;
  const auto a = e.embed("waves crashing on the shore");
  EXPECT_NEAR(cosine(a, a), 1.0, 1e-12);
  double norm = 0;
  for (double x : a) norm += x * x;
  EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-9);

  // Build two token sets whose buckets do not collide.
  std::set<std::size_t> used;
  std::vector<std::string> left, right;
  for (int i = 0; left.size() < 3 || right.size() < 3; ++i) {
    const std::string tok = "tok" + std::to_string(i);
    if (!used.insert(fixture::FixtureEmbedder::bucket(tok)).second) continue;
    (left.size() < 3 ? left : right).push_back(tok);
  }
  EXPECT_DOUBLE_EQ(cosine(e.embed(left[0] + " " + left[1] + " " + left[2]),
                          e.embed(right[0] + " " + right[1] + " " + right[2])),
                   0.0);
}

// ---------------------------------------------------------------------------
// Remote adapters against an in-process fake model server

class RemoteAdapters : public ::testing::Test {
 protected:
  void SetUp() override {
    server.Post("/vision", [this](const httplib::Request& req, httplib::Response& res) {
      last_vision = nlohmann::json::parse(req.body);
      res.set_content(R"({"text": "Cows mooing, discrete"})", "application/json");
    });
    server.Post("/audio", [this](const httplib::Request& req, httplib::Response& res) {
      last_audio = nlohmann::json::parse(req.body);
      // 8 kHz stereo reply: the adapter must convert it.
      std::vector<std::uint8_t> wav;
      auto put = [&](std::uint32_t v, int n) {
        for (int i = 0; i < n; ++i) wav.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
      };
      const std::uint32_t frames = 8000;
      wav.insert(wav.end(), {'R', 'I', 'F', 'F'});
      put(36 + frames * 4, 4);
      wav.insert(wav.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
      put(16, 4), put(1, 2), put(2, 2), put(8000, 4), put(32000, 4), put(4, 2), put(16, 2);
      wav.insert(wav.end(), {'d', 'a', 't', 'a'});
      put(frames * 4, 4);
      for (std::uint32_t i = 0; i < frames; ++i) put(8192, 2), put(8192, 2);
      res.set_content(std::string(wav.begin(), wav.end()), "audio/wav");
    });
    server.Post("/speech", [](const httplib::Request&, httplib::Response& res) {
      const auto bytes = wav::encode(AudioBuffer({0.5, 0.5, 0.5}));
      res.set_content(std::string(bytes.begin(), bytes.end()), "audio/wav");
    });
    server.Post("/embed", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"embedding": [0.6, 0.8]})", "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("not json", "application/json");
    });
    server.Post("/down", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    server.Post("/reject", [](const httplib::Request&, httplib::Response& res) { res.status = 422; });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  void TearDown() override {
    server.stop();
    thread.join();
  }
  remote::Endpoint ep(const std::string& path) {
    return remote::Endpoint::parse("http://127.0.0.1:" + std::to_string(port) + path);
  }

  httplib::Server server;
  std::thread thread;
  int port = 0;
  nlohmann::json last_vision, last_audio;
};

TEST_F(RemoteAdapters, WireFormat) {
  remote::RemoteVision vision(ep("/vision"));
  const auto img = fixture_image("countryside");
  EXPECT_EQ(vision.query(img, "hello"), "Cows mooing, discrete");
  EXPECT_EQ(last_vision["prompt"], "hello");
  EXPECT_EQ(last_vision["media_type"], "image/png");
  const std::string raw(reinterpret_cast<const char*>(img.bytes().data()), img.bytes().size());
  EXPECT_EQ(last_vision["image"], httplib::detail::base64_encode(raw));

  remote::RemoteAudio audio(ep("/audio"));
  const auto a = audio.generate("wind blowing", 2.0, 7);
  EXPECT_EQ(last_audio["prompt"], "wind blowing");
  EXPECT_EQ(last_audio["seconds"], 2.0);
  EXPECT_EQ(last_audio["seed"], 7);
  ASSERT_EQ(a.size(), 32000u);  // 1 s at 8 kHz resampled, padded to 2 s
  EXPECT_NEAR(a[100], 8192.0 / 32767, 1e-9);
  EXPECT_EQ(a[20000], 0.0);

  remote::RemoteSpeech speech(ep("/speech"));
  EXPECT_EQ(speech.synthesize("hi").size(), 3u);
  remote::RemoteEmbedder embed(ep("/embed"));
  EXPECT_EQ(embed.embed("x"), (std::vector<double>{0.6, 0.8}));
}

TEST_F(RemoteAdapters, ErrorKinds) {
  auto kind_of = [](auto&& fn) {
    try {
      fn();
    } catch (const BackendError& e) {
      return e.kind();
    }
    return BackendError::Kind::Rejected;  // unreachable in these cases
  };
  const auto img = fixture_image("countryside");
  EXPECT_EQ(kind_of([&] { remote::RemoteVision(ep("/broken")).query(img, "p"); }),
            BackendError::Kind::MalformedResponse);
  EXPECT_EQ(kind_of([&] { remote::RemoteVision(ep("/down")).query(img, "p"); }), BackendError::Kind::Unavailable);
  EXPECT_EQ(kind_of([&] { remote::RemoteVision(ep("/reject")).query(img, "p"); }), BackendError::Kind::Rejected);
  EXPECT_EQ(kind_of([&] { remote::RemoteEmbedder(ep("/vision")).embed("p"); }),
            BackendError::Kind::MalformedResponse);
}

TEST(RemoteAdapter, UnreachableIsUnavailable) {
  // Nothing listens on port 1, so the connection is refused.
  const int port = 1;
  remote::HttpOptions opts{std::chrono::seconds(2), 0};
  remote::RemoteVision v(remote::Endpoint::parse("http://127.0.0.1:" + std::to_string(port) + "/v"), opts);
  try {
    v.query(fixture_image("countryside"), "p");
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::Unavailable);
  }
}

TEST(RemoteAdapter, EndpointParsing) {
  const auto e = remote::Endpoint::parse("http://host:9000/v1/gen");
  EXPECT_EQ(e.base, "http://host:9000");
  EXPECT_EQ(e.path, "/v1/gen");
  EXPECT_EQ(remote::Endpoint::parse("http://host").path, "/");
  EXPECT_THROW(remote::Endpoint::parse("host:9000"), ConfigError);
}

// ---------------------------------------------------------------------------
// Scene analysis

TEST(ParseObjectList, ToleratedFormats) {
  auto one = [](const std::string& raw) {
    const auto r = parse_object_list(raw);
    EXPECT_EQ(r.objects.size(), 1u) << raw;
    return r.objects.empty() ? SonicObject{} : r.objects[0];
  };
  EXPECT_EQ(one("[\"Cows mooing\", discrete]"), (SonicObject{"cows mooing", EventType::Discrete, {}}));
  EXPECT_EQ(one("- wind blowing (continuous)"), (SonicObject{"wind blowing", EventType::Continuous, {}}));
  EXPECT_EQ(one("1. Church bell ringing - Discrete"), (SonicObject{"church bell ringing", EventType::Discrete, {}}));
  EXPECT_EQ(one("* Birds   chirping: DISCRETE."), (SonicObject{"birds chirping", EventType::Discrete, {}}));
}

TEST(ParseObjectList, SkipsUnparseableItemsWithWarnings) {
  const auto r = parse_object_list("mountains\nwaves crashing, continuous");
  ASSERT_EQ(r.objects.size(), 1u);
  EXPECT_EQ(r.objects[0].phrase, "waves crashing");
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("mountains"), std::string::npos);

  const auto single = parse_object_list("mountains");
  EXPECT_TRUE(single.objects.empty());
  EXPECT_EQ(single.warnings.size(), 1u);

  const auto dup = parse_object_list("cows mooing, discrete\nCows mooing, discrete");
  EXPECT_EQ(dup.objects.size(), 1u);
  const auto one_word = parse_object_list("cows, discrete\nbell ringing, discrete");
  EXPECT_EQ(one_word.objects.size(), 1u);
}

TEST(ParseObjectList, NoneAndFailures) {
  EXPECT_TRUE(parse_object_list("None.").objects.empty());
  EXPECT_TRUE(parse_object_list("None.").warnings.empty());
  EXPECT_THROW(parse_object_list("- rocks\n- sky"), ParseError);
  EXPECT_THROW(parse_object_list("  "), PreconditionError);
  // Several bracketed items on a single line.
  const auto r = parse_object_list("[\"Cows mooing\", discrete], [\"Wind blowing\", continuous]");
  EXPECT_EQ(r.objects.size(), 2u);
}

TEST(ParseObjectList, NeverInventsLabels) {
  SplitMix rng(5);
  const std::vector<std::string> parts = {"cows", "mooing", "discrete", "continuous", "-", "[", "]",
                                          ",", "bell", "ringing", "\n", "(", ")", "1.", "wind"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string raw;
    for (int i = 0; i < 12; ++i) raw += parts[rng.next() % parts.size()] + " ";
    try {
      const auto r = parse_object_list(raw);
      std::string lower = raw;
      for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      for (const auto& o : r.objects)
        EXPECT_NE(lower.find(std::string(to_string(o.event_type))), std::string::npos) << raw;
    } catch (const ParseError&) {
    }
  }
}

TEST(AnalyzeScene, FixtureScenes) {
  fixture::FixtureVision v(42);
  const auto a = analyze_scene(fixture_image("countryside"), {}, v);
  ASSERT_EQ(a.objects.size(), 4u);
  EXPECT_EQ(a.objects[0], (SonicObject{"cows mooing", EventType::Discrete,
                                       "A group of cows is directly ahead in a lush, green meadow."}));
  EXPECT_EQ(a.objects[1].phrase, "leaves rustling");
  EXPECT_EQ(a.objects[1].event_type, EventType::Continuous);
  EXPECT_FALSE(a.brief_description.empty());
  EXPECT_EQ(a, analyze_scene(fixture_image("countryside"), {}, v));

  const auto sea = analyze_scene(fixture_image("seabeach"), {}, v);
  ASSERT_EQ(sea.objects.size(), 2u);
  for (const auto& o : sea.objects) EXPECT_TRUE(o.phrase == "waves crashing" || o.phrase == "wind blowing");

  const auto night = analyze_scene(fixture_image("silent-night-sky"), {}, v);
  EXPECT_TRUE(night.objects.empty());
  EXPECT_FALSE(night.brief_description.empty());
}

TEST(AnalyzeScene, ChainOrderIsRecorded) {
  fixture::FixtureVision v(42);
  PromptSet p;
  const auto a = analyze_scene(fixture_image("countryside"), p, v);
  ASSERT_GE(a.transcript.size(), 3u);
  EXPECT_EQ(a.transcript[0].stage, "sonic_objects");
  EXPECT_EQ(a.transcript[1].stage, "action_phrase");
  EXPECT_EQ(a.transcript[2].stage, "event_label");
  // Each answer feeds the next prompt.
  EXPECT_NE(a.transcript[1].prompt.find(a.transcript[0].response), std::string::npos);
  EXPECT_NE(a.transcript[2].prompt.find(a.transcript[1].response), std::string::npos);
  const auto& calls = v.log().entries();
  ASSERT_GE(calls.size(), 3u);
  EXPECT_EQ(calls[0].rfind(p.sonic_objects, 0), 0u);
  EXPECT_EQ(calls[1].rfind(p.action_phrase, 0), 0u);
  EXPECT_EQ(calls[2].rfind(p.event_label, 0), 0u);
}

// ---------------------------------------------------------------------------
// Candidate selection

TEST(SelectDiscrete, ScriptedCounts) {
  PipelineConfig cfg;
  {
    ScriptedAudio gen({3, 1, 5, 2, 4, 1, 6, 2, 3, 7}, cfg.rng_seed);
    const auto set = select_discrete("bell ringing", cfg, gen);
    EXPECT_EQ(set.selected_index, 1u);
    EXPECT_EQ(gen.calls, 10);
    EXPECT_FALSE(set.zero_event_fallback);
    std::vector<std::size_t> counts;
    for (const auto& c : set.candidates) counts.push_back(c.event_count);
    EXPECT_EQ(counts, (std::vector<std::size_t>{3, 1, 5, 2, 4, 1, 6, 2, 3, 7}));
  }
  {
    ScriptedAudio gen({1, 1, 1, 1, 1, 1, 1, 1, 1, 1}, cfg.rng_seed);
    EXPECT_EQ(select_discrete("bell ringing", cfg, gen).selected_index, 0u);
  }
  {
    ScriptedAudio gen({0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, cfg.rng_seed);
    const auto set = select_discrete("bell ringing", cfg, gen);
    EXPECT_TRUE(set.zero_event_fallback);
    ASSERT_EQ(set.warnings.size(), 1u);
    EXPECT_EQ(set.warnings[0].rfind("ZeroEventFallback", 0), 0u);
  }
}

TEST(SelectDiscrete, ZeroFallbackPicksLargestEnvelopePeak) {
  std::vector<Candidate> c(3);
  c[0].envelope_peak = 0.2;
  c[1].envelope_peak = 0.9;
  c[2].envelope_peak = 0.9;
  bool fallback = false;
  EXPECT_EQ(select_min_events(c, fallback), 1u);
  EXPECT_TRUE(fallback);
}

TEST(SelectDiscrete, ParallelMatchesSequential) {
  PipelineConfig cfg;
  fixture::FixtureAudio gen;
  const auto seq = select_discrete("church bell ringing", cfg, gen, false);
  const auto par = select_discrete("church bell ringing", cfg, gen, true);
  EXPECT_EQ(seq.selected_index, par.selected_index);
  EXPECT_EQ(seq.selected(), par.selected());
}

TEST(SelectDiscrete, DumpWritesSidecar) {
  PipelineConfig cfg;
  cfg.candidate_count = 3;
  fixture::FixtureAudio gen;
  const auto set = select_discrete("church bell ringing", cfg, gen);
  const auto dir = temp_dir("dump");
  dump_candidates(set, dir);
  EXPECT_TRUE(fs::exists(dir / "candidate_2.wav"));
  const auto j = nlohmann::json::parse(slurp(dir / "candidates.json"));
  EXPECT_EQ(j["prompt"], "church bell ringing");
  EXPECT_EQ(j["counts"].size(), 3u);
  EXPECT_EQ(j["selected_index"], set.selected_index);
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// Composition

TEST(BuildPlan, RoutesByEventType) {
  PipelineConfig cfg;
  fixture::FixtureVision v(42);
  fixture::FixtureAudio gen;
  const auto plan = build_plan(analyze_scene(fixture_image("countryside"), {}, v), cfg, gen);
  EXPECT_EQ(plan.foreground.size(), 3u);
  EXPECT_EQ(plan.background.size(), 1u);
  for (const auto& p : plan.foreground) {
    EXPECT_EQ(p.object.event_type, EventType::Discrete);
    EXPECT_NEAR(p.stem.peak(), 1.0, 1e-12);
  }
  for (const auto& p : plan.background) EXPECT_EQ(p.object.event_type, EventType::Continuous);
  EXPECT_EQ(plan.target_len_samples, 80000u);
  EXPECT_EQ(compose(plan, cfg).size(), 80000u);

  const auto sea = build_plan(analyze_scene(fixture_image("seabeach"), {}, v), cfg, gen);
  EXPECT_EQ(sea.foreground.size(), 0u);
  EXPECT_EQ(sea.background.size(), 2u);

  EXPECT_THROW(build_plan(SceneAnalysis{}, cfg, gen), EmptyScene);
  EXPECT_THROW(compose(CompositionPlan{}, cfg), EmptyScene);
}

TEST(Compose, MixingArithmetic) {
  PipelineConfig cfg;
  SplitMix rng(12);
  std::vector<double> d(80000), c(80000);
  for (auto& v : d) v = rng.uniform(-1, 1);
  for (auto& v : c) v = rng.uniform(-1, 1);
  const AudioBuffer dn = dsp::peak_normalize(AudioBuffer(d));
  const AudioBuffer cn = dsp::peak_normalize(AudioBuffer(c));

  CompositionPlan one;
  one.target_len_samples = 80000;
  one.foreground.push_back({0, {"bell ringing", EventType::Discrete, {}}, dn});
  const auto out1 = compose(one, cfg);
  for (std::size_t i = 0; i < 80000; ++i) ASSERT_EQ(out1[i], 0.8 * dn[i]);

  CompositionPlan two = one;
  two.background.push_back({1, {"wind blowing", EventType::Continuous, {}}, cn});
  const auto out2 = compose(two, cfg);
  for (std::size_t i = 0; i < 80000; ++i) ASSERT_EQ(out2[i], 0.8 * dn[i] + 0.2 * cn[i]);

  CompositionPlan hot;
  hot.target_len_samples = 100;
  const AudioBuffer ones(std::vector<double>(100, 1.0));
  hot.foreground.push_back({0, {"a b", EventType::Discrete, {}}, ones});
  hot.foreground.push_back({1, {"c d", EventType::Discrete, {}}, ones});
  EXPECT_NEAR(compose(hot, cfg).peak(), 0.95, 1e-12);

  CompositionPlan quiet;
  quiet.target_len_samples = 100;
  quiet.foreground.push_back({0, {"a b", EventType::Discrete, {}}, AudioBuffer::silence(100)});
  EXPECT_EQ(compose(quiet, cfg), AudioBuffer::silence(100));
}

// ---------------------------------------------------------------------------
// Modes

TEST(Modes, NamesAndConditions) {
  EXPECT_EQ(parse_mode("brief"), Mode::Brief);
  EXPECT_EQ(parse_mode("detail"), Mode::Detail);
  EXPECT_FALSE(parse_mode("detailed"));
  EXPECT_FALSE(parse_mode("Brief"));
  EXPECT_EQ(study_condition(Mode::Brief), "overlay");
  EXPECT_EQ(study_condition(Mode::Detail), "overlay_concat");
  EXPECT_EQ(study_condition(Mode::Speech), "speech_only");
  EXPECT_EQ(study_condition(Mode::Audio), "audio_only");
}

TEST(Modes, OverlayArithmetic) {
  PipelineConfig cfg;
  const AudioBuffer speech(std::vector<double>(samples_for(8.0), 0.5));
  const AudioBuffer bed(std::vector<double>(samples_for(5.0), 0.25));
  const auto out = assemble_overlay(speech, bed, cfg);
  EXPECT_EQ(out.size(), samples_for(8.5));

  const auto silent = assemble_overlay(speech, AudioBuffer::silence(80000), cfg);
  EXPECT_EQ(silent, dsp::fit_length(speech, samples_for(8.5), dsp::FitMode::Pad));

  const AudioBuffer loud(std::vector<double>(1000, 1.0));
  const auto rescued = assemble_overlay(loud, loud, cfg);
  EXPECT_LE(rescued.peak(), 0.95 + 1e-12);
}

TEST(Modes, OverlayConcatSegments) {
  PipelineConfig cfg;
  fixture::FixtureSpeech tts;
  std::vector<SonicObject> objs = {{"cows mooing", EventType::Discrete, "A group of cows is directly ahead."},
                                   {"bell ringing", EventType::Discrete, "A bell rings to the left."},
                                   {"wind blowing", EventType::Continuous, "Wind blows around you."}};
  std::vector<AudioBuffer> stems = {clicks(2), clicks(3), AudioBuffer(std::vector<double>(80000, 0.1))};
  const auto r = assemble_overlay_concat(objs, stems, tts, cfg);
  EXPECT_EQ(r.segments, 3u);
  std::size_t expect = 0;
  for (std::size_t i = 0; i < 3; ++i)
    expect += assemble_overlay(tts.synthesize(*objs[i].position_sentence), stems[i], cfg).size();
  EXPECT_EQ(r.audio.size(), expect + 2 * 4800);

  const auto single = assemble_overlay_concat(std::span(objs).first(1), std::span(stems).first(1), tts, cfg);
  EXPECT_EQ(single.audio, assemble_overlay(tts.synthesize(*objs[0].position_sentence), stems[0], cfg));

  objs[1].position_sentence.reset();
  EXPECT_EQ(assemble_overlay_concat(objs, stems, tts, cfg).segments, 2u);
}

TEST(Modes, SpeechOnly) {
  fixture::FixtureSpeech tts;
  SceneAnalysis a;
  a.brief_description = "Waves roll onto a sandy beach.";
  const auto s = assemble_speech_only(a, tts);
  EXPECT_EQ(s.size(), 6 * samples_for(0.08) + 5 * samples_for(0.02));
  EXPECT_GT(s.peak(), 0.0);
  EXPECT_EQ(s, assemble_speech_only(a, tts));
  EXPECT_THROW(assemble_speech_only(SceneAnalysis{}, tts), PreconditionError);
}

TEST(Bundle, CountrysideAndSilentScene) {
  PipelineConfig cfg;
  auto b = make_fixture_backends(cfg.rng_seed);
  const auto bundle = build_bundle(fixture_image("countryside"), cfg, b.view());
  for (Mode m : kAllModes) {
    ASSERT_TRUE(bundle[m].has_value());
    EXPECT_TRUE(satisfies_invariants(*bundle[m]));
  }
  EXPECT_EQ(bundle[Mode::Audio]->size(), 80000u);
  EXPECT_GE(bundle[Mode::Brief]->size(), bundle[Mode::Speech]->size());
  for (const char* k : {"analysis", "generation", "composition", "tts", "assembly", "total"})
    EXPECT_TRUE(bundle.timings_ms.count(k)) << k;

  auto b2 = make_fixture_backends(cfg.rng_seed);
  const auto again = build_bundle(fixture_image("countryside"), cfg, b2.view());
  for (Mode m : kAllModes) EXPECT_EQ(wav::encode(*bundle[m]), wav::encode(*again[m]));

  const auto night = build_bundle(fixture_image("silent-night-sky"), cfg, b.view());
  EXPECT_TRUE(night.audio_absent());
  EXPECT_TRUE(night[Mode::Brief] && night[Mode::Detail] && night[Mode::Speech]);
  EXPECT_FALSE(night.warnings.empty());
}

TEST(Bundle, InjectedClockDrivesTimings) {
  PipelineConfig cfg;
  cfg.candidate_count = 2;
  auto b = make_fixture_backends(cfg.rng_seed);
  double now = 0;
  BundleOptions opts;
  opts.clock = [&] { return now += 1.0; };
  const auto bundle = build_bundle(fixture_image("seabeach"), cfg, b.view(), opts);
  EXPECT_GT(bundle.timings_ms.at("total"), bundle.timings_ms.at("analysis"));
}

TEST(Bundle, ParallelGenerationIsIdentical) {
  PipelineConfig cfg;
  auto b = make_fixture_backends(cfg.rng_seed);
  BundleOptions par;
  par.parallel_generation = true;
  const auto x = build_bundle(fixture_image("foodcourt"), cfg, b.view());
  const auto y = build_bundle(fixture_image("foodcourt"), cfg, b.view(), par);
  for (Mode m : kAllModes) EXPECT_EQ(*x[m], *y[m]);
}

// ---------------------------------------------------------------------------
// JSON and CLI

TEST(JsonIo, AnalysisRoundTrip) {
  fixture::FixtureVision v(42);
  const auto a = analyze_scene(fixture_image("countryside"), {}, v);
  const auto j = json_io::to_json(a);
  EXPECT_EQ(j["objects"][0]["event_type"], "discrete");
  EXPECT_EQ(json_io::analysis_from_json(j), a);
}

TEST(Cli, RunWritesFilesAndMatchesLibrary) {
  const auto dir = temp_dir("cli_run");
  const std::string img = std::string(S2A_FIXTURES) + "/countryside.png";
  const std::string cmd = std::string(S2A_CLI) + " run " + img + " --out " + dir.string() + " --seed 42 >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  for (const char* f : {"brief.wav", "detail.wav", "speech.wav", "audio.wav", "analysis.json", "timings.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto j = nlohmann::json::parse(slurp(dir / "analysis.json"));
  EXPECT_EQ(j["analysis"]["objects"][0]["phrase"], "cows mooing");
  EXPECT_EQ(j["analysis"]["objects"][0]["event_type"], "discrete");

  // Thin shell: the library call produces the same bytes.
  const auto lib_dir = temp_dir("cli_lib");
  cli::PipelineOptions opts;
  opts.seed = 42;
  cli::run(img, lib_dir, opts);
  for (const char* f : {"brief.wav", "detail.wav", "speech.wav", "audio.wav", "analysis.json"})
    EXPECT_EQ(slurp(dir / f), slurp(lib_dir / f)) << f;
  fs::remove_all(dir);
  fs::remove_all(lib_dir);
}

TEST(Cli, FailuresExitOne) {
  const std::string cli = S2A_CLI;
  EXPECT_NE(std::system((cli + " run /nonexistent.png --out /tmp/s2a_none >/dev/null 2>&1").c_str()), 0);
  EXPECT_NE(std::system((cli + " run " + S2A_FIXTURES + "/not_an_image.txt >/dev/null 2>&1").c_str()), 0);
  EXPECT_NE(std::system((cli + " count-events /nonexistent.wav >/dev/null 2>&1").c_str()), 0);
}

TEST(Cli, CountEvents) {
  const auto dir = temp_dir("cli_count");
  wav::write_file((dir / "four.wav").string(), clicks(4));
  wav::write_file((dir / "silence.wav").string(), AudioBuffer::silence(80000));
  const auto r = cli::count_events_file((dir / "four.wav").string());
  EXPECT_EQ(r.frames.size(), 4u);
  EXPECT_EQ(cli::format_events(r).substr(0, 2), "4\n");
  EXPECT_EQ(cli::count_events_file((dir / "silence.wav").string()).frames.size(), 0u);
  const std::string cmd = std::string(S2A_CLI) + " count-events " + (dir / "four.wav").string() + " > " +
                          (dir / "out.txt").string();
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(slurp(dir / "out.txt"), cli::format_events(r));
  fs::remove_all(dir);
}

TEST(Cli, BenchSingleRunHasZeroSd) {
  cli::PipelineOptions opts;
  const auto r = cli::bench(std::string(S2A_FIXTURES) + "/seabeach.png", 1, opts);
  EXPECT_EQ(r.stats.n, 1u);
  EXPECT_EQ(r.stats.sd_ms, 0.0);
  EXPECT_EQ(r.stats.min_ms, r.stats.max_ms);
}

TEST(Cli, BenchStopsOnRemoteFailure) {
  setenv("S2A_VISION_URL", "http://127.0.0.1:1/v", 1);
  setenv("S2A_AUDIO_URL", "http://127.0.0.1:1/a", 1);
  setenv("S2A_SPEECH_URL", "http://127.0.0.1:1/s", 1);
  const std::string cmd = std::string(S2A_CLI) + " bench --n 3 --backend remote " + S2A_FIXTURES +
                          "/seabeach.png --timings /tmp/s2a_bench_fail.json >/dev/null 2>&1";
  EXPECT_NE(std::system(cmd.c_str()), 0);
  unsetenv("S2A_VISION_URL");
  unsetenv("S2A_AUDIO_URL");
  unsetenv("S2A_SPEECH_URL");
}

TEST(Cli, EvalCommand) {
  const auto dir = temp_dir("cli_eval");
  {
    std::ofstream f(dir / "kappa.jsonl");
    auto put = [&](int n, const char* p, const char* t) {
      for (int i = 0; i < n; ++i) f << "{\"predicted\": \"" << p << "\", \"truth\": \"" << t << "\"}\n";
    };
    put(45, "discrete", "discrete"), put(5, "discrete", "continuous");
    put(5, "continuous", "discrete"), put(45, "continuous", "continuous");
  }
  {
    std::ofstream f(dir / "runs.jsonl");
    const std::string run = R"([{"phrase": "waves crashing", "event_type": "continuous"}])";
    f << R"({"image": "sea", "runs": [)" << run << "," << run << "," << run << "]}\n";
  }
  {
    std::ofstream f(dir / "bad.jsonl");
    f << "{\"predicted\": \"discrete\", \"truth\": \"discrete\"}\n{\"predicted\": \"discrete\"}\n";
  }
  const std::string cli = S2A_CLI;
  auto run = [&](const std::string& args, const std::string& out) {
    return std::system((cli + " eval " + args + " > " + (dir / out).string() + " 2>&1").c_str());
  };
  ASSERT_EQ(run("kappa " + (dir / "kappa.jsonl").string(), "k.json"), 0);
  EXPECT_NEAR(nlohmann::json::parse(slurp(dir / "k.json"))["value"].get<double>(), 0.8, 1e-9);
  ASSERT_EQ(run("agreement " + (dir / "runs.jsonl").string(), "a.json"), 0);
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(slurp(dir / "a.json"))["value"].get<double>(), 1.0);
  EXPECT_NE(run("accuracy " + (dir / "bad.jsonl").string(), "bad.txt"), 0);
  EXPECT_NE(slurp(dir / "bad.txt").find("line 2"), std::string::npos);
  fs::remove_all(dir);
}
