#pragma once

// HTTP service: image intake, asynchronous bundle builds on a bounded worker
// pool, four-mode audio delivery, questionnaire persistence and latency
// metrics.
//
//   POST /scenes                      multipart field "image" -> 202 {scene_id, status}
//   GET  /scenes/{id}                 status, analysis, timings, warnings
//   GET  /scenes/{id}/audio/{mode}    audio/wav
//   POST /scenes/{id}/feedback        mode-preference questionnaire -> 201
//   POST /scenes/{id}/ueq             eight UEQ items -> 201
//   GET  /metrics/latency             stats over the last N completed bundles
//   GET  /metrics/ueq                 per-item mean and sd over stored UEQ records

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <iostream>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "s2a/backend_set.hpp"
#include "s2a/json_io.hpp"
#include "s2a/service/store.hpp"
#include "s2a/wav.hpp"

namespace s2a::service {

using nlohmann::json;

struct ServiceConfig {
  std::filesystem::path storage_root = "s2a-data";
  std::string host = "0.0.0.0";
  int port = 8080;
  PipelineConfig pipeline;  // pipeline.rng_seed is the default scene seed
  PromptSet prompts;
  std::string backend = "fixture";
  std::size_t workers = 1;
  std::size_t queue_capacity = 16;
  std::size_t max_upload_bytes = 20u << 20;
  std::size_t latency_window = 50;

  /// Overrides from S2A_PORT, S2A_HOST, S2A_STORAGE, S2A_SEED, S2A_WORKERS,
  /// S2A_QUEUE, S2A_BACKEND, S2A_CONFIG and S2A_PROMPTS.
  static ServiceConfig from_env();
  static ServiceConfig from_env(ServiceConfig c);
};

inline ServiceConfig ServiceConfig::from_env() { return from_env(ServiceConfig{}); }

inline ServiceConfig ServiceConfig::from_env(ServiceConfig c) {
  auto get = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  if (auto v = get("S2A_CONFIG")) c.pipeline = load_config(*v, c.pipeline);
  if (auto v = get("S2A_PROMPTS")) c.prompts = load_prompts(*v);
  if (auto v = get("S2A_PORT")) c.port = kv::parse_number<int>("S2A_PORT", *v);
  if (auto v = get("S2A_HOST")) c.host = *v;
  if (auto v = get("S2A_STORAGE")) c.storage_root = *v;
  if (auto v = get("S2A_SEED")) c.pipeline.rng_seed = kv::parse_number<std::uint64_t>("S2A_SEED", *v);
  if (auto v = get("S2A_WORKERS")) c.workers = kv::parse_number<std::size_t>("S2A_WORKERS", *v);
  if (auto v = get("S2A_QUEUE")) c.queue_capacity = kv::parse_number<std::size_t>("S2A_QUEUE", *v);
  if (auto v = get("S2A_BACKEND")) c.backend = *v;
  return c;
}

namespace http_detail {

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

inline std::optional<std::string> validate_feedback(const json& j) {
  static const std::array<const char*, 5> mode_fields = {"clearest_mode", "least_clear_mode",
                                                         "most_enjoyable_mode", "least_enjoyable_mode",
                                                         "preferred_mode"};
  if (!j.is_object()) return "body must be a JSON object";
  for (const char* f : mode_fields) {
    if (!j.contains(f) || !j[f].is_string()) return std::string("missing mode field '") + f + "'";
    if (!parse_mode(j[f].get<std::string>()))
      return std::string("'") + f + "' must be one of brief, detail, speech, audio";
  }
  for (const char* f : {"why", "wanted_info"})
    if (!j.contains(f) || !j[f].is_string()) return std::string("missing text field '") + f + "'";
  if (!j.contains("got_info") || !j["got_info"].is_boolean()) return "missing boolean field 'got_info'";
  if (!j.contains("satisfaction") || !j["satisfaction"].is_number_integer()) return "missing integer field 'satisfaction'";
  const auto s = j["satisfaction"].get<std::int64_t>();
  if (s < 1 || s > 7) return "satisfaction must be in 1..7";
  if (j.contains("play_counts")) {
    const auto& pc = j["play_counts"];
    if (!pc.is_object()) return "play_counts must be an object";
    for (const auto& [k, v] : pc.items()) {
      if (!parse_mode(k)) return "play_counts key '" + k + "' is not a mode";
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) return "play_counts values must be integers >= 0";
    }
  }
  for (const auto& [k, v] : j.items()) {
    const bool known = k == "why" || k == "wanted_info" || k == "got_info" || k == "satisfaction" ||
                       k == "play_counts" ||
                       std::find_if(mode_fields.begin(), mode_fields.end(),
                                    [&](const char* f) { return k == f; }) != mode_fields.end();
    if (!known) return "unknown field '" + k + "'";
  }
  return std::nullopt;
}

inline std::optional<std::string> validate_ueq(const json& j) {
  if (!j.is_object()) return "body must be a JSON object";
  for (auto item : eval::kUeqItems) {
    const std::string key(item);
    if (!j.contains(key)) return "missing UEQ item '" + key + "'";
    if (!j[key].is_number_integer()) return "UEQ item '" + key + "' must be an integer";
    const auto v = j[key].get<std::int64_t>();
    if (v < 1 || v > 7) return "UEQ item '" + key + "' must be in 1..7";
  }
  if (j.size() != eval::kUeqItems.size()) return "unknown fields in UEQ record";
  return std::nullopt;
}

}  // namespace http_detail

class Service {
 public:
  Service(ServiceConfig cfg, BackendSet backends, Clock clock = steady_clock_ms(),
          std::ostream* log = &std::cerr)
      : cfg_(std::move(cfg)), backends_(std::move(backends)), clock_(std::move(clock)), log_(log),
        store_(cfg_.storage_root) {
    validate_config(cfg_.pipeline);
    validate_prompts(cfg_.prompts);
    if (cfg_.workers < 1) throw ConfigError("service needs at least one worker");
    for (const auto& id : store_.unfinished()) {
      store_.set_status(id, SceneStatus::Queued);
      queue_.push_back(id);
    }
    routes();
    for (std::size_t i = 0; i < cfg_.workers; ++i) workers_.emplace_back([this] { work(); });
  }

  ~Service() { stop(); }
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  int start() {
    const int port = cfg_.port == 0 ? http_.bind_to_any_port(cfg_.host)
                                    : (http_.bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1);
    if (port < 0) throw Error("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
    listener_ = std::thread([this] { http_.listen_after_bind(); });
    http_.wait_until_ready();
    return port;
  }

  /// Serves on the calling thread until stop().
  void run() {
    if (!http_.listen(cfg_.host, cfg_.port))
      throw Error("cannot listen on " + cfg_.host + ":" + std::to_string(cfg_.port));
  }

  void stop() {
    http_.stop();
    if (listener_.joinable()) listener_.join();
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_)
      if (w.joinable()) w.join();
    workers_.clear();
  }

  /// While paused, workers leave queued jobs untouched.
  void set_paused(bool paused) {
    {
      std::lock_guard lock(mu_);
      paused_ = paused;
    }
    cv_.notify_all();
  }

  /// Blocks until no job is queued or running.
  void wait_idle() {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [this] { return queue_.empty() && running_ == 0; });
  }

  SceneStore& store() { return store_; }
  httplib::Server& http() { return http_; }

  /// Re-derives a ready scene's audio from its stored image and seed and
  /// compares it byte for byte with the stored WAVs.
  bool replay_audit(const std::string& id) {
    const auto row = store_.get(id);
    if (!row || row->status != SceneStatus::Ready) throw PreconditionError("scene is not ready: " + id);
    const ModeBundle bundle = build(*row);
    for (Mode m : kAllModes) {
      const auto& key = row->audio_keys[static_cast<std::size_t>(m)];
      if (key.has_value() != bundle[m].has_value()) return false;
      if (key && store_.blobs().get(*key) != wav::encode(*bundle[m])) return false;
    }
    return true;
  }

 private:
  ModeBundle build(const SceneRow& row) {
    PipelineConfig pc = cfg_.pipeline;
    pc.rng_seed = static_cast<std::uint64_t>(row.seed);
    const ImageRef image(store_.blobs().get(row.image_key), row.media_type);
    BundleOptions opts;
    opts.prompts = cfg_.prompts;
    opts.clock = clock_;
    return build_bundle(image, pc, backends_.view(), opts);
  }

  void process(const std::string& id) {
    try {
      store_.set_status(id, SceneStatus::Processing);
      const auto row = store_.get(id);
      if (!row) return;
      const ModeBundle bundle = build(*row);
      std::array<std::optional<std::string>, 4> keys;
      for (Mode m : kAllModes)
        if (bundle[m]) keys[static_cast<std::size_t>(m)] = store_.blobs().put(wav::encode(*bundle[m]));
      store_.complete(id, json_io::bundle_summary(bundle).dump(),
                      json_io::timings_json(bundle.timings_ms).dump(), keys, bundle.timings_ms.at("total"));
    } catch (const std::exception& e) {
      store_.set_status(id, SceneStatus::Failed, std::string(e.what()));
    }
  }

  void work() {
    for (;;) {
      std::string id;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return stopping_ || (!paused_ && !queue_.empty()); });
        if (stopping_) return;
        id = std::move(queue_.front());
        queue_.pop_front();
        ++running_;
      }
      process(id);
      {
        std::lock_guard lock(mu_);
        --running_;
      }
      idle_cv_.notify_all();
    }
  }

  void log_request(const httplib::Request& req, const httplib::Response& res) {
    if (!log_) return;
    const json line = {{"ts", utc_now_iso()},
                       {"method", req.method},
                       {"path", req.path},
                       {"status", res.status},
                       {"remote", req.remote_addr}};
    std::lock_guard lock(log_mu_);
    *log_ << line.dump() << std::endl;
  }

  void routes() {
    using namespace http_detail;
    http_.set_payload_max_length(cfg_.max_upload_bytes * 4);
    http_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    http_.set_logger([this](const httplib::Request& req, const httplib::Response& res) { log_request(req, res); });
    http_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      } catch (...) {
        send_error(res, 500, "internal error");
      }
    });
    http_.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    http_.Post("/scenes", [this](const httplib::Request& req, httplib::Response& res) { post_scene(req, res); });

    http_.Get(R"(/scenes/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto row = store_.get(req.matches[1]);
      if (!row) return send_error(res, 404, "unknown scene");
      send_json(res, 200, scene_json(*row));
    });

    http_.Get(R"(/scenes/([^/]+)/audio/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto row = store_.get(req.matches[1]);
      if (!row) return send_error(res, 404, "unknown scene");
      const auto mode = parse_mode(req.matches[2].str());
      if (!mode) return send_error(res, 404, "unknown mode (brief, detail, speech, audio)");
      if (row->status != SceneStatus::Ready)
        return send_error(res, 409, "scene is " + std::string(to_string(row->status)));
      const auto& key = row->audio_keys[static_cast<std::size_t>(*mode)];
      if (!key) return send_error(res, 410, "no sonic objects in this scene; audio mode is absent, use speech");
      const auto bytes = store_.blobs().get(*key);
      res.status = 200;
      res.set_content(std::string(bytes.begin(), bytes.end()), "audio/wav");
    });

    auto questionnaire = [this](const std::string& kind, auto validate) {
      return [this, kind, validate](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        if (!store_.get(id)) return send_error(res, 404, "unknown scene");
        json body;
        try {
          body = json::parse(req.body);
        } catch (const json::exception&) {
          return send_error(res, 400, "body is not valid JSON");
        }
        if (auto problem = validate(body)) return send_error(res, 400, *problem);
        const auto version = store_.put_response(id, kind, body.dump());
        send_json(res, 201, {{"scene_id", id}, {"kind", kind}, {"version", version}});
      };
    };
    http_.Post(R"(/scenes/([^/]+)/feedback)", questionnaire("feedback", validate_feedback));
    http_.Post(R"(/scenes/([^/]+)/ueq)", questionnaire("ueq", validate_ueq));

    http_.Get("/metrics/latency", [this](const httplib::Request&, httplib::Response& res) {
      const auto totals = store_.recent_totals(cfg_.latency_window);
      if (totals.empty()) return send_error(res, 404, "no completed bundles yet");
      send_json(res, 200, json_io::to_json(eval::latency_stats(totals)));
    });

    http_.Get("/metrics/ueq", [this](const httplib::Request&, httplib::Response& res) {
      std::vector<std::array<int, 8>> responses;
      for (const auto& body : store_.responses_of_kind("ueq")) {
        const json j = json::parse(body);
        std::array<int, 8> r{};
        for (std::size_t k = 0; k < 8; ++k) r[k] = j.at(std::string(eval::kUeqItems[k])).get<int>();
        responses.push_back(r);
      }
      if (responses.empty()) return send_error(res, 404, "no UEQ records yet");
      json items = json::array();
      for (const auto& s : eval::ueq_summary(responses))
        items.push_back({{"item", s.item}, {"mean", s.mean}, {"sd", s.sd}});
      send_json(res, 200, {{"n", responses.size()}, {"items", items}});
    });
  }

  void post_scene(const httplib::Request& req, httplib::Response& res) {
    using namespace http_detail;
    if (!req.is_multipart_form_data() || !req.has_file("image"))
      return send_error(res, 400, "expected multipart/form-data with an 'image' file field");
    const auto file = req.get_file_value("image");
    if (file.content.size() > cfg_.max_upload_bytes)
      return send_error(res, 400, "image exceeds " + std::to_string(cfg_.max_upload_bytes) + " bytes");
    const std::vector<std::uint8_t> bytes(file.content.begin(), file.content.end());
    const std::string media_type = ImageRef::sniff_media_type(bytes);
    if (media_type.empty()) return send_error(res, 400, "image must be JPEG or PNG");

    std::int64_t seed = static_cast<std::int64_t>(cfg_.pipeline.rng_seed);
    if (req.has_file("seed")) {
      try {
        seed = kv::parse_number<std::int64_t>("seed", req.get_file_value("seed").content);
      } catch (const Error& e) {
        return send_error(res, 400, e.what());
      }
    }

    std::lock_guard intake(intake_mu_);
    if (auto existing = store_.find_existing(sha256_hex(bytes), seed))
      return send_json(res, 202, {{"scene_id", existing->id}, {"status", to_string(existing->status)}});
    {
      std::lock_guard lock(mu_);
      if (queue_.size() >= cfg_.queue_capacity) return send_error(res, 503, "build queue is full");
    }
    const SceneRow row = store_.create_scene(bytes, media_type, seed);
    {
      std::lock_guard lock(mu_);
      queue_.push_back(row.id);
    }
    cv_.notify_one();
    send_json(res, 202, {{"scene_id", row.id}, {"status", "queued"}});
  }

  json scene_json(const SceneRow& row) {
    json out = {{"scene_id", row.id},
                {"status", to_string(row.status)},
                {"created_at", row.created_at},
                {"seed", row.seed}};
    if (row.error) out["error"] = *row.error;
    if (row.status != SceneStatus::Ready) return out;
    const json summary = json::parse(*row.summary_json);
    out["analysis"] = summary["analysis"];
    out["plan"] = summary["plan"];
    out["warnings"] = summary["warnings"];
    out["timings_ms"] = json::parse(*row.timings_json);
    json modes = json::object();
    for (Mode m : kAllModes) {
      const std::string name(to_string(m));
      const bool present = row.audio_keys[static_cast<std::size_t>(m)].has_value();
      modes[name] = {{"study_condition", study_condition(m)},
                     {"available", present},
                     {"url", present ? json("/scenes/" + row.id + "/audio/" + name) : json(nullptr)}};
    }
    out["modes"] = modes;
    return out;
  }

  ServiceConfig cfg_;
  BackendSet backends_;
  Clock clock_;
  std::ostream* log_;
  std::mutex log_mu_;
  SceneStore store_;
  httplib::Server http_;
  std::thread listener_;

  std::mutex intake_mu_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<std::string> queue_;
  std::size_t running_ = 0;
  bool paused_ = false;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace s2a::service
