#pragma once

// Persistence for the service: SQLite for records, content-addressed files
// (SHA-256) for images and audio.

#include <array>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>
#include <sqlite3.h>

#include "s2a/errors.hpp"

namespace s2a::service {

class StoreError : public Error {
 public:
  using Error::Error;
};

inline std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw StoreError("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

inline std::string utc_now_iso() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string random_token() {
  static std::mutex mu;
  static std::random_device rd;
  std::lock_guard lock(mu);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (int i = 0; i < 8; ++i) {
    const auto word = rd();
    for (int k = 0; k < 4; ++k) out += hex[(word >> (k * 4)) & 15];
  }
  return out;
}

/// Files named by the SHA-256 of their content under root/ab/cdef...
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  std::string put(std::span<const std::uint8_t> bytes) const {
    const std::string key = sha256_hex(bytes);
    const auto path = path_for(key);
    if (std::filesystem::exists(path)) return key;
    std::filesystem::create_directories(path.parent_path());
    // Write then rename so a crash never leaves a truncated blob under its key.
    const auto tmp = path.string() + ".tmp" + random_token();
    {
      std::ofstream f(tmp, std::ios::binary);
      f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!f) throw StoreError("cannot write blob " + key);
    }
    std::filesystem::rename(tmp, path);
    return key;
  }

  std::vector<std::uint8_t> get(const std::string& key) const {
    std::ifstream f(path_for(key), std::ios::binary);
    if (!f) throw StoreError("missing blob " + key);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  }

  std::filesystem::path path_for(const std::string& key) const {
    if (key.size() < 3) throw StoreError("bad blob key");
    return root_ / key.substr(0, 2) / key.substr(2);
  }

 private:
  std::filesystem::path root_;
};

/// Thin RAII wrapper over one SQLite connection; all access is serialized.
class Database {
 public:
  explicit Database(const std::string& path) {
    if (sqlite3_open(path.c_str(), &db_) != SQLITE_OK) {
      std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
      sqlite3_close(db_);
      throw StoreError("cannot open database: " + msg);
    }
    sqlite3_busy_timeout(db_, 5000);
    exec("PRAGMA foreign_keys = ON");
    exec("PRAGMA journal_mode = WAL");
  }
  ~Database() { sqlite3_close(db_); }
  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;

  void exec(const std::string& sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown error";
      sqlite3_free(err);
      throw StoreError("sql: " + msg);
    }
  }

  class Statement {
   public:
    Statement(sqlite3* db, const std::string& sql) : db_(db) {
      if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt_, nullptr) != SQLITE_OK)
        throw StoreError(std::string("prepare: ") + sqlite3_errmsg(db));
    }
    ~Statement() { sqlite3_finalize(stmt_); }
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;

    Statement& bind(int i, const std::string& v) {
      sqlite3_bind_text(stmt_, i, v.c_str(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
      return *this;
    }
    Statement& bind(int i, std::int64_t v) {
      sqlite3_bind_int64(stmt_, i, v);
      return *this;
    }
    Statement& bind(int i, double v) {
      sqlite3_bind_double(stmt_, i, v);
      return *this;
    }
    Statement& bind(int i, const std::optional<std::string>& v) {
      if (v) return bind(i, *v);
      sqlite3_bind_null(stmt_, i);
      return *this;
    }

    /// True while a row is available.
    bool step() {
      const int rc = sqlite3_step(stmt_);
      if (rc == SQLITE_ROW) return true;
      if (rc == SQLITE_DONE) return false;
      throw StoreError(std::string("step: ") + sqlite3_errmsg(db_));
    }

    std::optional<std::string> text(int col) const {
      if (sqlite3_column_type(stmt_, col) == SQLITE_NULL) return std::nullopt;
      const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, col));
      return std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)));
    }
    std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }
    double real(int col) const { return sqlite3_column_double(stmt_, col); }

   private:
    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
  };

  Statement prepare(const std::string& sql) { return Statement(db_, sql); }
  std::mutex& mutex() { return mu_; }

 private:
  sqlite3* db_ = nullptr;
  std::mutex mu_;
};

enum class SceneStatus { Queued, Processing, Ready, Failed };

inline std::string_view to_string(SceneStatus s) {
  switch (s) {
    case SceneStatus::Queued: return "queued";
    case SceneStatus::Processing: return "processing";
    case SceneStatus::Ready: return "ready";
    case SceneStatus::Failed: return "failed";
  }
  return "";
}

inline SceneStatus parse_status(std::string_view s) {
  if (s == "queued") return SceneStatus::Queued;
  if (s == "processing") return SceneStatus::Processing;
  if (s == "ready") return SceneStatus::Ready;
  if (s == "failed") return SceneStatus::Failed;
  throw StoreError("bad status in store: " + std::string(s));
}

struct SceneRow {
  std::string id;
  std::string created_at;
  std::string image_key;
  std::string media_type;
  std::int64_t seed = 0;
  SceneStatus status = SceneStatus::Queued;
  std::optional<std::string> error;
  std::optional<std::string> summary_json;  // analysis + plan + modes
  std::optional<std::string> timings_json;
  std::array<std::optional<std::string>, 4> audio_keys;  // brief, detail, speech, audio
  double total_ms = 0.0;
};

/// Scene, feedback and UEQ records. Feedback and UEQ rows reference scenes by
/// foreign key; a resubmission replaces the current row, and every submitted
/// body is kept in a version log.
class SceneStore {
 public:
  explicit SceneStore(const std::filesystem::path& root)
      : blobs_(root / "blobs"), db_((std::filesystem::create_directories(root), (root / "s2a.db").string())) {
    std::lock_guard lock(db_.mutex());
    db_.exec(R"(
      CREATE TABLE IF NOT EXISTS scenes (
        id TEXT PRIMARY KEY,
        created_at TEXT NOT NULL,
        image_key TEXT NOT NULL,
        media_type TEXT NOT NULL,
        seed INTEGER NOT NULL,
        status TEXT NOT NULL,
        error TEXT,
        summary_json TEXT,
        timings_json TEXT,
        brief_key TEXT, detail_key TEXT, speech_key TEXT, audio_key TEXT,
        total_ms REAL NOT NULL DEFAULT 0,
        completed_seq INTEGER
      );
      CREATE INDEX IF NOT EXISTS scenes_image ON scenes(image_key, seed);
      CREATE TABLE IF NOT EXISTS responses (
        scene_id TEXT NOT NULL REFERENCES scenes(id),
        kind TEXT NOT NULL,
        body TEXT NOT NULL,
        version INTEGER NOT NULL,
        submitted_at TEXT NOT NULL,
        PRIMARY KEY (scene_id, kind)
      );
      CREATE TABLE IF NOT EXISTS responses_log (
        scene_id TEXT NOT NULL REFERENCES scenes(id),
        kind TEXT NOT NULL,
        version INTEGER NOT NULL,
        body TEXT NOT NULL,
        submitted_at TEXT NOT NULL
      );
    )");
  }

  BlobStore& blobs() { return blobs_; }

  /// Stores a new queued scene and returns it.
  SceneRow create_scene(std::span<const std::uint8_t> image, const std::string& media_type,
                        std::int64_t seed) {
    SceneRow row;
    row.id = random_token();
    row.created_at = utc_now_iso();
    row.image_key = blobs_.put(image);
    row.media_type = media_type;
    row.seed = seed;
    std::lock_guard lock(db_.mutex());
    db_.prepare("INSERT INTO scenes(id, created_at, image_key, media_type, seed, status) VALUES(?,?,?,?,?,?)")
        .bind(1, row.id).bind(2, row.created_at).bind(3, row.image_key).bind(4, row.media_type)
        .bind(5, row.seed).bind(6, std::string(to_string(SceneStatus::Queued)))
        .step();
    return row;
  }

  /// Most recent non-failed scene built from the same image bytes and seed.
  std::optional<SceneRow> find_existing(const std::string& image_key, std::int64_t seed) {
    std::lock_guard lock(db_.mutex());
    auto st = db_.prepare(select_sql() +
                          " WHERE image_key = ? AND seed = ? AND status != 'failed' ORDER BY rowid DESC LIMIT 1");
    st.bind(1, image_key).bind(2, seed);
    if (!st.step()) return std::nullopt;
    return read_row(st);
  }

  std::optional<SceneRow> get(const std::string& id) {
    std::lock_guard lock(db_.mutex());
    auto st = db_.prepare(select_sql() + " WHERE id = ?");
    st.bind(1, id);
    if (!st.step()) return std::nullopt;
    return read_row(st);
  }

  /// Ids of scenes left queued or processing, oldest first.
  std::vector<std::string> unfinished() {
    std::lock_guard lock(db_.mutex());
    auto st = db_.prepare("SELECT id FROM scenes WHERE status IN ('queued', 'processing') ORDER BY rowid");
    std::vector<std::string> out;
    while (st.step()) out.push_back(*st.text(0));
    return out;
  }

  void set_status(const std::string& id, SceneStatus s, const std::optional<std::string>& error = {}) {
    std::lock_guard lock(db_.mutex());
    db_.prepare("UPDATE scenes SET status = ?, error = ? WHERE id = ?")
        .bind(1, std::string(to_string(s))).bind(2, error).bind(3, id)
        .step();
  }

  void complete(const std::string& id, const std::string& summary_json, const std::string& timings_json,
                const std::array<std::optional<std::string>, 4>& audio_keys, double total_ms) {
    std::lock_guard lock(db_.mutex());
    db_.prepare(R"(UPDATE scenes SET status = 'ready', error = NULL, summary_json = ?, timings_json = ?,
                   brief_key = ?, detail_key = ?, speech_key = ?, audio_key = ?, total_ms = ?,
                   completed_seq = (SELECT COALESCE(MAX(completed_seq), 0) + 1 FROM scenes)
                   WHERE id = ?)")
        .bind(1, summary_json).bind(2, timings_json)
        .bind(3, audio_keys[0]).bind(4, audio_keys[1]).bind(5, audio_keys[2]).bind(6, audio_keys[3])
        .bind(7, total_ms).bind(8, id)
        .step();
  }

  /// End-to-end durations of the last `n` completed scenes, oldest first.
  std::vector<double> recent_totals(std::size_t n) {
    std::lock_guard lock(db_.mutex());
    auto st = db_.prepare(
        "SELECT total_ms FROM (SELECT total_ms, completed_seq FROM scenes WHERE status = 'ready' "
        "ORDER BY completed_seq DESC LIMIT ?) ORDER BY completed_seq");
    st.bind(1, static_cast<std::int64_t>(n));
    std::vector<double> out;
    while (st.step()) out.push_back(st.real(0));
    return out;
  }

  /// Inserts or replaces the `kind` response for a scene; returns its version.
  /// Throws StoreError when the scene does not exist.
  std::int64_t put_response(const std::string& scene_id, const std::string& kind, const std::string& body) {
    std::lock_guard lock(db_.mutex());
    db_.exec("BEGIN IMMEDIATE");
    try {
      std::int64_t version = 1;
      {
        auto st = db_.prepare("SELECT version FROM responses WHERE scene_id = ? AND kind = ?");
        st.bind(1, scene_id).bind(2, kind);
        if (st.step()) version = st.integer(0) + 1;
      }
      const std::string now = utc_now_iso();
      db_.prepare("INSERT OR REPLACE INTO responses(scene_id, kind, body, version, submitted_at) VALUES(?,?,?,?,?)")
          .bind(1, scene_id).bind(2, kind).bind(3, body).bind(4, version).bind(5, now)
          .step();
      db_.prepare("INSERT INTO responses_log(scene_id, kind, version, body, submitted_at) VALUES(?,?,?,?,?)")
          .bind(1, scene_id).bind(2, kind).bind(3, version).bind(4, body).bind(5, now)
          .step();
      db_.exec("COMMIT");
      return version;
    } catch (...) {
      db_.exec("ROLLBACK");
      throw;
    }
  }

  std::optional<std::string> response(const std::string& scene_id, const std::string& kind) {
    std::lock_guard lock(db_.mutex());
    auto st = db_.prepare("SELECT body FROM responses WHERE scene_id = ? AND kind = ?");
    st.bind(1, scene_id).bind(2, kind);
    if (!st.step()) return std::nullopt;
    return st.text(0);
  }

  std::size_t response_versions(const std::string& scene_id, const std::string& kind) {
    std::lock_guard lock(db_.mutex());
    auto st = db_.prepare("SELECT COUNT(*) FROM responses_log WHERE scene_id = ? AND kind = ?");
    st.bind(1, scene_id).bind(2, kind);
    st.step();
    return static_cast<std::size_t>(st.integer(0));
  }

  /// Response rows whose scene is missing; always 0 while foreign keys hold.
  std::size_t orphan_responses() {
    std::lock_guard lock(db_.mutex());
    auto st = db_.prepare(
        "SELECT (SELECT COUNT(*) FROM responses WHERE scene_id NOT IN (SELECT id FROM scenes)) + "
        "(SELECT COUNT(*) FROM responses_log WHERE scene_id NOT IN (SELECT id FROM scenes))");
    st.step();
    return static_cast<std::size_t>(st.integer(0));
  }

  /// Latest body of each scene for one kind, for aggregation.
  std::vector<std::string> responses_of_kind(const std::string& kind) {
    std::lock_guard lock(db_.mutex());
    auto st = db_.prepare("SELECT body FROM responses WHERE kind = ? ORDER BY rowid");
    st.bind(1, kind);
    std::vector<std::string> out;
    while (st.step()) out.push_back(*st.text(0));
    return out;
  }

 private:
  static std::string select_sql() {
    return "SELECT id, created_at, image_key, media_type, seed, status, error, summary_json, timings_json, "
           "brief_key, detail_key, speech_key, audio_key, total_ms FROM scenes";
  }

  static SceneRow read_row(const Database::Statement& st) {
    SceneRow r;
    r.id = *st.text(0);
    r.created_at = *st.text(1);
    r.image_key = *st.text(2);
    r.media_type = *st.text(3);
    r.seed = st.integer(4);
    r.status = parse_status(*st.text(5));
    r.error = st.text(6);
    r.summary_json = st.text(7);
    r.timings_json = st.text(8);
    for (int k = 0; k < 4; ++k) r.audio_keys[static_cast<std::size_t>(k)] = st.text(9 + k);
    r.total_ms = st.real(13);
    return r;
  }

  BlobStore blobs_;
  Database db_;
};

}  // namespace s2a::service
