#pragma once
// Annotation service: task assignment, rating intake and export over an
// append-only JSONL store, plus the HTTP front end.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "seqstory/model.hpp"
#include "seqstory/study.hpp"

namespace seqstory::annotation {

struct Session {
  std::string token;
  std::string annotator_id;
  std::string task_id;
  std::vector<std::string> order;  // example ids in presentation order

  bool operator==(const Session&) const = default;
};

void to_json(json& j, const Session& v);
void from_json(const json& j, Session& v);

struct Progress {
  int rated = 0;
  int total = 0;
  bool complete() const { return total > 0 && rated == total; }
  std::string completion_code;  // set once complete
};

struct ExportFilter {
  std::optional<std::string> annotator_id;
  std::optional<bool> is_gold;
};

struct ExportRow {
  AnnotationRecord record;
  bool gold_pass = true;  // of the record's annotator, over golds rated so far
};

/// Files under `data_dir`: sessions.jsonl and annotations.jsonl. Both are
/// append-only and replayed on construction, so a restarted service resumes
/// where it stopped. Safe to call from many threads.
class Service {
 public:
  Service(study::StudyPlan plan, std::filesystem::path data_dir);

  /// Returns the annotator's existing session or claims the next free task.
  /// Throws CapacityError when every task is taken and ValidationError on an
  /// empty annotator id.
  Session create_session(const std::string& annotator_id);

  /// Throws AuthError for an unknown token, ValidationError for a likert
  /// outside 1..5 or an example not in the session, and ConflictError for a
  /// repeated rating or a finished session. The record is on disk before
  /// this returns.
  Progress submit_rating(const std::string& token, const std::string& example_id, int likert);

  Progress progress(const std::string& token) const;

  std::vector<ExportRow> export_rows(const ExportFilter& filter = {}) const;

  /// Assignment payload for the browser: instructions and the example pairs
  /// in session order. Gold status is not revealed.
  json session_view(const Session& session) const;

  const study::StudyPlan& plan() const { return plan_; }
  std::filesystem::path annotations_path() const { return dir_ / "annotations.jsonl"; }
  std::filesystem::path sessions_path() const { return dir_ / "sessions.jsonl"; }

 private:
  struct State {
    Session session;
    std::set<std::string> rated;
  };

  const Session& session_for(const std::string& token) const;
  Progress progress_locked(const State& s) const;

  study::StudyPlan plan_;
  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, State> by_token_;
  std::map<std::string, std::string> token_by_annotator_;
  std::set<std::string> claimed_tasks_;
  std::vector<AnnotationRecord> records_;
};

/// Reads an exported or stored annotation JSONL file. Extra export columns
/// are ignored.
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);

std::string export_jsonl(const std::vector<ExportRow>& rows);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path static_dir;  // optional UI bundle
  std::string admin_token;  // required by /api/export; empty disables export
};

/// HTTP front end:
///   GET  /api/session?annotator=<id>
///   POST /api/rating            {session_token, example_id, likert}
///   GET  /api/progress?session=<token>
///   GET  /api/export            Authorization: Bearer <admin token>
class Server {
 public:
  Server(Service& service, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and returns the port actually bound.
  int bind();
  /// Serves until stop(); call after bind().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace seqstory::annotation
