#include "seqstory/annotation.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "seqstory/error.hpp"
#include "seqstory/hashing.hpp"
#include "seqstory/json_fields.hpp"
#include "seqstory/jsonl.hpp"
#include "seqstory/stats.hpp"

namespace seqstory::annotation {

namespace fs = std::filesystem;

void to_json(json& j, const Session& v) {
  j = json{{"token", v.token},
           {"annotator_id", v.annotator_id},
           {"task_id", v.task_id},
           {"order", v.order}};
}

void from_json(const json& j, Session& v) {
  jsonf::reject_unknown(j, {"token", "annotator_id", "task_id", "order"}, "Session");
  v.token = jsonf::field<std::string>(j, "token", "Session");
  v.annotator_id = jsonf::field<std::string>(j, "annotator_id", "Session");
  v.task_id = jsonf::field<std::string>(j, "task_id", "Session");
  v.order = jsonf::field<std::vector<std::string>>(j, "order", "Session");
}

namespace {

std::string completion_code(const std::string& token) {
  std::string code = sha256_hex("complete/" + token).substr(0, 10);
  std::transform(code.begin(), code.end(), code.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return code;
}

}  // namespace

Service::Service(study::StudyPlan plan, fs::path data_dir)
    : plan_(std::move(plan)), dir_(std::move(data_dir)) {
  if (plan_.tasks.empty()) throw ValidationError("study plan has no tasks");
  fs::create_directories(dir_);
  if (fs::exists(sessions_path())) {
    io::for_each_jsonl(sessions_path(), [&](const json& row, std::size_t) {
      auto s = row.get<Session>();
      token_by_annotator_[s.annotator_id] = s.token;
      claimed_tasks_.insert(s.task_id);
      by_token_[s.token] = State{s, {}};
    });
  }
  if (fs::exists(annotations_path())) {
    io::for_each_jsonl(annotations_path(), [&](const json& row, std::size_t) {
      auto r = row.get<AnnotationRecord>();
      auto it = token_by_annotator_.find(r.annotator_id);
      if (it == token_by_annotator_.end()) {
        throw ValidationError(fmt::format("rating by {} has no session", r.annotator_id));
      }
      by_token_[it->second].rated.insert(r.example_id);
      records_.push_back(std::move(r));
    });
  }
  if (!by_token_.empty()) {
    spdlog::info("annotation store: resumed {} sessions and {} ratings", by_token_.size(),
                 records_.size());
  }
}

Session Service::create_session(const std::string& annotator_id) {
  if (annotator_id.empty()) throw ValidationError("annotator id is required");
  std::unique_lock lock(mu_);
  if (auto it = token_by_annotator_.find(annotator_id); it != token_by_annotator_.end()) {
    return by_token_.at(it->second).session;
  }
  const study::StudyTask* task = nullptr;
  for (const auto& t : plan_.tasks) {
    if (!claimed_tasks_.contains(t.task_id)) {
      task = &t;
      break;
    }
  }
  if (!task) throw CapacityError("every study task has been assigned");

  Session s;
  s.token = random_token();
  s.annotator_id = annotator_id;
  s.task_id = task->task_id;
  s.order = task->study_ids;
  s.order.insert(s.order.end(), task->gold_ids.begin(), task->gold_ids.end());
  Rng rng(derive_seed(plan_.seed, "session/" + annotator_id));
  portable_shuffle(s.order, rng);

  io::append_line_locked(sessions_path(), io::dump_line(json(s)));
  claimed_tasks_.insert(s.task_id);
  token_by_annotator_[annotator_id] = s.token;
  by_token_[s.token] = State{s, {}};
  return s;
}

const Session& Service::session_for(const std::string& token) const {
  auto it = by_token_.find(token);
  if (token.empty() || it == by_token_.end()) throw AuthError("unknown session token");
  return it->second.session;
}

Progress Service::progress_locked(const State& s) const {
  Progress p;
  p.rated = static_cast<int>(s.rated.size());
  p.total = static_cast<int>(s.session.order.size());
  if (p.complete()) p.completion_code = completion_code(s.session.token);
  return p;
}

Progress Service::submit_rating(const std::string& token, const std::string& example_id,
                                int likert) {
  if (likert < 1 || likert > 5) {
    throw ValidationError(fmt::format("likert {} is outside 1..5", likert));
  }
  std::unique_lock lock(mu_);
  const Session& session = session_for(token);
  State& state = by_token_.at(token);
  if (std::find(session.order.begin(), session.order.end(), example_id) == session.order.end()) {
    throw ValidationError(fmt::format("example '{}' is not assigned to this session", example_id));
  }
  if (state.rated.size() == session.order.size()) {
    throw ConflictError("session is already complete");
  }
  if (state.rated.contains(example_id)) {
    throw ConflictError(fmt::format("example '{}' was already rated", example_id));
  }
  AnnotationRecord r;
  r.example_id = example_id;
  r.annotator_id = session.annotator_id;
  r.likert = likert;
  if (const auto* gold = plan_.find_gold(example_id)) {
    r.is_gold = true;
    r.gold_expected = gold->expected;
  }
  validate(r);
  io::append_line_locked(annotations_path(), io::dump_line(json(r)));
  state.rated.insert(example_id);
  records_.push_back(std::move(r));
  return progress_locked(state);
}

Progress Service::progress(const std::string& token) const {
  std::shared_lock lock(mu_);
  session_for(token);
  return progress_locked(by_token_.at(token));
}

std::vector<ExportRow> Service::export_rows(const ExportFilter& filter) const {
  std::shared_lock lock(mu_);
  std::map<std::string, std::vector<AnnotationRecord>> by_annotator;
  for (const auto& r : records_) by_annotator[r.annotator_id].push_back(r);
  std::map<std::string, bool> pass;
  for (const auto& [id, recs] : by_annotator) pass[id] = stats::gold_filter(recs).passed;

  std::vector<ExportRow> out;
  for (const auto& r : records_) {
    if (filter.annotator_id && r.annotator_id != *filter.annotator_id) continue;
    if (filter.is_gold && r.is_gold != *filter.is_gold) continue;
    out.push_back({r, pass.at(r.annotator_id)});
  }
  return out;
}

json Service::session_view(const Session& session) const {
  json items = json::array();
  for (const auto& id : session.order) {
    if (const auto* item = plan_.find_item(id)) {
      items.push_back(json{{"example_id", id},
                           {"ground_truth", item->ground_truth},
                           {"candidate", item->prediction}});
    } else if (const auto* gold = plan_.find_gold(id)) {
      items.push_back(json{{"example_id", id},
                           {"ground_truth", gold->ground_truth},
                           {"candidate", gold->prediction}});
    } else {
      throw NotFoundError(fmt::format("example '{}' is missing from the plan", id));
    }
  }
  return json{{"session_token", session.token},
              {"annotator_id", session.annotator_id},
              {"task_id", session.task_id},
              {"instructions", plan_.instructions},
              {"likert_anchors",
               {{"1", "completely different meanings"}, {"5", "essentially identical meanings"}}},
              {"order", session.order},
              {"items", items}};
}

std::vector<AnnotationRecord> load_annotations(const fs::path& path) {
  std::vector<AnnotationRecord> out;
  io::for_each_jsonl(path, [&](const json& row, std::size_t) {
    json r = row;
    r.erase("gold_pass");
    auto rec = r.get<AnnotationRecord>();
    validate(rec);
    out.push_back(std::move(rec));
  });
  return out;
}

std::string export_jsonl(const std::vector<ExportRow>& rows) {
  std::string out;
  for (const auto& row : rows) {
    json j = row.record;
    j["gold_pass"] = row.gold_pass;
    out += io::dump_line(j);
    out += '\n';
  }
  return out;
}

}  // namespace seqstory::annotation
