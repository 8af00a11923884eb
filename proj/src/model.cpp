#include "seqstory/model.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

#include <fmt/format.h>

#include "seqstory/error.hpp"
#include "seqstory/json_fields.hpp"

namespace seqstory {

namespace {

thread_local bool g_lenient_json = false;

std::string strip_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

namespace jsonf {

void reject_unknown(const json& j, std::initializer_list<std::string_view> known,
                    std::string_view type) {
  if (!j.is_object()) {
    throw ValidationError(fmt::format("{}: expected a JSON object", type));
  }
  if (g_lenient_json) return;
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError(fmt::format("{}: unknown field '{}'", type, key));
    }
  }
}

}  // namespace jsonf

using jsonf::field;
using jsonf::field_or;
using jsonf::opt_field;
using jsonf::reject_unknown;

LenientJson::LenientJson() : previous_(g_lenient_json) { g_lenient_json = true; }
LenientJson::~LenientJson() { g_lenient_json = previous_; }

// ---------------------------------------------------------------------------
// enums

std::string_view to_string(Source s) {
  switch (s) {
    case Source::oops: return "oops";
    case Source::didemo: return "didemo";
    case Source::uvo: return "uvo";
    case Source::other: return "other";
  }
  return "other";
}

Source source_from_string(std::string_view s) {
  if (s == "oops") return Source::oops;
  if (s == "didemo") return Source::didemo;
  if (s == "uvo") return Source::uvo;
  if (s == "other") return Source::other;
  throw ValidationError(fmt::format("unknown story source '{}'", s));
}

std::string_view to_string(Pooling p) {
  return p == Pooling::mean ? "mean" : "first_frame";
}

Pooling pooling_from_string(std::string_view s) {
  if (s == "mean") return Pooling::mean;
  if (s == "first_frame") return Pooling::first_frame;
  throw ValidationError(fmt::format("unknown pooling '{}'", s));
}

std::string_view to_string(ContextMode m) {
  switch (m) {
    case ContextMode::imagechain: return "imagechain";
    case ContextMode::visual_context: return "visual_context";
    case ContextMode::final_scene: return "final_scene";
    case ContextMode::icl: return "icl";
  }
  return "imagechain";
}

ContextMode context_mode_from_string(std::string_view s) {
  if (s == "imagechain") return ContextMode::imagechain;
  if (s == "visual_context") return ContextMode::visual_context;
  if (s == "final_scene") return ContextMode::final_scene;
  if (s == "icl") return ContextMode::icl;
  throw ValidationError(fmt::format("unknown context mode '{}'", s));
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::similar: return "similar";
    case Verdict::not_similar: return "not_similar";
    case Verdict::invalid: return "invalid";
  }
  return "invalid";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "similar") return Verdict::similar;
  if (s == "not_similar") return Verdict::not_similar;
  if (s == "invalid") return Verdict::invalid;
  throw ValidationError(fmt::format("unknown verdict '{}'", s));
}

void to_json(json& j, Source v) { j = std::string(to_string(v)); }
void to_json(json& j, Pooling v) { j = std::string(to_string(v)); }
void to_json(json& j, ContextMode v) { j = std::string(to_string(v)); }
void to_json(json& j, Verdict v) { j = std::string(to_string(v)); }

std::string_view question_for_turn(int index) {
  return index <= 1 ? kFirstQuestion : kNextQuestion;
}

// ---------------------------------------------------------------------------
// Scene / Story

Scene::Scene(double start, double end, std::string description,
             std::vector<Frame> frames)
    : start_(start),
      end_(end),
      description_(strip_trailing_newlines(std::move(description))),
      frames_(std::move(frames)) {
  if (!std::isfinite(start_) || !std::isfinite(end_) || start_ < 0.0) {
    throw ValidationError(
        fmt::format("scene bounds must be finite and non-negative ({}, {})",
                    start_, end_));
  }
  if (!(end_ > start_)) {
    throw ValidationError(
        fmt::format("scene end {} must be greater than start {}", end_, start_));
  }
  if (description_.empty()) {
    throw ValidationError(
        fmt::format("scene [{}, {}] has an empty description", start_, end_));
  }
  if (frames_.size() == 1) {
    throw ValidationError(
        fmt::format("scene [{}, {}] has 1 frame; at least 2 are required",
                    start_, end_));
  }
  for (std::size_t k = 0; k < frames_.size(); ++k) {
    const Frame& f = frames_[k];
    if (f.index != static_cast<int>(k)) {
      throw ValidationError(fmt::format(
          "scene [{}, {}]: frame {} carries index {}", start_, end_, k, f.index));
    }
    if (!(f.timestamp >= 0.0) || !std::isfinite(f.timestamp)) {
      throw ValidationError(
          fmt::format("scene [{}, {}]: frame {} has a negative timestamp",
                      start_, end_, k));
    }
    if (k > 0 && !(f.timestamp > frames_[k - 1].timestamp)) {
      throw ValidationError(fmt::format(
          "scene [{}, {}]: frame timestamps must be strictly increasing",
          start_, end_));
    }
  }
}

Scene Scene::with_frames(std::vector<Frame> frames) const {
  return Scene(start_, end_, description_, std::move(frames));
}

Story::Story(std::string id, Source source, std::vector<Scene> scenes,
             std::optional<double> total_duration, std::string video)
    : id_(std::move(id)),
      source_(source),
      scenes_(std::move(scenes)),
      total_duration_(0.0),
      video_(std::move(video)) {
  if (id_.empty()) throw ValidationError("story id must be non-empty");
  if (scenes_.empty()) {
    throw ValidationError(fmt::format("story '{}' has no scenes", id_));
  }
  double summed = 0.0;
  for (std::size_t i = 0; i < scenes_.size(); ++i) {
    summed += scenes_[i].duration();
    if (i > 0 && scenes_[i].start() < scenes_[i - 1].end()) {
      throw ValidationError(fmt::format(
          "story '{}': scene {} starts at {} before scene {} ends at {}", id_, i,
          scenes_[i].start(), i - 1, scenes_[i - 1].end()));
    }
  }
  total_duration_ = total_duration.value_or(scenes_.back().end());
  // Allow for rounding in annotated durations.
  if (!std::isfinite(total_duration_) || total_duration_ + 1e-9 < summed) {
    throw ValidationError(fmt::format(
        "story '{}': total duration {} is shorter than the summed scene "
        "durations {}",
        id_, total_duration_, summed));
  }
}

Story Story::with_scenes(std::vector<Scene> scenes) const {
  return Story(id_, source_, std::move(scenes), total_duration_, video_);
}

// ---------------------------------------------------------------------------
// conversation invariants

bool ConversationContext::is_inference() const noexcept {
  return !turns.empty() && !turns.back().description.has_value();
}

bool ConversationContext::is_complete() const noexcept {
  return std::all_of(turns.begin(), turns.end(),
                     [](const Turn& t) { return t.description.has_value(); });
}

void validate(const ConversationContext& ctx) {
  const auto fail = [&](const std::string& msg) {
    throw ValidationError(fmt::format("context '{}': {}", ctx.story_id, msg));
  };
  if (ctx.turns.empty()) fail("no turns");
  for (std::size_t i = 0; i < ctx.turns.size(); ++i) {
    const Turn& t = ctx.turns[i];
    if (t.index != static_cast<int>(i) + 1) {
      fail(fmt::format("turn {} carries index {}", i + 1, t.index));
    }
    if (t.question != question_for_turn(t.index)) {
      fail(fmt::format("turn {} has question '{}'", t.index, t.question));
    }
    const bool last = i + 1 == ctx.turns.size();
    if (!t.description && !last) {
      fail(fmt::format("turn {} is withheld but is not the final turn", t.index));
    }
    if (t.description && t.description->empty()) {
      const bool stripped = ctx.mode == ContextMode::visual_context && !last;
      if (!stripped) fail(fmt::format("turn {} has an empty description", t.index));
    }
    if (ctx.mode == ContextMode::visual_context && !last && t.description &&
        !t.description->empty()) {
      fail("visual_context keeps a prior description");
    }
  }
  if (ctx.mode == ContextMode::final_scene && ctx.turns.size() != 1) {
    fail("final_scene contexts have exactly one turn");
  }
  if (ctx.mode == ContextMode::icl) {
    if (ctx.demonstrations.empty()) fail("icl context without demonstrations");
    for (const auto& demo : ctx.demonstrations) {
      if (demo.mode != ContextMode::imagechain || !demo.is_complete() ||
          !demo.demonstrations.empty()) {
        fail(fmt::format("demonstration '{}' is not a complete imagechain "
                         "conversation",
                         demo.story_id));
      }
      validate(demo);
    }
  } else if (!ctx.demonstrations.empty()) {
    fail("demonstrations are only allowed in icl mode");
  }
}

std::string EvalRecord::key() const { return story_id + "/" + model_id; }

void validate(const AnnotationRecord& r) {
  if (r.likert < 1 || r.likert > 5) {
    throw ValidationError(fmt::format("likert {} outside 1..5", r.likert));
  }
  if (r.is_gold != r.gold_expected.has_value()) {
    throw ValidationError(fmt::format(
        "annotation for '{}': gold_expected must be present iff is_gold",
        r.example_id));
  }
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const Frame& v) {
  j = json{{"index", v.index}, {"timestamp", v.timestamp}, {"image_ref", v.image_ref}};
}

void from_json(const json& j, Frame& v) {
  reject_unknown(j, {"index", "timestamp", "image_ref"}, "Frame");
  v.index = field<int>(j, "index", "Frame");
  v.timestamp = field<double>(j, "timestamp", "Frame");
  v.image_ref = field<std::string>(j, "image_ref", "Frame");
}

json scene_to_json(const Scene& s) {
  return json{{"start", s.start()},
              {"end", s.end()},
              {"description", s.description()},
              {"frames", s.frames()}};
}

Scene scene_from_json(const json& j) {
  reject_unknown(j, {"start", "end", "description", "frames"}, "Scene");
  return Scene(field<double>(j, "start", "Scene"), field<double>(j, "end", "Scene"),
               field<std::string>(j, "description", "Scene"),
               field_or<std::vector<Frame>>(j, "frames", {}, "Scene"));
}

json story_to_json(const Story& s) {
  json j{{"id", s.id()},
         {"source", s.source()},
         {"total_duration", s.total_duration()},
         {"scenes", s.scenes()}};
  if (!s.video().empty()) j["video"] = s.video();
  return j;
}

Story story_from_json(const json& j) {
  reject_unknown(j, {"id", "source", "total_duration", "scenes", "video"}, "Story");
  auto scenes_json = j.find("scenes");
  if (scenes_json == j.end()) {
    throw ValidationError("Story: missing field 'scenes'");
  }
  if (!scenes_json->is_array()) {
    throw ValidationError("Story: field 'scenes' must be an array");
  }
  std::vector<Scene> scenes;
  for (const auto& s : *scenes_json) scenes.push_back(scene_from_json(s));
  std::optional<double> total;
  if (j.contains("total_duration")) total = field<double>(j, "total_duration", "Story");
  return Story(field<std::string>(j, "id", "Story"),
               source_from_string(field_or<std::string>(j, "source", "other", "Story")),
               std::move(scenes), total, field_or<std::string>(j, "video", "", "Story"));
}

void to_json(json& j, const SceneAllocation& v) {
  j = json{{"scene_index", v.scene_index}, {"count", v.count}, {"timestamps", v.timestamps}};
}

void from_json(const json& j, SceneAllocation& v) {
  reject_unknown(j, {"scene_index", "count", "timestamps"}, "SceneAllocation");
  v.scene_index = field<int>(j, "scene_index", "SceneAllocation");
  v.count = field<int>(j, "count", "SceneAllocation");
  v.timestamps = field<std::vector<double>>(j, "timestamps", "SceneAllocation");
}

void to_json(json& j, const FramePlan& v) {
  j = json{{"story_id", v.story_id},
           {"budget", v.budget},
           {"offset", v.offset},
           {"scenes", v.scenes}};
}

void from_json(const json& j, FramePlan& v) {
  reject_unknown(j, {"story_id", "budget", "offset", "scenes"}, "FramePlan");
  v.story_id = field<std::string>(j, "story_id", "FramePlan");
  v.budget = field<int>(j, "budget", "FramePlan");
  v.offset = field<double>(j, "offset", "FramePlan");
  v.scenes = field<std::vector<SceneAllocation>>(j, "scenes", "FramePlan");
}

void to_json(json& j, const FrameEmbedding& v) {
  j = json{{"vector", v.vector}, {"frame_index", v.frame_index}, {"encoder_id", v.encoder_id}};
}

void from_json(const json& j, FrameEmbedding& v) {
  reject_unknown(j, {"vector", "frame_index", "encoder_id"}, "FrameEmbedding");
  v.vector = field<std::vector<float>>(j, "vector", "FrameEmbedding");
  v.frame_index = field<int>(j, "frame_index", "FrameEmbedding");
  v.encoder_id = field<std::string>(j, "encoder_id", "FrameEmbedding");
}

void to_json(json& j, const SceneEmbedding& v) {
  j = json{{"vector", v.vector}, {"pooling", v.pooling}, {"scene_index", v.scene_index}};
}

void from_json(const json& j, SceneEmbedding& v) {
  reject_unknown(j, {"vector", "pooling", "scene_index"}, "SceneEmbedding");
  v.vector = field<std::vector<float>>(j, "vector", "SceneEmbedding");
  v.pooling = pooling_from_string(field<std::string>(j, "pooling", "SceneEmbedding"));
  v.scene_index = field<int>(j, "scene_index", "SceneEmbedding");
}

void to_json(json& j, const Turn& v) {
  j = json{{"index", v.index}, {"question", v.question}, {"embedding", v.embedding}};
  j["description"] = v.description ? json(*v.description) : json(nullptr);
}

void from_json(const json& j, Turn& v) {
  reject_unknown(j, {"index", "question", "embedding", "description"}, "Turn");
  v.index = field<int>(j, "index", "Turn");
  v.question = field<std::string>(j, "question", "Turn");
  v.embedding = field<SceneEmbedding>(j, "embedding", "Turn");
  v.description = opt_field<std::string>(j, "description", "Turn");
}

void to_json(json& j, const ConversationContext& v) {
  j = json{{"story_id", v.story_id}, {"mode", v.mode}, {"turns", v.turns}};
  if (!v.demonstrations.empty()) j["demonstrations"] = v.demonstrations;
}

void from_json(const json& j, ConversationContext& v) {
  reject_unknown(j, {"story_id", "mode", "turns", "demonstrations"}, "ConversationContext");
  v.story_id = field<std::string>(j, "story_id", "ConversationContext");
  v.mode = context_mode_from_string(field<std::string>(j, "mode", "ConversationContext"));
  v.turns = field<std::vector<Turn>>(j, "turns", "ConversationContext");
  v.demonstrations = field_or<std::vector<ConversationContext>>(
      j, "demonstrations", {}, "ConversationContext");
}

void to_json(json& j, const Span& v) { j = json::array({v.start, v.end}); }

void from_json(const json& j, Span& v) {
  if (!j.is_array() || j.size() != 2) {
    throw ValidationError("Span: expected a [start, end] pair");
  }
  v.start = j[0].get<std::size_t>();
  v.end = j[1].get<std::size_t>();
}

void to_json(json& j, const SerializedConversation& v) {
  j = json{{"text", v.text},
           {"image_slots", v.image_slots},
           {"supervised_spans", v.supervised_spans}};
  j["token_count"] = v.token_count ? json(*v.token_count) : json(nullptr);
}

void from_json(const json& j, SerializedConversation& v) {
  reject_unknown(j, {"text", "image_slots", "supervised_spans", "token_count"},
                 "SerializedConversation");
  v.text = field<std::string>(j, "text", "SerializedConversation");
  v.image_slots = field<std::vector<std::size_t>>(j, "image_slots", "SerializedConversation");
  v.supervised_spans = field<std::vector<Span>>(j, "supervised_spans", "SerializedConversation");
  v.token_count = opt_field<std::size_t>(j, "token_count",
                                                       "SerializedConversation");
}

void to_json(json& j, const EvalRecord& v) {
  j = json{{"story_id", v.story_id},
           {"context_length", v.context_length},
           {"model_id", v.model_id},
           {"prediction", v.prediction},
           {"ground_truth", v.ground_truth},
           {"judge_id", v.judge_id},
           {"retry_count", v.retry_count}};
  j["verdict"] = v.verdict ? json(*v.verdict) : json(nullptr);
}

void from_json(const json& j, EvalRecord& v) {
  reject_unknown(j,
                 {"story_id", "context_length", "model_id", "prediction",
                  "ground_truth", "verdict", "judge_id", "retry_count"},
                 "EvalRecord");
  v.story_id = field<std::string>(j, "story_id", "EvalRecord");
  v.context_length = field<int>(j, "context_length", "EvalRecord");
  if (v.context_length < 1) {
    throw ValidationError(fmt::format("EvalRecord '{}': context_length {} < 1",
                                      v.story_id, v.context_length));
  }
  v.model_id = field<std::string>(j, "model_id", "EvalRecord");
  v.prediction = field<std::string>(j, "prediction", "EvalRecord");
  v.ground_truth = field<std::string>(j, "ground_truth", "EvalRecord");
  v.judge_id = field_or<std::string>(j, "judge_id", "", "EvalRecord");
  v.retry_count = field_or<int>(j, "retry_count", 0, "EvalRecord");
  auto verdict = opt_field<std::string>(j, "verdict", "EvalRecord");
  v.verdict = verdict ? std::optional(verdict_from_string(*verdict)) : std::nullopt;
}

void to_json(json& j, const AnnotationRecord& v) {
  j = json{{"example_id", v.example_id},
           {"annotator_id", v.annotator_id},
           {"likert", v.likert},
           {"is_gold", v.is_gold}};
  j["gold_expected"] = v.gold_expected ? json(*v.gold_expected) : json(nullptr);
}

void from_json(const json& j, AnnotationRecord& v) {
  reject_unknown(j, {"example_id", "annotator_id", "likert", "is_gold", "gold_expected"},
                 "AnnotationRecord");
  v.example_id = field<std::string>(j, "example_id", "AnnotationRecord");
  v.annotator_id = field<std::string>(j, "annotator_id", "AnnotationRecord");
  v.likert = field<int>(j, "likert", "AnnotationRecord");
  v.is_gold = field<bool>(j, "is_gold", "AnnotationRecord");
  v.gold_expected =
      opt_field<bool>(j, "gold_expected", "AnnotationRecord");
  validate(v);
}

}  // namespace seqstory
