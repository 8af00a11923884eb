#pragma once
// Shared domain types: the story/scene/frame hierarchy, embeddings,
// conversation contexts and the evaluation/annotation records.
//
// Scene and Story validate their invariants on construction and are
// immutable afterwards. The remaining types are plain aggregates with
// explicit validate() helpers used at module boundaries.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace seqstory {

using json = nlohmann::json;

struct Frame {
  int index = 0;           // ordinal within the scene
  double timestamp = 0.0;  // seconds from story start
  std::string image_ref;   // path of the extracted image

  bool operator==(const Frame&) const = default;
};

enum class Source { oops, didemo, uvo, other };

std::string_view to_string(Source s);
Source source_from_string(std::string_view s);

class Scene {
 public:
  /// Trailing newlines are removed from `description`; nothing else is
  /// touched. Throws ValidationError on end <= start, empty description, or
  /// a frame list that breaks ordering (K must be 0 before extraction, >= 2
  /// after).
  Scene(double start, double end, std::string description,
        std::vector<Frame> frames = {});

  double start() const noexcept { return start_; }
  double end() const noexcept { return end_; }
  double duration() const noexcept { return end_ - start_; }
  const std::string& description() const noexcept { return description_; }
  const std::vector<Frame>& frames() const noexcept { return frames_; }

  Scene with_frames(std::vector<Frame> frames) const;

  bool operator==(const Scene&) const = default;

 private:
  double start_;
  double end_;
  std::string description_;
  std::vector<Frame> frames_;
};

class Story {
 public:
  /// `total_duration` defaults to the end of the last scene. `video` is the
  /// source video path used by frame extraction (may be empty).
  Story(std::string id, Source source, std::vector<Scene> scenes,
        std::optional<double> total_duration = std::nullopt,
        std::string video = {});

  const std::string& id() const noexcept { return id_; }
  Source source() const noexcept { return source_; }
  const std::vector<Scene>& scenes() const noexcept { return scenes_; }
  std::size_t scene_count() const noexcept { return scenes_.size(); }
  double total_duration() const noexcept { return total_duration_; }
  const std::string& video() const noexcept { return video_; }

  Story with_scenes(std::vector<Scene> scenes) const;

  bool operator==(const Story&) const = default;

 private:
  std::string id_;
  Source source_;
  std::vector<Scene> scenes_;
  double total_duration_;
  std::string video_;
};

struct SceneAllocation {
  int scene_index = 0;
  int count = 0;
  std::vector<double> timestamps;

  bool operator==(const SceneAllocation&) const = default;
};

struct FramePlan {
  std::string story_id;
  int budget = 0;
  double offset = 0.2;
  std::vector<SceneAllocation> scenes;

  bool operator==(const FramePlan&) const = default;
};

struct FrameEmbedding {
  std::vector<float> vector;
  int frame_index = 0;
  std::string encoder_id;

  bool operator==(const FrameEmbedding&) const = default;
};

enum class Pooling { mean, first_frame };

std::string_view to_string(Pooling p);
Pooling pooling_from_string(std::string_view s);

struct SceneEmbedding {
  std::vector<float> vector;
  Pooling pooling = Pooling::mean;
  int scene_index = 0;

  bool operator==(const SceneEmbedding&) const = default;
};

inline constexpr std::string_view kFirstQuestion =
    "What is happening in this image?";
inline constexpr std::string_view kNextQuestion =
    "What is happening in the next image?";

/// Question for a 1-based turn index.
std::string_view question_for_turn(int index);

struct Turn {
  int index = 1;  // 1-based
  std::string question;
  SceneEmbedding embedding;
  std::optional<std::string> description;  // absent when withheld

  bool operator==(const Turn&) const = default;
};

enum class ContextMode { imagechain, visual_context, final_scene, icl };

std::string_view to_string(ContextMode m);
ContextMode context_mode_from_string(std::string_view s);

struct ConversationContext {
  std::string story_id;
  std::vector<Turn> turns;
  ContextMode mode = ContextMode::imagechain;
  std::vector<ConversationContext> demonstrations;  // icl only

  /// True when the final turn's description is withheld.
  bool is_inference() const noexcept;
  bool is_complete() const noexcept;

  bool operator==(const ConversationContext&) const = default;
};

/// Checks question strings, turn numbering, withheld-turn placement and the
/// per-mode invariants. Throws ValidationError.
void validate(const ConversationContext& ctx);

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive

  bool operator==(const Span&) const = default;
};

struct SerializedConversation {
  std::string text;
  std::vector<std::size_t> image_slots;
  std::vector<Span> supervised_spans;
  std::optional<std::size_t> token_count;

  bool operator==(const SerializedConversation&) const = default;
};

enum class Verdict { similar, not_similar, invalid };

std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

struct EvalRecord {
  std::string story_id;
  int context_length = 1;
  std::string model_id;
  std::string prediction;
  std::string ground_truth;
  std::optional<Verdict> verdict;
  std::string judge_id;
  int retry_count = 0;

  /// story_id/model_id, used in batch error reports and audit logs.
  std::string key() const;

  bool operator==(const EvalRecord&) const = default;
};

struct AnnotationRecord {
  std::string example_id;
  std::string annotator_id;
  int likert = 3;
  bool is_gold = false;
  std::optional<bool> gold_expected;

  bool operator==(const AnnotationRecord&) const = default;
};

void validate(const AnnotationRecord& r);

// JSON. Parsing rejects unknown object keys unless a LenientJson guard is
// alive on the current thread.

class LenientJson {
 public:
  LenientJson();
  ~LenientJson();
  LenientJson(const LenientJson&) = delete;
  LenientJson& operator=(const LenientJson&) = delete;

 private:
  bool previous_;
};

void to_json(json& j, const Frame& v);
void from_json(const json& j, Frame& v);
void to_json(json& j, const SceneAllocation& v);
void from_json(const json& j, SceneAllocation& v);
void to_json(json& j, const FramePlan& v);
void from_json(const json& j, FramePlan& v);
void to_json(json& j, const FrameEmbedding& v);
void from_json(const json& j, FrameEmbedding& v);
void to_json(json& j, const SceneEmbedding& v);
void from_json(const json& j, SceneEmbedding& v);
void to_json(json& j, const Turn& v);
void from_json(const json& j, Turn& v);
void to_json(json& j, const ConversationContext& v);
void from_json(const json& j, ConversationContext& v);
void to_json(json& j, const Span& v);
void from_json(const json& j, Span& v);
void to_json(json& j, const SerializedConversation& v);
void from_json(const json& j, SerializedConversation& v);
void to_json(json& j, const EvalRecord& v);
void from_json(const json& j, EvalRecord& v);
void to_json(json& j, const AnnotationRecord& v);
void from_json(const json& j, AnnotationRecord& v);

void to_json(json& j, Source v);
void to_json(json& j, Pooling v);
void to_json(json& j, ContextMode v);
void to_json(json& j, Verdict v);

Scene scene_from_json(const json& j);
Story story_from_json(const json& j);
json scene_to_json(const Scene& s);
json story_to_json(const Story& s);

}  // namespace seqstory

namespace nlohmann {

template <>
struct adl_serializer<seqstory::Scene> {
  static seqstory::Scene from_json(const json& j) {
    return seqstory::scene_from_json(j);
  }
  static void to_json(json& j, const seqstory::Scene& s) {
    j = seqstory::scene_to_json(s);
  }
};

template <>
struct adl_serializer<seqstory::Story> {
  static seqstory::Story from_json(const json& j) {
    return seqstory::story_from_json(j);
  }
  static void to_json(json& j, const seqstory::Story& s) {
    j = seqstory::story_to_json(s);
  }
};

}  // namespace nlohmann
