#include "seqstory/conversation.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "seqstory/error.hpp"
#include "seqstory/hashing.hpp"
#include "seqstory/jsonl.hpp"

namespace seqstory::conversation {

namespace fs = std::filesystem;

ConversationContext build_conversation(const Story& story,
                                       std::span<const SceneEmbedding> embeddings) {
  if (embeddings.size() != story.scene_count()) {
    throw ValidationError(fmt::format("story '{}' has {} scenes but {} embeddings", story.id(),
                                      story.scene_count(), embeddings.size()));
  }
  ConversationContext ctx;
  ctx.story_id = story.id();
  ctx.mode = ContextMode::imagechain;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const int index = static_cast<int>(i) + 1;
    const std::string& description = story.scenes()[i].description();
    if (description.empty()) {
      throw ValidationError(
          fmt::format("story '{}' scene {} has an empty description", story.id(), i));
    }
    ctx.turns.push_back(
        Turn{index, std::string(question_for_turn(index)), embeddings[i], description});
  }
  return ctx;
}

namespace {

void require_complete(const ConversationContext& c, std::string_view what) {
  if (!c.is_complete()) {
    throw ValidationError(
        fmt::format("{} '{}' has a withheld description", what, c.story_id));
  }
}

Turn renumbered_first(Turn t) {
  t.index = 1;
  t.question = std::string(kFirstQuestion);
  return t;
}

}  // namespace

ConversationContext build_inference_context(const ConversationContext& conversation, int tau,
                                            ContextMode mode,
                                            std::span<const ConversationContext> demos) {
  require_complete(conversation, "conversation");
  const int total = static_cast<int>(conversation.turns.size());
  if (tau < 1 || tau > total) {
    throw ValidationError(fmt::format("turn {} is outside 1..{} for '{}'", tau, total,
                                      conversation.story_id));
  }
  ConversationContext ctx;
  ctx.story_id = conversation.story_id;
  ctx.mode = mode;
  if (mode == ContextMode::final_scene) {
    Turn t = renumbered_first(conversation.turns[tau - 1]);
    t.description.reset();
    ctx.turns.push_back(std::move(t));
    return ctx;
  }
  ctx.turns.assign(conversation.turns.begin(), conversation.turns.begin() + tau);
  ctx.turns.back().description.reset();
  if (mode == ContextMode::visual_context) {
    for (int i = 0; i + 1 < tau; ++i) ctx.turns[i].description = std::string();
  }
  if (mode == ContextMode::icl) {
    if (demos.empty()) throw ValidationError("icl context requires demonstrations");
    for (const auto& d : demos) {
      require_complete(d, "demonstration");
      ctx.demonstrations.push_back(d);
    }
  } else if (!demos.empty()) {
    throw ValidationError("demonstrations are only used in icl mode");
  }
  validate(ctx);
  return ctx;
}

ConversationContext build_training_context(const ConversationContext& conversation,
                                           ContextMode mode) {
  require_complete(conversation, "conversation");
  ConversationContext ctx = conversation;
  ctx.mode = mode;
  ctx.demonstrations.clear();
  switch (mode) {
    case ContextMode::imagechain:
      break;
    case ContextMode::visual_context:
      for (std::size_t i = 0; i + 1 < ctx.turns.size(); ++i) ctx.turns[i].description = "";
      break;
    case ContextMode::final_scene:
      ctx.turns = {renumbered_first(conversation.turns.back())};
      break;
    case ContextMode::icl:
      throw ValidationError("icl is an inference-only mode");
  }
  validate(ctx);
  return ctx;
}

std::vector<ConversationContext> pick_demonstrations(std::span<const ConversationContext> pool,
                                                     std::size_t count, std::uint64_t seed,
                                                     std::string_view exclude_story) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].story_id != exclude_story && pool[i].is_complete()) candidates.push_back(i);
  }
  if (candidates.size() < count) {
    throw ValidationError(fmt::format("need {} demonstrations but only {} are available",
                                      count, candidates.size()));
  }
  Rng rng(derive_seed(seed, exclude_story));
  portable_shuffle(candidates, rng);
  std::vector<ConversationContext> out;
  for (std::size_t i = 0; i < count; ++i) {
    ConversationContext demo = pool[candidates[i]];
    demo.mode = ContextMode::imagechain;
    demo.demonstrations.clear();
    out.push_back(std::move(demo));
  }
  return out;
}

// ---------------------------------------------------------------------------
// templates and rendering

TemplateConfig TemplateConfig::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("template config must be a JSON object");
  static const std::vector<std::string> required = {"bos", "eos", "user_tag", "assistant_tag",
                                                    "image_placeholder"};
  static const std::vector<std::string> optional = {"name", "separator", "turn_separator"};
  for (const auto& key : required) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw ValidationError(fmt::format("template config is missing required field '{}'", key));
    }
  }
  for (const auto& [key, _] : j.items()) {
    if (std::find(required.begin(), required.end(), key) == required.end() &&
        std::find(optional.begin(), optional.end(), key) == optional.end()) {
      throw ValidationError(fmt::format("template config has unknown field '{}'", key));
    }
  }
  TemplateConfig t;
  t.bos = j["bos"].get<std::string>();
  t.eos = j["eos"].get<std::string>();
  t.user_tag = j["user_tag"].get<std::string>();
  t.assistant_tag = j["assistant_tag"].get<std::string>();
  t.image_placeholder = j["image_placeholder"].get<std::string>();
  if (j.contains("name")) t.name = j["name"].get<std::string>();
  if (j.contains("separator")) t.separator = j["separator"].get<std::string>();
  if (j.contains("turn_separator")) t.turn_separator = j["turn_separator"].get<std::string>();
  if (t.user_tag.empty() || t.assistant_tag.empty() || t.image_placeholder.empty()) {
    throw ValidationError("template tags and image placeholder must be non-empty");
  }
  return t;
}

json TemplateConfig::to_json() const {
  return json{{"name", name},
              {"bos", bos},
              {"eos", eos},
              {"user_tag", user_tag},
              {"assistant_tag", assistant_tag},
              {"image_placeholder", image_placeholder},
              {"separator", separator},
              {"turn_separator", turn_separator}};
}

std::string TemplateConfig::hash() const { return sha256_hex(to_json().dump()); }

namespace {

class Renderer {
 public:
  explicit Renderer(const TemplateConfig& t) : t_(t) {}

  void turns(const std::vector<Turn>& turns) {
    for (const Turn& turn : turns) {
      if (!out_.text.empty()) out_.text += t_.turn_separator;
      if (!t_.bos.empty()) out_.text += t_.bos + t_.separator;
      out_.text += t_.user_tag + t_.separator + turn.question + t_.separator;
      out_.image_slots.push_back(out_.text.size());
      out_.text += t_.image_placeholder + t_.turn_separator + t_.assistant_tag;
      if (!turn.description) continue;
      out_.text += t_.separator;
      const std::size_t start = out_.text.size();
      if (!turn.description->empty()) out_.text += *turn.description + t_.separator;
      out_.text += t_.eos;
      if (out_.text.size() > start) out_.supervised_spans.push_back({start, out_.text.size()});
    }
  }

  SerializedConversation take() { return std::move(out_); }

 private:
  const TemplateConfig& t_;
  SerializedConversation out_;
};

}  // namespace

SerializedConversation serialize(const ConversationContext& context, const TemplateConfig& tmpl) {
  validate(context);
  Renderer r(tmpl);
  for (const auto& demo : context.demonstrations) r.turns(demo.turns);
  r.turns(context.turns);
  return r.take();
}

json render_row(const ConversationContext& context, const TemplateConfig& tmpl) {
  const SerializedConversation s = serialize(context, tmpl);
  return json{{"story_id", context.story_id},
              {"mode", context.mode},
              {"transcript", s.text},
              {"image_slots", s.image_slots},
              {"supervised_spans", s.supervised_spans},
              {"context", context}};
}

fs::path manifest_path_for(const fs::path& export_path) {
  fs::path p = export_path;
  p += ".manifest.json";
  return p;
}

std::size_t export_training_set(std::span<const ConversationContext> contexts,
                                 const TemplateConfig& tmpl, const fs::path& out,
                                 const ExportMetadata& meta) {
  std::vector<json> rows;
  rows.reserve(contexts.size());
  for (const auto& ctx : contexts) {
    if (!ctx.is_complete()) {
      throw ValidationError(fmt::format(
          "context '{}' withholds a description and cannot be exported for training",
          ctx.story_id));
    }
    rows.push_back(render_row(ctx, tmpl));
  }
  io::write_jsonl_atomic(out, rows);
  json manifest{{"schema", "seqstory.training_export/1"},
                {"row_count", rows.size()},
                {"template", tmpl.to_json()},
                {"template_hash", tmpl.hash()},
                {"encoder_id", meta.encoder_id},
                {"pooling", meta.pooling},
                {"embedding_normalization", "none"},
                {"loss_mask", "assistant_description_and_eos_spans"},
                {"hyperparameters", meta.hyperparameters}};
  if (meta.seed) manifest["seed"] = *meta.seed;
  io::write_file_atomic(manifest_path_for(out), manifest.dump(2) + "\n");
  return rows.size();
}

std::vector<ConversationContext> import_training_set(const fs::path& path) {
  std::vector<ConversationContext> out;
  io::for_each_jsonl(path, [&](const json& row, std::size_t) {
    if (!row.contains("context")) throw ValidationError("row has no 'context'");
    auto ctx = row["context"].get<ConversationContext>();
    validate(ctx);
    out.push_back(std::move(ctx));
  });
  return out;
}

}  // namespace seqstory::conversation
