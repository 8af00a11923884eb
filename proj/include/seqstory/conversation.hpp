#pragma once
// Multi-turn conversation contexts, transcript rendering with loss-mask
// spans, and the training export.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqstory/model.hpp"

namespace seqstory::conversation {

/// One turn per scene with the fixed user questions; mode imagechain.
ConversationContext build_conversation(const Story& story,
                                       std::span<const SceneEmbedding> embeddings);

inline constexpr std::size_t kDefaultDemonstrations = 3;

/// Context for predicting turn `tau` (1-based) of a complete conversation:
///   imagechain      turns 1..tau-1 complete, tau withheld
///   visual_context  as imagechain with prior descriptions emptied
///   final_scene     only turn tau, renumbered as a single first turn
///   icl             as imagechain, with `demos` attached
ConversationContext build_inference_context(
    const ConversationContext& conversation, int tau, ContextMode mode,
    std::span<const ConversationContext> demos = {});

/// Training-time counterpart used by the baseline variants: the full
/// conversation for imagechain, emptied prior descriptions for
/// visual_context, and only the final turn for final_scene.
ConversationContext build_training_context(const ConversationContext& conversation,
                                           ContextMode mode);

/// `count` complete conversations drawn without replacement from `pool`
/// (skipping `exclude_story`) with a portable seeded shuffle.
std::vector<ConversationContext> pick_demonstrations(
    std::span<const ConversationContext> pool, std::size_t count, std::uint64_t seed,
    std::string_view exclude_story = {});

struct TemplateConfig {
  std::string name = "imagechain-default";
  std::string bos = "<s>";
  std::string eos = "</s>";
  std::string user_tag = "USER:";
  std::string assistant_tag = "ASSISTANT:";
  std::string image_placeholder = "<Image><image></Image>";
  std::string separator = " ";
  std::string turn_separator = "\n";

  /// bos, eos, user_tag, assistant_tag and image_placeholder are required;
  /// the separators and name are optional. Unknown keys are rejected.
  static TemplateConfig from_json(const json& j);
  json to_json() const;
  /// sha256 of the canonical JSON form.
  std::string hash() const;

  bool operator==(const TemplateConfig&) const = default;
};

/// Renders demonstrations (icl) and then the context's turns:
///
///   {bos} {user_tag} {question} {image}\n{assistant_tag} {description} {eos}
///
/// Turns are joined by turn_separator. A withheld turn ends right after
/// assistant_tag. Every complete turn contributes one supervised span from the
/// first byte of its description through the end of eos.
SerializedConversation serialize(const ConversationContext& context,
                                 const TemplateConfig& tmpl = {});

struct ExportMetadata {
  std::string encoder_id;
  Pooling pooling = Pooling::mean;
  json hyperparameters;  // passthrough, may be null
  std::optional<std::uint64_t> seed;
};

/// One JSONL row per conversation plus `{out}.manifest.json`. Rejects
/// contexts with a withheld description.
std::size_t export_training_set(std::span<const ConversationContext> contexts,
                                 const TemplateConfig& tmpl, const std::filesystem::path& out,
                                 const ExportMetadata& meta);

std::vector<ConversationContext> import_training_set(const std::filesystem::path& path);

std::filesystem::path manifest_path_for(const std::filesystem::path& export_path);

/// transcript/image_slots/supervised_spans/context row shared by training
/// and inference exports.
json render_row(const ConversationContext& context, const TemplateConfig& tmpl);

}  // namespace seqstory::conversation
