#pragma once
// Story manifests, train/val/reserved splits and context-length settings.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "seqstory/model.hpp"

namespace seqstory::dataset {

inline constexpr int kMinSplitScenes = 2;
inline constexpr int kMaxSplitScenes = 7;
inline constexpr double kValFraction = 0.2;

struct Split {
  std::uint64_t seed = 0;
  std::vector<Story> train;
  std::vector<Story> val;
  std::vector<Story> reserved;
};

/// Stories with 2..7 scenes are split per scene count: each stratum is sorted
/// by id, shuffled with a seed derived from (seed, scene count), and the first
/// round(0.2 * n) go to val. Everything else is reserved. Each output list
/// keeps input order. Throws on empty input or duplicate ids.
Split split_dataset(const std::vector<Story>& stories, std::uint64_t seed,
                    double val_fraction = kValFraction);

/// Inclusive range of scene counts: C2 = [2, 2], C4-7 = [4, 7].
struct ContextSetting {
  int min_scenes = 2;
  int max_scenes = 2;

  /// Accepts "C3", "c3", "C4-7", "C4_7" and "C4–7".
  static ContextSetting parse(std::string_view name);
  static ContextSetting exactly(int n) { return {n, n}; }
  std::string name() const;
  bool contains(int scenes) const { return scenes >= min_scenes && scenes <= max_scenes; }

  bool operator==(const ContextSetting&) const = default;
};

struct EvalInstance {
  std::string story_id;
  int context_length = 0;  // scenes in the context, including the target
  int target_turn = 0;     // 1-based turn whose description is predicted

  bool operator==(const EvalInstance&) const = default;
};

void to_json(json& j, const EvalInstance& v);
void from_json(const json& j, EvalInstance& v);

/// One instance per qualifying story predicting its final scene. With
/// `per_turn`, every turn 2..T of a qualifying story becomes an instance.
std::vector<EvalInstance> select_context_setting(const std::vector<Story>& stories,
                                                 const ContextSetting& setting,
                                                 bool per_turn = false);

struct Manifest {
  json header;  // null when the file has no header row
  std::vector<Story> stories;
};

/// JSONL of stories, optionally preceded by a `{"header": {...}}` row.
/// Unknown fields are rejected unless `allow_unknown_fields`. Errors carry
/// the file name and line number.
Manifest load_manifest(const std::filesystem::path& path, bool allow_unknown_fields = false);

/// Temp-file-and-rename write.
void save_manifest(const std::vector<Story>& stories, const std::filesystem::path& path,
                   const json& header = nullptr);

/// Writes train.jsonl, val.jsonl, reserved.jsonl (each with a header row
/// carrying the seed) and histogram.csv into `dir`.
void write_split(const Split& split, const std::filesystem::path& dir);

std::map<int, int> scene_histogram(const std::vector<Story>& stories);

/// "scene_count,story_count" followed by one row per scene count.
std::string histogram_csv(const std::map<int, int>& histogram);

}  // namespace seqstory::dataset
