#pragma once
// Frame budgets, per-scene allocation, timestamp sampling and extraction
// through an external decoder process.

#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "seqstory/concurrency.hpp"
#include "seqstory/model.hpp"

namespace seqstory::frames {

struct BudgetBucket {
  double max_duration;  // inclusive upper bound in seconds
  int frame_count;

  bool operator==(const BudgetBucket&) const = default;
};

class BudgetTable {
 public:
  /// Thresholds and frame counts must both be strictly increasing and the
  /// last threshold must be +inf so every duration maps to a bucket.
  explicit BudgetTable(std::vector<BudgetBucket> buckets);

  /// (5, 8) (10, 12) (15, 15) (30, 20) (inf, 25)
  static const BudgetTable& standard();

  const std::vector<BudgetBucket>& buckets() const noexcept { return buckets_; }

 private:
  std::vector<BudgetBucket> buckets_;
};

inline constexpr double kDefaultOffset = 0.2;
inline constexpr double kMinWindow = 1e-3;

/// Frame count of the first bucket whose threshold is >= duration.
int budget_for_duration(double duration,
                        const BudgetTable& table = BudgetTable::standard());

/// K_s = max(2, floor(m_s / M * F)) per scene, in scene order. The sum may
/// exceed F; nothing is rebalanced.
std::vector<int> allocate_frames(const Story& story, int budget);

/// Midpoints of `count` equal sub-intervals of the effective window
/// [start + (is_first_scene ? 0 : offset), end].
std::vector<double> sample_timestamps(const Scene& scene, int count, double offset,
                                      bool is_first_scene,
                                      std::string_view scene_name = {});

/// Budget from the raw story duration, allocation, and timestamps.
FramePlan plan_frames(const Story& story, double offset = kDefaultOffset,
                      const BudgetTable& table = BudgetTable::standard());

struct DecoderConfig {
  /// argv template. Placeholders: {video}, {t} (seconds, millisecond
  /// precision) and {out}.
  std::vector<std::string> command = {"ffmpeg", "-nostdin", "-loglevel", "error",
                                      "-y",     "-ss",      "{t}",       "-i",
                                      "{video}", "-frames:v", "1",        "{out}"};
  std::string extension = "jpg";
  std::size_t max_concurrent = 4;
};

DecoderConfig decoder_config_from_json(const json& j);
json to_json(const DecoderConfig& c);

struct ExtractStats {
  int decoder_invocations = 0;
  int skipped = 0;
};

/// Materializes one image per planned timestamp under
/// `out_dir/{story_id}/{scene:02}_{k:02}.{ext}` and writes
/// `out_dir/{story_id}/manifest.json`. Frame image_refs are relative to
/// `out_dir`. Files already recorded in the manifest with a matching size are
/// not decoded again. On any decoder failure the files produced by this call
/// are removed and a PipelineError carrying the decoder's stderr is thrown.
///
/// A relative story video path is resolved against `video_root`.
Story extract_frames(const Story& story, const FramePlan& plan,
                     const DecoderConfig& decoder,
                     const std::filesystem::path& out_dir,
                     const std::filesystem::path& video_root = {},
                     ExtractStats* stats = nullptr, Gate* decoder_gate = nullptr);

/// Plans and extracts every story on up to `jobs` threads; decoder processes
/// are bounded by decoder.max_concurrent. Output order matches input order.
/// Throws BatchError naming the failed story ids after all stories ran.
std::vector<Story> extract_all(const std::vector<Story>& stories, double offset,
                               const DecoderConfig& decoder,
                               const std::filesystem::path& out_dir,
                               const std::filesystem::path& video_root,
                               std::size_t jobs, ExtractStats* stats = nullptr);

std::string frame_file_name(int scene_index, int frame_index, std::string_view extension);

}  // namespace seqstory::frames
