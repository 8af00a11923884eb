#include "seqstory/frames.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "seqstory/error.hpp"
#include "seqstory/hashing.hpp"
#include "seqstory/jsonl.hpp"
#include "seqstory/process.hpp"

namespace seqstory::frames {

namespace fs = std::filesystem;

BudgetTable::BudgetTable(std::vector<BudgetBucket> buckets) : buckets_(std::move(buckets)) {
  if (buckets_.empty()) throw ValidationError("budget table is empty");
  for (std::size_t i = 0; i < buckets_.size(); ++i) {
    if (buckets_[i].frame_count < 2) {
      throw ValidationError("budget table frame counts must be >= 2");
    }
    if (i > 0 && !(buckets_[i].max_duration > buckets_[i - 1].max_duration)) {
      throw ValidationError("budget table thresholds must be strictly increasing");
    }
    if (i > 0 && !(buckets_[i].frame_count > buckets_[i - 1].frame_count)) {
      throw ValidationError("budget table frame counts must be strictly increasing");
    }
  }
  if (!std::isinf(buckets_.back().max_duration)) {
    throw ValidationError("the last budget bucket must be unbounded");
  }
}

const BudgetTable& BudgetTable::standard() {
  static const BudgetTable table({{5.0, 8},
                                  {10.0, 12},
                                  {15.0, 15},
                                  {30.0, 20},
                                  {std::numeric_limits<double>::infinity(), 25}});
  return table;
}

int budget_for_duration(double duration, const BudgetTable& table) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw ValidationError(fmt::format("story duration must be positive, got {}", duration));
  }
  for (const auto& bucket : table.buckets()) {
    if (duration <= bucket.max_duration) return bucket.frame_count;
  }
  return table.buckets().back().frame_count;
}

std::vector<int> allocate_frames(const Story& story, int budget) {
  if (budget < 2) {
    throw ValidationError(fmt::format("frame budget must be >= 2, got {}", budget));
  }
  const double total = story.total_duration();
  if (!(total > 0.0)) {
    throw ValidationError(fmt::format("story '{}' has zero total duration", story.id()));
  }
  std::vector<int> counts;
  counts.reserve(story.scene_count());
  for (const Scene& scene : story.scenes()) {
    const double share = scene.duration() / total * budget;
    // Shares that are integers in exact arithmetic can land just below the
    // integer in floating point.
    const int floored = static_cast<int>(std::floor(share + 1e-9));
    counts.push_back(std::max(2, floored));
  }
  return counts;
}

std::vector<double> sample_timestamps(const Scene& scene, int count, double offset,
                                      bool is_first_scene, std::string_view scene_name) {
  const std::string name = scene_name.empty()
                               ? fmt::format("[{}, {}]", scene.start(), scene.end())
                               : std::string(scene_name);
  if (count < 2) {
    throw ValidationError(fmt::format("scene {}: need at least 2 frames, got {}", name, count));
  }
  if (offset < 0.0) throw ValidationError("frame offset must be non-negative");
  const double lo = scene.start() + (is_first_scene ? 0.0 : offset);
  const double hi = scene.end();
  const double width = hi - lo;
  if (width < kMinWindow) {
    throw ValidationError(fmt::format(
        "scene {}: sampling window [{}, {}] is shorter than 1 ms after the {} s offset",
        name, lo, hi, offset));
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out.push_back(lo + width * (2.0 * i + 1.0) / (2.0 * count));
  }
  return out;
}

FramePlan plan_frames(const Story& story, double offset, const BudgetTable& table) {
  FramePlan plan;
  plan.story_id = story.id();
  plan.offset = offset;
  plan.budget = budget_for_duration(story.total_duration(), table);
  const auto counts = allocate_frames(story, plan.budget);
  for (std::size_t s = 0; s < counts.size(); ++s) {
    SceneAllocation alloc;
    alloc.scene_index = static_cast<int>(s);
    alloc.count = counts[s];
    alloc.timestamps = sample_timestamps(story.scenes()[s], counts[s], offset, s == 0,
                                         fmt::format("{}#{}", story.id(), s));
    plan.scenes.push_back(std::move(alloc));
  }
  return plan;
}

DecoderConfig decoder_config_from_json(const json& j) {
  DecoderConfig c;
  if (j.contains("command")) c.command = j.at("command").get<std::vector<std::string>>();
  if (j.contains("extension")) c.extension = j.at("extension").get<std::string>();
  if (j.contains("max_concurrent")) c.max_concurrent = j.at("max_concurrent").get<std::size_t>();
  if (c.command.empty()) throw ValidationError("decoder command template is empty");
  return c;
}

json to_json(const DecoderConfig& c) {
  return json{{"command", c.command}, {"extension", c.extension},
              {"max_concurrent", c.max_concurrent}};
}

std::string frame_file_name(int scene_index, int frame_index, std::string_view extension) {
  return fmt::format("{:02}_{:02}.{}", scene_index, frame_index, extension);
}

namespace {

std::string substitute(std::string arg, std::string_view key, const std::string& value) {
  for (std::size_t pos = arg.find(key); pos != std::string::npos;
       pos = arg.find(key, pos + value.size())) {
    arg.replace(pos, key.size(), value);
  }
  return arg;
}

struct ManifestEntry {
  double timestamp;
  std::uintmax_t size;
};

std::map<std::string, ManifestEntry> load_story_manifest(const fs::path& path) {
  std::map<std::string, ManifestEntry> entries;
  if (!fs::exists(path)) return entries;
  try {
    const json m = json::parse(io::read_file(path));
    for (const auto& f : m.at("frames")) {
      entries[f.at("file").get<std::string>()] = {f.at("timestamp").get<double>(),
                                                  f.at("size").get<std::uintmax_t>()};
    }
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable frame manifest {}: {}", path.string(), e.what());
    entries.clear();
  }
  return entries;
}

}  // namespace

Story extract_frames(const Story& story, const FramePlan& plan, const DecoderConfig& decoder,
                     const fs::path& out_dir, const fs::path& video_root, ExtractStats* stats,
                     Gate* decoder_gate) {
  if (plan.story_id != story.id() || plan.scenes.size() != story.scene_count()) {
    throw ValidationError(fmt::format("frame plan does not match story '{}'", story.id()));
  }
  if (story.video().empty()) {
    throw NotFoundError(fmt::format("story '{}' has no video path", story.id()));
  }
  fs::path video = story.video();
  if (video.is_relative() && !video_root.empty()) video = video_root / video;
  if (!fs::is_regular_file(video)) {
    throw NotFoundError(fmt::format("video for story '{}' not found: {}", story.id(),
                                    video.string()));
  }

  const fs::path story_dir = out_dir / story.id();
  fs::create_directories(story_dir);
  const fs::path manifest_path = story_dir / "manifest.json";
  const auto previous = load_story_manifest(manifest_path);

  std::vector<fs::path> produced;
  auto rollback = [&] {
    std::error_code ec;
    for (const auto& p : produced) fs::remove(p, ec);
  };

  json frame_rows = json::array();
  std::vector<Scene> scenes;
  int invocations = 0;
  int skipped = 0;
  for (std::size_t s = 0; s < plan.scenes.size(); ++s) {
    const SceneAllocation& alloc = plan.scenes[s];
    std::vector<Frame> frames;
    for (std::size_t k = 0; k < alloc.timestamps.size(); ++k) {
      const double t = alloc.timestamps[k];
      const std::string name =
          frame_file_name(static_cast<int>(s), static_cast<int>(k), decoder.extension);
      const fs::path target = story_dir / name;

      auto prev = previous.find(name);
      std::error_code ec;
      const bool reusable = prev != previous.end() && prev->second.timestamp == t &&
                            fs::is_regular_file(target, ec) &&
                            fs::file_size(target, ec) == prev->second.size;
      if (reusable) {
        ++skipped;
      } else {
        fs::path part = story_dir / fmt::format("{}.part.{}", name, decoder.extension);
        std::vector<std::string> argv;
        for (const auto& arg : decoder.command) {
          std::string a = substitute(arg, "{video}", video.string());
          a = substitute(a, "{t}", fmt::format("{:.3f}", t));
          argv.push_back(substitute(a, "{out}", part.string()));
        }
        ProcessResult result;
        try {
          GateLease lease(decoder_gate);
          ++invocations;
          result = run_process(argv);
        } catch (const PipelineError&) {
          rollback();
          throw;
        }
        if (result.exit_code != 0) {
          fs::remove(part, ec);
          rollback();
          throw PipelineError(
              fmt::format("decoder exited with status {} for story '{}' at t={:.3f}",
                          result.exit_code, story.id(), t),
              result.err);
        }
        if (!fs::is_regular_file(part, ec) || fs::file_size(part, ec) == 0) {
          fs::remove(part, ec);
          rollback();
          throw PipelineError(
              fmt::format("decoder produced no image for story '{}' at t={:.3f}", story.id(), t),
              result.err);
        }
        fs::rename(part, target);
        produced.push_back(target);
      }
      const std::string bytes = io::read_file(target);
      frame_rows.push_back(json{{"scene", s},
                                {"index", k},
                                {"timestamp", t},
                                {"file", name},
                                {"size", bytes.size()},
                                {"sha256", sha256_hex(bytes)}});
      frames.push_back(Frame{static_cast<int>(k), t, (fs::path(story.id()) / name).string()});
    }
    scenes.push_back(story.scenes()[s].with_frames(std::move(frames)));
  }

  Story updated = story.with_scenes(std::move(scenes));
  json manifest{{"story_id", story.id()}, {"plan", plan}, {"frames", frame_rows}};
  io::write_file_atomic(manifest_path, manifest.dump(2) + "\n");
  if (stats) {
    stats->decoder_invocations += invocations;
    stats->skipped += skipped;
  }
  return updated;
}

std::vector<Story> extract_all(const std::vector<Story>& stories, double offset,
                               const DecoderConfig& decoder, const fs::path& out_dir,
                               const fs::path& video_root, std::size_t jobs,
                               ExtractStats* stats) {
  Gate gate(decoder.max_concurrent);
  std::vector<std::optional<Story>> done(stories.size());
  std::vector<ExtractStats> per_story(stories.size());
  auto errors = parallel_for(stories.size(), jobs, [&](std::size_t i) {
    const FramePlan plan = plan_frames(stories[i], offset);
    done[i] = extract_frames(stories[i], plan, decoder, out_dir, video_root, &per_story[i],
                             &gate);
  });

  std::vector<std::string> failed;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    failed.push_back(stories[i].id());
    try {
      std::rethrow_exception(errors[i]);
    } catch (const PipelineError& e) {
      spdlog::error("story '{}': {} {}", stories[i].id(), e.what(), e.stderr_text());
    } catch (const std::exception& e) {
      spdlog::error("story '{}': {}", stories[i].id(), e.what());
    }
  }
  if (stats) {
    for (const auto& s : per_story) {
      stats->decoder_invocations += s.decoder_invocations;
      stats->skipped += s.skipped;
    }
  }
  if (!failed.empty()) {
    throw BatchError(fmt::format("frame extraction failed for {} of {} stories", failed.size(),
                                 stories.size()),
                     failed);
  }
  std::vector<Story> out;
  out.reserve(done.size());
  for (auto& s : done) out.push_back(std::move(*s));
  return out;
}

}  // namespace seqstory::frames
