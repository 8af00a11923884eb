#pragma once
// Per-story frame-embedding cache.
//
// Layout (all integers little-endian):
//   bytes 0..7   magic "SQSEMB01"
//   bytes 8..11  uint32 header length H
//   H bytes      JSON header {"count","d","encoder_id","frames_per_scene",
//                "normalization"}
//   count*d      float32 rows, scene-major frame order

#include <filesystem>
#include <string>
#include <vector>

#include "seqstory/encoder.hpp"

namespace seqstory::encoder {

struct EmbeddingCache {
  int dim = 0;
  std::string encoder_id;
  StoryFrameEmbeddings frames;
};

void write_embedding_cache(const std::filesystem::path& path, const EmbeddingCache& cache);
EmbeddingCache read_embedding_cache(const std::filesystem::path& path);

/// `{dir}/{story_id}.emb`
std::filesystem::path cache_path(const std::filesystem::path& dir, std::string_view story_id);

}  // namespace seqstory::encoder
