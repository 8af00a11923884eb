#include "seqstory/embedding_cache.hpp"

#include <bit>
#include <cstring>

#include <fmt/format.h>

#include "seqstory/error.hpp"
#include "seqstory/jsonl.hpp"

namespace seqstory::encoder {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kMagic = "SQSEMB01";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xffu);
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

}  // namespace

fs::path cache_path(const fs::path& dir, std::string_view story_id) {
  return dir / fmt::format("{}.emb", story_id);
}

void write_embedding_cache(const fs::path& path, const EmbeddingCache& cache) {
  std::vector<int> per_scene;
  std::size_t count = 0;
  for (const auto& scene : cache.frames) {
    per_scene.push_back(static_cast<int>(scene.size()));
    count += scene.size();
  }
  const json header{{"d", cache.dim},
                    {"encoder_id", cache.encoder_id},
                    {"count", count},
                    {"frames_per_scene", per_scene},
                    {"normalization", "none"}};
  const std::string h = header.dump();
  std::string out(kMagic);
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  for (const auto& scene : cache.frames) {
    for (const auto& e : scene) {
      if (static_cast<int>(e.vector.size()) != cache.dim) {
        throw SchemaError(fmt::format("cache row has dimension {} but header says {}",
                                      e.vector.size(), cache.dim));
      }
      for (float x : e.vector) put_u32(out, std::bit_cast<std::uint32_t>(x));
    }
  }
  io::write_file_atomic(path, out);
}

EmbeddingCache read_embedding_cache(const fs::path& path) {
  const std::string data = io::read_file(path);
  if (data.size() < kMagic.size() + 4 || std::string_view(data).substr(0, 8) != kMagic) {
    throw SchemaError(fmt::format("{} is not an embedding cache", path.string()));
  }
  const std::uint32_t hlen = get_u32(data, 8);
  if (data.size() < 12 + hlen) throw SchemaError("truncated embedding cache header");
  json header;
  try {
    header = json::parse(data.substr(12, hlen));
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("bad embedding cache header: {}", e.what()));
  }
  EmbeddingCache cache;
  cache.dim = header.at("d").get<int>();
  cache.encoder_id = header.at("encoder_id").get<std::string>();
  const auto count = header.at("count").get<std::size_t>();
  const auto per_scene = header.at("frames_per_scene").get<std::vector<int>>();
  const std::size_t body = 12 + hlen;
  if (data.size() != body + count * static_cast<std::size_t>(cache.dim) * 4) {
    throw SchemaError(fmt::format("{}: body size does not match header", path.string()));
  }
  std::size_t row = 0;
  for (int frames_in_scene : per_scene) {
    std::vector<FrameEmbedding> scene;
    for (int k = 0; k < frames_in_scene; ++k, ++row) {
      FrameEmbedding e;
      e.frame_index = k;
      e.encoder_id = cache.encoder_id;
      e.vector.resize(static_cast<std::size_t>(cache.dim));
      for (int i = 0; i < cache.dim; ++i) {
        e.vector[i] = std::bit_cast<float>(
            get_u32(data, body + (row * static_cast<std::size_t>(cache.dim) + i) * 4));
      }
      scene.push_back(std::move(e));
    }
    cache.frames.push_back(std::move(scene));
  }
  if (row != count) throw SchemaError("frames_per_scene does not sum to count");
  return cache;
}

}  // namespace seqstory::encoder
