#pragma once
// Shared helpers for unit and acceptance tests.

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <unistd.h>

#include "seqstory/model.hpp"

namespace testing {

namespace fs = std::filesystem;

inline fs::path fixture(const std::string& name) {
  return fs::path(SEQSTORY_TEST_DIR) / "fixtures" / name;
}

inline fs::path golden(const std::string& name) {
  return fs::path(SEQSTORY_TEST_DIR) / "golden" / name;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            fmt::format("seqstory-test-{}-{}", ::getpid(), counter.fetch_add(1));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

// Random story with `scenes` scenes of 0.5..8 s each, separated by small gaps.
inline seqstory::Story random_story(std::mt19937_64& rng, const std::string& id, int scenes) {
  std::uniform_int_distribution<int> dur_ms(500, 8000);
  std::uniform_int_distribution<int> gap_ms(0, 400);
  std::vector<seqstory::Scene> out;
  int t = 0;
  for (int s = 0; s < scenes; ++s) {
    t += gap_ms(rng);
    const int d = dur_ms(rng);
    out.emplace_back(t / 1000.0, (t + d) / 1000.0,
                     fmt::format("Scene {} of {}: a person does thing {}.", s + 1, id, rng() % 97));
    t += d;
  }
  return seqstory::Story(id, seqstory::Source::other, std::move(out));
}

// Four-scene trampoline story used by the transcript golden. The fourth
// description is never rendered in the golden; any text works as it is withheld.
inline seqstory::Story trampoline_story() {
  using seqstory::Scene;
  return seqstory::Story(
      "trampoline", seqstory::Source::oops,
      {Scene(0, 2, "A rider wearing a black t-shirt is riding a bicycle on a brown surface while "
                   "two people are sitting on their bicycle behind the rider."),
       Scene(2, 4, "The rider wearing a black t-shirt jumps on the trampoline."),
       Scene(4, 6, "The rider wearing a black t-shirt gets disbalanced and falls."),
       Scene(6, 8, "The rider lies on the ground next to the trampoline.")});
}

inline std::vector<seqstory::SceneEmbedding> unit_embeddings(std::size_t n, int dim = 4) {
  std::vector<seqstory::SceneEmbedding> out;
  for (std::size_t i = 0; i < n; ++i) {
    seqstory::SceneEmbedding e;
    e.vector.assign(static_cast<std::size_t>(dim), static_cast<float>(i) + 0.5f);
    e.scene_index = static_cast<int>(i);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace testing
