#include "seqstory/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "seqstory/error.hpp"
#include "seqstory/hashing.hpp"
#include "seqstory/jsonl.hpp"

namespace seqstory::dataset {

namespace fs = std::filesystem;

Split split_dataset(const std::vector<Story>& stories, std::uint64_t seed, double val_fraction) {
  if (stories.empty()) throw ValidationError("cannot split an empty story list");
  if (!(val_fraction >= 0.0 && val_fraction <= 1.0)) {
    throw ValidationError("validation fraction must be within [0, 1]");
  }
  std::set<std::string> seen;
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < stories.size(); ++i) {
    if (!seen.insert(stories[i].id()).second) {
      throw ValidationError(fmt::format("duplicate story id '{}'", stories[i].id()));
    }
    const int t = static_cast<int>(stories[i].scene_count());
    if (t >= kMinSplitScenes && t <= kMaxSplitScenes) strata[t].push_back(i);
  }

  std::vector<char> in_val(stories.size(), 0);
  for (auto& [scenes, members] : strata) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return stories[a].id() < stories[b].id();
    });
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(scenes)));
    portable_shuffle(members, rng);
    const auto n_val = static_cast<std::size_t>(
        std::lround(val_fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < n_val; ++k) in_val[members[k]] = 1;
  }

  Split split;
  split.seed = seed;
  for (std::size_t i = 0; i < stories.size(); ++i) {
    const int t = static_cast<int>(stories[i].scene_count());
    if (t < kMinSplitScenes || t > kMaxSplitScenes) {
      split.reserved.push_back(stories[i]);
    } else if (in_val[i]) {
      split.val.push_back(stories[i]);
    } else {
      split.train.push_back(stories[i]);
    }
  }
  return split;
}

ContextSetting ContextSetting::parse(std::string_view name) {
  std::string s(name);
  // en dash
  for (std::size_t pos; (pos = s.find("\xE2\x80\x93")) != std::string::npos;) {
    s.replace(pos, 3, "-");
  }
  std::replace(s.begin(), s.end(), '_', '-');
  auto bad = [&] {
    return ValidationError(fmt::format("unknown context setting '{}'", name));
  };
  if (s.size() < 2 || (s[0] != 'C' && s[0] != 'c')) throw bad();
  auto number = [&](std::string_view digits) {
    if (digits.empty() || digits.size() > 3 ||
        !std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(c); })) {
      throw bad();
    }
    return std::stoi(std::string(digits));
  };
  const std::string_view body = std::string_view(s).substr(1);
  const auto dash = body.find('-');
  ContextSetting out;
  if (dash == std::string_view::npos) {
    out.min_scenes = out.max_scenes = number(body);
  } else {
    out.min_scenes = number(body.substr(0, dash));
    out.max_scenes = number(body.substr(dash + 1));
  }
  if (out.min_scenes < 1 || out.max_scenes < out.min_scenes) throw bad();
  return out;
}

std::string ContextSetting::name() const {
  if (min_scenes == max_scenes) return fmt::format("C{}", min_scenes);
  return fmt::format("C{}-{}", min_scenes, max_scenes);
}

void to_json(json& j, const EvalInstance& v) {
  j = json{{"story_id", v.story_id},
           {"context_length", v.context_length},
           {"target_turn", v.target_turn}};
}

void from_json(const json& j, EvalInstance& v) {
  v.story_id = j.at("story_id").get<std::string>();
  v.context_length = j.at("context_length").get<int>();
  v.target_turn = j.at("target_turn").get<int>();
}

std::vector<EvalInstance> select_context_setting(const std::vector<Story>& stories,
                                                 const ContextSetting& setting, bool per_turn) {
  std::vector<EvalInstance> out;
  for (const Story& story : stories) {
    const int t = static_cast<int>(story.scene_count());
    if (!setting.contains(t)) continue;
    if (per_turn) {
      for (int tau = 2; tau <= t; ++tau) out.push_back({story.id(), tau, tau});
    } else {
      out.push_back({story.id(), t, t});
    }
  }
  return out;
}

Manifest load_manifest(const fs::path& path, bool allow_unknown_fields) {
  Manifest m;
  bool first = true;
  io::for_each_jsonl(path, [&](const json& row, std::size_t) {
    const bool is_header = first && row.is_object() && row.size() == 1 && row.contains("header");
    first = false;
    if (is_header) {
      m.header = row["header"];
      return;
    }
    if (allow_unknown_fields) {
      LenientJson lenient;
      m.stories.push_back(story_from_json(row));
    } else {
      m.stories.push_back(story_from_json(row));
    }
  });
  return m;
}

void save_manifest(const std::vector<Story>& stories, const fs::path& path, const json& header) {
  std::vector<json> rows;
  rows.reserve(stories.size() + 1);
  if (!header.is_null()) rows.push_back(json{{"header", header}});
  for (const auto& s : stories) rows.push_back(story_to_json(s));
  io::write_jsonl_atomic(path, rows);
}

void write_split(const Split& split, const fs::path& dir) {
  fs::create_directories(dir);
  const json counts{{"train", split.train.size()},
                    {"val", split.val.size()},
                    {"reserved", split.reserved.size()}};
  auto header = [&](std::string_view name) {
    return json{{"split", name},
                {"seed", split.seed},
                {"val_fraction", kValFraction},
                {"counts", counts}};
  };
  save_manifest(split.train, dir / "train.jsonl", header("train"));
  save_manifest(split.val, dir / "val.jsonl", header("val"));
  save_manifest(split.reserved, dir / "reserved.jsonl", header("reserved"));

  std::vector<Story> all = split.train;
  all.insert(all.end(), split.val.begin(), split.val.end());
  all.insert(all.end(), split.reserved.begin(), split.reserved.end());
  io::write_file_atomic(dir / "histogram.csv", histogram_csv(scene_histogram(all)));
}

std::map<int, int> scene_histogram(const std::vector<Story>& stories) {
  std::map<int, int> h;
  for (const auto& s : stories) ++h[static_cast<int>(s.scene_count())];
  return h;
}

std::string histogram_csv(const std::map<int, int>& histogram) {
  std::string out = "scene_count,story_count\n";
  for (const auto& [scenes, count] : histogram) out += fmt::format("{},{}\n", scenes, count);
  return out;
}

}  // namespace seqstory::dataset
