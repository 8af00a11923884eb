// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "oracles.hpp"
#include "pipeline_fixture.hpp"
#include "seqstory/annotation.hpp"
#include "seqstory/conversation.hpp"
#include "seqstory/dataset.hpp"
#include "seqstory/encoder.hpp"
#include "seqstory/frames.hpp"
#include "seqstory/hashing.hpp"
#include "seqstory/jsonl.hpp"
#include "seqstory/judge.hpp"
#include "seqstory/ood.hpp"
#include "seqstory/stats.hpp"
#include "seqstory/study.hpp"
#include "study_fixture.hpp"
#include "support.hpp"

using namespace seqstory;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kPoolTol = 1e-6;
constexpr double kPooledRateTol = 1e-12;
constexpr double kAccuracyTol = 0.001;
constexpr double kCiTol = 0.005;
constexpr double kMcNemarTol = 0.0005;
constexpr double kAgreementTol = 1e-9;
constexpr double kF1Tol = 1e-12;
constexpr double kPipelineSeconds = 60.0;
constexpr double kBudgetSeconds = 1.0;
constexpr double kAllocationSeconds = 5.0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Thrown by expect() with a description of the first violated check.
struct Failed {
  std::string what;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failed{what};
}

struct Outcome {
  int failures = 0;
};

void criterion(Outcome& out, int n, const std::string& name, const std::function<std::string()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string status = "PASS";
  std::string detail;
  try {
    detail = body();
  } catch (const Failed& f) {
    status = "FAIL";
    detail = f.what;
  } catch (const std::exception& e) {
    status = "FAIL";
    detail = std::string("exception: ") + e.what();
  }
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  if (status == "FAIL") ++out.failures;
  std::cout << fmt::format("{} {:>2} {}: {} ({} ms)", status, n, name, detail, ms) << std::endl;
}

// Swallows stdout while the CLI runs.
class QuietStdout {
 public:
  QuietStdout() : old_(std::cout.rdbuf(sink_.rdbuf())) {}
  ~QuietStdout() { std::cout.rdbuf(old_); }

 private:
  std::ostringstream sink_;
  std::streambuf* old_;
};

Story story_ms(const std::vector<long>& ms, const std::string& id = "s") {
  std::vector<Scene> scenes;
  long t = 0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    scenes.emplace_back(t / 1000.0, (t + ms[i]) / 1000.0, fmt::format("scene {}", i));
    t += ms[i];
  }
  return Story(id, Source::other, std::move(scenes));
}

std::string c1_budgets() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::pair<double, int>> cases = {{4, 8}, {5, 8}, {7, 12}, {12, 15}, {20, 20}, {31, 25}};
  for (auto [d, f] : cases) {
    expect(frames::budget_for_duration(d) == f,
           fmt::format("budget({}) = {}, want {}", d, frames::budget_for_duration(d), f));
  }
  int prev = 0;
  for (int ms = 1; ms <= 120000; ms += 13) {
    const int f = frames::budget_for_duration(ms / 1000.0);
    expect(f >= prev, fmt::format("budget decreases at {} ms", ms));
    prev = f;
  }
  expect(seconds_since(t0) < kBudgetSeconds, "budget checks exceeded their time limit");
  return fmt::format("{} durations map to their buckets, monotone over 0-120 s", cases.size());
}

std::string c2_allocation() {
  const auto t0 = std::chrono::steady_clock::now();
  expect(frames::allocate_frames(story_ms({5000, 3000, 2000}), 12) == std::vector<int>{6, 3, 2},
         "allocation 5/3/2 s with F=12");
  expect(frames::allocate_frames(story_ms({500, 3500}), 8) == std::vector<int>{2, 7},
         "allocation 0.5/3.5 s with F=8");
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<long> dur(100, 12000);
  std::uniform_int_distribution<int> count(1, 10);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<long> ms(static_cast<std::size_t>(count(rng)));
    long total = 0;
    for (auto& m : ms) total += (m = dur(rng));
    const Story s = story_ms(ms);
    const int budget = frames::budget_for_duration(s.total_duration());
    const auto got = frames::allocate_frames(s, budget);
    expect(got == oracle::allocation_ms(ms, total, budget), fmt::format("trial {} differs from oracle", trial));
    for (std::size_t i = 0; i < got.size(); ++i) {
      expect(got[i] >= 2, fmt::format("trial {} scene {} has fewer than 2 frames", trial, i));
      for (std::size_t j = 0; j < got.size(); ++j) {
        if (ms[i] > ms[j]) expect(got[i] >= got[j], fmt::format("trial {} not monotone", trial));
      }
    }
  }
  expect(seconds_since(t0) < kAllocationSeconds, "allocation checks exceeded their time limit");
  return "worked examples and 1000 random stories match the integer oracle";
}

std::string c3_pooling() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<float> u(-4.0f, 4.0f);
  double worst = 0;
  for (int scene = 0; scene < 1000; ++scene) {
    const int k = 1 + static_cast<int>(rng() % 25);
    const int dim = 1 + static_cast<int>(rng() % 64);
    std::vector<FrameEmbedding> fr;
    for (int i = 0; i < k; ++i) {
      FrameEmbedding f;
      f.frame_index = i;
      for (int d = 0; d < dim; ++d) f.vector.push_back(u(rng));
      fr.push_back(std::move(f));
    }
    const auto mean = encoder::pool_scene(fr, Pooling::mean).vector;
    const auto first = encoder::pool_scene(fr, Pooling::first_frame).vector;
    expect(std::memcmp(first.data(), fr[0].vector.data(), first.size() * sizeof(float)) == 0,
           fmt::format("scene {} first_frame is not the first embedding", scene));
    auto shuffled = fr;
    Rng r(static_cast<std::uint64_t>(scene));
    portable_shuffle(shuffled, r);
    const auto again = encoder::pool_scene(shuffled, Pooling::mean).vector;
    for (int d = 0; d < dim; ++d) {
      double sum = 0;
      for (const auto& f : fr) sum += f.vector[static_cast<std::size_t>(d)];
      const double err = std::abs(mean[static_cast<std::size_t>(d)] - sum / k);
      worst = std::max(worst, err);
      expect(err <= kPoolTol, fmt::format("scene {} dim {} mean error {}", scene, d, err));
      expect(std::abs(again[static_cast<std::size_t>(d)] - mean[static_cast<std::size_t>(d)]) <= kPoolTol,
             fmt::format("scene {} mean depends on frame order", scene));
    }
  }
  return fmt::format("1000 scenes, max mean error {:.2e}", worst);
}

ConversationContext conversation_for(const Story& s) {
  auto emb = testing::unit_embeddings(s.scene_count());
  return conversation::build_conversation(s, emb);
}

std::string c4_transcript() {
  const Story story = testing::trampoline_story();
  const auto ctx = conversation::build_inference_context(conversation_for(story), 4,
                                                         ContextMode::imagechain);
  const auto s = conversation::serialize(ctx);
  expect(s.text == io::read_file(testing::golden("trampoline_transcript.txt")), "transcript differs from golden");
  expect(s.text.size() >= 10 && s.text.substr(s.text.size() - 10) == "ASSISTANT:",
         "transcript does not end with the assistant tag");
  expect(s.text.find(story.scenes()[3].description()) == std::string::npos,
         "target description leaks into the context");
  expect(s.image_slots.size() == 4, "expected 4 image slots");
  return "golden match, target withheld";
}

std::string c5_consistency() {
  std::mt19937_64 rng(505);
  for (int i = 0; i < 500; ++i) {
    const Story story = testing::random_story(rng, fmt::format("c{}", i), 1 + i % 8);
    const auto conv = conversation_for(story);
    const int total = static_cast<int>(story.scene_count());
    auto ctx = conversation::build_inference_context(conv, total, ContextMode::imagechain);
    const std::string rendered = conversation::serialize(ctx).text;
    ctx.turns.back().description = story.scenes().back().description();
    expect(ctx == conv, fmt::format("story {} context plus target differs", i));
    expect(rendered + " " + story.scenes().back().description() + " </s>" ==
               conversation::serialize(conv).text,
           fmt::format("story {} rendering differs", i));
  }
  return "500 stories reproduce their full conversation";
}

std::string c6_split() {
  std::mt19937_64 rng(606);
  std::vector<Story> stories;
  for (int i = 0; i < 1000; ++i) {
    stories.push_back(testing::random_story(rng, fmt::format("st{:04}", i), 1 + static_cast<int>(rng() % 10)));
  }
  const auto a = dataset::split_dataset(stories, 42);
  const auto b = dataset::split_dataset(stories, 42);
  auto ids = [](const std::vector<Story>& v) {
    std::vector<std::string> out;
    for (const auto& s : v) out.push_back(s.id());
    return out;
  };
  expect(ids(a.train) == ids(b.train) && ids(a.val) == ids(b.val) && ids(a.reserved) == ids(b.reserved),
         "same seed gave different splits");
  std::set<std::string> seen;
  for (const auto* part : {&a.train, &a.val, &a.reserved}) {
    for (const auto& s : *part) expect(seen.insert(s.id()).second, "story in two partitions: " + s.id());
  }
  expect(seen.size() == stories.size(), "partitions do not cover the input");
  for (const auto& s : a.reserved) {
    expect(s.scene_count() < 2 || s.scene_count() > 7, "in-range story reserved: " + s.id());
  }
  auto hist = dataset::scene_histogram(stories);
  auto val = dataset::scene_histogram(a.val);
  for (int t = 2; t <= 7; ++t) {
    const double want = std::round(0.2 * hist[t]);
    expect(std::abs(val[t] - want) <= 1.0, fmt::format("stratum {} has {} val, want {}", t, val[t], want));
  }
  return fmt::format("train {} val {} reserved {}", a.train.size(), a.val.size(), a.reserved.size());
}

std::string c7_simrate() {
  std::mt19937_64 rng(707);
  std::vector<EvalRecord> recs;
  for (int i = 0; i < 50; ++i) {
    const Story story = testing::random_story(rng, fmt::format("j{:02}", i), 2 + i % 5);
    const auto conv = conversation_for(story);
    const int t = static_cast<int>(story.scene_count());
    const auto ctx = conversation::build_inference_context(conv, t, ContextMode::imagechain);
    expect(conversation::serialize(ctx).text.find(story.scenes().back().description()) == std::string::npos ||
               story.scenes().back().description().empty(),
           "target leaked into the judged context");
    const std::string truth = story.scenes().back().description();
    const std::string other = story.scenes().front().description();
    recs.push_back(EvalRecord{story.id(), t, "copy", truth, truth, std::nullopt, "", 0});
    recs.push_back(EvalRecord{story.id(), t, "junk", "Bananas orbit a quiet harbour.", truth,
                              std::nullopt, "", 0});
    recs.push_back(EvalRecord{story.id(), t, "first", other, truth, std::nullopt, "", 0});
  }
  judge::MockJudgeClient client;
  judge::judge_batch(recs, client);
  const auto cols = judge::default_table_columns();
  const auto table = judge::simrate_table(recs, cols);
  expect(table.rows.size() == 3, "expected three model rows");
  const std::string csv = judge::simrate_csv(table);
  expect(csv.rfind("model,C2,C3,C4,C5,C6,C4-6,C2-6\n", 0) == 0, "unexpected table header");
  for (const auto& row : table.rows) {
    const auto& cells = row.cells;
    for (std::size_t pooled = 0; pooled < cols.size(); ++pooled) {
      if (cols[pooled].min_scenes == cols[pooled].max_scenes) continue;
      double weighted = 0;
      int weight = 0;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        if (cols[c].min_scenes != cols[c].max_scenes || !cols[pooled].contains(cols[c].min_scenes)) continue;
        if (!cells[c].rate()) continue;
        weighted += *cells[c].rate() * cells[c].total();
        weight += cells[c].total();
      }
      expect(cells[pooled].rate().has_value() && weight > 0, "pooled column is empty");
      const double err = std::abs(*cells[pooled].rate() - weighted / weight);
      expect(err <= kPooledRateTol, fmt::format("{} {} pooled error {}", row.model_id, cols[pooled].name(), err));
    }
  }
  const auto& copy = table.rows[0].model_id == "copy" ? table.rows[0] : table.rows[1];
  expect(copy.model_id == "copy" && copy.cells.back().rate() == 1.0, "copying the target is not 100% similar");
  const auto& c = copy.cells.back();
  return fmt::format("150 judged records, pooled columns equal count-weighted means, copy C2-6 {}/{}",
                     c.similar, c.total());
}

std::string c8_wilson() {
  const auto p = stats::wilson(65, 90);
  expect(std::abs(p.estimate - 0.722) <= kAccuracyTol, fmt::format("accuracy {}", p.estimate));
  expect(std::abs(p.ci_low - 0.620) <= kCiTol, fmt::format("ci low {}", p.ci_low));
  expect(std::abs(p.ci_high - 0.803) <= kCiTol, fmt::format("ci high {}", p.ci_high));
  const auto [lo, hi] = oracle::wilson95(65, 90);
  expect(std::abs(p.ci_low - lo) <= 1e-12 && std::abs(p.ci_high - hi) <= 1e-12, "differs from closed form");
  return fmt::format("{:.4f} [{:.4f}, {:.4f}]", p.estimate, p.ci_low, p.ci_high);
}

std::string c9_mcnemar() {
  const double p = stats::mcnemar_exact(10, 15);
  expect(std::abs(p - 0.4244) <= kMcNemarTol, fmt::format("p = {}", p));
  expect(std::abs(p - oracle::mcnemar(10, 15)) <= 1e-12, "differs from exact binomial sum");
  return fmt::format("p = {:.4f}", p);
}

// Calls fn on every examples x raters grid with values in [0, k).
template <typename Fn>
void enumerate_grids(int examples, int raters, int k, Fn&& fn) {
  const int cells = examples * raters;
  std::vector<int> digits(static_cast<std::size_t>(cells), 0);
  while (true) {
    std::vector<std::vector<int>> grid(static_cast<std::size_t>(examples));
    for (int e = 0; e < examples; ++e)
      for (int r = 0; r < raters; ++r) grid[static_cast<std::size_t>(e)].push_back(digits[static_cast<std::size_t>(e * raters + r)]);
    fn(grid);
    int i = 0;
    while (i < cells && ++digits[static_cast<std::size_t>(i)] == k) digits[static_cast<std::size_t>(i++)] = 0;
    if (i == cells) break;
  }
}

std::string c10_agreement() {
  int compared = 0;
  int grids = 0;
  auto check = [&](const std::vector<std::vector<int>>& grid) {
    ++grids;
    const int raters = static_cast<int>(grid.front().size());
    std::vector<std::vector<int>> counts;
    for (const auto& ex : grid) {
      std::vector<int> row(5, 0);
      for (int v : ex) ++row[static_cast<std::size_t>(v)];
      counts.push_back(row);
    }
    const auto fk = stats::fleiss_kappa(counts);
    const auto fo = oracle::fleiss_pairs(grid, 5);
    expect(fk.has_value() == fo.has_value(), "fleiss definedness differs from oracle");
    if (fk) expect(std::abs(*fk - *fo) <= kAgreementTol, fmt::format("fleiss {} vs {}", *fk, *fo));

    stats::RatingMatrix m(static_cast<std::size_t>(raters));
    std::vector<std::vector<int>> by_unit;
    for (const auto& ex : grid) {
      std::vector<int> unit;
      for (int r = 0; r < raters; ++r) {
        m[static_cast<std::size_t>(r)].push_back(ex[static_cast<std::size_t>(r)] + 1);
        unit.push_back(ex[static_cast<std::size_t>(r)] + 1);
      }
      by_unit.push_back(unit);
    }
    const auto ak = stats::krippendorff_alpha_ordinal(m);
    const auto ao = oracle::alpha_ordinal_pairs(by_unit);
    expect(ak.has_value() == ao.has_value(), "alpha definedness differs from oracle");
    if (ak) expect(std::abs(*ak - *ao) <= kAgreementTol, fmt::format("alpha {} vs {}", *ak, *ao));
    compared += static_cast<int>(fk.has_value()) + static_cast<int>(ak.has_value());
  };
  // every grid up to these sizes over a 5-point scale, plus larger binary ones
  for (int e = 1; e <= 2; ++e) enumerate_grids(e, 3, 5, check);
  enumerate_grids(3, 2, 5, check);
  enumerate_grids(4, 2, 5, check);
  for (int e = 1; e <= 4; ++e) enumerate_grids(e, 3, 2, check);
  enumerate_grids(3, 4, 2, check);
  const auto perfect_k = stats::fleiss_kappa({{3, 0}, {0, 3}, {3, 0}});
  expect(perfect_k && std::abs(*perfect_k - 1.0) <= kAgreementTol, "fleiss under perfect agreement");
  const auto perfect_a = stats::krippendorff_alpha_ordinal({{1, 4, 2, 5}, {1, 4, 2, 5}, {1, 4, 2, 5}});
  expect(perfect_a && std::abs(*perfect_a - 1.0) <= kAgreementTol, "alpha under perfect agreement");
  return fmt::format("{} grids, {} defined coefficients match the pair oracles", grids, compared);
}

std::string c11_cue_f1() {
  auto a = ood::cue_f1({"run", "jump"}, {"run", "sit"});
  expect(std::abs(a.f1 - 0.5) <= kF1Tol, "half overlap");
  expect(ood::cue_f1({}, {}).f1 == 1.0, "empty vs empty");
  expect(ood::cue_f1({"a"}, {}).f1 == 0.0 && ood::cue_f1({}, {"a"}).f1 == 0.0, "one side empty");
  std::mt19937_64 rng(1111);
  for (int i = 0; i < 5000; ++i) {
    ood::CueSet p, g;
    for (int k = static_cast<int>(rng() % 7); k > 0; --k) p.insert(fmt::format("c{}", rng() % 9));
    for (int k = static_cast<int>(rng() % 7); k > 0; --k) g.insert(fmt::format("c{}", rng() % 9));
    const auto s = ood::cue_f1(p, g);
    expect(s.f1 >= 0.0 && s.f1 <= 1.0, "f1 out of range");
    expect(std::abs(s.f1 - ood::cue_f1(g, p).f1) <= kF1Tol, "f1 not symmetric");
    if (!p.empty() && !g.empty()) {
      int inter = 0;
      for (const auto& x : p) inter += static_cast<int>(g.count(x));
      expect(std::abs(s.f1 - 2.0 * inter / static_cast<double>(p.size() + g.size())) <= kF1Tol,
             "f1 differs from the set closed form");
    }
    expect(ood::cue_f1(p, p).f1 == 1.0 || p.empty(), "identical sets are not 1");
  }
  ood::MockCueClient client;
  const auto cues = ood::extract_cues(io::read_file(testing::golden("comic_description.txt")), client);
  const ood::CueSet want = {"moving", "holding", "throwing", "standing", "looking", "walking", "putting"};
  expect(cues == want, "comic description cues differ");
  return "worked examples, 5000 random pairs, comic cue set";
}

std::string c12_pipeline() {
  testing::TempDir dir;
  const auto in = testing::write_corpus(dir / "corpus", 20, 1212);
  const auto t0 = std::chrono::steady_clock::now();
  {
    QuietStdout quiet;
    expect(testing::run_pipeline(in, dir / "run1", 9) == 0, "first run failed");
    expect(testing::run_pipeline(in, dir / "run2", 9) == 0, "second run failed");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& rel : testing::pipeline_outputs()) {
    const std::string a = io::read_file(dir / "run1" / rel);
    expect(!a.empty(), rel + " is empty");
    expect(a == io::read_file(dir / "run2" / rel), rel + " differs between runs");
  }
  expect(secs < kPipelineSeconds, fmt::format("two runs took {:.1f} s", secs));
  return fmt::format("{} outputs byte-identical, two runs in {:.2f} s", testing::pipeline_outputs().size(), secs);
}

std::string c13_annotation() {
  testing::TempDir dir;
  const std::vector<std::string> models = {"a", "b", "c"};
  annotation::Service service(
      study::sample_study(testing::judged_pool(models, 1), 9, models, testing::gold_items(), 13), dir / "store");
  annotation::Server server(service, annotation::ServerOptions{"127.0.0.1", 0, {}, "admin"});
  const int port = server.bind();
  std::thread serving([&] { server.run(); });
  struct Stop {
    annotation::Server& s;
    std::thread& t;
    ~Stop() {
      s.stop();
      t.join();
    }
  } stop{server, serving};

  const std::vector<std::string> annotators = {"honest1", "honest2", "careless"};
  std::vector<std::string> tokens(3), first_ids(3);
  std::atomic<int> stored{0};
  std::atomic<int> errors{0};
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < annotators.size(); ++w) {
    workers.emplace_back([&, w] {
      httplib::Client c("127.0.0.1", port);
      c.set_connection_timeout(5);
      auto r = c.Get(("/api/session?annotator=" + annotators[w]).c_str());
      if (!r || r->status != 200) {
        ++errors;
        return;
      }
      const auto session = json::parse(r->body);
      tokens[w] = session["session_token"];
      first_ids[w] = session["order"][0];
      for (const auto& id : session["order"]) {
        int likert = 3;
        if (const auto* g = service.plan().find_gold(id.get<std::string>())) {
          likert = testing::likert_for(g->expected, annotators[w] != "careless");
        }
        auto res = c.Post("/api/rating",
                          json{{"session_token", tokens[w]}, {"example_id", id}, {"likert", likert}}.dump(),
                          "application/json");
        if (res && res->status == 200) ++stored;
        else ++errors;
      }
    });
  }
  for (auto& t : workers) t.join();
  expect(errors == 0, fmt::format("{} requests failed", errors.load()));
  expect(stored == 36, fmt::format("{} ratings acknowledged", stored.load()));

  httplib::Client c("127.0.0.1", port);
  auto dup = c.Post("/api/rating",
                    json{{"session_token", tokens[0]}, {"example_id", first_ids[0]}, {"likert", 3}}.dump(),
                    "application/json");
  expect(dup && dup->status == 409, "duplicate rating was not rejected");

  auto exp = c.Get("/api/export", httplib::Headers{{"Authorization", "Bearer admin"}});
  expect(exp && exp->status == 200, "export failed");
  int rows = 0;
  std::map<std::string, bool> pass;
  std::istringstream lines(exp->body);
  for (std::string line; std::getline(lines, line);) {
    if (line.empty()) continue;
    ++rows;
    const auto j = json::parse(line);
    pass[j["annotator_id"]] = j["gold_pass"];
  }
  expect(rows == 36, fmt::format("export has {} rows", rows));
  expect(io::read_jsonl(service.annotations_path()).size() == 36, "store does not hold 36 records");
  expect(pass["honest1"] && pass["honest2"] && !pass["careless"], "gold filter flags the wrong annotator");
  return "36 concurrent ratings stored, duplicate rejected, careless annotator flagged";
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::off);
  Outcome out;
  criterion(out, 1, "frame budget buckets", c1_budgets);
  criterion(out, 2, "per-scene allocation", c2_allocation);
  criterion(out, 3, "scene pooling", c3_pooling);
  criterion(out, 4, "transcript golden", c4_transcript);
  criterion(out, 5, "context consistency", c5_consistency);
  criterion(out, 6, "stratified split", c6_split);
  criterion(out, 7, "simrate table", c7_simrate);
  criterion(out, 8, "wilson interval", c8_wilson);
  criterion(out, 9, "mcnemar exact", c9_mcnemar);
  criterion(out, 10, "agreement coefficients", c10_agreement);
  criterion(out, 11, "cue f1", c11_cue_f1);
  criterion(out, 12, "pipeline determinism", c12_pipeline);
  criterion(out, 13, "annotation service", c13_annotation);
  std::cout << (out.failures == 0 ? "all criteria passed" : fmt::format("{} criteria failed", out.failures))
            << std::endl;
  return out.failures == 0 ? 0 : 1;
}
