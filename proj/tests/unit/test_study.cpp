#include <doctest.h>

#include <map>
#include <set>

#include "seqstory/error.hpp"
#include "seqstory/jsonl.hpp"
#include "seqstory/study.hpp"
#include "study_fixture.hpp"
#include "support.hpp"

using namespace seqstory;
using namespace seqstory::study;

namespace {

const std::vector<std::string> kModels = {"imagechain", "mllm-ft", "final-scene"};

StudyPlan standard_plan(std::uint64_t seed = 7) {
  return sample_study(testing::judged_pool(kModels, 10), 90, kModels, testing::gold_items(), seed);
}

}  // namespace

TEST_CASE("ninety examples over three models") {
  const StudyPlan plan = standard_plan();
  CHECK(plan.items.size() == 90);
  std::map<std::string, int> per_model;
  std::map<std::string, std::map<int, int>> per_length;
  std::set<std::pair<std::string, std::string>> unique;
  for (const auto& it : plan.items) {
    ++per_model[it.model_id];
    ++per_length[it.model_id][it.context_length];
    CHECK(unique.insert({it.model_id, it.story_id}).second);
    CHECK(it.judge_verdict.has_value());
  }
  for (const auto& m : kModels) {
    CHECK(per_model[m] == 30);
    for (int t = 2; t <= 6; ++t) CHECK(per_length[m][t] == 6);
  }
}

TEST_CASE("tasks carry nine study items and three golds, each item rated three times") {
  const StudyPlan plan = standard_plan();
  CHECK(plan.tasks.size() == 30);
  std::map<std::string, int> coverage;
  for (const auto& t : plan.tasks) {
    CHECK(t.study_ids.size() == 9);
    CHECK(t.gold_ids.size() == 3);
    for (const auto& id : t.study_ids) ++coverage[id];
    for (const auto& id : t.gold_ids) CHECK(plan.find_gold(id) != nullptr);
  }
  CHECK(coverage.size() == 90);
  for (const auto& [id, n] : coverage) CHECK(n == 3);
}

TEST_CASE("sampling is seed deterministic") {
  CHECK(standard_plan(7) == standard_plan(7));
  CHECK(json(standard_plan(7)).dump() == json(standard_plan(7)).dump());
  CHECK_FALSE(standard_plan(7) == standard_plan(8));
}

TEST_CASE("gold subsets are drawn per task when more golds exist") {
  auto plan = sample_study(testing::judged_pool(kModels, 10), 90, kModels, testing::gold_items(6), 3);
  std::set<std::vector<std::string>> distinct;
  for (const auto& t : plan.tasks) {
    CHECK(t.gold_ids.size() == 3);
    distinct.insert(t.gold_ids);
  }
  CHECK(distinct.size() > 1);
}

TEST_CASE("sampling errors") {
  auto pool = testing::judged_pool(kModels, 10);
  CHECK_THROWS_AS(sample_study(pool, 91, kModels, testing::gold_items(), 1), ValidationError);
  CHECK_THROWS_AS(sample_study(pool, 90, kModels, testing::gold_items(2), 1), ValidationError);
  CHECK_THROWS_AS(sample_study(pool, 6, {"imagechain"}, testing::gold_items(), 1), ValidationError);
  CHECK_THROWS_AS(sample_study(testing::judged_pool(kModels, 2), 90, kModels, testing::gold_items(), 1),
                  ValidationError);
  CHECK_THROWS_AS(sample_study(pool, 90, {"a", "a", "b"}, testing::gold_items(), 1), ValidationError);
  auto dup = testing::gold_items();
  dup[1].example_id = dup[0].example_id;
  CHECK_THROWS_AS(sample_study(pool, 90, kModels, dup, 1), ValidationError);
}

TEST_CASE("plan persistence") {
  testing::TempDir dir;
  const StudyPlan plan = standard_plan();
  save_plan(plan, dir / "plan.json");
  CHECK(load_plan(dir / "plan.json") == plan);
  CHECK_FALSE(plan.instructions.empty());
  CHECK(plan.instructions == default_instructions());

  json j = plan;
  j["tasks"][0]["study_ids"][0] = "nope";
  io::write_file_atomic(dir / "bad.json", j.dump());
  CHECK_THROWS_AS(load_plan(dir / "bad.json"), ValidationError);

  io::write_file_atomic(dir / "golds.jsonl",
                        io::dump_line(json(testing::gold_items()[0])) + "\n");
  CHECK(load_golds(dir / "golds.jsonl").size() == 1);
}

TEST_CASE("report over simulated annotations") {
  const StudyPlan plan = standard_plan();
  std::vector<AnnotationRecord> ann;
  // Raters agree with the judge on every item except those whose id ends in 0;
  // t03's rater answers golds wrongly and gets excluded.
  for (const auto& t : plan.tasks) {
    const std::string annotator = "ann-" + t.task_id;
    const bool honest = t.task_id != "t03";
    for (const auto& id : t.study_ids) {
      const StudyItem* item = plan.find_item(id);
      bool positive = item->judge_verdict == Verdict::similar;
      if (id.back() == '0') positive = !positive;
      if (!honest) positive = !positive;
      ann.push_back({id, annotator, positive ? 5 : 1, false, std::nullopt});
    }
    for (const auto& id : t.gold_ids) {
      const GoldItem* g = plan.find_gold(id);
      ann.push_back({id, annotator, testing::likert_for(g->expected, honest), true, g->expected});
    }
  }
  ReportOptions opts;
  opts.resamples = 2000;
  opts.seed = 1;
  auto report = build_report(plan, ann, opts);
  REQUIRE(report.annotators.size() == 30);
  int failed = 0;
  for (const auto& a : report.annotators) failed += !a.gold.passed;
  CHECK(failed == 1);
  CHECK(report.examples_rated == 90);
  CHECK(report.examples_resolved == 90);
  REQUIRE(report.accuracy.has_value());
  CHECK(report.accuracy->n == 90);
  CHECK(report.accuracy->successes == 81);
  REQUIRE(report.confusion.has_value());
  const auto& c = *report.confusion;
  CHECK(c.false_positive + c.false_negative == 9);
  CHECK(report.mcnemar_p.has_value());
  CHECK(report.simrate_diff.has_value());
  CHECK(report.calibration.size() == 3);
  CHECK(report.fleiss_binary.has_value());
  CHECK(*report.fleiss_binary == doctest::Approx(1.0));

  auto csv = report_csv(report);
  CHECK(csv.rfind("model,n,accuracy,judge_simrate,human_simrate,delta_pp\n", 0) == 0);
  CHECK(csv.find("\nall,90,") != std::string::npos);
  auto j = report_json(report);
  CHECK(j["judge_accuracy"]["n"] == 90);

  auto dup = ann;
  dup.push_back(dup.front());
  CHECK_THROWS_AS(build_report(plan, dup, opts), ValidationError);
  auto unknown = ann;
  unknown.push_back({"ex999", "x", 3, false, std::nullopt});
  CHECK_THROWS_AS(build_report(plan, unknown, opts), ValidationError);
}

TEST_CASE("report with no ratings leaves statistics undefined") {
  auto report = build_report(standard_plan(), {}, {});
  CHECK_FALSE(report.accuracy.has_value());
  CHECK_FALSE(report.fleiss_binary.has_value());
  CHECK_FALSE(report.alpha_ordinal.has_value());
  CHECK(report_json(report)["judge_accuracy"].is_null());
}
