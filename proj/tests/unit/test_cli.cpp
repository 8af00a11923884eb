#include <doctest.h>

#include "pipeline_fixture.hpp"
#include "seqstory/judge.hpp"
#include "seqstory/study.hpp"
#include "study_fixture.hpp"

using namespace seqstory;
namespace {
int run_cli(const std::vector<std::string>& args) { return testing::cli(args); }
}  // namespace

TEST_CASE("exit codes") {
  CHECK(run_cli({"--version"}) == 0);
  CHECK(run_cli({"--bogus"}) == 2);
  CHECK(run_cli({}) == 2);
  CHECK(run_cli({"split"}) == 2);
  CHECK(run_cli({"judge", "--judge", "nope"}) == 2);
  testing::TempDir dir;
  CHECK(run_cli({"split", "--manifest", (dir / "missing.jsonl").string()}) == 1);
}

TEST_CASE("pipeline outputs and idempotent reruns") {
  testing::TempDir dir;
  auto in = testing::write_corpus(dir / "corpus", 12, 3);
  REQUIRE(testing::run_pipeline(in, dir / "run", 5) == 0);
  auto train = io::read_jsonl(dir / "run/train.jsonl");
  auto manifest = json::parse(io::read_file(dir / "run/train.jsonl.manifest.json"));
  CHECK(manifest["row_count"] == train.size());
  CHECK(manifest["encoder_id"] == "mock-d16-s5");
  auto contexts = io::read_jsonl(dir / "run/val.contexts.jsonl");
  REQUIRE_FALSE(contexts.empty());
  for (const auto& row : contexts) {
    const std::string text = row["transcript"];
    CHECK(text.substr(text.size() - 10) == "ASSISTANT:");
    CHECK(row["target_turn"] == row["context_length"]);
  }

  const std::string before = io::read_file(dir / "run/frames/stories.jsonl");
  REQUIRE(testing::run_pipeline(in, dir / "run", 5) == 0);
  CHECK(io::read_file(dir / "run/frames/stories.jsonl") == before);
}

TEST_CASE("judge and report commands with the mock judge") {
  testing::TempDir dir;
  auto in = testing::write_corpus(dir / "corpus", 20, 8);
  REQUIRE(testing::run_pipeline(in, dir / "run", 1) == 0);
  auto val = dataset::load_manifest(dir / "run/data/val.jsonl").stories;
  std::vector<json> preds;
  for (const auto& s : val) {
    preds.push_back({{"story_id", s.id()}, {"model_id", "copy"}, {"prediction", s.scenes().back().description()}});
    preds.push_back({{"story_id", s.id()}, {"model_id", "junk"}, {"prediction", "Bananas orbit quietly."}});
  }
  io::write_jsonl_atomic(dir / "preds.jsonl", preds);
  const std::vector<std::string> args = {
      "judge", "--pred", (dir / "preds.jsonl").string(), "--data", (dir / "run/data").string(),
      "--split", "val", "--judge", "mock", "--out", (dir / "verdicts.jsonl").string(),
      "--report", (dir / "simrate.csv").string(), "--audit", (dir / "audit.jsonl").string()};
  REQUIRE(run_cli(args) == 0);
  auto verdicts = io::read_jsonl(dir / "verdicts.jsonl");
  CHECK(verdicts.size() == preds.size());
  const auto audit_lines = io::read_jsonl(dir / "audit.jsonl").size();
  CHECK(audit_lines == preds.size());
  const std::string csv = io::read_file(dir / "simrate.csv");
  CHECK(csv.rfind("model,C2,C3,C4,C5,C6,C4-6,C2-6\n", 0) == 0);
  CHECK(csv.find("copy,") != std::string::npos);

  // a rerun reuses every stored verdict
  REQUIRE(run_cli(args) == 0);
  CHECK(io::read_jsonl(dir / "audit.jsonl").size() == audit_lines);

  CHECK(run_cli({"report", "simrate", "--verdicts", (dir / "verdicts.jsonl").string(), "--columns",
             "C2-6", "--out", (dir / "pooled.csv").string()}) == 0);
  const std::string pooled = io::read_file(dir / "pooled.csv");
  CHECK(pooled.find("copy,100.00") != std::string::npos);
  CHECK(pooled.find("junk,0.00") != std::string::npos);
}

TEST_CASE("config file and flag precedence") {
  testing::TempDir dir;
  auto in = testing::write_corpus(dir / "corpus", 6, 2);
  io::write_file_atomic(dir / "config.json",
                        json{{"seed", 11}, {"split", {{"out", (dir / "from-config").string()}}}}.dump());
  CHECK(run_cli({"--config", (dir / "config.json").string(), "split", "--manifest", in.manifest.string()}) == 0);
  CHECK(dataset::load_manifest(dir / "from-config/val.jsonl").header["seed"] == 11);
  CHECK(run_cli({"--config", (dir / "config.json").string(), "--seed", "12", "split", "--manifest",
             in.manifest.string(), "--out", (dir / "from-flag").string()}) == 0);
  CHECK(dataset::load_manifest(dir / "from-flag/val.jsonl").header["seed"] == 12);
  io::write_file_atomic(dir / "bad.json", "[1,2]");
  CHECK(run_cli({"--config", (dir / "bad.json").string(), "split", "--manifest", in.manifest.string()}) == 1);
}

TEST_CASE("study commands") {
  testing::TempDir dir;
  const std::vector<std::string> models = {"a", "b", "c"};
  std::vector<json> rows;
  for (const auto& r : testing::judged_pool(models, 4)) rows.push_back(r);
  io::write_jsonl_atomic(dir / "verdicts.jsonl", rows);
  std::vector<json> golds;
  for (const auto& g : testing::gold_items()) golds.push_back(g);
  io::write_jsonl_atomic(dir / "golds.jsonl", golds);
  REQUIRE(run_cli({"--seed", "7", "study", "sample", "--verdicts", (dir / "verdicts.jsonl").string(),
               "--golds", (dir / "golds.jsonl").string(), "--n", "18", "--models", "a,b,c",
               "--out", (dir / "plan.json").string()}) == 0);
  auto plan = study::load_plan(dir / "plan.json");
  CHECK(plan.items.size() == 18);
  CHECK(plan.tasks.size() == 6);

  std::vector<json> ann;
  for (const auto& t : plan.tasks) {
    for (const auto& id : t.study_ids) {
      const bool yes = plan.find_item(id)->judge_verdict == Verdict::similar;
      ann.push_back(AnnotationRecord{id, "r" + t.task_id, yes ? 4 : 2, false, std::nullopt});
    }
    for (const auto& id : t.gold_ids) {
      const bool e = plan.find_gold(id)->expected;
      ann.push_back(AnnotationRecord{id, "r" + t.task_id, e ? 5 : 1, true, e});
    }
  }
  io::write_jsonl_atomic(dir / "ann.jsonl", ann);
  REQUIRE(run_cli({"study", "report", "--plan", (dir / "plan.json").string(), "--annotations",
               (dir / "ann.jsonl").string(), "--resamples", "200", "--out",
               (dir / "calibration.csv").string(), "--report", (dir / "report.json").string()}) == 0);
  auto report = json::parse(io::read_file(dir / "report.json"));
  CHECK(report["judge_accuracy"]["accuracy"] == 1.0);
  CHECK(io::read_file(dir / "calibration.csv").find("\nall,18,") != std::string::npos);
}

TEST_CASE("ood command with the mock extractor") {
  testing::TempDir dir;
  io::write_jsonl_atomic(dir / "pred.jsonl",
                         {json{{"example_id", "c1"}, {"prediction", io::read_file(testing::golden("comic_description.txt"))}}});
  io::write_jsonl_atomic(dir / "gold.jsonl",
                         {json{{"example_id", "c1"}, {"cues", {"moving", "holding", "throwing", "standing"}}}});
  REQUIRE(run_cli({"ood", "--pred", (dir / "pred.jsonl").string(), "--gold", (dir / "gold.jsonl").string(),
               "--dataset", "Comics", "--extractor", "mock", "--out", (dir / "ood.csv").string()}) == 0);
  const std::string csv = io::read_file(dir / "ood.csv");
  // 4 of 7 predicted cues are gold: P = 4/7, R = 1, F1 = 8/11
  CHECK(csv.find("Comics,c1,0.5714,1.0000,0.7273") != std::string::npos);
}
