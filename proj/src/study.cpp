#include "seqstory/study.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "instructions.hpp"
#include "seqstory/error.hpp"
#include "seqstory/hashing.hpp"
#include "seqstory/json_fields.hpp"
#include "seqstory/jsonl.hpp"

namespace seqstory::study {

namespace fs = std::filesystem;
using jsonf::field;
using jsonf::field_or;
using jsonf::opt_field;
using jsonf::reject_unknown;

const StudyItem* StudyPlan::find_item(std::string_view id) const {
  for (const auto& i : items) {
    if (i.example_id == id) return &i;
  }
  return nullptr;
}

const GoldItem* StudyPlan::find_gold(std::string_view id) const {
  for (const auto& g : golds) {
    if (g.example_id == id) return &g;
  }
  return nullptr;
}

void to_json(json& j, const StudyItem& v) {
  j = json{{"example_id", v.example_id},     {"story_id", v.story_id},
           {"model_id", v.model_id},         {"context_length", v.context_length},
           {"ground_truth", v.ground_truth}, {"prediction", v.prediction}};
  j["judge_verdict"] = v.judge_verdict ? json(*v.judge_verdict) : json(nullptr);
}

void from_json(const json& j, StudyItem& v) {
  reject_unknown(j,
                 {"example_id", "story_id", "model_id", "context_length", "ground_truth",
                  "prediction", "judge_verdict"},
                 "StudyItem");
  v.example_id = field<std::string>(j, "example_id", "StudyItem");
  v.story_id = field<std::string>(j, "story_id", "StudyItem");
  v.model_id = field<std::string>(j, "model_id", "StudyItem");
  v.context_length = field<int>(j, "context_length", "StudyItem");
  v.ground_truth = field<std::string>(j, "ground_truth", "StudyItem");
  v.prediction = field<std::string>(j, "prediction", "StudyItem");
  auto verdict = opt_field<std::string>(j, "judge_verdict", "StudyItem");
  v.judge_verdict.reset();
  if (verdict) v.judge_verdict = verdict_from_string(*verdict);
}

void to_json(json& j, const GoldItem& v) {
  j = json{{"example_id", v.example_id},
           {"ground_truth", v.ground_truth},
           {"prediction", v.prediction},
           {"expected", v.expected}};
}

void from_json(const json& j, GoldItem& v) {
  reject_unknown(j, {"example_id", "ground_truth", "prediction", "expected"}, "GoldItem");
  v.example_id = field<std::string>(j, "example_id", "GoldItem");
  v.ground_truth = field<std::string>(j, "ground_truth", "GoldItem");
  v.prediction = field<std::string>(j, "prediction", "GoldItem");
  v.expected = field<bool>(j, "expected", "GoldItem");
}

void to_json(json& j, const StudyTask& v) {
  j = json{{"task_id", v.task_id}, {"study_ids", v.study_ids}, {"gold_ids", v.gold_ids}};
}

void from_json(const json& j, StudyTask& v) {
  reject_unknown(j, {"task_id", "study_ids", "gold_ids"}, "StudyTask");
  v.task_id = field<std::string>(j, "task_id", "StudyTask");
  v.study_ids = field<std::vector<std::string>>(j, "study_ids", "StudyTask");
  v.gold_ids = field<std::vector<std::string>>(j, "gold_ids", "StudyTask");
}

void to_json(json& j, const StudyPlan& v) {
  j = json{{"seed", v.seed},   {"raters_per_example", v.raters_per_example},
           {"instructions", v.instructions},
           {"items", v.items}, {"golds", v.golds},
           {"tasks", v.tasks}};
}

void from_json(const json& j, StudyPlan& v) {
  reject_unknown(j, {"seed", "raters_per_example", "instructions", "items", "golds", "tasks"},
                 "StudyPlan");
  v.seed = field<std::uint64_t>(j, "seed", "StudyPlan");
  v.raters_per_example = field_or<int>(j, "raters_per_example", kRatersPerExample, "StudyPlan");
  v.instructions = field_or<std::string>(j, "instructions", "", "StudyPlan");
  v.items = field<std::vector<StudyItem>>(j, "items", "StudyPlan");
  v.golds = field<std::vector<GoldItem>>(j, "golds", "StudyPlan");
  v.tasks = field<std::vector<StudyTask>>(j, "tasks", "StudyPlan");
  for (const auto& t : v.tasks) {
    for (const auto& id : t.study_ids) {
      if (!v.find_item(id)) {
        throw ValidationError(fmt::format("task {} references unknown example {}", t.task_id, id));
      }
    }
    for (const auto& id : t.gold_ids) {
      if (!v.find_gold(id)) {
        throw ValidationError(fmt::format("task {} references unknown gold {}", t.task_id, id));
      }
    }
  }
}

StudyPlan load_plan(const fs::path& path) {
  const std::string text = io::read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return j.get<StudyPlan>();
}

void save_plan(const StudyPlan& plan, const fs::path& path) {
  io::write_file_atomic(path, json(plan).dump(2) + "\n");
}

std::string_view default_instructions() { return detail::kInstructions; }

std::vector<GoldItem> load_golds(const fs::path& path) {
  std::vector<GoldItem> out;
  io::for_each_jsonl(path, [&](const json& row, std::size_t) { out.push_back(row.get<GoldItem>()); });
  return out;
}

namespace {

// Largest-remainder split of `total` over strata sized `sizes`.
std::vector<int> proportional_quota(const std::vector<int>& sizes, int total) {
  long pool = 0;
  for (int s : sizes) pool += s;
  std::vector<int> quota(sizes.size(), 0);
  std::vector<std::pair<long, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const long scaled = static_cast<long>(total) * sizes[i];
    quota[i] = static_cast<int>(scaled / pool);
    assigned += quota[i];
    remainders.push_back({scaled % pool, i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++quota[remainders[k].second];
  return quota;
}

}  // namespace

StudyPlan sample_study(const std::vector<EvalRecord>& records, int n,
                       const std::vector<std::string>& models, const std::vector<GoldItem>& golds,
                       std::uint64_t seed) {
  if (models.empty()) throw ValidationError("study sampling needs at least one model");
  if (std::set<std::string>(models.begin(), models.end()).size() != models.size()) {
    throw ValidationError("duplicate model ids");
  }
  if (n <= 0 || n % static_cast<int>(models.size()) != 0) {
    throw ValidationError(
        fmt::format("{} examples cannot be split evenly over {} models", n, models.size()));
  }
  if (n < kStudyItemsPerTask) {
    throw ValidationError(fmt::format("a study needs at least {} examples", kStudyItemsPerTask));
  }
  if (golds.size() < static_cast<std::size_t>(kGoldsPerTask)) {
    throw ValidationError(fmt::format("need at least {} gold examples, got {}", kGoldsPerTask,
                                      golds.size()));
  }
  std::set<std::string> gold_ids;
  for (const auto& g : golds) {
    if (!gold_ids.insert(g.example_id).second) {
      throw ValidationError(fmt::format("duplicate gold id '{}'", g.example_id));
    }
  }

  const int share = n / static_cast<int>(models.size());
  std::vector<const EvalRecord*> chosen;
  for (const auto& model : models) {
    std::map<int, std::vector<const EvalRecord*>> strata;
    std::set<std::pair<std::string, int>> seen;
    for (const auto& r : records) {
      if (r.model_id != model) continue;
      if (!seen.insert({r.story_id, r.context_length}).second) continue;
      strata[r.context_length].push_back(&r);
    }
    std::vector<int> sizes;
    int pool = 0;
    for (const auto& [_, members] : strata) {
      sizes.push_back(static_cast<int>(members.size()));
      pool += sizes.back();
    }
    if (pool < share) {
      throw ValidationError(fmt::format("model '{}' has {} outputs but {} are needed", model,
                                        pool, share));
    }
    const auto quota = proportional_quota(sizes, share);
    std::size_t s = 0;
    for (auto& [length, members] : strata) {
      std::sort(members.begin(), members.end(),
                [](const EvalRecord* a, const EvalRecord* b) { return a->story_id < b->story_id; });
      Rng rng(derive_seed(seed, fmt::format("{}/C{}", model, length)));
      portable_shuffle(members, rng);
      chosen.insert(chosen.end(), members.begin(), members.begin() + quota[s++]);
    }
  }

  Rng order(derive_seed(seed, "items"));
  portable_shuffle(chosen, order);

  StudyPlan plan;
  plan.seed = seed;
  plan.instructions = std::string(default_instructions());
  plan.golds = golds;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const EvalRecord& r = *chosen[i];
    StudyItem item{fmt::format("ex{:03}", i + 1), r.story_id,   r.model_id, r.context_length,
                   r.ground_truth,                r.prediction, r.verdict};
    if (gold_ids.contains(item.example_id)) {
      throw ValidationError(fmt::format("gold id '{}' collides with a study id", item.example_id));
    }
    plan.items.push_back(std::move(item));
  }

  // Blocks of kStudyItemsPerTask items, each handed to kRatersPerExample tasks.
  int task_no = 0;
  for (std::size_t start = 0; start < plan.items.size(); start += kStudyItemsPerTask) {
    const std::size_t end = std::min(plan.items.size(), start + kStudyItemsPerTask);
    for (int r = 0; r < plan.raters_per_example; ++r) {
      StudyTask task;
      task.task_id = fmt::format("t{:02}", ++task_no);
      for (std::size_t i = start; i < end; ++i) task.study_ids.push_back(plan.items[i].example_id);
      std::vector<std::string> pool;
      for (const auto& g : golds) pool.push_back(g.example_id);
      if (pool.size() > static_cast<std::size_t>(kGoldsPerTask)) {
        Rng rng(derive_seed(seed, "gold/" + task.task_id));
        portable_shuffle(pool, rng);
        pool.resize(kGoldsPerTask);
      }
      task.gold_ids = std::move(pool);
      plan.tasks.push_back(std::move(task));
    }
  }
  return plan;
}

StudyReport build_report(const StudyPlan& plan, const std::vector<AnnotationRecord>& annotations,
                         const ReportOptions& options) {
  std::map<std::string, std::vector<AnnotationRecord>> by_annotator;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& a : annotations) {
    validate(a);
    if (!seen.insert({a.annotator_id, a.example_id}).second) {
      throw ValidationError(
          fmt::format("annotator {} rated {} twice", a.annotator_id, a.example_id));
    }
    if (a.is_gold ? !plan.find_gold(a.example_id) : !plan.find_item(a.example_id)) {
      throw ValidationError(fmt::format("rating for unknown example {}", a.example_id));
    }
    by_annotator[a.annotator_id].push_back(a);
  }

  StudyReport report;
  std::vector<std::string> retained;
  for (const auto& [id, recs] : by_annotator) {
    AnnotatorSummary s{id, stats::gold_filter(recs), 0};
    for (const auto& r : recs) s.study_ratings += !r.is_gold;
    if (s.gold.passed) retained.push_back(id);
    report.annotators.push_back(s);
  }

  // example -> retained likert ratings, annotator order
  std::map<std::string, std::vector<int>> ratings;
  stats::RatingMatrix matrix;
  int positives = 0;
  int total = 0;
  for (const auto& id : retained) {
    std::map<std::string, int> mine;
    for (const auto& r : by_annotator[id]) {
      if (r.is_gold) continue;
      mine[r.example_id] = r.likert;
      ratings[r.example_id].push_back(r.likert);
      positives += stats::binarize(r.likert);
      ++total;
    }
    std::vector<std::optional<int>> row;
    for (const auto& item : plan.items) {
      auto it = mine.find(item.example_id);
      row.push_back(it == mine.end() ? std::nullopt : std::optional<int>(it->second));
    }
    matrix.push_back(std::move(row));
  }
  if (total > 0) report.positive_prevalence = static_cast<double>(positives) / total;

  std::vector<std::vector<int>> binary_counts;
  std::vector<std::vector<int>> likert_counts;
  std::vector<bool> judge;
  std::vector<bool> human;
  std::map<std::string, stats::CalibrationInput> per_model;
  std::vector<std::string> model_order;
  for (const auto& item : plan.items) {
    auto it = ratings.find(item.example_id);
    if (it == ratings.end()) continue;
    ++report.examples_rated;
    const auto& likerts = it->second;
    if (static_cast<int>(likerts.size()) == plan.raters_per_example) {
      std::vector<int> b(2, 0);
      std::vector<int> l(5, 0);
      for (int v : likerts) {
        ++b[stats::binarize(v)];
        ++l[static_cast<std::size_t>(v - 1)];
      }
      binary_counts.push_back(b);
      likert_counts.push_back(l);
    }
    int pos = 0;
    for (int v : likerts) pos += stats::binarize(v);
    const int neg = static_cast<int>(likerts.size()) - pos;
    if (pos == neg) continue;
    ++report.examples_resolved;
    if (!item.judge_verdict) continue;
    const bool j = *item.judge_verdict == Verdict::similar;
    const bool h = pos > neg;
    judge.push_back(j);
    human.push_back(h);
    if (!per_model.contains(item.model_id)) {
      model_order.push_back(item.model_id);
      per_model[item.model_id].model_id = item.model_id;
    }
    per_model[item.model_id].judge.push_back(j);
    per_model[item.model_id].human.push_back(h);
  }

  if (plan.raters_per_example >= 2 && !binary_counts.empty()) {
    report.fleiss_binary = stats::fleiss_kappa(binary_counts);
    report.fleiss_likert = stats::fleiss_kappa(likert_counts);
  }
  if (!matrix.empty()) report.alpha_ordinal = stats::krippendorff_alpha_ordinal(matrix);
  if (!judge.empty()) {
    report.accuracy = stats::accuracy_wilson(judge, human, options.confidence);
    report.confusion = stats::confusion(judge, human);
    report.mcnemar_p =
        stats::mcnemar_exact(report.confusion->false_positive, report.confusion->false_negative);
    report.simrate_diff = stats::simrate_diff_ci(judge, human, options.resamples, options.seed,
                                                 options.confidence);
    std::vector<stats::CalibrationInput> parts;
    for (const auto& m : model_order) parts.push_back(per_model[m]);
    report.calibration = stats::calibration_report(parts);
  }
  return report;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json report_json(const StudyReport& r) {
  json annotators = json::array();
  for (const auto& a : r.annotators) {
    annotators.push_back(json{{"annotator_id", a.annotator_id},
                              {"gold_checked", a.gold.checked},
                              {"gold_wrong", a.gold.wrong},
                              {"gold_passed", a.gold.passed},
                              {"study_ratings", a.study_ratings}});
  }
  json out{{"annotators", annotators},
           {"examples_rated", r.examples_rated},
           {"examples_resolved", r.examples_resolved},
           {"positive_prevalence", r.positive_prevalence},
           {"fleiss_kappa_binary", optional_number(r.fleiss_binary)},
           {"fleiss_kappa_likert", optional_number(r.fleiss_likert)},
           {"krippendorff_alpha_ordinal", optional_number(r.alpha_ordinal)},
           {"mcnemar_p", optional_number(r.mcnemar_p)}};
  if (r.accuracy) {
    out["judge_accuracy"] = json{{"matches", r.accuracy->successes},
                                 {"n", r.accuracy->n},
                                 {"accuracy", r.accuracy->estimate},
                                 {"ci_low", r.accuracy->ci_low},
                                 {"ci_high", r.accuracy->ci_high}};
  } else {
    out["judge_accuracy"] = nullptr;
  }
  if (r.confusion) {
    out["confusion"] = json{{"true_positive", r.confusion->true_positive},
                            {"false_positive", r.confusion->false_positive},
                            {"false_negative", r.confusion->false_negative},
                            {"true_negative", r.confusion->true_negative}};
  } else {
    out["confusion"] = nullptr;
  }
  if (r.simrate_diff) {
    out["simrate_difference"] = json{{"diff_pp", r.simrate_diff->diff_pp},
                                     {"ci_low", r.simrate_diff->ci_low},
                                     {"ci_high", r.simrate_diff->ci_high},
                                     {"resamples", r.simrate_diff->resamples},
                                     {"method", "paired bootstrap, percentile"}};
  } else {
    out["simrate_difference"] = nullptr;
  }
  json calibration = json::array();
  for (const auto& c : r.calibration) {
    calibration.push_back(json{{"model_id", c.model_id},
                               {"n", c.n},
                               {"accuracy", c.accuracy},
                               {"judge_simrate", c.judge_simrate},
                               {"human_simrate", c.human_simrate},
                               {"delta_pp", c.delta_pp}});
  }
  out["calibration"] = calibration;
  return out;
}

std::string report_csv(const StudyReport& r) {
  std::string out = "model,n,accuracy,judge_simrate,human_simrate,delta_pp\n";
  int n = 0;
  double acc = 0;
  double js = 0;
  double hs = 0;
  for (const auto& c : r.calibration) {
    out += fmt::format("{},{},{:.4f},{:.4f},{:.4f},{:.2f}\n", c.model_id, c.n, c.accuracy,
                       c.judge_simrate, c.human_simrate, c.delta_pp);
    n += c.n;
    acc += c.accuracy * c.n;
    js += c.judge_simrate * c.n;
    hs += c.human_simrate * c.n;
  }
  if (n > 0) {
    out += fmt::format("all,{},{:.4f},{:.4f},{:.4f},{:.2f}\n", n, acc / n, js / n, hs / n,
                       (js - hs) * 100.0 / n);
  }
  return out;
}

}  // namespace seqstory::study
