#pragma once
// Human-validation study: sampling a plan from judged outputs, assembling
// annotator tasks, and the final report over collected ratings.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "seqstory/model.hpp"
#include "seqstory/stats.hpp"

namespace seqstory::study {

inline constexpr int kStudyItemsPerTask = 9;
inline constexpr int kGoldsPerTask = 3;
inline constexpr int kRatersPerExample = 3;

struct StudyItem {
  std::string example_id;
  std::string story_id;
  std::string model_id;
  int context_length = 0;
  std::string ground_truth;
  std::string prediction;
  std::optional<Verdict> judge_verdict;

  bool operator==(const StudyItem&) const = default;
};

struct GoldItem {
  std::string example_id;
  std::string ground_truth;
  std::string prediction;
  bool expected = false;  // binarized reference label

  bool operator==(const GoldItem&) const = default;
};

struct StudyTask {
  std::string task_id;
  std::vector<std::string> study_ids;  // kStudyItemsPerTask, or fewer in the last task
  std::vector<std::string> gold_ids;   // kGoldsPerTask

  bool operator==(const StudyTask&) const = default;
};

struct StudyPlan {
  std::uint64_t seed = 0;
  int raters_per_example = kRatersPerExample;
  std::string instructions;
  std::vector<StudyItem> items;
  std::vector<GoldItem> golds;
  std::vector<StudyTask> tasks;

  const StudyItem* find_item(std::string_view id) const;
  const GoldItem* find_gold(std::string_view id) const;

  bool operator==(const StudyPlan&) const = default;
};

void to_json(json& j, const StudyItem& v);
void from_json(const json& j, StudyItem& v);
void to_json(json& j, const GoldItem& v);
void from_json(const json& j, GoldItem& v);
void to_json(json& j, const StudyTask& v);
void from_json(const json& j, StudyTask& v);
void to_json(json& j, const StudyPlan& v);
void from_json(const json& j, StudyPlan& v);

StudyPlan load_plan(const std::filesystem::path& path);
void save_plan(const StudyPlan& plan, const std::filesystem::path& path);

/// Annotator-facing instructions shipped with the toolkit.
std::string_view default_instructions();

/// Draws n examples, n / models.size() per model. Within a model the share is
/// split across context lengths in proportion to the pool (largest
/// remainder), and each stratum is drawn with a seeded shuffle. Every example
/// is assigned to kRatersPerExample tasks of kStudyItemsPerTask items; every
/// task also carries kGoldsPerTask golds. Throws ValidationError when n does
/// not divide evenly, a model's pool is too small, or fewer than
/// kGoldsPerTask golds are given.
StudyPlan sample_study(const std::vector<EvalRecord>& records, int n,
                       const std::vector<std::string>& models, const std::vector<GoldItem>& golds,
                       std::uint64_t seed);

/// Gold rows: {example_id, ground_truth, prediction, expected}.
std::vector<GoldItem> load_golds(const std::filesystem::path& path);

struct ReportOptions {
  int resamples = stats::kDefaultResamples;
  std::uint64_t seed = 0;
  double confidence = 0.95;
};

struct AnnotatorSummary {
  std::string annotator_id;
  stats::GoldResult gold;
  int study_ratings = 0;
};

struct StudyReport {
  std::vector<AnnotatorSummary> annotators;
  int examples_rated = 0;
  int examples_resolved = 0;  // with a majority label
  double positive_prevalence = 0;  // share of retained binarized ratings
  std::optional<double> fleiss_binary;
  std::optional<double> fleiss_likert;
  std::optional<double> alpha_ordinal;
  std::optional<stats::Proportion> accuracy;
  std::optional<stats::Confusion> confusion;
  std::optional<double> mcnemar_p;
  std::optional<stats::DiffInterval> simrate_diff;
  std::vector<stats::CalibrationRow> calibration;
};

/// Drops annotators failing the gold filter, takes the majority of the
/// remaining binarized ratings per example, and compares it with the judge
/// verdicts stored in the plan (similar is positive; invalid counts as
/// negative).
StudyReport build_report(const StudyPlan& plan, const std::vector<AnnotationRecord>& annotations,
                         const ReportOptions& options = {});

json report_json(const StudyReport& report);
/// model,n,accuracy,judge_simrate,human_simrate,delta_pp
std::string report_csv(const StudyReport& report);

}  // namespace seqstory::study
