#pragma once
// Human-validation statistics: label reduction, agreement coefficients and
// judge-vs-human alignment tests.
//
// Degenerate inputs produce std::nullopt ("undefined"), never NaN.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqstory/model.hpp"

namespace seqstory::stats {

/// Likert >= 3 is positive. Throws ValidationError outside 1..5.
bool binarize(int likert);

/// Label held by a strict majority. Throws ValidationError on an empty input
/// or a tie.
bool majority_vote(const std::vector<bool>& labels);

inline constexpr int kMaxGoldErrors = 1;

struct GoldResult {
  int checked = 0;
  int wrong = 0;
  bool passed = true;
};

/// Looks only at gold records. Fails when more than kMaxGoldErrors binarized
/// answers disagree with gold_expected.
GoldResult gold_filter(std::span<const AnnotationRecord> records);

/// Rows are examples, columns categories, cells rater counts. Every row must
/// sum to the same rater count (>= 2). Undefined when expected agreement is 1.
std::optional<double> fleiss_kappa(const std::vector<std::vector<int>>& counts);

/// ratings[annotator][example], values in [lo, hi] or nullopt when missing.
/// Ordinal metric over the coincidence matrix; units with fewer than two
/// ratings are not pairable. Undefined without pairable values or when
/// expected disagreement is zero.
using RatingMatrix = std::vector<std::vector<std::optional<int>>>;
std::optional<double> krippendorff_alpha_ordinal(const RatingMatrix& ratings, int lo = 1,
                                                 int hi = 5);

struct Proportion {
  int successes = 0;
  int n = 0;
  double estimate = 0;
  double ci_low = 0;
  double ci_high = 0;
};

/// Wilson score interval. n must be positive.
Proportion wilson(int successes, int n, double confidence = 0.95);

/// Agreement of judge labels with reference labels (same length, non-empty).
Proportion accuracy_wilson(const std::vector<bool>& judge, const std::vector<bool>& reference,
                           double confidence = 0.95);

/// Exact two-sided McNemar on the discordant counts.
double mcnemar_exact(int b, int c);

struct Confusion {
  int true_positive = 0;
  int false_positive = 0;  // judge positive, reference negative
  int false_negative = 0;  // judge negative, reference positive
  int true_negative = 0;
};

Confusion confusion(const std::vector<bool>& judge, const std::vector<bool>& reference);

struct DiffInterval {
  double diff_pp = 0;  // judge minus human, percentage points
  double ci_low = 0;
  double ci_high = 0;
  int resamples = 0;
};

inline constexpr int kDefaultResamples = 10000;

/// Paired bootstrap over examples with a percentile interval. Resample r uses
/// an Rng seeded from derive_seed(seed, r), so results do not depend on
/// scheduling.
DiffInterval simrate_diff_ci(const std::vector<bool>& judge, const std::vector<bool>& human,
                             int resamples = kDefaultResamples, std::uint64_t seed = 0,
                             double confidence = 0.95);

struct CalibrationInput {
  std::string model_id;
  std::vector<bool> judge;
  std::vector<bool> human;
};

struct CalibrationRow {
  std::string model_id;
  int n = 0;
  double accuracy = 0;
  double judge_simrate = 0;
  double human_simrate = 0;
  double delta_pp = 0;  // judge minus human
};

/// One row per non-empty partition, in input order. Empty partitions are
/// skipped with a warning.
std::vector<CalibrationRow> calibration_report(std::span<const CalibrationInput> partitions);

}  // namespace seqstory::stats
