#include "seqstory/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "seqstory/error.hpp"
#include "seqstory/hashing.hpp"

namespace seqstory::stats {

bool binarize(int likert) {
  if (likert < 1 || likert > 5) {
    throw ValidationError(fmt::format("likert {} is outside 1..5", likert));
  }
  return likert >= 3;
}

bool majority_vote(const std::vector<bool>& labels) {
  if (labels.empty()) throw ValidationError("majority vote over no labels");
  const auto pos = std::count(labels.begin(), labels.end(), true);
  const auto neg = static_cast<std::ptrdiff_t>(labels.size()) - pos;
  if (pos == neg) throw ValidationError("majority vote is tied");
  return pos > neg;
}

GoldResult gold_filter(std::span<const AnnotationRecord> records) {
  GoldResult r;
  for (const auto& rec : records) {
    if (!rec.is_gold) continue;
    validate(rec);
    ++r.checked;
    if (binarize(rec.likert) != *rec.gold_expected) ++r.wrong;
  }
  r.passed = r.wrong <= kMaxGoldErrors;
  return r;
}

std::optional<double> fleiss_kappa(const std::vector<std::vector<int>>& counts) {
  if (counts.empty()) throw ValidationError("fleiss kappa needs at least one example");
  const std::size_t k = counts.front().size();
  if (k < 2) throw ValidationError("fleiss kappa needs at least two categories");
  const long raters = std::accumulate(counts.front().begin(), counts.front().end(), 0L);
  if (raters < 2) throw ValidationError("fleiss kappa needs at least two raters per example");

  std::vector<double> column(k, 0.0);
  double p_bar = 0.0;
  for (const auto& row : counts) {
    if (row.size() != k) throw ValidationError("fleiss kappa rows differ in category count");
    long sum = 0;
    long sq = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (row[j] < 0) throw ValidationError("negative rater count");
      sum += row[j];
      sq += static_cast<long>(row[j]) * row[j];
      column[j] += row[j];
    }
    if (sum != raters) throw ValidationError("fleiss kappa needs a fixed rater count");
    p_bar += static_cast<double>(sq - raters) / static_cast<double>(raters * (raters - 1));
  }
  const double n = static_cast<double>(counts.size());
  p_bar /= n;
  double p_e = 0.0;
  for (double c : column) {
    const double p = c / (n * static_cast<double>(raters));
    p_e += p * p;
  }
  if (std::abs(1.0 - p_e) < 1e-15) return std::nullopt;
  return (p_bar - p_e) / (1.0 - p_e);
}

std::optional<double> krippendorff_alpha_ordinal(const RatingMatrix& ratings, int lo, int hi) {
  if (hi <= lo) throw ValidationError("rating scale needs at least two values");
  const auto values = static_cast<std::size_t>(hi - lo + 1);
  std::size_t units = 0;
  for (const auto& row : ratings) units = std::max(units, row.size());

  // coincidence matrix
  std::vector<std::vector<double>> o(values, std::vector<double>(values, 0.0));
  for (std::size_t u = 0; u < units; ++u) {
    std::vector<std::size_t> in_unit;
    for (const auto& row : ratings) {
      if (u >= row.size() || !row[u]) continue;
      const int v = *row[u];
      if (v < lo || v > hi) {
        throw ValidationError(fmt::format("rating {} is outside {}..{}", v, lo, hi));
      }
      in_unit.push_back(static_cast<std::size_t>(v - lo));
    }
    const std::size_t m = in_unit.size();
    if (m < 2) continue;
    const double w = 1.0 / static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (i != j) o[in_unit[i]][in_unit[j]] += w;
      }
    }
  }

  std::vector<double> marg(values, 0.0);
  double n = 0.0;
  for (std::size_t c = 0; c < values; ++c) {
    for (std::size_t k = 0; k < values; ++k) marg[c] += o[c][k];
    n += marg[c];
  }
  if (n < 2.0 - 1e-12) return std::nullopt;

  auto delta2 = [&](std::size_t c, std::size_t k) {
    if (c > k) std::swap(c, k);
    double s = 0.0;
    for (std::size_t g = c; g <= k; ++g) s += marg[g];
    s -= (marg[c] + marg[k]) / 2.0;
    return s * s;
  };

  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t c = 0; c < values; ++c) {
    for (std::size_t k = 0; k < values; ++k) {
      if (c == k) continue;
      const double d = delta2(c, k);
      observed += o[c][k] * d;
      expected += marg[c] * marg[k] * d;
    }
  }
  if (expected <= 0.0) return std::nullopt;
  return 1.0 - (n - 1.0) * observed / expected;
}

Proportion wilson(int successes, int n, double confidence) {
  if (n <= 0) throw ValidationError("wilson interval needs n > 0");
  if (successes < 0 || successes > n) throw ValidationError("successes must lie within 0..n");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw ValidationError("confidence must lie strictly between 0 and 1");
  }
  const double z =
      boost::math::quantile(boost::math::normal_distribution<>(), 1.0 - (1.0 - confidence) / 2.0);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  Proportion r;
  r.successes = successes;
  r.n = n;
  r.estimate = p;
  r.ci_low = std::clamp(centre - half, 0.0, 1.0);
  r.ci_high = std::clamp(centre + half, 0.0, 1.0);
  // keep the point estimate inside despite rounding at the boundaries
  r.ci_low = std::min(r.ci_low, p);
  r.ci_high = std::max(r.ci_high, p);
  return r;
}

namespace {

void require_paired(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size()) throw ValidationError("label vectors differ in length");
  if (a.empty()) throw ValidationError("label vectors are empty");
}

}  // namespace

Proportion accuracy_wilson(const std::vector<bool>& judge, const std::vector<bool>& reference,
                           double confidence) {
  require_paired(judge, reference);
  int matches = 0;
  for (std::size_t i = 0; i < judge.size(); ++i) matches += judge[i] == reference[i];
  return wilson(matches, static_cast<int>(judge.size()), confidence);
}

double mcnemar_exact(int b, int c) {
  if (b < 0 || c < 0) throw ValidationError("discordant counts must be non-negative");
  if (b + c == 0) return 1.0;
  const boost::math::binomial_distribution<> dist(b + c, 0.5);
  return std::min(1.0, 2.0 * boost::math::cdf(dist, std::min(b, c)));
}

Confusion confusion(const std::vector<bool>& judge, const std::vector<bool>& reference) {
  require_paired(judge, reference);
  Confusion c;
  for (std::size_t i = 0; i < judge.size(); ++i) {
    if (judge[i] && reference[i]) ++c.true_positive;
    else if (judge[i]) ++c.false_positive;
    else if (reference[i]) ++c.false_negative;
    else ++c.true_negative;
  }
  return c;
}

namespace {

// Linear interpolation between order statistics.
double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

}  // namespace

DiffInterval simrate_diff_ci(const std::vector<bool>& judge, const std::vector<bool>& human,
                             int resamples, std::uint64_t seed, double confidence) {
  require_paired(judge, human);
  if (resamples < 1) throw ValidationError("need at least one bootstrap resample");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw ValidationError("confidence must lie strictly between 0 and 1");
  }
  const std::size_t n = judge.size();
  // per-example contribution to the difference
  std::vector<int> d(n);
  long total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = static_cast<int>(judge[i]) - static_cast<int>(human[i]);
    total += d[i];
  }
  const double scale = 100.0 / static_cast<double>(n);

  std::vector<double> diffs(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    long sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += d[uniform_below(rng, n)];
    diffs[static_cast<std::size_t>(r)] = static_cast<double>(sum) * scale;
  }
  std::sort(diffs.begin(), diffs.end());
  const double tail = (1.0 - confidence) / 2.0;
  return {static_cast<double>(total) * scale, percentile(diffs, tail),
          percentile(diffs, 1.0 - tail), resamples};
}

std::vector<CalibrationRow> calibration_report(std::span<const CalibrationInput> partitions) {
  std::vector<CalibrationRow> rows;
  for (const auto& p : partitions) {
    if (p.judge.size() != p.human.size()) {
      throw ValidationError(fmt::format("partition '{}' has mismatched label counts", p.model_id));
    }
    if (p.judge.empty()) {
      spdlog::warn("calibration: partition '{}' is empty, skipped", p.model_id);
      continue;
    }
    const auto n = static_cast<double>(p.judge.size());
    int match = 0;
    int jpos = 0;
    int hpos = 0;
    for (std::size_t i = 0; i < p.judge.size(); ++i) {
      match += p.judge[i] == p.human[i];
      jpos += p.judge[i];
      hpos += p.human[i];
    }
    CalibrationRow row;
    row.model_id = p.model_id;
    row.n = static_cast<int>(p.judge.size());
    row.accuracy = match / n;
    row.judge_simrate = jpos / n;
    row.human_simrate = hpos / n;
    row.delta_pp = (jpos - hpos) * 100.0 / n;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace seqstory::stats
