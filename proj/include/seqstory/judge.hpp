#pragma once
// SimRate: judge prompt, verdict parsing, batch judging and aggregation.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seqstory/chat.hpp"
#include "seqstory/dataset.hpp"
#include "seqstory/model.hpp"
#include "seqstory/net.hpp"

namespace seqstory::judge {

/// System message, two worked demonstrations with feedback turns, then the
/// instruction block carrying `ground_truth` and `prediction`. Throws
/// ValidationError when either text is empty.
std::vector<chat::ChatMessage> build_judge_prompt(std::string_view ground_truth,
                                                  std::string_view prediction);

inline constexpr std::string_view kPlaceholder = "[...]";

/// The prompt with both insertion points left as kPlaceholder.
std::vector<chat::ChatMessage> judge_prompt_template();

/// Llama 3 chat rendering, ending with an open assistant header.
std::string render_llama3(const std::vector<chat::ChatMessage>& messages);

/// Case-insensitive match on the first alphabetic token: yes -> similar,
/// no -> not_similar, anything else -> invalid.
Verdict parse_verdict(std::string_view raw);

/// Pulls (ground truth, prediction) back out of a judge prompt's final
/// instruction block. Used by mocks and audit tooling.
std::optional<std::pair<std::string, std::string>> extract_pair(
    const std::vector<chat::ChatMessage>& messages);

/// Deterministic judge for offline runs: answers "Yes" when the Jaccard
/// overlap of content words between ground truth and prediction reaches
/// `threshold`.
class MockJudgeClient final : public chat::ChatClient {
 public:
  explicit MockJudgeClient(double threshold = 0.25) : threshold_(threshold) {}
  std::string id() const override { return "mock-judge-overlap"; }
  std::string complete(const std::vector<chat::ChatMessage>& messages) override;

 private:
  double threshold_;
};

/// Content-word Jaccard overlap used by MockJudgeClient.
double keyword_overlap(std::string_view a, std::string_view b);

struct JudgeOptions {
  net::RetryPolicy retry;
  int invalid_retries = 1;
  std::string judge_id;  // defaults to the client id
  std::filesystem::path audit_log;  // JSONL; empty disables auditing
};

/// Judges every record that has no verdict yet, in place. Transport failures
/// are retried per the policy; an invalid reply is retried `invalid_retries`
/// times and then kept as invalid. Audit lines are appended in record order.
/// Throws BatchError listing the keys of records left unjudged.
void judge_batch(std::vector<EvalRecord>& records, chat::ChatClient& client,
                 const JudgeOptions& options = {});

struct SimRateCounts {
  int similar = 0;
  int not_similar = 0;
  int invalid = 0;

  int total() const { return similar + not_similar + invalid; }
  /// similar / total; absent when nothing was judged.
  std::optional<double> rate() const;
  SimRateCounts& operator+=(const SimRateCounts& o);
  bool operator==(const SimRateCounts&) const = default;
};

/// Throws ValidationError when a record has no verdict.
SimRateCounts simrate(std::span<const EvalRecord> records);

/// C2, C3, C4, C5, C6, C4-6, C2-6.
std::vector<dataset::ContextSetting> default_table_columns();

struct SimRateRow {
  std::string model_id;
  std::vector<SimRateCounts> cells;  // one per column
};

struct SimRateTable {
  std::vector<dataset::ContextSetting> columns;
  std::vector<SimRateRow> rows;  // sorted by model id
};

/// Groups records by model and pools counts per context-length column.
SimRateTable simrate_table(std::span<const EvalRecord> records,
                           const std::vector<dataset::ContextSetting>& columns);

/// model,C2,...: percentages with two decimals; empty cell when undefined.
std::string simrate_csv(const SimRateTable& table);
json simrate_json(const SimRateTable& table);

}  // namespace seqstory::judge
