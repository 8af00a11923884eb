#pragma once
// Out-of-domain scoring: behavioral cues (verbs and verb phrases) extracted
// from descriptions and matched against human cue annotations by set F1.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "seqstory/chat.hpp"
#include "seqstory/net.hpp"

namespace seqstory::ood {

using CueSet = std::set<std::string>;

/// Lowercase, trim, collapse internal whitespace.
std::string normalize_cue(std::string_view cue);

std::vector<chat::ChatMessage> build_cue_prompt(std::string_view description);

/// One cue per line or comma-separated; list bullets and numbering are
/// stripped, empty entries dropped, duplicates merged.
CueSet parse_cue_reply(std::string_view reply);

/// Throws ValidationError on an empty description; transport failures
/// propagate after the policy's retries.
CueSet extract_cues(std::string_view description, chat::ChatClient& client,
                    const net::RetryPolicy& policy = {});

/// Offline extractor: every "-ing" word that is not a stative or non-verb
/// form, comma-joined.
class MockCueClient final : public chat::ChatClient {
 public:
  std::string id() const override { return "mock-cues-ing"; }
  std::string complete(const std::vector<chat::ChatMessage>& messages) override;
};

struct F1 {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Both sets empty gives all ones; exactly one empty gives zero F1.
F1 cue_f1(const CueSet& predicted, const CueSet& gold);

/// JSONL rows {example_id, cues: [..]}; cues are normalized on load.
std::map<std::string, CueSet> load_gold_cues(const std::filesystem::path& path);

struct ExampleScore {
  std::string example_id;
  CueSet predicted;
  CueSet gold;
  F1 score;
};

struct DatasetReport {
  std::string dataset;  // free-form tag, e.g. Comics
  std::vector<ExampleScore> examples;
  /// Macro average over examples.
  F1 mean() const;
};

/// Scores predictions {example_id -> description} against gold cues. An
/// example missing from either side is a ValidationError.
DatasetReport score_dataset(std::string dataset,
                            const std::map<std::string, std::string>& predictions,
                            const std::map<std::string, CueSet>& gold, chat::ChatClient& client,
                            const net::RetryPolicy& policy = {});

/// dataset,example_id,precision,recall,f1 rows plus a final "mean" row.
std::string report_csv(const DatasetReport& report);
json report_json(const DatasetReport& report);

}  // namespace seqstory::ood
