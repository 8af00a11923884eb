#include "seqstory/judge.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "seqstory/concurrency.hpp"
#include "seqstory/error.hpp"
#include "seqstory/jsonl.hpp"

namespace seqstory::judge {

using chat::ChatMessage;

namespace {

constexpr std::string_view kSystem =
    "You are a pattern-following assistant that can only answer with \"Yes\" or \"No\". "
    "Your goal is to determine whether a predicted caption conveys a similar enough "
    "meaning to the ground truth caption provided.";

constexpr std::string_view kInstruction =
    "### Instruction:\n"
    "Determine if the predicted caption conveys a similar meaning to the ground truth "
    "caption.\n\n";

constexpr std::string_view kQuestion =
    "### Does the predicted caption convey a similar meaning to the ground truth caption "
    "(Yes or No)?";

constexpr std::string_view kFeedbackOne =
    "Good job! Indeed, the predicted caption conveys a similar meaning to the ground truth. "
    "Both describe a person riding a bicycle in a park, even though different words are "
    "used. The core meaning is preserved.";

constexpr std::string_view kFeedbackTwo =
    "Great! Although the wording differs, the predicted caption captures the essence of the "
    "ground truth. Both describe a woman sitting on a bench in a shaded park area, reading a "
    "book. While the predicted caption simplifies certain details, such as omitting the "
    "specific mention of the \"paperback novel\" and \"under the shade of a tree,\" it still "
    "conveys the same overall scene and activity, making the meaning similar.";

constexpr std::string_view kOneMore =
    "Let's do one more. Remember to answer with one word either \"Yes\" or \"No\".";

constexpr std::string_view kGroundTruthHeader = "### Ground truth caption:\n";
constexpr std::string_view kPredictedHeader = "### Predicted caption:\n";

std::vector<ChatMessage> assemble(std::string_view ground_truth, std::string_view prediction) {
  std::string demo_one;
  demo_one += kInstruction;
  demo_one += kGroundTruthHeader;
  demo_one += "A man is riding a bicycle through a park.\n\n";
  // The first demonstration's header has no colon.
  demo_one += "### Predicted caption\n";
  demo_one += "A person is cycling along a path in a park.\n\n";
  demo_one += kQuestion;

  std::string demo_two = std::string(kFeedbackOne) + "\n\n";
  demo_two += kInstruction;
  demo_two += kGroundTruthHeader;
  demo_two +=
      "A woman is sitting on a wooden bench in the park, reading a paperback novel under the "
      "shade of a tree.\n\n";
  demo_two += kPredictedHeader;
  demo_two +=
      "A woman relaxes in a shaded area of the park, sitting on a bench while enjoying a "
      "book.\n\n";
  demo_two += kQuestion;

  std::string final_block = std::string(kFeedbackTwo) + "\n\n";
  final_block += kOneMore;
  final_block += "\n\n";
  final_block += kInstruction;
  final_block += kGroundTruthHeader;
  final_block += ground_truth;
  final_block += "\n\n";
  final_block += kPredictedHeader;
  final_block += prediction;
  final_block += "\n\n";
  final_block += kQuestion;
  final_block += ":";

  return {{"system", std::string(kSystem)},
          {"user", std::move(demo_one)},
          {"assistant", "Yes"},
          {"user", std::move(demo_two)},
          {"assistant", "Yes"},
          {"user", std::move(final_block)}};
}

}  // namespace

std::vector<ChatMessage> build_judge_prompt(std::string_view ground_truth,
                                            std::string_view prediction) {
  if (ground_truth.empty()) throw ValidationError("judge prompt needs a ground truth");
  if (prediction.empty()) throw ValidationError("judge prompt needs a prediction");
  return assemble(ground_truth, prediction);
}

std::vector<ChatMessage> judge_prompt_template() { return assemble(kPlaceholder, kPlaceholder); }

std::string render_llama3(const std::vector<ChatMessage>& messages) {
  std::string out;
  for (const auto& m : messages) {
    out += "<|start_header_id|>" + m.role + "<|end_header_id|>\n\n" + m.content + "<|eot_id|>";
  }
  out += "<|start_header_id|>assistant<|end_header_id|>\n\n";
  return out;
}

Verdict parse_verdict(std::string_view raw) {
  auto is_alpha = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; };
  auto begin = std::find_if(raw.begin(), raw.end(), is_alpha);
  auto end = std::find_if_not(begin, raw.end(), is_alpha);
  std::string token(begin, end);
  std::transform(token.begin(), token.end(), token.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (token == "yes") return Verdict::similar;
  if (token == "no") return Verdict::not_similar;
  return Verdict::invalid;
}

std::optional<std::pair<std::string, std::string>> extract_pair(
    const std::vector<ChatMessage>& messages) {
  if (messages.empty()) return std::nullopt;
  const std::string& text = messages.back().content;
  const auto gt = text.rfind(kGroundTruthHeader);
  const auto pred = text.rfind(kPredictedHeader);
  const auto question = text.rfind("\n\n### Does");
  if (gt == std::string::npos || pred == std::string::npos || question == std::string::npos ||
      !(gt < pred && pred < question)) {
    return std::nullopt;
  }
  const auto gt_start = gt + kGroundTruthHeader.size();
  const auto pred_start = pred + kPredictedHeader.size();
  if (pred < gt_start + 2) return std::nullopt;
  return std::pair{text.substr(gt_start, pred - 2 - gt_start),
                   text.substr(pred_start, question - pred_start)};
}

namespace {

const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "a",    "an",   "the",  "is",    "are",   "was",  "were", "be",   "been", "in",
      "on",   "of",   "and",  "or",    "to",    "with", "while", "his", "her",  "their",
      "its",  "at",   "into", "by",    "for",   "from", "this", "that", "it",   "as",
      "has",  "have", "there", "then", "who",   "which", "he",  "she",  "they", "them",
      "some", "up",   "down", "out",   "over",  "very", "image", "scene", "next", "other"};
  return words;
}

std::string stem(std::string w) {
  if (w.size() > 5 && w.ends_with("ing")) w.resize(w.size() - 3);
  else if (w.size() > 4 && w.ends_with("ed")) w.resize(w.size() - 2);
  else if (w.size() > 3 && w.ends_with('s') && !w.ends_with("ss")) w.pop_back();
  return w;
}

std::set<std::string> content_words(std::string_view text) {
  std::set<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty() && !stopwords().contains(word)) out.insert(stem(word));
    word.clear();
  };
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

}  // namespace

double keyword_overlap(std::string_view a, std::string_view b) {
  const auto wa = content_words(a);
  const auto wb = content_words(b);
  if (wa.empty() && wb.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& w : wa) common += wb.count(w);
  return static_cast<double>(common) / static_cast<double>(wa.size() + wb.size() - common);
}

std::string MockJudgeClient::complete(const std::vector<ChatMessage>& messages) {
  auto pair = extract_pair(messages);
  if (!pair) return "I cannot tell.";
  return keyword_overlap(pair->first, pair->second) >= threshold_ ? "Yes" : "No";
}

void judge_batch(std::vector<EvalRecord>& records, chat::ChatClient& client,
                 const JudgeOptions& options) {
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].verdict) pending.push_back(i);
  }
  if (pending.empty()) return;
  const std::string judge_id = options.judge_id.empty() ? client.id() : options.judge_id;

  std::vector<std::vector<json>> audit(pending.size());
  auto errors = parallel_for(pending.size(), options.retry.concurrency, [&](std::size_t p) {
    EvalRecord& record = records[pending[p]];
    const auto messages = build_judge_prompt(record.ground_truth, record.prediction);
    int retries = 0;
    int attempt = 0;
    Verdict verdict = Verdict::invalid;
    for (int round = 0; round <= options.invalid_retries; ++round) {
      if (round > 0) ++retries;
      std::string reply;
      try {
        reply = net::call_with_retries(
            options.retry,
            [&] {
              ++attempt;
              try {
                return client.complete(messages);
              } catch (const std::exception& e) {
                audit[p].push_back(json{{"key", record.key()},
                                        {"attempt", attempt},
                                        {"judge_id", judge_id},
                                        {"request", messages},
                                        {"error", e.what()}});
                throw;
              }
            },
            &retries);
      } catch (...) {
        record.retry_count = retries;
        throw;
      }
      verdict = parse_verdict(reply);
      audit[p].push_back(json{{"key", record.key()},
                              {"attempt", attempt},
                              {"judge_id", judge_id},
                              {"request", messages},
                              {"response", reply},
                              {"verdict", verdict}});
      if (verdict != Verdict::invalid) break;
    }
    record.verdict = verdict;
    record.judge_id = judge_id;
    record.retry_count = retries;
  });

  if (!options.audit_log.empty()) {
    for (const auto& lines : audit) {
      for (const auto& line : lines) io::append_line_locked(options.audit_log, line.dump());
    }
  }

  std::vector<std::string> unjudged;
  for (std::size_t p = 0; p < pending.size(); ++p) {
    if (!errors[p]) continue;
    unjudged.push_back(records[pending[p]].key());
    try {
      std::rethrow_exception(errors[p]);
    } catch (const std::exception& e) {
      spdlog::warn("judging {} failed: {}", records[pending[p]].key(), e.what());
    }
  }
  if (!unjudged.empty()) {
    throw BatchError(fmt::format("{} of {} records could not be judged", unjudged.size(),
                                 pending.size()),
                     unjudged);
  }
}

std::optional<double> SimRateCounts::rate() const {
  if (total() == 0) return std::nullopt;
  return static_cast<double>(similar) / static_cast<double>(total());
}

SimRateCounts& SimRateCounts::operator+=(const SimRateCounts& o) {
  similar += o.similar;
  not_similar += o.not_similar;
  invalid += o.invalid;
  return *this;
}

SimRateCounts simrate(std::span<const EvalRecord> records) {
  SimRateCounts c;
  for (const auto& r : records) {
    if (!r.verdict) {
      throw ValidationError(fmt::format("record {} has not been judged", r.key()));
    }
    switch (*r.verdict) {
      case Verdict::similar: ++c.similar; break;
      case Verdict::not_similar: ++c.not_similar; break;
      case Verdict::invalid: ++c.invalid; break;
    }
  }
  return c;
}

std::vector<dataset::ContextSetting> default_table_columns() {
  return {{2, 2}, {3, 3}, {4, 4}, {5, 5}, {6, 6}, {4, 6}, {2, 6}};
}

SimRateTable simrate_table(std::span<const EvalRecord> records,
                           const std::vector<dataset::ContextSetting>& columns) {
  // Per model, per context length, then pooled into the requested columns.
  std::map<std::string, std::map<int, SimRateCounts>> by_model;
  for (const auto& r : records) {
    const EvalRecord* one = &r;
    by_model[r.model_id][r.context_length] += simrate(std::span(one, 1));
  }
  SimRateTable table;
  table.columns = columns;
  for (const auto& [model, by_length] : by_model) {
    SimRateRow row{model, {}};
    for (const auto& col : columns) {
      SimRateCounts cell;
      for (const auto& [length, counts] : by_length) {
        if (col.contains(length)) cell += counts;
      }
      row.cells.push_back(cell);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string simrate_csv(const SimRateTable& table) {
  std::string out = "model";
  for (const auto& c : table.columns) out += "," + c.name();
  out += "\n";
  for (const auto& row : table.rows) {
    out += row.model_id;
    for (const auto& cell : row.cells) {
      out += ",";
      if (auto r = cell.rate()) out += fmt::format("{:.2f}", *r * 100.0);
    }
    out += "\n";
  }
  return out;
}

json simrate_json(const SimRateTable& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json cells = json::object();
    for (std::size_t i = 0; i < row.cells.size(); ++i) {
      const auto& c = row.cells[i];
      json cell{{"similar", c.similar},
                {"not_similar", c.not_similar},
                {"invalid", c.invalid},
                {"total", c.total()}};
      cell["simrate"] = c.rate() ? json(*c.rate()) : json(nullptr);
      cells[table.columns[i].name()] = cell;
    }
    rows.push_back(json{{"model", row.model_id}, {"columns", cells}});
  }
  return json{{"rows", rows}};
}

}  // namespace seqstory::judge
