#include "seqstory/ood.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>

#include "seqstory/concurrency.hpp"
#include "seqstory/error.hpp"
#include "seqstory/jsonl.hpp"

namespace seqstory::ood {

namespace {

constexpr std::string_view kDescriptionMarker = "Description:\n";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string normalize_cue(std::string_view cue) {
  std::string out;
  bool pending_space = false;
  for (char c : cue) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<chat::ChatMessage> build_cue_prompt(std::string_view description) {
  std::string user =
      "List the behavioral cues in the description below: the key verbs or short verb "
      "phrases that describe actions. Answer with one cue per line and nothing else.\n\n";
  user += kDescriptionMarker;
  user += description;
  return {{"system", "You extract action verbs from image descriptions."},
          {"user", std::move(user)}};
}

CueSet parse_cue_reply(std::string_view reply) {
  CueSet out;
  std::string item;
  auto flush = [&] {
    std::string_view v = item;
    while (!v.empty() && is_space(v.front())) v.remove_prefix(1);
    // bullets and "1." / "2)" numbering
    while (!v.empty() && (v.front() == '-' || v.front() == '*' || v.front() == '\xE2')) {
      if (v.front() == '\xE2' && v.size() >= 3) {
        v.remove_prefix(3);  // U+2022 bullet
      } else {
        v.remove_prefix(1);
      }
      while (!v.empty() && is_space(v.front())) v.remove_prefix(1);
    }
    std::size_t digits = 0;
    while (digits < v.size() && std::isdigit(static_cast<unsigned char>(v[digits]))) ++digits;
    if (digits > 0 && digits < v.size() && (v[digits] == '.' || v[digits] == ')')) {
      v.remove_prefix(digits + 1);
    }
    while (!v.empty() && (v.back() == '.' || v.back() == ';')) v.remove_suffix(1);
    std::string cue = normalize_cue(v);
    if (!cue.empty()) out.insert(std::move(cue));
    item.clear();
  };
  for (char c : reply) {
    if (c == '\n' || c == ',') {
      flush();
    } else {
      item += c;
    }
  }
  flush();
  return out;
}

CueSet extract_cues(std::string_view description, chat::ChatClient& client,
                    const net::RetryPolicy& policy) {
  if (description.empty()) throw ValidationError("cannot extract cues from an empty description");
  const auto messages = build_cue_prompt(description);
  return parse_cue_reply(net::call_with_retries(policy, [&] { return client.complete(messages); }));
}

std::string MockCueClient::complete(const std::vector<chat::ChatMessage>& messages) {
  static const CueSet skip = {"wearing", "being",   "thing",   "something", "nothing",
                              "anything", "everything", "king", "ring",     "during",
                              "morning", "evening", "ceiling", "building",  "clothing",
                              "seeing",  "having",  "containing", "featuring", "resembling"};
  if (messages.empty()) return "";
  const std::string& text = messages.back().content;
  const auto at = text.find(kDescriptionMarker);
  const std::string_view body = at == std::string::npos
                                    ? std::string_view(text)
                                    : std::string_view(text).substr(at + kDescriptionMarker.size());
  std::vector<std::string> cues;
  std::string word;
  auto flush = [&] {
    if (word.size() > 4 && word.ends_with("ing") && !skip.contains(word) &&
        std::find(cues.begin(), cues.end(), word) == cues.end()) {
      cues.push_back(word);
    }
    word.clear();
  };
  for (char c : body) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      flush();
    }
  }
  flush();
  std::string out;
  for (const auto& c : cues) {
    if (!out.empty()) out += ", ";
    out += c;
  }
  return out;
}

F1 cue_f1(const CueSet& predicted, const CueSet& gold) {
  if (predicted.empty() && gold.empty()) return {1.0, 1.0, 1.0};
  if (predicted.empty() || gold.empty()) return {0.0, 0.0, 0.0};
  std::size_t common = 0;
  for (const auto& c : predicted) common += gold.count(c);
  F1 r;
  r.precision = static_cast<double>(common) / static_cast<double>(predicted.size());
  r.recall = static_cast<double>(common) / static_cast<double>(gold.size());
  r.f1 = common == 0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

std::map<std::string, CueSet> load_gold_cues(const std::filesystem::path& path) {
  std::map<std::string, CueSet> out;
  io::for_each_jsonl(path, [&](const json& row, std::size_t) {
    if (!row.is_object() || !row.contains("example_id") || !row.contains("cues")) {
      throw ValidationError("gold cue rows need example_id and cues");
    }
    for (const auto& [key, _] : row.items()) {
      if (key != "example_id" && key != "cues") {
        throw ValidationError(fmt::format("unknown field '{}'", key));
      }
    }
    const auto id = row["example_id"].get<std::string>();
    CueSet cues;
    for (const auto& c : row["cues"]) {
      auto n = normalize_cue(c.get<std::string>());
      if (!n.empty()) cues.insert(std::move(n));
    }
    if (!out.emplace(id, std::move(cues)).second) {
      throw ValidationError(fmt::format("duplicate example id '{}'", id));
    }
  });
  return out;
}

F1 DatasetReport::mean() const {
  F1 m;
  if (examples.empty()) return m;
  for (const auto& e : examples) {
    m.precision += e.score.precision;
    m.recall += e.score.recall;
    m.f1 += e.score.f1;
  }
  const auto n = static_cast<double>(examples.size());
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  return m;
}

DatasetReport score_dataset(std::string dataset,
                            const std::map<std::string, std::string>& predictions,
                            const std::map<std::string, CueSet>& gold, chat::ChatClient& client,
                            const net::RetryPolicy& policy) {
  for (const auto& [id, _] : predictions) {
    if (!gold.contains(id)) throw ValidationError(fmt::format("no gold cues for '{}'", id));
  }
  for (const auto& [id, _] : gold) {
    if (!predictions.contains(id)) throw ValidationError(fmt::format("no prediction for '{}'", id));
  }
  DatasetReport report{std::move(dataset), {}};
  for (const auto& [id, cues] : gold) report.examples.push_back({id, {}, cues, {}});
  parallel_for_each_or_throw(report.examples.size(), policy.concurrency, [&](std::size_t i) {
    auto& e = report.examples[i];
    e.predicted = extract_cues(predictions.at(e.example_id), client, policy);
    e.score = cue_f1(e.predicted, e.gold);
  });
  return report;
}

std::string report_csv(const DatasetReport& report) {
  std::string out = "dataset,example_id,precision,recall,f1\n";
  for (const auto& e : report.examples) {
    out += fmt::format("{},{},{:.4f},{:.4f},{:.4f}\n", report.dataset, e.example_id,
                       e.score.precision, e.score.recall, e.score.f1);
  }
  const F1 m = report.mean();
  out += fmt::format("{},mean,{:.4f},{:.4f},{:.4f}\n", report.dataset, m.precision, m.recall, m.f1);
  return out;
}

json report_json(const DatasetReport& report) {
  json rows = json::array();
  for (const auto& e : report.examples) {
    rows.push_back(json{{"example_id", e.example_id},
                        {"predicted", e.predicted},
                        {"gold", e.gold},
                        {"precision", e.score.precision},
                        {"recall", e.score.recall},
                        {"f1", e.score.f1}});
  }
  const F1 m = report.mean();
  return json{{"dataset", report.dataset},
              {"examples", rows},
              {"mean", {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}}}};
}

}  // namespace seqstory::ood
