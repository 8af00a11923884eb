#include "seqstory/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "seqstory/annotation.hpp"
#include "seqstory/chat.hpp"
#include "seqstory/conversation.hpp"
#include "seqstory/dataset.hpp"
#include "seqstory/embedding_cache.hpp"
#include "seqstory/encoder.hpp"
#include "seqstory/error.hpp"
#include "seqstory/frames.hpp"
#include "seqstory/hashing.hpp"
#include "seqstory/json_fields.hpp"
#include "seqstory/judge.hpp"
#include "seqstory/jsonl.hpp"
#include "seqstory/ood.hpp"
#include "seqstory/study.hpp"

namespace seqstory::cli {

namespace fs = std::filesystem;

namespace {

// Usage problems found after parsing (missing options, bad combinations).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr const char* kFooter =
    "Settings precedence: command-line flags, then environment variables\n"
    "(SEQSTORY_JUDGE_URL, SEQSTORY_JUDGE_TOKEN, SEQSTORY_ENCODER_URL), then the\n"
    "--config JSON file. Config keys are long option names, at the top level or\n"
    "inside an object named after the subcommand.";

const std::map<std::string, std::string>& env_options() {
  static const std::map<std::string, std::string> m = {
      {"judge-url", "SEQSTORY_JUDGE_URL"},
      {"judge-token", "SEQSTORY_JUDGE_TOKEN"},
      {"encoder-url", "SEQSTORY_ENCODER_URL"},
  };
  return m;
}

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool json_output = false;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  std::string log_level = "warn";
};

struct Options {
  // shared file locations
  std::string manifest, data = "data", split, out, frames_dir, embeddings, report, instances;
  // frames
  std::string video_root, decoder_config;
  double offset = frames::kDefaultOffset;
  bool plan_only = false;
  // encode
  std::string encoder = "mock", encoder_url, encoder_id;
  std::vector<std::string> encoder_cmd;
  int dim = 64;
  // build/export
  std::string mode = "imagechain", pooling = "mean", template_path, hyperparameters;
  std::string demo_split = "train";
  std::size_t demos = conversation::kDefaultDemonstrations;
  // select
  std::string setting;
  bool per_turn = false;
  // judge
  std::string pred, judge = "http", judge_url, judge_token, judge_model = "judge", audit;
  double judge_temperature = 0.0;
  int max_attempts = 4;
  // report
  std::string group = "context";
  std::vector<std::string> columns;
  // ood
  std::string gold, dataset_tag = "ood", extractor = "http";
  // study
  std::string verdicts, golds, plan, annotations, models_csv;
  std::vector<std::string> models;
  int n = 90;
  int resamples = stats::kDefaultResamples;
  // annotate
  std::string host = "127.0.0.1", static_dir, admin_token;
  int port = 8080;
};

std::string json_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

// Fills options that were not given on the command line from the
// environment, then from the config file.
void merge_settings(const std::vector<CLI::App*>& chain, const json& config) {
  for (CLI::App* app : chain) {
    for (CLI::Option* opt : app->get_options()) {
      if (opt->count() > 0 || opt->get_lnames().empty()) continue;
      const std::string& name = opt->get_lnames().front();
      if (name == "help" || name == "config" || name == "version") continue;
      std::vector<std::string> values;
      if (auto e = env_options().find(name); e != env_options().end()) {
        if (const char* v = std::getenv(e->second.c_str()); v && *v) values.push_back(v);
      }
      if (values.empty() && config.is_object()) {
        const json* found = nullptr;
        for (auto it = chain.rbegin(); it != chain.rend() && !found; ++it) {
          const std::string section = (*it)->get_name();
          if (!section.empty() && config.contains(section) && config[section].is_object() &&
              config[section].contains(name)) {
            found = &config[section][name];
          }
        }
        if (!found && config.contains(name) && !config[name].is_object()) found = &config[name];
        if (found) {
          if (found->is_array()) {
            for (const auto& v : *found) values.push_back(json_scalar(v));
          } else {
            values.push_back(json_scalar(*found));
          }
        }
      }
      if (values.empty()) continue;
      for (const auto& v : values) opt->add_result(v);
      opt->run_callback();
    }
  }
}

void need(const std::string& value, std::string_view flag) {
  if (value.empty()) throw UsageError(fmt::format("{} is required", flag));
}

void print_result(const Globals& g, const json& summary, const std::string& text) {
  if (g.json_output) {
    std::cout << summary.dump() << "\n";
  } else if (!text.empty()) {
    std::cout << text;
    if (text.back() != '\n') std::cout << "\n";
  }
}

net::RetryPolicy retry_policy(const Globals& g, const Options& o) {
  net::RetryPolicy p;
  p.max_attempts = std::max(1, o.max_attempts);
  p.concurrency = std::max<std::size_t>(1, std::min<std::size_t>(g.jobs, p.concurrency));
  return p;
}

fs::path split_path(const Options& o) { return fs::path(o.data) / (o.split + ".jsonl"); }

std::vector<Story> load_split(const Options& o) {
  need(o.split, "--split");
  return dataset::load_manifest(split_path(o)).stories;
}

std::vector<SceneEmbedding> load_embeddings(const Story& story, const fs::path& dir,
                                            Pooling pooling) {
  const auto cache = encoder::read_embedding_cache(encoder::cache_path(dir, story.id()));
  if (cache.frames.size() != story.scene_count()) {
    throw SchemaError(fmt::format("embedding cache for '{}' has {} scenes, story has {}",
                                  story.id(), cache.frames.size(), story.scene_count()));
  }
  return encoder::pool_story(cache.frames, pooling);
}

std::string embedding_encoder_id(const std::vector<Story>& stories, const fs::path& dir) {
  if (stories.empty()) return {};
  return encoder::read_embedding_cache(encoder::cache_path(dir, stories.front().id())).encoder_id;
}

conversation::TemplateConfig load_template(const Options& o) {
  if (o.template_path.empty()) return {};
  return conversation::TemplateConfig::from_json(json::parse(io::read_file(o.template_path)));
}

json load_json_file(const std::string& path) {
  const std::string text = io::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", path, e.what()));
  }
}

std::unique_ptr<chat::ChatClient> make_chat_client(const std::string& kind, const Options& o,
                                                   bool cues) {
  if (kind == "mock") {
    if (cues) return std::make_unique<ood::MockCueClient>();
    return std::make_unique<judge::MockJudgeClient>();
  }
  if (kind != "http") throw UsageError(fmt::format("unknown client kind '{}'", kind));
  if (o.judge_url.empty()) {
    throw UsageError("--judge-url (or SEQSTORY_JUDGE_URL) is required for the http client");
  }
  chat::ClientConfig c;
  c.base_url = o.judge_url;
  c.token = o.judge_token;
  c.model = o.judge_model;
  c.temperature = o.judge_temperature;
  return std::make_unique<chat::HttpChatClient>(c);
}

// --- subcommands -----------------------------------------------------------

int cmd_frames(const Globals& g, const Options& o) {
  need(o.manifest, "--manifest");
  need(o.out, "--out");
  const auto stories = dataset::load_manifest(o.manifest).stories;
  if (o.plan_only) {
    std::vector<json> rows;
    for (const auto& s : stories) rows.push_back(json(frames::plan_frames(s, o.offset)));
    io::write_jsonl_atomic(o.out, rows);
    print_result(g, json{{"plans", rows.size()}, {"out", o.out}},
                 fmt::format("wrote {} frame plans to {}", rows.size(), o.out));
    return 0;
  }
  frames::DecoderConfig decoder;
  if (!o.decoder_config.empty()) {
    decoder = frames::decoder_config_from_json(load_json_file(o.decoder_config));
  }
  decoder.max_concurrent = std::min(decoder.max_concurrent, g.jobs);
  frames::ExtractStats stats;
  const auto done =
      frames::extract_all(stories, o.offset, decoder, o.out, o.video_root, g.jobs, &stats);
  const fs::path manifest = fs::path(o.out) / "stories.jsonl";
  dataset::save_manifest(done, manifest);
  print_result(g,
               json{{"stories", done.size()},
                    {"decoded", stats.decoder_invocations},
                    {"skipped", stats.skipped},
                    {"manifest", manifest.string()}},
               fmt::format("extracted {} stories ({} frames decoded, {} reused); manifest {}",
                           done.size(), stats.decoder_invocations, stats.skipped,
                           manifest.string()));
  return 0;
}

int cmd_encode(const Globals& g, const Options& o) {
  need(o.manifest, "--manifest");
  need(o.out, "--out");
  const auto stories = dataset::load_manifest(o.manifest).stories;
  std::unique_ptr<encoder::EncoderBackend> backend;
  if (o.encoder == "mock") {
    backend = std::make_unique<encoder::MockEncoder>(o.dim, g.seed);
  } else if (o.encoder == "http") {
    need(o.encoder_url, "--encoder-url (or SEQSTORY_ENCODER_URL)");
    need(o.encoder_id, "--encoder-id");
    backend = std::make_unique<encoder::HttpEncoder>(o.encoder_url, o.encoder_id);
  } else if (o.encoder == "subprocess") {
    if (o.encoder_cmd.empty()) throw UsageError("--encoder-cmd is required");
    need(o.encoder_id, "--encoder-id");
    backend = std::make_unique<encoder::SubprocessEncoder>(o.encoder_cmd, o.encoder_id);
  } else {
    throw UsageError(fmt::format("unknown encoder '{}'", o.encoder));
  }
  const fs::path image_root = o.frames_dir.empty() ? fs::path(o.manifest).parent_path()
                                                   : fs::path(o.frames_dir);
  fs::create_directories(o.out);
  const auto policy = retry_policy(g, o);
  int frames = 0;
  for (const auto& story : stories) {
    encoder::EmbeddingCache cache{o.dim, backend->id(),
                                  encoder::encode_story(story, *backend, o.dim, image_root, policy)};
    for (const auto& scene : cache.frames) frames += static_cast<int>(scene.size());
    encoder::write_embedding_cache(encoder::cache_path(o.out, story.id()), cache);
  }
  print_result(g,
               json{{"stories", stories.size()}, {"frames", frames}, {"encoder_id", backend->id()}},
               fmt::format("encoded {} frames of {} stories with {}", frames, stories.size(),
                           backend->id()));
  return 0;
}

int cmd_split(const Globals& g, const Options& o) {
  need(o.manifest, "--manifest");
  const fs::path out = o.out.empty() ? fs::path(o.data) : fs::path(o.out);
  const auto stories = dataset::load_manifest(o.manifest).stories;
  const auto split = dataset::split_dataset(stories, g.seed);
  dataset::write_split(split, out);
  json summary{{"train", split.train.size()},
               {"val", split.val.size()},
               {"reserved", split.reserved.size()},
               {"seed", g.seed},
               {"out", out.string()}};
  print_result(g, summary,
               fmt::format("train {} / val {} / reserved {} written to {}", split.train.size(),
                           split.val.size(), split.reserved.size(), out.string()));
  return 0;
}

int cmd_build(const Globals& g, const Options& o) {
  need(o.embeddings, "--embeddings");
  const auto stories = load_split(o);
  const Pooling pooling = pooling_from_string(o.pooling);
  const ContextMode mode = context_mode_from_string(o.mode);
  const auto tmpl = load_template(o);
  std::vector<ConversationContext> contexts;
  for (const auto& story : stories) {
    const auto conv =
        conversation::build_conversation(story, load_embeddings(story, o.embeddings, pooling));
    contexts.push_back(conversation::build_training_context(conv, mode));
  }
  const fs::path out = o.out.empty() ? fs::path(fmt::format("{}.{}.jsonl", o.split, o.mode))
                                     : fs::path(o.out);
  conversation::ExportMetadata meta;
  meta.encoder_id = embedding_encoder_id(stories, o.embeddings);
  meta.pooling = pooling;
  meta.seed = g.seed;
  if (!o.hyperparameters.empty()) meta.hyperparameters = load_json_file(o.hyperparameters);
  const auto rows = conversation::export_training_set(contexts, tmpl, out, meta);
  print_result(g, json{{"rows", rows}, {"out", out.string()}},
               fmt::format("exported {} conversations to {}", rows, out.string()));
  return 0;
}

int cmd_select(const Globals& g, const Options& o) {
  need(o.setting, "--setting");
  const auto stories = load_split(o);
  const auto setting = dataset::ContextSetting::parse(o.setting);
  const auto instances = dataset::select_context_setting(stories, setting, o.per_turn);
  const fs::path out = o.out.empty()
                           ? fs::path(fmt::format("{}.{}.instances.jsonl", o.split, setting.name()))
                           : fs::path(o.out);
  std::vector<json> rows(instances.begin(), instances.end());
  io::write_jsonl_atomic(out, rows);
  print_result(g, json{{"setting", setting.name()}, {"instances", rows.size()}, {"out", out.string()}},
               fmt::format("{}: {} instances written to {}", setting.name(), rows.size(),
                           out.string()));
  return 0;
}

int cmd_export(const Globals& g, const Options& o) {
  need(o.instances, "--instances");
  need(o.embeddings, "--embeddings");
  need(o.out, "--out");
  const auto stories = load_split(o);
  const Pooling pooling = pooling_from_string(o.pooling);
  const ContextMode mode = context_mode_from_string(o.mode);
  const auto tmpl = load_template(o);
  std::map<std::string, const Story*> by_id;
  for (const auto& s : stories) by_id[s.id()] = &s;

  std::vector<ConversationContext> demo_pool;
  if (mode == ContextMode::icl) {
    Options d = o;
    d.split = o.demo_split;
    for (const auto& s : load_split(d)) {
      demo_pool.push_back(conversation::build_conversation(
          s, load_embeddings(s, o.embeddings, pooling)));
    }
  }

  std::vector<json> rows;
  io::for_each_jsonl(o.instances, [&](const json& row, std::size_t) {
    const auto inst = row.get<dataset::EvalInstance>();
    auto it = by_id.find(inst.story_id);
    if (it == by_id.end()) {
      throw NotFoundError(fmt::format("story '{}' is not in split '{}'", inst.story_id, o.split));
    }
    const auto conv = conversation::build_conversation(
        *it->second, load_embeddings(*it->second, o.embeddings, pooling));
    std::vector<ConversationContext> demos;
    if (mode == ContextMode::icl) {
      demos = conversation::pick_demonstrations(demo_pool, o.demos,
                                                derive_seed(g.seed, inst.story_id), inst.story_id);
    }
    const auto ctx = conversation::build_inference_context(conv, inst.target_turn, mode, demos);
    json r = conversation::render_row(ctx, tmpl);
    r["context_length"] = inst.context_length;
    r["target_turn"] = inst.target_turn;
    rows.push_back(std::move(r));
  });
  io::write_jsonl_atomic(o.out, rows);
  print_result(g, json{{"rows", rows.size()}, {"out", o.out}},
               fmt::format("exported {} inference contexts to {}", rows.size(), o.out));
  return 0;
}

// Prediction rows: {story_id, model_id, prediction[, target_turn]}; the
// ground truth comes from the split.
std::vector<EvalRecord> load_predictions(const Options& o) {
  const auto stories = load_split(o);
  std::map<std::string, const Story*> by_id;
  for (const auto& s : stories) by_id[s.id()] = &s;
  std::vector<EvalRecord> out;
  io::for_each_jsonl(o.pred, [&](const json& row, std::size_t) {
    jsonf::reject_unknown(row, {"story_id", "model_id", "prediction", "target_turn"},
                          "prediction row");
    EvalRecord r;
    r.story_id = jsonf::field<std::string>(row, "story_id", "prediction row");
    r.model_id = jsonf::field<std::string>(row, "model_id", "prediction row");
    r.prediction = jsonf::field<std::string>(row, "prediction", "prediction row");
    auto it = by_id.find(r.story_id);
    if (it == by_id.end()) {
      throw NotFoundError(fmt::format("story '{}' is not in split '{}'", r.story_id, o.split));
    }
    const int t = static_cast<int>(it->second->scene_count());
    const int target = jsonf::field_or<int>(row, "target_turn", t, "prediction row");
    if (target < 1 || target > t) {
      throw ValidationError(fmt::format("target_turn {} is outside 1..{}", target, t));
    }
    r.context_length = target;
    r.ground_truth = it->second->scenes()[static_cast<std::size_t>(target - 1)].description();
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<dataset::ContextSetting> report_columns(const Options& o) {
  if (o.group != "context") throw UsageError(fmt::format("unknown grouping '{}'", o.group));
  if (o.columns.empty()) return judge::default_table_columns();
  std::vector<dataset::ContextSetting> cols;
  for (const auto& c : o.columns) cols.push_back(dataset::ContextSetting::parse(c));
  return cols;
}

void write_simrate_report(const Globals& g, const Options& o,
                          const std::vector<EvalRecord>& records, const std::string& path) {
  const auto table = judge::simrate_table(records, report_columns(o));
  if (!path.empty()) {
    io::write_file_atomic(path, g.json_output ? judge::simrate_json(table).dump(2) + "\n"
                                              : judge::simrate_csv(table));
  } else {
    print_result(g, judge::simrate_json(table), judge::simrate_csv(table));
  }
}

int cmd_judge(const Globals& g, const Options& o) {
  need(o.pred, "--pred");
  need(o.out, "--out");
  auto records = load_predictions(o);
  // Verdicts already on disk are reused, so an interrupted run resumes.
  if (fs::exists(o.out)) {
    std::map<std::pair<std::string, int>, EvalRecord> done;
    io::for_each_jsonl(o.out, [&](const json& row, std::size_t) {
      auto r = row.get<EvalRecord>();
      done[{r.key(), r.context_length}] = r;
    });
    for (auto& r : records) {
      auto it = done.find({r.key(), r.context_length});
      if (it != done.end() && it->second.prediction == r.prediction &&
          it->second.ground_truth == r.ground_truth) {
        r = it->second;
      }
    }
  }
  auto client = make_chat_client(o.judge, o, false);
  judge::JudgeOptions jo;
  jo.retry = retry_policy(g, o);
  jo.audit_log = o.audit;
  std::optional<BatchError> failure;
  try {
    judge::judge_batch(records, *client, jo);
  } catch (const BatchError& e) {
    failure = e;
  }
  std::vector<json> rows;
  std::vector<EvalRecord> judged;
  for (const auto& r : records) {
    if (!r.verdict) continue;
    rows.push_back(json(r));
    judged.push_back(r);
  }
  io::write_jsonl_atomic(o.out, rows);
  if (failure) throw *failure;
  if (!o.report.empty()) write_simrate_report(g, o, judged, o.report);
  const auto counts = judge::simrate(judged);
  json summary{{"records", judged.size()},
               {"similar", counts.similar},
               {"not_similar", counts.not_similar},
               {"invalid", counts.invalid}};
  summary["simrate"] = counts.rate() ? json(*counts.rate()) : json(nullptr);
  print_result(g, summary,
               fmt::format("judged {} records: {} similar, {} not similar, {} invalid",
                           judged.size(), counts.similar, counts.not_similar, counts.invalid));
  return 0;
}

int cmd_report_simrate(const Globals& g, const Options& o) {
  need(o.verdicts, "--verdicts");
  std::vector<EvalRecord> records;
  io::for_each_jsonl(o.verdicts,
                     [&](const json& row, std::size_t) { records.push_back(row.get<EvalRecord>()); });
  write_simrate_report(g, o, records, o.out);
  return 0;
}

int cmd_ood(const Globals& g, const Options& o) {
  need(o.pred, "--pred");
  need(o.gold, "--gold");
  std::map<std::string, std::string> predictions;
  io::for_each_jsonl(o.pred, [&](const json& row, std::size_t) {
    jsonf::reject_unknown(row, {"example_id", "prediction"}, "ood prediction row");
    predictions[jsonf::field<std::string>(row, "example_id", "ood prediction row")] =
        jsonf::field<std::string>(row, "prediction", "ood prediction row");
  });
  const auto gold = ood::load_gold_cues(o.gold);
  auto client = make_chat_client(o.extractor, o, true);
  const auto report =
      ood::score_dataset(o.dataset_tag, predictions, gold, *client, retry_policy(g, o));
  if (!o.out.empty()) io::write_file_atomic(o.out, ood::report_csv(report));
  const auto m = report.mean();
  print_result(g, ood::report_json(report),
               fmt::format("{}: mean F1 {:.4f} over {} examples", report.dataset, m.f1,
                           report.examples.size()));
  return 0;
}

int cmd_study_sample(const Globals& g, const Options& o) {
  need(o.verdicts, "--verdicts");
  need(o.golds, "--golds");
  need(o.out, "--out");
  std::vector<EvalRecord> records;
  io::for_each_jsonl(o.verdicts,
                     [&](const json& row, std::size_t) { records.push_back(row.get<EvalRecord>()); });
  std::vector<std::string> models = o.models;
  if (models.empty()) {
    for (const auto& r : records) {
      if (std::find(models.begin(), models.end(), r.model_id) == models.end()) {
        models.push_back(r.model_id);
      }
    }
    std::sort(models.begin(), models.end());
  }
  const auto plan = study::sample_study(records, o.n, models, study::load_golds(o.golds), g.seed);
  study::save_plan(plan, o.out);
  print_result(g,
               json{{"examples", plan.items.size()}, {"tasks", plan.tasks.size()}, {"out", o.out}},
               fmt::format("sampled {} examples into {} tasks; plan {}", plan.items.size(),
                           plan.tasks.size(), o.out));
  return 0;
}

int cmd_study_report(const Globals& g, const Options& o) {
  need(o.plan, "--plan");
  need(o.annotations, "--annotations");
  const auto plan = study::load_plan(o.plan);
  study::ReportOptions ro;
  ro.resamples = o.resamples;
  ro.seed = g.seed;
  const auto report = study::build_report(plan, annotation::load_annotations(o.annotations), ro);
  const json summary = study::report_json(report);
  if (!o.out.empty()) io::write_file_atomic(o.out, study::report_csv(report));
  if (!o.report.empty()) io::write_file_atomic(o.report, summary.dump(2) + "\n");
  print_result(g, summary, study::report_csv(report));
  return 0;
}

int cmd_annotate_serve(const Globals&, const Options& o) {
  need(o.plan, "--plan");
  const fs::path data = o.out.empty() ? fs::path("annotations") : fs::path(o.out);
  annotation::Service service(study::load_plan(o.plan), data);
  annotation::ServerOptions so;
  so.host = o.host;
  so.port = o.port;
  so.static_dir = o.static_dir;
  so.admin_token = o.admin_token;
  annotation::Server server(service, so);
  const int port = server.bind();
  std::cerr << fmt::format("listening on http://{}:{}\n", o.host, port);
  server.run();
  return 0;
}

void print_error(const std::exception& e) {
  json err{{"message", e.what()}};
  if (const auto* se = dynamic_cast<const Error*>(&e)) {
    err["kind"] = se->kind();
    if (const auto* be = dynamic_cast<const BatchError*>(&e)) err["failed_ids"] = be->failed_ids();
    if (const auto* pe = dynamic_cast<const PipelineError*>(&e)) {
      if (!pe->stderr_text().empty()) err["stderr"] = pe->stderr_text();
    }
  } else if (dynamic_cast<const json::exception*>(&e)) {
    err["kind"] = "validation";
  } else if (dynamic_cast<const fs::filesystem_error*>(&e)) {
    err["kind"] = "io";
  } else {
    err["kind"] = "error";
  }
  std::cerr << json{{"error", err}}.dump() << "\n";
}

void setup_logging(const std::string& level) {
  static bool done = false;
  if (!done) {
    auto logger = spdlog::stderr_color_mt("seqstory");
    spdlog::set_default_logger(logger);
    done = true;
  }
  spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

int run(const std::vector<std::string>& args) {
  Globals g;
  Options o;
  CLI::App app{"Visual story datasets, next-scene contexts and evaluation", "seqstory"};
  app.footer(kFooter);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(SEQSTORY_VERSION));
  app.add_option("--config", g.config, "JSON settings file");
  app.add_option("--seed", g.seed, "Seed for every stochastic step");
  app.add_flag("--json", g.json_output, "Machine-readable output");
  app.add_option("--jobs", g.jobs, "Upper bound on parallel workers")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  auto* frames_cmd = app.add_subcommand("frames", "Plan and extract frames");
  frames_cmd->add_option("--manifest", o.manifest, "Story manifest JSONL");
  frames_cmd->add_option("--out", o.out, "Frame directory (or plan JSONL with --plan-only)");
  frames_cmd->add_option("--video-root", o.video_root, "Base for relative video paths");
  frames_cmd->add_option("--offset", o.offset, "Start offset for non-first scenes (s)");
  frames_cmd->add_option("--decoder-config", o.decoder_config, "Decoder command JSON");
  frames_cmd->add_flag("--plan-only", o.plan_only, "Write frame plans without decoding");

  auto* encode_cmd = app.add_subcommand("encode", "Encode frames into per-story caches");
  encode_cmd->add_option("--manifest", o.manifest, "Manifest written by `frames`");
  encode_cmd->add_option("--frames", o.frames_dir, "Frame directory (default: manifest dir)");
  encode_cmd->add_option("--out", o.out, "Embedding cache directory");
  encode_cmd->add_option("--encoder", o.encoder, "mock|http|subprocess")
      ->check(CLI::IsMember({"mock", "http", "subprocess"}));
  encode_cmd->add_option("--encoder-url", o.encoder_url, "HTTP encoder URL");
  encode_cmd->add_option("--encoder-cmd", o.encoder_cmd, "Subprocess encoder argv");
  encode_cmd->add_option("--encoder-id", o.encoder_id, "Encoder identifier");
  encode_cmd->add_option("--dim", o.dim, "Embedding dimension")->check(CLI::PositiveNumber);
  encode_cmd->add_option("--max-attempts", o.max_attempts, "Attempts per request");

  auto* split_cmd = app.add_subcommand("split", "Stratified train/val split");
  split_cmd->add_option("--manifest,--in", o.manifest, "Story manifest JSONL");
  split_cmd->add_option("--out,--out-dir", o.out, "Output directory (default: --data)");
  split_cmd->add_option("--data", o.data, "Split directory");

  auto* build_cmd = app.add_subcommand("build", "Training export for one split");
  build_cmd->add_option("--data", o.data, "Split directory");
  build_cmd->add_option("--split", o.split, "train|val|reserved");
  build_cmd->add_option("--embeddings", o.embeddings, "Embedding cache directory");
  build_cmd->add_option("--mode", o.mode, "imagechain|visual_context|final_scene")
      ->check(CLI::IsMember({"imagechain", "visual_context", "final_scene"}));
  build_cmd->add_option("--pooling", o.pooling, "mean|first_frame")
      ->check(CLI::IsMember({"mean", "first_frame"}));
  build_cmd->add_option("--template", o.template_path, "Chat template JSON");
  build_cmd->add_option("--hyperparameters", o.hyperparameters, "JSON recorded in the manifest");
  build_cmd->add_option("--out", o.out, "Export JSONL");

  auto* select_cmd = app.add_subcommand("select", "Evaluation instances for a context setting");
  select_cmd->add_option("--data", o.data, "Split directory");
  select_cmd->add_option("--split", o.split, "Split name");
  select_cmd->add_option("--setting", o.setting, "C2, C3, C4-7, ...");
  select_cmd->add_flag("--per-turn", o.per_turn, "One instance per turn 2..T");
  select_cmd->add_option("--out", o.out, "Instances JSONL");

  auto* export_cmd = app.add_subcommand("export", "Inference contexts for a model backend");
  export_cmd->add_option("--data", o.data, "Split directory");
  export_cmd->add_option("--split", o.split, "Split the instances come from");
  export_cmd->add_option("--instances", o.instances, "Instances JSONL from `select`");
  export_cmd->add_option("--embeddings", o.embeddings, "Embedding cache directory");
  export_cmd->add_option("--mode", o.mode, "imagechain|visual_context|final_scene|icl")
      ->check(CLI::IsMember({"imagechain", "visual_context", "final_scene", "icl"}));
  export_cmd->add_option("--pooling", o.pooling, "mean|first_frame")
      ->check(CLI::IsMember({"mean", "first_frame"}));
  export_cmd->add_option("--template", o.template_path, "Chat template JSON");
  export_cmd->add_option("--demo-split", o.demo_split, "Split supplying icl demonstrations");
  export_cmd->add_option("--demos", o.demos, "Demonstrations per icl context");
  export_cmd->add_option("--out", o.out, "Output JSONL");

  auto* judge_cmd = app.add_subcommand("judge", "Judge predictions and compute SimRate");
  judge_cmd->add_option("--pred", o.pred, "Predictions JSONL");
  judge_cmd->add_option("--data", o.data, "Split directory");
  judge_cmd->add_option("--split", o.split, "Split holding the ground truth");
  judge_cmd->add_option("--out", o.out, "Verdicts JSONL");
  judge_cmd->add_option("--report", o.report, "SimRate table (CSV, or JSON with --json)");
  judge_cmd->add_option("--judge", o.judge, "http|mock")->check(CLI::IsMember({"http", "mock"}));
  judge_cmd->add_option("--judge-url", o.judge_url, "Chat endpoint base URL");
  judge_cmd->add_option("--judge-token", o.judge_token, "Bearer token");
  judge_cmd->add_option("--judge-model", o.judge_model, "Model name sent to the endpoint");
  judge_cmd->add_option("--judge-temperature", o.judge_temperature, "Sampling temperature (0 = greedy)");
  judge_cmd->add_option("--audit", o.audit, "Request/response audit JSONL");
  judge_cmd->add_option("--max-attempts", o.max_attempts, "Attempts per request");
  judge_cmd->add_option("--columns", o.columns, "Report columns")->delimiter(',');

  auto* ood_cmd = app.add_subcommand("ood", "Behavioral-cue F1 against gold cues");
  ood_cmd->add_option("--pred", o.pred, "JSONL {example_id, prediction}");
  ood_cmd->add_option("--gold", o.gold, "JSONL {example_id, cues}");
  ood_cmd->add_option("--dataset", o.dataset_tag, "Dataset label");
  ood_cmd->add_option("--out", o.out, "Report CSV");
  ood_cmd->add_option("--extractor", o.extractor, "http|mock")
      ->check(CLI::IsMember({"http", "mock"}));
  ood_cmd->add_option("--judge-url", o.judge_url, "Chat endpoint base URL");
  ood_cmd->add_option("--judge-token", o.judge_token, "Bearer token");
  ood_cmd->add_option("--judge-model", o.judge_model, "Model name sent to the endpoint");
  ood_cmd->add_option("--judge-temperature", o.judge_temperature, "Sampling temperature (0 = greedy)");
  ood_cmd->add_option("--max-attempts", o.max_attempts, "Attempts per request");

  auto* study_cmd = app.add_subcommand("study", "Human validation study");
  study_cmd->require_subcommand(1);
  auto* sample_cmd = study_cmd->add_subcommand("sample", "Sample a study plan");
  sample_cmd->add_option("--verdicts", o.verdicts, "Judged records JSONL");
  sample_cmd->add_option("--golds", o.golds, "Gold controls JSONL");
  sample_cmd->add_option("--n", o.n, "Examples to sample");
  sample_cmd->add_option("--models", o.models, "Models to sample from")->delimiter(',');
  sample_cmd->add_option("--out", o.out, "Plan JSON");
  auto* sreport_cmd = study_cmd->add_subcommand("report", "Agreement and alignment report");
  sreport_cmd->add_option("--plan", o.plan, "Plan JSON");
  sreport_cmd->add_option("--annotations", o.annotations, "AnnotationRecord JSONL");
  sreport_cmd->add_option("--resamples", o.resamples, "Bootstrap resamples");
  sreport_cmd->add_option("--out", o.out, "Calibration CSV");
  sreport_cmd->add_option("--report", o.report, "Full JSON summary");

  auto* annotate_cmd = app.add_subcommand("annotate", "Annotation service");
  annotate_cmd->require_subcommand(1);
  auto* serve_cmd = annotate_cmd->add_subcommand("serve", "Serve the annotation API");
  serve_cmd->add_option("--plan", o.plan, "Plan JSON");
  serve_cmd->add_option("--host", o.host, "Bind address");
  serve_cmd->add_option("--port", o.port, "Port (0 picks one)");
  serve_cmd->add_option("--static", o.static_dir, "UI bundle directory");
  serve_cmd->add_option("--out", o.out, "Annotation store directory");
  serve_cmd->add_option("--admin-token", o.admin_token, "Token for /api/export");

  auto* report_cmd = app.add_subcommand("report", "Reports over stored results");
  report_cmd->require_subcommand(1);
  auto* simrate_cmd = report_cmd->add_subcommand("simrate", "SimRate table");
  simrate_cmd->add_option("--verdicts", o.verdicts, "Verdicts JSONL");
  simrate_cmd->add_option("--group", o.group, "Grouping (context)");
  simrate_cmd->add_option("--columns", o.columns, "Columns, e.g. C2,C3,C2-6")->delimiter(',');
  simrate_cmd->add_option("--out", o.out, "Write here instead of stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    std::vector<CLI::App*> chain{&app};
    for (CLI::App* cur = &app; !cur->get_subcommands().empty();) {
      cur = cur->get_subcommands().front();
      chain.push_back(cur);
    }
    json config;
    if (!g.config.empty()) {
      config = load_json_file(g.config);
      if (!config.is_object()) throw ValidationError("config file must hold a JSON object");
    }
    merge_settings(chain, config);
    setup_logging(g.log_level);
    if (g.jobs == 0) throw UsageError("--jobs must be positive");

    const std::string leaf = chain.back()->get_name();
    const std::string parent = chain.size() > 2 ? chain[1]->get_name() : "";
    if (leaf == "frames") return cmd_frames(g, o);
    if (leaf == "encode") return cmd_encode(g, o);
    if (leaf == "split") return cmd_split(g, o);
    if (leaf == "build") return cmd_build(g, o);
    if (leaf == "select") return cmd_select(g, o);
    if (leaf == "export") return cmd_export(g, o);
    if (leaf == "judge") return cmd_judge(g, o);
    if (leaf == "ood") return cmd_ood(g, o);
    if (parent == "study" && leaf == "sample") return cmd_study_sample(g, o);
    if (parent == "study" && leaf == "report") return cmd_study_report(g, o);
    if (parent == "annotate" && leaf == "serve") return cmd_annotate_serve(g, o);
    if (parent == "report" && leaf == "simrate") return cmd_report_simrate(g, o);
    throw UsageError("no command given");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << "Run with --help for more information.\n";
    return 2;
  } catch (const std::exception& e) {
    print_error(e);
    return 1;
  }
}

}  // namespace seqstory::cli
