#include "seqstory/encoder.hpp"

#include <cmath>

#include <fmt/format.h>
#include <httplib.h>

#include "seqstory/concurrency.hpp"
#include "seqstory/error.hpp"
#include "seqstory/hashing.hpp"
#include "seqstory/jsonl.hpp"
#include "seqstory/process.hpp"

namespace seqstory::encoder {

namespace fs = std::filesystem;

MockEncoder::MockEncoder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim_ <= 0) throw ValidationError("mock encoder dimension must be positive");
}

std::string MockEncoder::id() const { return fmt::format("mock-d{}-s{}", dim_, seed_); }

std::vector<float> MockEncoder::encode(std::span<const std::byte> image) {
  std::uint64_t basis = 0xcbf29ce484222325ULL;
  std::uint64_t seed_state = seed_;
  basis ^= splitmix64(seed_state);
  std::uint64_t state = fnv1a64(image, basis);
  std::vector<float> v(static_cast<std::size_t>(dim_));
  for (auto& x : v) {
    const std::uint64_t draw = splitmix64(state) >> 40;  // 24 bits
    x = static_cast<float>(static_cast<double>(draw) / 8388608.0 - 1.0);
  }
  return v;
}

json make_encode_request(std::span<const std::byte> image, std::string_view encoder_id) {
  return json{{"encoder_id", encoder_id}, {"image", base64_encode(image)}};
}

std::vector<float> parse_encode_response(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw SchemaError(fmt::format("encoder response is not JSON: {}", e.what()));
  }
  if (!j.is_object() || !j.contains("vector") || !j["vector"].is_array()) {
    throw SchemaError("encoder response lacks a 'vector' array");
  }
  std::vector<float> v;
  try {
    v = j["vector"].get<std::vector<float>>();
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("encoder vector is malformed: {}", e.what()));
  }
  if (j.contains("dim") && j["dim"].get<std::size_t>() != v.size()) {
    throw SchemaError(fmt::format("encoder response declares dim {} but carries {} values",
                                  j["dim"].get<std::size_t>(), v.size()));
  }
  return v;
}

HttpEncoder::HttpEncoder(std::string url, std::string encoder_id,
                         std::chrono::milliseconds timeout)
    : endpoint_(net::split_url(url)), encoder_id_(std::move(encoder_id)), timeout_(timeout) {}

std::vector<float> HttpEncoder::encode(std::span<const std::byte> image) {
  httplib::Client client(endpoint_.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  client.set_read_timeout(secs.count(), 0);
  client.set_write_timeout(secs.count(), 0);
  const std::string body = make_encode_request(image, encoder_id_).dump();
  auto res = client.Post(endpoint_.path, body, "application/json");
  if (!res) {
    throw RetryableError(fmt::format("encoder request to {} failed: {}", endpoint_.origin,
                                     httplib::to_string(res.error())));
  }
  if (res->status >= 500 || res->status == 429) {
    throw RetryableError(fmt::format("encoder returned HTTP {}", res->status));
  }
  if (res->status != 200) {
    throw SchemaError(fmt::format("encoder returned HTTP {}: {}", res->status, res->body));
  }
  return parse_encode_response(res->body);
}

SubprocessEncoder::SubprocessEncoder(std::vector<std::string> command, std::string encoder_id)
    : command_(std::move(command)), encoder_id_(std::move(encoder_id)) {
  if (command_.empty()) throw ValidationError("encoder command is empty");
}

std::vector<float> SubprocessEncoder::encode(std::span<const std::byte> image) {
  const std::string request = make_encode_request(image, encoder_id_).dump() + "\n";
  ProcessResult r = run_process(command_, request);
  if (r.exit_code != 0) {
    throw RetryableError(
        fmt::format("encoder process exited with status {}: {}", r.exit_code, r.err));
  }
  return parse_encode_response(r.out);
}

FrameEmbedding encode_frame(const Frame& frame, EncoderBackend& backend, int expected_dim,
                            const fs::path& image_root) {
  fs::path path = frame.image_ref;
  if (path.is_relative() && !image_root.empty()) path = image_root / path;
  const std::string bytes = io::read_file(path);
  std::vector<float> v = backend.encode(as_bytes(bytes));
  if (static_cast<int>(v.size()) != expected_dim) {
    throw SchemaError(fmt::format("encoder '{}' returned dimension {} but the dataset uses {}",
                                  backend.id(), v.size(), expected_dim));
  }
  for (float x : v) {
    if (!std::isfinite(x)) {
      throw SchemaError(fmt::format("encoder '{}' returned a non-finite value for {}",
                                    backend.id(), frame.image_ref));
    }
  }
  return FrameEmbedding{std::move(v), frame.index, backend.id()};
}

SceneEmbedding pool_scene(std::span<const FrameEmbedding> embeddings, Pooling pooling,
                          int scene_index) {
  if (embeddings.empty()) throw ValidationError("cannot pool an empty frame list");
  const std::size_t dim = embeddings.front().vector.size();
  for (const auto& e : embeddings) {
    if (e.vector.size() != dim) {
      throw ValidationError(fmt::format("frame embeddings have mixed dimensions ({} vs {})",
                                        e.vector.size(), dim));
    }
    for (float x : e.vector) {
      if (!std::isfinite(x)) throw ValidationError("frame embedding has a non-finite entry");
    }
  }
  SceneEmbedding out;
  out.pooling = pooling;
  out.scene_index = scene_index;
  if (pooling == Pooling::first_frame) {
    out.vector = embeddings.front().vector;
    return out;
  }
  std::vector<double> sum(dim, 0.0);
  for (const auto& e : embeddings) {
    for (std::size_t i = 0; i < dim; ++i) sum[i] += e.vector[i];
  }
  out.vector.resize(dim);
  const double k = static_cast<double>(embeddings.size());
  for (std::size_t i = 0; i < dim; ++i) out.vector[i] = static_cast<float>(sum[i] / k);
  return out;
}

StoryFrameEmbeddings encode_story(const Story& story, EncoderBackend& backend, int dim,
                                  const fs::path& image_root, const net::RetryPolicy& policy) {
  struct Job {
    std::size_t scene;
    std::size_t frame;
  };
  std::vector<Job> jobs;
  StoryFrameEmbeddings out(story.scene_count());
  for (std::size_t s = 0; s < story.scene_count(); ++s) {
    const auto& frames = story.scenes()[s].frames();
    if (frames.empty()) {
      throw ValidationError(
          fmt::format("story '{}' scene {} has no extracted frames", story.id(), s));
    }
    out[s].resize(frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k) jobs.push_back({s, k});
  }
  parallel_for_each_or_throw(jobs.size(), policy.concurrency, [&](std::size_t i) {
    const Job& job = jobs[i];
    const Frame& frame = story.scenes()[job.scene].frames()[job.frame];
    out[job.scene][job.frame] = net::call_with_retries(
        policy, [&] { return encode_frame(frame, backend, dim, image_root); });
  });
  return out;
}

std::vector<SceneEmbedding> pool_story(const StoryFrameEmbeddings& frames, Pooling pooling) {
  std::vector<SceneEmbedding> out;
  out.reserve(frames.size());
  for (std::size_t s = 0; s < frames.size(); ++s) {
    out.push_back(pool_scene(frames[s], pooling, static_cast<int>(s)));
  }
  return out;
}

}  // namespace seqstory::encoder
