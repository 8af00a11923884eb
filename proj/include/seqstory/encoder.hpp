#pragma once
// Frame encoders and scene pooling.
//
// Remote protocol (HTTP and subprocess share the same JSON bodies):
//
//   request   {"encoder_id":"clip-vit-l14","image":"<base64 bytes>"}
//   response  {"dim":768,"vector":[0.0132,-0.2201,...]}
//
// HTTP: POST the request to the configured URL, Content-Type
// application/json, 200 with the response body. Subprocess: the command is
// started once per frame, the request is written to stdin followed by '\n',
// and the response is read from stdout.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "seqstory/model.hpp"
#include "seqstory/net.hpp"

namespace seqstory::encoder {

class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;
  virtual std::string id() const = 0;
  /// Throws RetryableError on transient failure.
  virtual std::vector<float> encode(std::span<const std::byte> image) = 0;
};

/// Deterministic stand-in for a vision encoder: a seeded FNV-1a hash of the
/// image bytes drives a splitmix64 stream, each draw mapped to a float in
/// [-1, 1) with 24 bits of precision. Bit-identical on every platform.
class MockEncoder final : public EncoderBackend {
 public:
  MockEncoder(int dim, std::uint64_t seed);
  std::string id() const override;
  std::vector<float> encode(std::span<const std::byte> image) override;

 private:
  int dim_;
  std::uint64_t seed_;
};

class HttpEncoder final : public EncoderBackend {
 public:
  HttpEncoder(std::string url, std::string encoder_id,
              std::chrono::milliseconds timeout = std::chrono::seconds(60));
  std::string id() const override { return encoder_id_; }
  std::vector<float> encode(std::span<const std::byte> image) override;

 private:
  net::Endpoint endpoint_;
  std::string encoder_id_;
  std::chrono::milliseconds timeout_;
};

class SubprocessEncoder final : public EncoderBackend {
 public:
  SubprocessEncoder(std::vector<std::string> command, std::string encoder_id);
  std::string id() const override { return encoder_id_; }
  std::vector<float> encode(std::span<const std::byte> image) override;

 private:
  std::vector<std::string> command_;
  std::string encoder_id_;
};

json make_encode_request(std::span<const std::byte> image, std::string_view encoder_id);
/// Parses a response body; throws SchemaError when dim and vector disagree.
std::vector<float> parse_encode_response(std::string_view body);

/// Reads the frame image (relative refs resolve against `image_root`) and
/// encodes it. Throws SchemaError when the backend's dimension differs from
/// `expected_dim` or an entry is non-finite; RetryableError passes through.
FrameEmbedding encode_frame(const Frame& frame, EncoderBackend& backend, int expected_dim,
                            const std::filesystem::path& image_root = {});

/// Mean: elementwise average accumulated in double. First frame: copy of the
/// first embedding. Throws ValidationError on an empty list, mixed
/// dimensions, or non-finite entries.
SceneEmbedding pool_scene(std::span<const FrameEmbedding> embeddings, Pooling pooling,
                          int scene_index = 0);

using StoryFrameEmbeddings = std::vector<std::vector<FrameEmbedding>>;

/// Encodes every frame of every scene with at most policy.concurrency
/// requests in flight, retrying transient failures per the policy.
StoryFrameEmbeddings encode_story(const Story& story, EncoderBackend& backend, int dim,
                                  const std::filesystem::path& image_root,
                                  const net::RetryPolicy& policy = {});

std::vector<SceneEmbedding> pool_story(const StoryFrameEmbeddings& frames, Pooling pooling);

}  // namespace seqstory::encoder
