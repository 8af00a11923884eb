#include <doctest.h>

#include <cstring>

#include "seqstory/embedding_cache.hpp"
#include "seqstory/encoder.hpp"
#include "seqstory/error.hpp"
#include "seqstory/hashing.hpp"
#include "seqstory/jsonl.hpp"
#include "support.hpp"

using namespace seqstory;
using namespace seqstory::encoder;
namespace fs = std::filesystem;

namespace {

// Reference implementation of the mock encoder contract.
std::vector<float> mock_reference(std::string_view bytes, int dim, std::uint64_t seed) {
  auto mix = [](std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t s = seed;
  std::uint64_t h = 0xcbf29ce484222325ULL ^ mix(s);
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::vector<float> out;
  for (int i = 0; i < dim; ++i) {
    out.push_back(static_cast<float>(static_cast<double>(mix(h) >> 40) / 8388608.0 - 1.0));
  }
  return out;
}

std::vector<FrameEmbedding> random_frames(std::mt19937_64& rng, int k, int dim) {
  std::uniform_real_distribution<float> u(-3.0f, 3.0f);
  std::vector<FrameEmbedding> out;
  for (int i = 0; i < k; ++i) {
    FrameEmbedding f;
    f.frame_index = i;
    for (int d = 0; d < dim; ++d) f.vector.push_back(u(rng));
    out.push_back(std::move(f));
  }
  return out;
}

class FixedBackend final : public EncoderBackend {
 public:
  explicit FixedBackend(std::vector<float> v) : v_(std::move(v)) {}
  std::string id() const override { return "fixed"; }
  std::vector<float> encode(std::span<const std::byte>) override { return v_; }

 private:
  std::vector<float> v_;
};

}  // namespace

TEST_CASE("splitmix64 reference output") {
  std::uint64_t s = 0;
  CHECK(splitmix64(s) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("mock encoder is deterministic and matches its contract bit for bit") {
  MockEncoder enc(16, 7);
  for (const std::string& img : std::vector<std::string>{"", "a", "frame bytes", std::string(1000, 'x')}) {
    auto a = enc.encode(as_bytes(img));
    auto b = enc.encode(as_bytes(img));
    CHECK(a == b);
    auto ref = mock_reference(img, 16, 7);
    REQUIRE(a.size() == ref.size());
    CHECK(std::memcmp(a.data(), ref.data(), a.size() * sizeof(float)) == 0);
    for (float x : a) {
      CHECK(x >= -1.0f);
      CHECK(x < 1.0f);
    }
  }
  CHECK(MockEncoder(16, 8).encode(as_bytes("a")) != enc.encode(as_bytes("a")));
  CHECK_THROWS_AS(MockEncoder(0, 1), ValidationError);
}

TEST_CASE("pooling worked examples") {
  std::vector<FrameEmbedding> two = {{{1, 3}, 0, ""}, {{3, 5}, 1, ""}};
  CHECK(pool_scene(two, Pooling::mean).vector == std::vector<float>{2, 4});
  std::vector<FrameEmbedding> one = {{{0.25f, -7}, 0, ""}};
  CHECK(pool_scene(one, Pooling::mean).vector == one[0].vector);
  std::vector<FrameEmbedding> three = {{{1, 1}, 0, ""}, {{9, 9}, 1, ""}, {{5, 5}, 2, ""}};
  CHECK(pool_scene(three, Pooling::first_frame).vector == std::vector<float>{1, 1});
}

TEST_CASE("mean pooling agrees with a brute force average and is order free") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 12);
    const int dim = 1 + static_cast<int>(rng() % 32);
    auto frames = random_frames(rng, k, dim);
    auto pooled = pool_scene(frames, Pooling::mean).vector;
    float bound = 0;
    for (const auto& f : frames)
      for (float x : f.vector) bound = std::max(bound, std::abs(x));
    for (int d = 0; d < dim; ++d) {
      float sum = 0;
      for (const auto& f : frames) sum += f.vector[static_cast<std::size_t>(d)];
      CHECK(std::abs(pooled[static_cast<std::size_t>(d)] - sum / static_cast<float>(k)) <= 1e-6);
      CHECK(std::abs(pooled[static_cast<std::size_t>(d)]) <= bound + 1e-6);
    }
    auto shuffled = frames;
    Rng r(trial);
    portable_shuffle(shuffled, r);
    auto again = pool_scene(shuffled, Pooling::mean).vector;
    for (std::size_t d = 0; d < again.size(); ++d) CHECK(std::abs(again[d] - pooled[d]) <= 1e-6);
  }
}

TEST_CASE("first frame pooling is order sensitive") {
  std::mt19937_64 rng(2);
  auto frames = random_frames(rng, 3, 4);
  auto first = pool_scene(frames, Pooling::first_frame);
  CHECK(first.vector == frames[0].vector);
  CHECK(first.pooling == Pooling::first_frame);
  std::swap(frames[0], frames[2]);
  CHECK(pool_scene(frames, Pooling::first_frame).vector != first.vector);
}

TEST_CASE("pooling guards") {
  std::vector<FrameEmbedding> none;
  CHECK_THROWS_AS(pool_scene(none, Pooling::mean), ValidationError);
  std::vector<FrameEmbedding> mixed = {{{1, 2}, 0, ""}, {{1}, 1, ""}};
  CHECK_THROWS_AS(pool_scene(mixed, Pooling::mean), ValidationError);
  std::vector<FrameEmbedding> nan = {{{1, std::nanf("")}, 0, ""}};
  CHECK_THROWS_AS(pool_scene(nan, Pooling::mean), ValidationError);
}

TEST_CASE("encode_frame checks the dimension") {
  testing::TempDir dir;
  io::write_file_atomic(dir / "f.jpg", "img");
  Frame f{0, 0.5, "f.jpg"};
  MockEncoder enc(8, 1);
  auto e = encode_frame(f, enc, 8, dir.path());
  CHECK(e.vector.size() == 8);
  CHECK(e.encoder_id == enc.id());
  CHECK_THROWS_AS(encode_frame(f, enc, 16, dir.path()), SchemaError);
  FixedBackend inf({1.0f, std::numeric_limits<float>::infinity()});
  CHECK_THROWS_AS(encode_frame(f, inf, 2, dir.path()), SchemaError);
  CHECK_THROWS_AS(encode_frame(Frame{0, 0.5, "missing.jpg"}, enc, 8, dir.path()), NotFoundError);
}

TEST_CASE("wire format") {
  auto req = make_encode_request(as_bytes("hi"), "clip");
  CHECK(req.dump() == R"({"encoder_id":"clip","image":"aGk="})");
  CHECK(parse_encode_response(R"({"dim":2,"vector":[0.5,-1]})") == std::vector<float>{0.5f, -1.0f});
  CHECK_THROWS_AS(parse_encode_response(R"({"dim":3,"vector":[0.5,-1]})"), SchemaError);
  CHECK_THROWS_AS(parse_encode_response("nope"), SchemaError);
  CHECK_THROWS_AS(parse_encode_response(R"({"dim":1})"), SchemaError);
}

TEST_CASE("subprocess encoder speaks the line protocol") {
  SubprocessEncoder enc({testing::fixture("echo_encoder.sh").string()}, "echo");
  auto v = enc.encode(as_bytes("hi"));
  const auto request_len = make_encode_request(as_bytes("hi"), "echo").dump().size();
  REQUIRE(v.size() == 3);
  CHECK(v[0] == 0.5f);
  CHECK(v[1] == -0.25f);
  CHECK(v[2] == static_cast<float>(request_len));
  SubprocessEncoder failing({"sh", "-c", "exit 4"}, "fail");
  CHECK_THROWS_AS(failing.encode(as_bytes("x")), RetryableError);
}

TEST_CASE("embedding cache round trip") {
  testing::TempDir dir;
  EmbeddingCache c;
  c.dim = 3;
  c.encoder_id = "mock";
  c.frames = {{{{1, 2, 3}, 0, "mock"}, {{4, 5, 6}, 1, "mock"}},
              {{{-1, 0.5f, 7}, 0, "mock"}, {{0, 0, 0}, 1, "mock"}, {{9, 9, 9}, 2, "mock"}}};
  auto p = cache_path(dir.path(), "story1");
  CHECK(p.filename() == "story1.emb");
  write_embedding_cache(p, c);
  auto back = read_embedding_cache(p);
  CHECK(back.dim == 3);
  CHECK(back.encoder_id == "mock");
  CHECK(back.frames == c.frames);

  std::string raw = io::read_file(p);
  CHECK(raw.substr(0, 8) == "SQSEMB01");
  io::write_file_atomic(dir / "bad.emb", "NOTMAGIC" + raw.substr(8));
  CHECK_THROWS_AS(read_embedding_cache(dir / "bad.emb"), SchemaError);
  io::write_file_atomic(dir / "short.emb", raw.substr(0, raw.size() - 4));
  CHECK_THROWS_AS(read_embedding_cache(dir / "short.emb"), SchemaError);
}

TEST_CASE("encode_story and pool_story") {
  testing::TempDir dir;
  std::vector<Frame> f0, f1;
  for (int k = 0; k < 3; ++k) {
    io::write_file_atomic(dir / fmt::format("a{}.jpg", k), fmt::format("A{}", k));
    f0.push_back(Frame{k, 0.1 + k, fmt::format("a{}.jpg", k)});
  }
  for (int k = 0; k < 2; ++k) {
    io::write_file_atomic(dir / fmt::format("b{}.jpg", k), fmt::format("B{}", k));
    f1.push_back(Frame{k, 5.1 + k, fmt::format("b{}.jpg", k)});
  }
  Story s("s", Source::oops, {Scene(0, 4, "a", f0), Scene(5, 8, "b", f1)});
  MockEncoder enc(4, 3);
  auto frames = encode_story(s, enc, 4, dir.path());
  REQUIRE(frames.size() == 2);
  CHECK(frames[0].size() == 3);
  CHECK(frames[1][1].vector == enc.encode(as_bytes("B1")));
  auto pooled = pool_story(frames, Pooling::mean);
  CHECK(pooled.size() == 2);
  CHECK(pooled[1].scene_index == 1);
}
