#pragma once
// Chat-completion clients shared by the judge and the cue extractor.

#include <chrono>
#include <string>
#include <vector>

#include "seqstory/model.hpp"
#include "seqstory/net.hpp"

namespace seqstory::chat {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

void to_json(json& j, const ChatMessage& m);
void from_json(const json& j, ChatMessage& m);

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string id() const = 0;
  /// Returns the assistant reply text. Throws RetryableError on transport
  /// failures and 429/5xx responses.
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

struct ClientConfig {
  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string token;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 256;
  std::chrono::milliseconds timeout{std::chrono::seconds(120)};
};

/// OpenAI-style endpoint: POST {base_url}/chat/completions with
/// {"model","messages","temperature","max_tokens"}; reads
/// choices[0].message.content.
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(ClientConfig config);
  std::string id() const override { return config_.model; }
  std::string complete(const std::vector<ChatMessage>& messages) override;

  json request_body(const std::vector<ChatMessage>& messages) const;

 private:
  ClientConfig config_;
  net::Endpoint endpoint_;
};

std::string parse_completion(std::string_view body);

}  // namespace seqstory::chat
