#include "seqstory/chat.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include "seqstory/error.hpp"

namespace seqstory::chat {

void to_json(json& j, const ChatMessage& m) {
  j = json{{"role", m.role}, {"content", m.content}};
}

void from_json(const json& j, ChatMessage& m) {
  m.role = j.at("role").get<std::string>();
  m.content = j.at("content").get<std::string>();
}

HttpChatClient::HttpChatClient(ClientConfig config)
    : config_(std::move(config)), endpoint_(net::split_url(config_.base_url)) {
  while (endpoint_.path.size() > 1 && endpoint_.path.back() == '/') endpoint_.path.pop_back();
  if (endpoint_.path == "/") endpoint_.path.clear();
  endpoint_.path += "/chat/completions";
}

json HttpChatClient::request_body(const std::vector<ChatMessage>& messages) const {
  return json{{"model", config_.model},
              {"messages", messages},
              {"temperature", config_.temperature},
              {"max_tokens", config_.max_tokens}};
}

std::string parse_completion(std::string_view body) {
  try {
    const json j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("unexpected chat completion response: {}", e.what()));
  }
}

std::string HttpChatClient::complete(const std::vector<ChatMessage>& messages) {
  httplib::Client client(endpoint_.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout).count();
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);
  client.set_connection_timeout(10, 0);
  httplib::Headers headers;
  if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);
  auto res = client.Post(endpoint_.path, headers, request_body(messages).dump(),
                         "application/json");
  if (!res) {
    throw RetryableError(fmt::format("chat request to {} failed: {}", endpoint_.origin,
                                     httplib::to_string(res.error())));
  }
  if (res->status == 429 || res->status >= 500) {
    throw RetryableError(fmt::format("chat endpoint returned HTTP {}", res->status));
  }
  if (res->status != 200) {
    throw Error(fmt::format("chat endpoint returned HTTP {}: {}", res->status, res->body));
  }
  return parse_completion(res->body);
}

}  // namespace seqstory::chat
