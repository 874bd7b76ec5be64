#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tripletalign {

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 2000;
  std::optional<std::int64_t> seed;
};

struct ChatResponse {
  std::string content;
  std::string finish_reason;  // empty when the provider does not report one
};

// Request body in the common chat-completion shape.
nlohmann::json to_json(const ChatRequest& request);
ChatRequest chat_request_from_json(const nlohmann::json& body);

// Extracts choices[0].message.content (and finish_reason when present).
// Throws ProviderError on any other shape.
ChatResponse parse_chat_response(const nlohmann::json& body);

// A chat-completion backend. complete() throws ProviderError on transport or
// protocol failures; implementations must be safe to call concurrently.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

struct HttpProviderOptions {
  std::string url;      // e.g. http://localhost:8000/v1/chat/completions
  std::string api_key;  // sent as a bearer token when non-empty
  std::chrono::seconds timeout{120};
};

// POSTs JSON to an OpenAI-compatible chat-completions endpoint.
class HttpChatProvider final : public ChatProvider {
 public:
  // Throws ConfigError for URLs that are not http(s)://host[:port]/path.
  explicit HttpChatProvider(HttpProviderOptions options);
  ChatResponse complete(const ChatRequest& request) override;

  const std::string& host_url() const noexcept { return scheme_host_port_; }
  const std::string& path() const noexcept { return path_; }

 private:
  HttpProviderOptions options_;
  std::string scheme_host_port_;
  std::string path_;
};

// In-process provider driven by a callback; used for scripted runs and tests.
class ScriptedProvider final : public ChatProvider {
 public:
  using Script = std::function<ChatResponse(const ChatRequest&)>;
  explicit ScriptedProvider(Script script) : script_(std::move(script)) {}
  ChatResponse complete(const ChatRequest& request) override { return script_(request); }

 private:
  Script script_;
};

}  // namespace tripletalign
