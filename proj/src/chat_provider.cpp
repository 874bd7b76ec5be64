#include "tripletalign/chat_provider.hpp"

#include <regex>

#include <httplib.h>

#include "tripletalign/error.hpp"

namespace tripletalign {

using nlohmann::json;

json to_json(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  json body = {{"model", request.model},
               {"messages", messages},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};
  if (request.seed) body["seed"] = *request.seed;
  return body;
}

ChatRequest chat_request_from_json(const json& body) {
  ChatRequest r;
  try {
    r.model = body.at("model").get<std::string>();
    for (const auto& m : body.at("messages")) {
      r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    }
    r.temperature = body.value("temperature", 0.0);
    r.max_tokens = body.value("max_tokens", 0);
    if (body.contains("seed") && !body["seed"].is_null()) r.seed = body["seed"].get<std::int64_t>();
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed chat request: ") + e.what());
  }
  return r;
}

ChatResponse parse_chat_response(const json& body) {
  try {
    const auto& choice = body.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    ChatResponse r;
    r.content = content.is_null() ? std::string() : content.get<std::string>();
    if (auto it = choice.find("finish_reason"); it != choice.end() && it->is_string()) {
      r.finish_reason = it->get<std::string>();
    }
    return r;
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed chat response: ") + e.what());
  }
}

HttpChatProvider::HttpChatProvider(HttpProviderOptions options) : options_(std::move(options)) {
  static const std::regex kUrl(R"(^(https?://[^/\s]+)(/[^\s]*)?$)");
  std::smatch m;
  if (!std::regex_match(options_.url, m, kUrl)) {
    throw ConfigError("behav-eval", "invalid endpoint URL '" + options_.url + "'");
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (options_.url.rfind("https://", 0) == 0) {
    throw ConfigError("behav-eval", "https endpoints require a build with OpenSSL support");
  }
#endif
  scheme_host_port_ = m[1].str();
  path_ = m[2].matched && !m[2].str().empty() ? m[2].str() : "/";
}

ChatResponse HttpChatProvider::complete(const ChatRequest& request) {
  httplib::Client client(scheme_host_port_);
  const auto secs = static_cast<time_t>(options_.timeout.count());
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  auto res = client.Post(path_, headers, to_json(request).dump(), "application/json");
  if (!res) throw ProviderError("request to " + options_.url + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw ProviderError("request to " + options_.url + " returned HTTP " + std::to_string(res->status));
  }
  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::exception& e) {
    throw ProviderError(std::string("response is not JSON: ") + e.what());
  }
  return parse_chat_response(body);
}

}  // namespace tripletalign
