#include "miceval/llm.hpp"

#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <httplib.h>

#include "miceval/errors.hpp"
#include "miceval/hash.hpp"

namespace miceval::llm {

namespace {

class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty())
      throw ConfigError("http backend requires base_url");
    if (const char* tok = std::getenv(cfg_.api_token_env.c_str()))
      token_ = tok;
  }

  std::string complete(const ChatRequest& req) override {
    httplib::Client client(cfg_.base_url);
    client.set_connection_timeout(cfg_.timeout_seconds, 0);
    client.set_read_timeout(cfg_.timeout_seconds, 0);

    nlohmann::json body;
    body["model"] = cfg_.model;
    auto messages = nlohmann::json::array();
    if (!req.system.empty())
      messages.push_back({{"role", "system"}, {"content", req.system}});
    messages.push_back({{"role", "user"}, {"content", req.user}});
    body["messages"] = std::move(messages);
    body["temperature"] = req.decode.temperature;
    body["max_tokens"] = req.decode.max_output_tokens;
    if (!req.decode.stop_sequences.empty())
      body["stop"] = req.decode.stop_sequences;

    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

    auto res = client.Post(cfg_.path, headers, body.dump(), "application/json");
    if (!res)
      throw TransportError("chat request to " + cfg_.base_url + " failed: " +
                           httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
      throw TransportError("chat request returned HTTP " +
                           std::to_string(res->status) + ": " + res->body);
    try {
      auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed chat response: ") + e.what());
    }
  }

  std::string id() const override { return cfg_.model; }

 private:
  HttpClientConfig cfg_;
  std::string token_;
};

}  // namespace

std::shared_ptr<ChatClient> make_http_client(HttpClientConfig cfg) {
  return std::make_shared<HttpChatClient>(std::move(cfg));
}

ScriptedChatClient::ScriptedChatClient(std::string id) : id_(std::move(id)) {}

void ScriptedChatClient::script_reply(std::string_view user_prompt,
                                      std::string reply) {
  std::lock_guard lock(mu_);
  scripted_[std::string(user_prompt)].push_back(std::move(reply));
}

std::string ScriptedChatClient::complete(const ChatRequest& req) {
  std::lock_guard lock(mu_);
  auto it = scripted_.find(req.user);
  if (it != scripted_.end()) {
    auto& pos = cursor_[req.user];
    if (pos < it->second.size()) return it->second[pos++];
    return it->second.back();  // repeat the last scripted reply
  }
  return "Perhaps the answer is A" + hash::sha256_hex(req.user).substr(0, 6) +
         ".";
}

std::string complete_with_retries(ChatClient& client, const ChatRequest& req,
                                  int attempts,
                                  std::chrono::milliseconds backoff) {
  for (int attempt = 0;; ++attempt) {
    try {
      return client.complete(req);
    } catch (const TransportError& e) {
      if (attempt + 1 >= attempts) throw;
      const auto delay = backoff * (1 << attempt);
      spdlog::warn("transport failure (attempt {}/{}): {}; retrying in {} ms",
                   attempt + 1, attempts, e.what(), delay.count());
      std::this_thread::sleep_for(delay);
    }
  }
}

}  // namespace miceval::llm
