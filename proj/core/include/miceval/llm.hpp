#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace miceval::llm {

struct DecodeParams {
  double temperature = 0.0;
  int max_output_tokens = 256;
  std::vector<std::string> stop_sequences;
};

struct ChatRequest {
  std::string system;  // empty = no system message
  std::string user;
  DecodeParams decode;
};

/// Minimal chat-completion client. One implementation speaks the generic
/// OpenAI-compatible HTTP shape; the scripted one backs all desk-scale
/// tests. Throws TransportError on round-trip failure.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const ChatRequest& req) = 0;
  /// Stable identifier folded into cache keys (model name for HTTP).
  virtual std::string id() const = 0;
};

struct HttpClientConfig {
  std::string base_url;  // e.g. http://localhost:8080
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_token_env = "MICEVAL_API_TOKEN";
  int timeout_seconds = 120;
};

std::shared_ptr<ChatClient> make_http_client(HttpClientConfig cfg);

/// Deterministic stand-in for a task model. Replies can be scripted per
/// user prompt (consumed FIFO); otherwise a fixed hedged reply derived
/// from the prompt hash is produced.
class ScriptedChatClient : public ChatClient {
 public:
  explicit ScriptedChatClient(std::string id = "mock-model");

  void script_reply(std::string_view user_prompt, std::string reply);

  std::string complete(const ChatRequest& req) override;
  std::string id() const override { return id_; }

 private:
  std::string id_;
  std::mutex mu_;
  std::map<std::string, std::vector<std::string>, std::less<>> scripted_;
  std::map<std::string, std::size_t, std::less<>> cursor_;
};

/// Run req through client with up to `attempts` tries, sleeping
/// backoff * 2^i between transport failures.
std::string complete_with_retries(ChatClient& client, const ChatRequest& req,
                                  int attempts,
                                  std::chrono::milliseconds backoff);

}  // namespace miceval::llm
