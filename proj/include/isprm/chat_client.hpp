// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace isprm {

enum class ReplayMode { Off, Record, Replay };

struct BackendConfig {
    /// Base URL, e.g. http://localhost:8000 ; requests go to <endpoint>/v1/chat/completions
    std::string endpoint;
    std::string model;
    double temperature = 0.7;
    int max_tokens = 1024;
    double timeout_s = 60.0;
    int max_retries = 3;
    int backoff_ms = 250;
    /// Name of the environment variable holding the bearer token. Secrets never live in configs.
    std::string auth_env = "OPENAI_API_KEY";
    int max_in_flight = 4;
    std::string replay_log;
    ReplayMode replay_mode = ReplayMode::Off;

    void validate() const;
};

nlohmann::json to_json(const BackendConfig& cfg);
BackendConfig backend_config_from_json(const nlohmann::json& j);

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    std::optional<std::uint64_t> seed;
    bool want_logprobs = false;
};

using TokenLogprobs = std::vector<std::vector<double>>;

struct ChatCompletion {
    std::string content;
    std::optional<TokenLogprobs> top_logprobs;
};

/// Something that answers chat-completion requests. Implementations must be
/// safe to call from several threads.
class ChatBackend {
  public:
    virtual ~ChatBackend() = default;
    virtual ChatCompletion complete(const ChatRequest& request) const = 0;
};

nlohmann::json build_chat_request(const BackendConfig& cfg, const ChatRequest& request);
/// Reads choices[0].message.content and, when present, choices[0].logprobs.content[*].top_logprobs.
ChatCompletion parse_chat_response(const nlohmann::json& body);

/// OpenAI-compatible HTTP backend with bounded retries, an in-flight request
/// cap and an optional record/replay log keyed by request body hash.
class HttpChatBackend final : public ChatBackend {
  public:
    explicit HttpChatBackend(BackendConfig cfg);
    ChatCompletion complete(const ChatRequest& request) const override;

    const BackendConfig& config() const { return cfg_; }

  private:
    nlohmann::json post_with_retries(const std::string& body) const;

    BackendConfig cfg_;
    std::string host_;
    std::string path_;
    mutable std::counting_semaphore<1024> in_flight_;
    mutable std::mutex log_mutex_;
    std::map<std::string, nlohmann::json> replay_;
};

/// Hex digest used as the replay-log key.
std::string request_key(const std::string& body);

} // namespace isprm
