// SPDX-License-Identifier: Apache-2.0
#include "isprm/chat_client.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "isprm/error.hpp"
#include "isprm/hashing.hpp"
#include "isprm/records.hpp"
#include "isprm/text.hpp"

namespace isprm {

using nlohmann::json;

void BackendConfig::validate() const
{
    if (endpoint.empty())
        throw Error(Errc::InvalidArgument, "backend endpoint is empty");
    if (!(timeout_s > 0))
        throw Error(Errc::InvalidArgument, "backend timeout must be > 0");
    if (max_retries < 0)
        throw Error(Errc::InvalidArgument, "backend retries must be >= 0");
    if (max_in_flight < 1 || max_in_flight > 1024)
        throw Error(Errc::InvalidArgument, "backend in-flight cap must be in [1, 1024]");
    if (replay_mode != ReplayMode::Off && replay_log.empty())
        throw Error(Errc::InvalidArgument, "replay mode needs a replay_log path");
}

namespace {

const char* replay_name(ReplayMode m)
{
    switch (m) {
    case ReplayMode::Record: return "record";
    case ReplayMode::Replay: return "replay";
    case ReplayMode::Off: break;
    }
    return "off";
}

ReplayMode parse_replay(const std::string& s)
{
    if (s == "record")
        return ReplayMode::Record;
    if (s == "replay")
        return ReplayMode::Replay;
    if (s == "off" || s.empty())
        return ReplayMode::Off;
    throw SchemaViolation("backend.replay_mode", "expected off|record|replay");
}

} // namespace

json to_json(const BackendConfig& cfg)
{
    return json{{"endpoint", cfg.endpoint},       {"model", cfg.model},
                {"temperature", cfg.temperature}, {"max_tokens", cfg.max_tokens},
                {"timeout_s", cfg.timeout_s},     {"max_retries", cfg.max_retries},
                {"backoff_ms", cfg.backoff_ms},   {"auth_env", cfg.auth_env},
                {"max_in_flight", cfg.max_in_flight}, {"replay_log", cfg.replay_log},
                {"replay_mode", replay_name(cfg.replay_mode)}};
}

BackendConfig backend_config_from_json(const json& j)
{
    BackendConfig cfg;
    if (!j.is_object())
        throw SchemaViolation("backend", "expected object");
    try {
        cfg.endpoint = j.value("endpoint", cfg.endpoint);
        cfg.model = j.value("model", cfg.model);
        cfg.temperature = j.value("temperature", cfg.temperature);
        cfg.max_tokens = j.value("max_tokens", cfg.max_tokens);
        cfg.timeout_s = j.value("timeout_s", cfg.timeout_s);
        cfg.max_retries = j.value("max_retries", cfg.max_retries);
        cfg.backoff_ms = j.value("backoff_ms", cfg.backoff_ms);
        cfg.auth_env = j.value("auth_env", cfg.auth_env);
        cfg.max_in_flight = j.value("max_in_flight", cfg.max_in_flight);
        cfg.replay_log = j.value("replay_log", cfg.replay_log);
        cfg.replay_mode = parse_replay(j.value("replay_mode", std::string("off")));
    } catch (const json::type_error& e) {
        throw SchemaViolation("backend", e.what());
    }
    return cfg;
}

json build_chat_request(const BackendConfig& cfg, const ChatRequest& request)
{
    json messages = json::array();
    for (const auto& m : request.messages)
        messages.push_back({{"role", m.role}, {"content", m.content}});
    json body{{"model", cfg.model},
              {"messages", std::move(messages)},
              {"temperature", cfg.temperature},
              {"max_tokens", cfg.max_tokens}};
    if (request.seed)
        body["seed"] = *request.seed;
    if (request.want_logprobs) {
        body["logprobs"] = true;
        body["top_logprobs"] = 10;
    }
    return body;
}

ChatCompletion parse_chat_response(const json& body)
{
    if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array() || body["choices"].empty())
        throw Error(Errc::BackendUnavailable, "response carries no choices");
    const auto& choice = body["choices"][0];
    ChatCompletion out;
    if (choice.contains("message") && choice["message"].contains("content") && choice["message"]["content"].is_string())
        out.content = choice["message"]["content"].get<std::string>();
    else
        throw Error(Errc::BackendUnavailable, "choice has no message content");

    if (choice.contains("logprobs") && choice["logprobs"].is_object() && choice["logprobs"].contains("content") &&
        choice["logprobs"]["content"].is_array()) {
        TokenLogprobs positions;
        for (const auto& tok : choice["logprobs"]["content"]) {
            std::vector<double> top;
            if (tok.contains("top_logprobs") && tok["top_logprobs"].is_array())
                for (const auto& alt : tok["top_logprobs"])
                    top.push_back(alt.value("logprob", 0.0));
            positions.push_back(std::move(top));
        }
        out.top_logprobs = std::move(positions);
    }
    return out;
}

std::string request_key(const std::string& body)
{
    std::ostringstream ss;
    ss << std::hex << fnv1a64(body) << "-" << body.size();
    return ss.str();
}

HttpChatBackend::HttpChatBackend(BackendConfig cfg)
  : cfg_(std::move(cfg)), in_flight_(cfg_.max_in_flight)
{
    cfg_.validate();
    // split "scheme://host[:port][/base]" so the base path prefixes the API route
    auto scheme_end = cfg_.endpoint.find("://");
    auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = cfg_.endpoint.find('/', host_start);
    host_ = cfg_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? std::string() : cfg_.endpoint.substr(path_start);
    while (!path_.empty() && path_.back() == '/')
        path_.pop_back();
    path_ += "/v1/chat/completions";

    if (cfg_.replay_mode == ReplayMode::Replay) {
        std::ifstream in(cfg_.replay_log);
        if (!in)
            throw Error(Errc::InvalidArgument, "cannot open replay log " + cfg_.replay_log);
        std::string line;
        while (std::getline(in, line)) {
            if (text::trim(line).empty())
                continue;
            auto entry = json::parse(line);
            replay_.insert_or_assign(entry.at("key").get<std::string>(), entry.at("response"));
        }
    }
}

json HttpChatBackend::post_with_retries(const std::string& body) const
{
    httplib::Client client(host_);
    auto secs = static_cast<time_t>(cfg_.timeout_s);
    auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (!cfg_.auth_env.empty()) {
        if (const char* token = std::getenv(cfg_.auth_env.c_str()); token && *token)
            headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));
        auto res = client.Post(path_, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            try {
                return json::parse(res->body);
            } catch (const json::parse_error& e) {
                last_error = std::string("malformed body: ") + e.what();
                continue;
            }
        }
        last_error = "HTTP " + std::to_string(res->status);
        bool retryable = res->status == 408 || res->status == 429 || res->status >= 500;
        if (!retryable)
            break;
    }
    throw Error(Errc::BackendUnavailable, host_ + path_ + ": " + last_error);
}

ChatCompletion HttpChatBackend::complete(const ChatRequest& request) const
{
    auto body = build_chat_request(cfg_, request).dump();
    auto key = request_key(body);

    if (cfg_.replay_mode == ReplayMode::Replay) {
        auto it = replay_.find(key);
        if (it == replay_.end())
            throw Error(Errc::BackendUnavailable, "request " + key + " not in replay log");
        return parse_chat_response(it->second);
    }

    json response;
    {
        in_flight_.acquire();
        try {
            response = post_with_retries(body);
        } catch (...) {
            in_flight_.release();
            throw;
        }
        in_flight_.release();
    }

    if (cfg_.replay_mode == ReplayMode::Record) {
        std::lock_guard lock(log_mutex_);
        std::ofstream out(cfg_.replay_log, std::ios::app);
        out << json{{"key", key}, {"request", json::parse(body)}, {"response", response}}.dump() << "\n";
    }
    return parse_chat_response(response);
}

} // namespace isprm
