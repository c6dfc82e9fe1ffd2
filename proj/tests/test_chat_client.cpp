// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <thread>

#include <httplib.h>

#include "isprm/chat_client.hpp"
#include "isprm/error.hpp"
#include "isprm/policy.hpp"
#include "isprm/scorer.hpp"

using namespace isprm;
using nlohmann::json;

namespace {

json completion_body(const std::string& content, bool logprobs = false)
{
    json choice{{"message", {{"role", "assistant"}, {"content", content}}}};
    if (logprobs) {
        json tokens = json::array();
        for (int t = 0; t < 2; ++t) {
            json top = json::array();
            for (int k = 0; k < 10; ++k)
                top.push_back({{"token", "x"}, {"logprob", -(t + 1) * 0.5}});
            tokens.push_back({{"token", "x"}, {"logprob", -0.1}, {"top_logprobs", top}});
        }
        choice["logprobs"] = {{"content", tokens}};
    }
    return json{{"choices", json::array({choice})}};
}

/// A local OpenAI-style endpoint whose behaviour is supplied per test.
class FakeServer {
  public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    explicit FakeServer(Handler handler) : handler_(std::move(handler))
    {
        server_.Post(R"(.*/v1/chat/completions)", [this](const httplib::Request& req, httplib::Response& res) {
            ++calls;
            handler_(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer()
    {
        server_.stop();
        thread_.join();
    }

    std::string endpoint(const std::string& base = "") const
    {
        return "http://127.0.0.1:" + std::to_string(port_) + base;
    }

    std::atomic<int> calls{0};

  private:
    Handler handler_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

BackendConfig config_for(const FakeServer& server)
{
    BackendConfig cfg;
    cfg.endpoint = server.endpoint();
    cfg.model = "test-model";
    cfg.timeout_s = 5;
    cfg.max_retries = 2;
    cfg.backoff_ms = 1;
    cfg.auth_env = "ISPRM_TEST_TOKEN";
    return cfg;
}

ChatRequest hello()
{
    return ChatRequest{{{"user", "hello"}}, 7, false};
}

std::filesystem::path temp_file(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / "isprm-chat-tests";
    std::filesystem::create_directories(dir);
    auto p = dir / name;
    std::filesystem::remove(p);
    return p;
}

} // namespace

TEST_CASE("request body follows the chat-completions shape")
{
    BackendConfig cfg;
    cfg.model = "m";
    auto body = build_chat_request(cfg, ChatRequest{{{"system", "s"}, {"user", "u"}}, 3, true});
    CHECK(body["model"] == "m");
    CHECK(body["messages"].size() == 2);
    CHECK(body["messages"][1]["content"] == "u");
    CHECK(body["seed"] == 3);
    CHECK(body["logprobs"] == true);
    CHECK(body["top_logprobs"] == 10);
    CHECK_FALSE(build_chat_request(cfg, hello()).contains("logprobs"));
}

TEST_CASE("response parsing")
{
    auto c = parse_chat_response(completion_body("hi", true));
    CHECK(c.content == "hi");
    REQUIRE(c.top_logprobs);
    REQUIRE(c.top_logprobs->size() == 2);
    CHECK((*c.top_logprobs)[1].size() == 10);
    CHECK((*c.top_logprobs)[1][0] == -1.0);
    CHECK_FALSE(parse_chat_response(completion_body("hi")).top_logprobs);
    CHECK_THROWS_AS(parse_chat_response(json{{"choices", json::array()}}), Error);
    CHECK_THROWS_AS(parse_chat_response(json::parse(R"({"choices":[{"message":{}}]})")), Error);
}

TEST_CASE("backend config validation and JSON round trip")
{
    BackendConfig cfg;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.endpoint = "http://x";
    CHECK_NOTHROW(cfg.validate());
    cfg.replay_mode = ReplayMode::Replay;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.replay_log = "log.jsonl";
    auto back = backend_config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));
    CHECK_THROWS_AS(backend_config_from_json(json{{"replay_mode", "sometimes"}}), Error);
}

TEST_CASE("successful completion with bearer token from the environment")
{
    std::string auth;
    std::string path;
    FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
        auth = req.get_header_value("Authorization");
        path = req.path;
        auto body = json::parse(req.body);
        res.set_content(completion_body("echo:" + body["messages"][0]["content"].get<std::string>()).dump(),
                        "application/json");
    });
    ::setenv("ISPRM_TEST_TOKEN", "sekret", 1);
    auto cfg = config_for(server);
    cfg.endpoint = server.endpoint("/api/");
    HttpChatBackend backend(cfg);
    auto c = backend.complete(hello());
    ::unsetenv("ISPRM_TEST_TOKEN");
    CHECK(c.content == "echo:hello");
    CHECK(auth == "Bearer sekret");
    CHECK(path == "/api/v1/chat/completions");
}

TEST_CASE("no token, no authorization header")
{
    bool had_auth = true;
    FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
        had_auth = req.has_header("Authorization");
        res.set_content(completion_body("ok").dump(), "application/json");
    });
    ::unsetenv("ISPRM_TEST_TOKEN");
    HttpChatBackend backend(config_for(server));
    backend.complete(hello());
    CHECK_FALSE(had_auth);
}

TEST_CASE("retryable failures are retried, then succeed")
{
    std::atomic<int> seen{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        int k = seen++;
        if (k == 0) {
            res.status = 503;
        } else if (k == 1) {
            res.status = 429;
        } else {
            res.set_content(completion_body("third time").dump(), "application/json");
        }
    });
    HttpChatBackend backend(config_for(server));
    CHECK(backend.complete(hello()).content == "third time");
    CHECK(server.calls == 3);
}

TEST_CASE("malformed bodies count as retryable")
{
    std::atomic<int> seen{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        if (seen++ == 0)
            res.set_content("{not json", "application/json");
        else
            res.set_content(completion_body("fine").dump(), "application/json");
    });
    HttpChatBackend backend(config_for(server));
    CHECK(backend.complete(hello()).content == "fine");
    CHECK(server.calls == 2);
}

TEST_CASE("exhausted retries raise BackendUnavailable")
{
    FakeServer server([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    HttpChatBackend backend(config_for(server));
    try {
        backend.complete(hello());
        FAIL("expected BackendUnavailable");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::BackendUnavailable);
        CHECK(std::string(e.what()).find("HTTP 500") != std::string::npos);
    }
    CHECK(server.calls == 3);
}

TEST_CASE("client errors are not retried")
{
    FakeServer server([](const httplib::Request&, httplib::Response& res) { res.status = 400; });
    HttpChatBackend backend(config_for(server));
    CHECK_THROWS_AS(backend.complete(hello()), Error);
    CHECK(server.calls == 1);
}

TEST_CASE("unreachable endpoint raises BackendUnavailable")
{
    BackendConfig cfg;
    cfg.endpoint = "http://127.0.0.1:1";
    cfg.timeout_s = 1;
    cfg.max_retries = 1;
    cfg.backoff_ms = 1;
    HttpChatBackend backend(cfg);
    try {
        backend.complete(hello());
        FAIL("expected BackendUnavailable");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::BackendUnavailable);
    }
}

TEST_CASE("in-flight cap bounds concurrent requests")
{
    std::atomic<int> active{0};
    std::atomic<int> peak{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        int now = ++active;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        --active;
        res.set_content(completion_body("ok").dump(), "application/json");
    });
    auto cfg = config_for(server);
    cfg.max_in_flight = 2;
    HttpChatBackend backend(cfg);
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i)
        threads.emplace_back([&] { backend.complete(hello()); });
    for (auto& t : threads)
        t.join();
    CHECK(server.calls == 8);
    CHECK(peak <= 2);
}

TEST_CASE("record then replay without a server")
{
    auto log = temp_file("replay.jsonl");
    std::string endpoint;
    {
        FakeServer server([](const httplib::Request& req, httplib::Response& res) {
            auto body = json::parse(req.body);
            res.set_content(completion_body("seed " + std::to_string(body["seed"].get<int>()), true).dump(),
                            "application/json");
        });
        auto cfg = config_for(server);
        cfg.replay_mode = ReplayMode::Record;
        cfg.replay_log = log.string();
        endpoint = cfg.endpoint;
        HttpChatBackend backend(cfg);
        CHECK(backend.complete(hello()).content == "seed 7");
        auto other = hello();
        other.seed = 8;
        CHECK(backend.complete(other).content == "seed 8");
    }
    BackendConfig cfg;
    cfg.endpoint = endpoint;
    cfg.model = "test-model";
    cfg.auth_env = "ISPRM_TEST_TOKEN";
    cfg.replay_mode = ReplayMode::Replay;
    cfg.replay_log = log.string();
    HttpChatBackend replay(cfg);
    auto c = replay.complete(hello());
    CHECK(c.content == "seed 7");
    CHECK(c.top_logprobs);
    auto missing = hello();
    missing.seed = 99;
    CHECK_THROWS_AS(replay.complete(missing), Error);
    CHECK(request_key("abc") == request_key("abc"));
    CHECK(request_key("abc") != request_key("abd"));
}

TEST_CASE("remote policy and scorer over HTTP")
{
    FakeServer server([](const httplib::Request& req, httplib::Response& res) {
        auto body = json::parse(req.body);
        auto prompt = body["messages"].back()["content"].get<std::string>();
        bool scoring = prompt.find("Score") != std::string::npos || body["messages"][0]["content"]
                                                                                  .get<std::string>()
                                                                                  .find("Score") != std::string::npos;
        std::string content = scoring ? "The step opens the right page.\nScore: 1.5"
                                      : "Look it up.\nTOOL: search {\"query\": \"alpha\"}";
        res.set_content(completion_body(content, true).dump(), "application/json");
    });
    auto backend = std::make_shared<HttpChatBackend>(config_for(server));
    RemotePolicy policy(backend, true);
    TaskInstance task{"t", "Who?", "x", std::nullopt};
    Trajectory traj;
    auto cands = policy.propose(task, traj, "", 3, 1);
    REQUIRE(cands.size() == 3);
    for (const auto& c : cands) {
        CHECK(c.action == ToolCall::search("alpha"));
        CHECK_FALSE(c.flagged);
        CHECK(c.logprob_top10);
    }

    RemotePrmScorer prm(backend, 8);
    ScoringInput in{task, traj, "", "", cands[0]};
    auto s = prm.score(in);
    CHECK(s.value == 1.5);
    CHECK_FALSE(s.flagged);
}
