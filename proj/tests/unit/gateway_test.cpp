#include <cstdlib>
#include <fstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "catbear/error.hpp"
#include "catbear/llm_gateway.hpp"
#include "support/fixtures.hpp"

namespace catbear {
namespace {

using Step = MockBackend::Step;

GenerationRequest hello(const Gateway& gw, const std::string& text = "你好") {
  return gw.make_request({{Role::system, "sys"}, {Role::user, text}});
}

TEST(Gateway, RequestValidation) {
  GenerationRequest r;
  EXPECT_THROW(r.validate(), Error);
  r.messages = {{Role::user, "hi"}};
  EXPECT_NO_THROW(r.validate());
  r.temperature = 2.5;
  EXPECT_THROW(r.validate(), Error);
  r.temperature = 1.0;
  r.max_tokens = 0;
  EXPECT_THROW(r.validate(), Error);
  r.max_tokens = 10;
  r.messages = {{Role::user, ""}};
  EXPECT_THROW(r.validate(), Error);
}

TEST(Gateway, PromptHashIsStableAndSensitive) {
  GenerationRequest a;
  a.model = "m";
  a.messages = {{Role::user, "x"}};
  GenerationRequest b = a;
  EXPECT_EQ(prompt_hash(a), prompt_hash(b));
  EXPECT_EQ(prompt_hash(a).size(), 64u);
  b.temperature = 0.5;
  EXPECT_NE(prompt_hash(a), prompt_hash(b));
  b = a;
  b.messages[0].content = "y";
  EXPECT_NE(prompt_hash(a), prompt_hash(b));
}

TEST(Gateway, RetriesTransientFailures) {
  auto backend = std::make_shared<MockBackend>(
      std::vector<Step>{Step::transient(), Step::transient(), Step::ok("好的")});
  Gateway gw(backend, testing::fast_config());
  auto r = gw.complete(hello(gw));
  EXPECT_EQ(r.text, "好的");
  EXPECT_EQ(gw.attempts(), 3u);
  EXPECT_EQ(r.backend_id, "mock");
}

TEST(Gateway, GivesUpAfterRetryCap) {
  auto backend = std::make_shared<MockBackend>(std::vector<Step>(5, Step::transient("503")));
  auto cfg = testing::fast_config();
  cfg.retry_cap = 2;
  Gateway gw(backend, cfg);
  try {
    gw.complete(hello(gw));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::transport);
    EXPECT_NE(std::string(e.what()).find("3 attempts"), std::string::npos);
  }
  EXPECT_EQ(backend->calls(), 3u);
}

TEST(Gateway, ApplicationErrorsAreNotRetried) {
  auto backend = std::make_shared<MockBackend>(std::vector<Step>{Step::error("bad request"), Step::ok("x")});
  Gateway gw(backend, testing::fast_config());
  try {
    gw.complete(hello(gw));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::backend);
  }
  EXPECT_EQ(backend->calls(), 1u);
}

TEST(Gateway, ExhaustedScriptIsBackendError) {
  auto backend = std::make_shared<MockBackend>(std::vector<Step>{});
  Gateway gw(backend, testing::fast_config());
  EXPECT_THROW(gw.complete(hello(gw)), Error);
}

TEST(Gateway, ParallelismIsBounded) {
  auto backend = std::make_shared<MockBackend>(
      MockBackend::Responder([](const GenerationRequest&, std::size_t) { return Step::ok("ok"); }));
  backend->set_latency(std::chrono::milliseconds(20));
  Gateway gw(backend, testing::fast_config(2));
  std::vector<std::jthread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&gw, i] { gw.complete(hello(gw, "msg" + std::to_string(i))); });
  threads.clear();
  EXPECT_EQ(backend->calls(), 8u);
  EXPECT_LE(backend->max_in_flight(), 2u);
  EXPECT_GE(backend->max_in_flight(), 1u);
}

TEST(Gateway, RequestSpacing) {
  auto backend = std::make_shared<MockBackend>(
      MockBackend::Responder([](const GenerationRequest&, std::size_t) { return Step::ok("ok"); }));
  auto cfg = testing::fast_config(1);
  cfg.requests_per_second = 50;  // 20 ms apart
  Gateway gw(backend, cfg);
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 4; ++i) gw.complete(hello(gw, std::to_string(i)));
  EXPECT_GE(std::chrono::steady_clock::now() - t0, std::chrono::milliseconds(55));
}

TEST(Gateway, JournalReplaysCompletedCalls) {
  const auto path = testing::temp_path("journal.jsonl");
  auto cfg = testing::fast_config();
  cfg.journal_path = path;
  {
    auto backend = std::make_shared<MockBackend>(std::vector<Step>{Step::ok("一"), Step::ok("二")});
    Gateway gw(backend, cfg);
    EXPECT_EQ(gw.complete(hello(gw, "a")).text, "一");
    EXPECT_EQ(gw.complete(hello(gw, "b")).text, "二");
  }
  auto backend = std::make_shared<MockBackend>(std::vector<Step>{Step::ok("三")});
  Gateway gw(backend, cfg);
  auto r = gw.complete(hello(gw, "b"));
  EXPECT_EQ(r.text, "二");
  EXPECT_TRUE(r.from_journal);
  EXPECT_EQ(backend->calls(), 0u);
  EXPECT_EQ(gw.complete(hello(gw, "c")).text, "三");
}

TEST(Gateway, JournalToleratesTornTail) {
  const auto path = testing::temp_path("torn.jsonl");
  auto cfg = testing::fast_config();
  cfg.journal_path = path;
  {
    auto backend = std::make_shared<MockBackend>(std::vector<Step>{Step::ok("一")});
    Gateway gw(backend, cfg);
    gw.complete(hello(gw, "a"));
  }
  std::ofstream(path, std::ios::app) << "{\"prompt_hash\": \"abc";
  RequestJournal j(path);
  EXPECT_EQ(j.size(), 1u);

  std::ofstream(path, std::ios::app) << "\n{\"x\":1}\n";
  EXPECT_THROW(RequestJournal bad(path), Error);
}

TEST(Gateway, MissingApiKeyIsConfigurationError) {
  GatewayConfig cfg;
  cfg.api_key_env = "CATBEAR_TEST_SURELY_UNSET";
  ::unsetenv(cfg.api_key_env.c_str());
  try {
    Gateway::from_config(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::configuration);
    EXPECT_EQ(e.detail(), "CATBEAR_TEST_SURELY_UNSET");
  }
}

// --- HTTP backend against a local server ------------------------------------

class HttpBackendTest : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = req.body;
      if (mode_ == "rate-limit" && hits_ == 1) {
        res.status = 429;
        return;
      }
      if (mode_ == "bad") {
        res.status = 400;
        res.set_content(R"({"error":"bad model"})", "application/json");
        return;
      }
      res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"你好呀"}}],)"
                      R"("usage":{"prompt_tokens":12,"completion_tokens":3}})",
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }
  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::string mode_ = "ok";
  int hits_ = 0;
  std::string last_auth_, last_body_;
};

TEST_F(HttpBackendTest, ParsesCompletion) {
  Gateway gw(std::make_shared<HttpBackend>(base(), "sk-test", 5), testing::fast_config());
  auto req = hello(gw);
  auto r = gw.complete(req);
  EXPECT_EQ(r.text, "你好呀");
  EXPECT_EQ(r.prompt_tokens, 12);
  EXPECT_EQ(r.completion_tokens, 3);
  EXPECT_EQ(last_auth_, "Bearer sk-test");
  EXPECT_EQ(nlohmann::json::parse(last_body_), nlohmann::json::parse(req.to_json().dump()));
}

TEST_F(HttpBackendTest, RetriesOn429) {
  mode_ = "rate-limit";
  Gateway gw(std::make_shared<HttpBackend>(base(), "k", 5), testing::fast_config());
  EXPECT_EQ(gw.complete(hello(gw)).text, "你好呀");
  EXPECT_EQ(hits_, 2);
}

TEST_F(HttpBackendTest, ClientErrorIsBackendError) {
  mode_ = "bad";
  Gateway gw(std::make_shared<HttpBackend>(base(), "k", 5), testing::fast_config());
  try {
    gw.complete(hello(gw));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::backend);
    EXPECT_NE(std::string(e.what()).find("bad model"), std::string::npos);
  }
  EXPECT_EQ(hits_, 1);
}

TEST(HttpBackend, UnreachableHostIsTransport) {
  auto cfg = testing::fast_config();
  cfg.retry_cap = 1;
  Gateway gw(std::make_shared<HttpBackend>("http://127.0.0.1:1/v1", "k", 1), cfg);
  try {
    gw.complete(hello(gw));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::transport);
  }
}

}  // namespace
}  // namespace catbear
