#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "privflow/error.hpp"
#include "privflow/reasoner.hpp"

using namespace privflow;
using json = nlohmann::json;

namespace {

// A local chat-completions stand-in that answers from a script of replies.
class FakeBackend {
 public:
  FakeBackend() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(mu_);
      bodies_.push_back(json::parse(req.body));
      auth_ = req.get_header_value("Authorization");
      std::size_t i = std::min(bodies_.size() - 1, replies_.size() - 1);
      if (status_ != 200) {
        res.status = status_;
        return;
      }
      json body = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", replies_[i]}}}}})}};
      res.set_content(body.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeBackend() {
    server_.stop();
    thread_.join();
  }

  void script(std::vector<std::string> replies, int status = 200) {
    std::lock_guard<std::mutex> lock(mu_);
    replies_ = std::move(replies);
    status_ = status;
  }

  RemoteConfig config() const {
    RemoteConfig c;
    c.url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    c.model = "test-model";
    c.prompts_dir = PRIVFLOW_PROMPTS_DIR;
    c.timeout = std::chrono::milliseconds(5000);
    return c;
  }

  std::vector<json> bodies() {
    std::lock_guard<std::mutex> lock(mu_);
    return bodies_;
  }
  std::string auth() {
    std::lock_guard<std::mutex> lock(mu_);
    return auth_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::vector<std::string> replies_{"{}"};
  int status_ = 200;
  std::vector<json> bodies_;
  std::string auth_;
};

const ReasonerTask kTask = ClassifyPrivileged{"e1", "function", "update_role", "fn update_role(u, role) {}"};
const char* kGood = R"({"category": "protected-state", "rationale": "changes a role"})";

}  // namespace

TEST(Remote, WellFormedReply) {
  FakeBackend fake;
  fake.script({kGood});
  setenv("PRIVFLOW_API_KEY", "sekrit", 1);
  RemoteReasoner r(fake.config());
  auto v = std::get<PrivilegedClass>(r.reason(kTask));
  unsetenv("PRIVFLOW_API_KEY");
  EXPECT_EQ(v.category, PrivCategory::protected_state);
  EXPECT_EQ(r.requests_sent(), 1u);
  auto bodies = fake.bodies();
  ASSERT_EQ(bodies.size(), 1u);
  EXPECT_EQ(bodies[0]["model"], "test-model");
  EXPECT_DOUBLE_EQ(bodies[0]["temperature"].get<double>(), 0.2);
  EXPECT_EQ(bodies[0]["messages"].size(), 2u);
  std::string user = bodies[0]["messages"][1]["content"];
  EXPECT_NE(user.find("update_role"), std::string::npos);
  EXPECT_EQ(user.find("{{task}}"), std::string::npos);
  std::string system = bodies[0]["messages"][0]["content"];
  EXPECT_EQ(system.find("{{demonstrations}}"), std::string::npos);
  EXPECT_EQ(fake.auth(), "Bearer sekrit");
}

TEST(Remote, MalformedReplyIsRetriedWithCorrection) {
  FakeBackend fake;
  fake.script({"I think it is privileged.", kGood});
  RemoteReasoner r(fake.config());
  auto v = std::get<PrivilegedClass>(r.reason(kTask));
  EXPECT_EQ(v.category, PrivCategory::protected_state);
  EXPECT_EQ(r.requests_sent(), 2u);
  auto bodies = fake.bodies();
  ASSERT_EQ(bodies.size(), 2u);
  EXPECT_EQ(bodies[1]["messages"].size(), 3u);
  EXPECT_NE(bodies[1]["messages"][2]["content"].get<std::string>().find("rejected"), std::string::npos);
}

TEST(Remote, SchemaViolationAfterThreeRetries) {
  FakeBackend fake;
  fake.script({R"({"category": "bogus", "rationale": "x"})"});
  RemoteReasoner r(fake.config());
  EXPECT_THROW(r.reason(kTask), SchemaViolation);
  EXPECT_EQ(r.requests_sent(), 4u);
}

TEST(Remote, ServerErrorIsUnavailable) {
  FakeBackend fake;
  fake.script({kGood}, 503);
  RemoteReasoner r(fake.config());
  EXPECT_THROW(r.reason(kTask), BackendUnavailable);
}

TEST(Remote, UnreachableIsUnavailable) {
  RemoteConfig c;
  {
    FakeBackend fake;
    c = fake.config();
  }
  c.timeout = std::chrono::milliseconds(1000);
  RemoteReasoner r(c);
  EXPECT_THROW(r.reason(kTask), BackendUnavailable);
  EXPECT_EQ(r.requests_sent(), 3u);
}

TEST(Remote, MissingPromptsAreAnError) {
  RemoteConfig c;
  c.url = "http://127.0.0.1:9/x";
  c.prompts_dir = "/nonexistent";
  EXPECT_THROW(RemoteReasoner{c}, Error);
}

TEST(Remote, EveryTaskHasATemplate) {
  FakeBackend fake;
  fake.script({R"({"tool": "finish", "arguments": {}, "rationale": "done"})"});
  RemoteReasoner r(fake.config());
  auto a = std::get<Action>(r.reason(NextSearchAction{SearchState{{"s"}, 1, 0, {}}, {}}));
  EXPECT_TRUE(a.finish());
}
