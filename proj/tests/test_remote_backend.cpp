#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <thread>

#include <kgforge/remote_backend.hpp>

using namespace kgforge;
using nlohmann::json;

namespace {

// Loopback stand-in for an OpenAI-compatible endpoint.
class FakeApiServer {
 public:
  FakeApiServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth = req.get_header_value("Authorization");
      json body = json::parse(req.body);
      last_chat_body = body;
      json reply{{"choices",
                  {{{"message", {{"role", "assistant"}, {"content", chat_content}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      json body = json::parse(req.body);
      last_embed_body = body;
      json data = json::array();
      // Reverse index order on purpose: the client must reassemble by index.
      auto inputs = body["input"];
      for (int i = static_cast<int>(inputs.size()) - 1; i >= 0; --i) {
        double x = 1.0 + i;
        data.push_back({{"index", i}, {"embedding", {x, 0.0, 0.0}}});
      }
      res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    server_.Post("/v1/error", [](const httplib::Request&, httplib::Response& res) {
      res.status = 500;
      res.set_content("boom", "text/plain");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeApiServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  std::string chat_content = "{\"name\": \"Ada\"}";
  std::string last_auth;
  json last_chat_body;
  json last_embed_body;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RemoteConfig config_for(const FakeApiServer& server) {
  RemoteConfig config;
  config.base_url = server.base_url();
  config.chat_model = "test-chat";
  config.embed_model = "test-embed";
  config.timeout_seconds = 5;
  return config;
}

}  // namespace

TEST_CASE("remote llm speaks the chat-completions wire protocol") {
  FakeApiServer server;
  setenv("KGFORGE_API_KEY", "sk-test-123", 1);
  RemoteLlm llm(config_for(server));
  ExtractionRequest request{"extract the name", "Ada Lovelace wrote programs",
                            {{"name", {FieldKind::text, "person name", true}}}, "t"};
  ExtractionResult result = extract_structured(llm, request);
  CHECK(std::get<std::string>(*result.find("name")) == "Ada");
  CHECK(server.last_auth == "Bearer sk-test-123");
  CHECK(server.last_chat_body["model"] == "test-chat");
  CHECK(server.last_chat_body["messages"][0]["role"] == "system");
  CHECK(server.last_chat_body["messages"][1]["content"] == "Ada Lovelace wrote programs");
  CHECK(server.last_chat_body["response_format"]["type"] == "json_object");
  unsetenv("KGFORGE_API_KEY");
}

TEST_CASE("remote embedder normalizes and reorders by index") {
  FakeApiServer server;
  RemoteEmbedder embedder(config_for(server));
  auto vectors = embedder.embed_batch({"alpha", "beta"});
  REQUIRE(vectors.size() == 2);
  CHECK(vectors[0] == EmbeddingVector{1.0, 0.0, 0.0});
  CHECK(vectors[1] == EmbeddingVector{1.0, 0.0, 0.0});  // normalized from {2,0,0}
  CHECK(embedder.dimension() == 3);
  CHECK(server.last_embed_body["model"] == "test-embed");
  CHECK(server.last_embed_body["input"] == json({"alpha", "beta"}));
}

TEST_CASE("configured embedding dimensions are sent and enforced") {
  FakeApiServer server;
  RemoteConfig config = config_for(server);
  config.embed_dimensions = 3;
  RemoteEmbedder embedder(config);
  CHECK(embedder.dimension() == 3);  // no probe call needed
  embedder.embed_batch({"x"});
  CHECK(server.last_embed_body["dimensions"] == 3);
}

TEST_CASE("unreachable hosts raise a transport error") {
  RemoteConfig config;
  config.base_url = "http://127.0.0.1:1/v1";  // nothing listens there
  config.timeout_seconds = 1;
  RemoteLlm llm(config);
  ExtractionRequest request{"i", "c", {{"k", {FieldKind::text, "", false}}}, "t"};
  CHECK_THROWS_AS(extract_structured(llm, request), BackendUnreachableError);
}

TEST_CASE("http error statuses raise a transport error") {
  FakeApiServer server;
  RemoteConfig config = config_for(server);
  RemoteSession session(config);
  CHECK_THROWS_AS(session.post_json("/error", json::object()), BackendUnreachableError);
}
