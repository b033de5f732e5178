// Both HTTP-speaking backends share this TU so cpp-httplib is compiled once.
#include <httplib.h>

#include "catbear/error.hpp"
#include "catbear/llm_gateway.hpp"
#include "catbear/metrics.hpp"

namespace catbear {
namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

Endpoint split_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    fail(ErrorKind::configuration, "base_url must include a scheme: '" + base_url + "'", "base_url");
  }
  auto path_start = base_url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = base_url.substr(0, path_start);
  ep.prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  return ep;
}

std::string excerpt(const std::string& body) {
  constexpr std::size_t kMax = 300;
  return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

// POSTs JSON and returns the parsed body. Connection problems, 429 and 5xx
// are transient; other non-2xx statuses are application errors.
nlohmann::json post_json(const std::string& base_url, const std::string& path,
                         const std::string& api_key, const std::string& body, int timeout_seconds) {
  auto ep = split_url(base_url);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);
  httplib::Headers headers{{"Authorization", "Bearer " + api_key}};

  auto res = client.Post(ep.prefix + path, headers, body, "application/json");
  if (!res) throw TransientFailure("HTTP transport failure: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransientFailure("HTTP " + std::to_string(res->status) + ": " + excerpt(res->body));
  }
  if (res->status < 200 || res->status >= 300) {
    fail(ErrorKind::backend, "HTTP " + std::to_string(res->status) + ": " + excerpt(res->body),
         excerpt(res->body));
  }
  auto parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) {
    fail(ErrorKind::backend, "response is not JSON: " + excerpt(res->body), excerpt(res->body));
  }
  return parsed;
}

}  // namespace

HttpBackend::HttpBackend(std::string base_url, std::string api_key, int timeout_seconds)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
  split_url(base_url_);  // validate early
}

BackendReply HttpBackend::send(const GenerationRequest& req) {
  auto j = post_json(base_url_, "/chat/completions", api_key_, req.to_json().dump(), timeout_seconds_);
  BackendReply reply;
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    reply.text = content.is_string() ? content.get<std::string>() : std::string();
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
      if (u->contains("prompt_tokens")) reply.prompt_tokens = u->at("prompt_tokens").get<int>();
      if (u->contains("completion_tokens")) reply.completion_tokens = u->at("completion_tokens").get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::backend, std::string("unexpected chat-completion response shape: ") + e.what());
  }
  return reply;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(std::string base_url, std::string api_key,
                                           std::string model, int timeout_seconds)
    : base_url_(std::move(base_url)),
      api_key_(std::move(api_key)),
      model_(std::move(model)),
      timeout_seconds_(timeout_seconds) {
  split_url(base_url_);
}

std::vector<double> HttpEmbeddingBackend::embed(std::string_view text) {
  nlohmann::ordered_json body{{"model", model_}, {"input", std::string(text)}};
  try {
    auto j = post_json(base_url_, "/embeddings", api_key_, body.dump(), timeout_seconds_);
    return j.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const TransientFailure& e) {
    fail(ErrorKind::metric, std::string("embedding backend: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::metric, std::string("embedding backend: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::metric, std::string("embedding response shape: ") + e.what());
  }
}

}  // namespace catbear
