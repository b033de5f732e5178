#include "catbear/review_server.hpp"

#include <filesystem>
#include <thread>

#include <httplib.h>

#include "catbear/error.hpp"

namespace catbear {

std::map<std::string, Principal> parse_tokens(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::configuration, "tokens must be a JSON object", "tokens");
  std::map<std::string, Principal> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    Principal p;
    if (it->is_string()) {
      p.worker = it->get<std::string>();
    } else if (it->is_object() && it->contains("worker") && it->at("worker").is_string()) {
      p.worker = it->at("worker").get<std::string>();
      p.admin = it->value("admin", false);
    } else {
      fail(ErrorKind::configuration, "token entry must name a worker", "tokens");
    }
    if (it.key().empty() || p.worker.empty()) fail(ErrorKind::configuration, "empty token or worker", "tokens");
    out[it.key()] = p;
  }
  return out;
}

namespace {

constexpr const char* kPlaceholder =
    "<!doctype html><meta charset=\"utf-8\"><title>catbear review</title>"
    "<p>Review API is under <code>/api/v1/</code>. No UI bundle is configured.</p>";

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, const std::string& message, const std::string& field = {}) {
  nlohmann::ordered_json j;
  j["error"] = message;
  j["field"] = field.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(field);
  send_json(res, status, j);
}

int status_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::validation:
    case ErrorKind::schema:
    case ErrorKind::label: return 422;
    case ErrorKind::input:
    case ErrorKind::parse: return 400;
    default: return 500;
  }
}

nlohmann::json body_json(const httplib::Request& req) {
  auto j = nlohmann::json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ReviewError(400, "request body must be a JSON object");
  return j;
}

template <class T>
T query(const httplib::Request& req, const std::string& key, T fallback) {
  if (!req.has_param(key)) return fallback;
  const auto v = req.get_param_value(key);
  try {
    if constexpr (std::is_same_v<T, double>) {
      return std::stod(v);
    } else if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      return v == "1" || v == "true" || v == "yes";
    } else {
      return static_cast<T>(std::stoll(v));
    }
  } catch (const std::exception&) {
    throw ReviewError(400, "query parameter '" + key + "' is malformed", key);
  }
}

nlohmann::ordered_json assignment_json(const Assignment& a) {
  return {{"dialogue_id", a.dialogue_id}, {"worker", a.worker}, {"status", to_string(a.status)}};
}

nlohmann::ordered_json row_json(const std::optional<AggregateRow>& row) {
  if (!row) return {{"status", "empty"}, {"n", 0}};
  nlohmann::ordered_json j;
  j["status"] = "ok";
  j["n"] = row->n;
  auto& means = j["means"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kRatingDimensionCount; ++i) means[std::string(kRatingDimensions[i].name)] = row->means[i];
  return j;
}

}  // namespace

struct ReviewServer::Impl {
  ReviewStore& store;
  ReviewServerConfig config;
  httplib::Server server;
  std::thread thread;

  Impl(ReviewStore& s, ReviewServerConfig c) : store(s), config(std::move(c)) {}

  const Principal& authenticate(const httplib::Request& req) const {
    const auto header = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (header.rfind(prefix, 0) == 0) {
      auto it = config.tokens.find(header.substr(prefix.size()));
      if (it != config.tokens.end()) return it->second;
    }
    throw ReviewError(401, "missing or unknown bearer token");
  }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&, const Principal&)>;

  httplib::Server::Handler guarded(Handler h) {
    return [this, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res, authenticate(req));
      } catch (const ReviewError& e) {
        send_error(res, e.status(), e.what(), e.field());
      } catch (const Error& e) {
        send_error(res, status_for(e.kind()), e.what(), e.detail());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  static void require_admin(const Principal& p) {
    if (!p.admin) throw ReviewError(403, "this endpoint needs an admin token");
  }

  void routes() {
    server.Get("/api/v1/assignments", guarded([this](const httplib::Request&, httplib::Response& res, const Principal& p) {
      auto list = store.assignments(p.admin ? std::string() : p.worker);
      auto arr = nlohmann::ordered_json::array();
      for (const auto& a : list) arr.push_back(assignment_json(a));
      send_json(res, 200, {{"assignments", arr}});
    }));

    server.Post("/api/v1/assignments", guarded([this](const httplib::Request& req, httplib::Response& res, const Principal& p) {
      require_admin(p);
      auto body = body_json(req);
      if (!body.contains("dialogue_id") || !body["dialogue_id"].is_string()) {
        throw ReviewError(422, "dialogue_id is required", "dialogue_id");
      }
      if (!body.contains("worker") || !body["worker"].is_string()) throw ReviewError(422, "worker is required", "worker");
      auto v = store.assign(body["dialogue_id"].get<std::string>(), body["worker"].get<std::string>());
      send_json(res, 200, {{"version", v}});
    }));

    server.Post(R"(/api/v1/assignments/([^/]+)/status)", guarded([this](const httplib::Request& req, httplib::Response& res, const Principal& p) {
      auto body = body_json(req);
      if (!body.contains("status") || !body["status"].is_string()) throw ReviewError(422, "status is required", "status");
      auto v = store.set_status(req.matches[1].str(), p.worker, parse_assignment_status(body["status"].get<std::string>()));
      send_json(res, 200, {{"version", v}});
    }));

    server.Get(R"(/api/v1/dialogues/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res, const Principal&) {
      send_json(res, 200, store.dialogue_view(req.matches[1].str()));
    }));

    server.Post("/api/v1/refinements", guarded([this](const httplib::Request& req, httplib::Response& res, const Principal& p) {
      auto body = body_json(req);
      if (!body.contains("dialogue_id") || !body["dialogue_id"].is_string()) {
        throw ReviewError(422, "dialogue_id is required", "dialogue_id");
      }
      if (!body.contains("turn") || !body["turn"].is_number_integer()) throw ReviewError(422, "turn must be an integer", "turn");
      std::optional<std::string> emotion, utterance;
      for (auto [key, slot] : {std::pair{"emotion", &emotion}, std::pair{"utterance", &utterance}}) {
        if (!body.contains(key) || body[key].is_null()) continue;
        if (!body[key].is_string()) throw ReviewError(422, std::string(key) + " must be a string", key);
        *slot = body[key].get<std::string>();
      }
      auto v = store.refine(p.worker, body["dialogue_id"].get<std::string>(), body["turn"].get<int>(), emotion, utterance);
      send_json(res, 200, {{"version", v}});
    }));

    server.Post("/api/v1/ratings", guarded([this](const httplib::Request& req, httplib::Response& res, const Principal& p) {
      auto v = store.rate(RatingRecord::from_json(body_json(req), p.worker));
      send_json(res, 200, {{"version", v}});
    }));

    server.Get("/api/v1/progress", guarded([this](const httplib::Request&, httplib::Response& res, const Principal&) {
      send_json(res, 200, store.progress());
    }));

    server.Get("/api/v1/stats/aggregate", guarded([this](const httplib::Request& req, httplib::Response& res, const Principal&) {
      auto base_name = query<std::string>(req, "delta_base", "after");
      if (base_name != "after" && base_name != "before") {
        throw ReviewError(422, "delta_base must be after or before", "delta_base");
      }
      auto base = base_name == "after" ? DeltaBase::after : DeltaBase::before;
      auto raw = store.aggregate_ratings(Variant::raw);
      auto refined = store.aggregate_ratings(Variant::refined);
      nlohmann::ordered_json j;
      j["raw"] = row_json(raw);
      j["refined"] = row_json(refined);
      j["delta_base"] = base_name;
      j["table"] = render_aggregate_table(raw, refined, base);
      send_json(res, 200, j);
    }));

    server.Get("/api/v1/stats/correlation", guarded([this](const httplib::Request& req, httplib::Response& res, const Principal&) {
      auto dimension = query<std::string>(req, "dimension", "");
      if (dimension.empty()) throw ReviewError(422, "dimension is required", "dimension");
      auto perms = query<int>(req, "permutations", config.correlation_permutations);
      auto seed = query<std::uint64_t>(req, "seed", 0);
      auto arr = nlohmann::ordered_json::array();
      for (const auto& c : store.rater_correlation(dimension, perms, seed)) arr.push_back(c.to_json());
      send_json(res, 200, {{"dimension", dimension}, {"permutations", perms}, {"pairs", arr}});
    }));

    server.Get("/api/v1/export", guarded([this](const httplib::Request& req, httplib::Response& res, const Principal& p) {
      require_admin(p);
      auto corpus = store.export_refined(query<bool>(req, "partial", false));
      res.status = 200;
      res.set_content(serialize_corpus(corpus), "application/x-ndjson; charset=utf-8");
    }));

    server.Get("/api/v1/audit", guarded([this](const httplib::Request& req, httplib::Response& res, const Principal& p) {
      require_admin(p);
      auto rate = query<double>(req, "rate", 0.1);
      auto seed = query<std::uint64_t>(req, "seed", 0);
      send_json(res, 200, {{"rate", rate}, {"seed", seed}, {"dialogue_ids", store.audit_sample(rate, seed)}});
    }));

    if (!config.static_dir.empty() && std::filesystem::is_directory(config.static_dir)) {
      server.set_mount_point("/", config.static_dir);
    } else {
      server.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(kPlaceholder, "text/html; charset=utf-8");
      });
    }
  }
};

ReviewServer::ReviewServer(ReviewStore& store, ReviewServerConfig config)
    : impl_(std::make_unique<Impl>(store, std::move(config))) {
  impl_->routes();
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::start(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) fail(ErrorKind::configuration, "cannot bind " + host + ":" + std::to_string(port), "port");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void ReviewServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    fail(ErrorKind::configuration, "cannot listen on " + host + ":" + std::to_string(port), "port");
  }
}

void ReviewServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace catbear
