#include "catbear/run_config.hpp"

#include <cstdlib>

#include "catbear/error.hpp"
#include "catbear/util.hpp"

namespace catbear {
namespace {

nlohmann::json::json_pointer pointer(std::string_view dotted) {
  std::string p;
  std::size_t pos = 0;
  while (pos <= dotted.size()) {
    auto dot = dotted.find('.', pos);
    if (dot == std::string_view::npos) dot = dotted.size();
    p += "/" + std::string(dotted.substr(pos, dot - pos));
    pos = dot + 1;
  }
  return nlohmann::json::json_pointer(p);
}

bool is_secret_key(std::string_view key) {
  auto ends = [&](std::string_view suffix) {
    return key.size() >= suffix.size() && key.substr(key.size() - suffix.size()) == suffix;
  };
  return ends("api_key") || ends("token") || ends("tokens");
}

bool compatible(const nlohmann::json& want, const nlohmann::json& got) {
  if (want.is_number_float()) return got.is_number();
  if (want.is_number_integer()) return got.is_number_integer();
  if (want.is_object()) return got.is_object();
  return want.type() == got.type();
}

void check_interpolation(const nlohmann::json& v, const std::string& where, bool secret) {
  if (v.is_string()) {
    if (!secret && v.get<std::string>().find("${") != std::string::npos) {
      fail(ErrorKind::configuration, "'" + where + "' is not a secret field; environment interpolation is not allowed",
           where);
    }
  } else if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it) check_interpolation(it.value(), where + "." + it.key(), secret);
  }
}

// Free-form maps (e.g. review.tokens) accept any keys.
bool open_map(const nlohmann::json& node) { return node.is_object() && node.empty(); }

void merge(nlohmann::json& base, const nlohmann::json& overlay, const std::string& prefix) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    auto found = base.find(it.key());
    if (found == base.end()) fail(ErrorKind::configuration, "unknown setting '" + key + "'", key);
    if (!compatible(*found, it.value())) {
      fail(ErrorKind::configuration, "setting '" + key + "' has the wrong type", key);
    }
    if (found->is_object() && !open_map(*found)) {
      merge(*found, it.value(), key);
    } else {
      check_interpolation(it.value(), key, is_secret_key(it.key()));
      *found = it.value();
    }
  }
}

}  // namespace

std::string resolve_env_reference(const std::string& value, const std::string& key) {
  if (value.size() < 4 || value.rfind("${", 0) != 0 || value.back() != '}') return value;
  const std::string name = value.substr(2, value.size() - 3);
  const char* env = std::getenv(name.c_str());
  if (!env || !*env) {
    fail(ErrorKind::configuration, "environment variable " + name + " (for '" + key + "') is not set", name);
  }
  return env;
}

const nlohmann::json& RunConfig::defaults() {
  static const nlohmann::json kDefaults = [] {
    GatewayConfig g;
    nlohmann::json j;
    j["gateway"] = {
        {"backend", "http"},
        {"base_url", g.base_url},
        {"model", g.model},
        {"temperature", g.temperature},
        {"max_tokens", g.max_tokens},
        {"parallelism", g.parallelism},
        {"retry_cap", g.retry_cap},
        {"backoff_ms", g.backoff_ms},
        {"backoff_max_ms", g.backoff_max_ms},
        {"requests_per_second", g.requests_per_second},
        {"timeout_seconds", g.timeout_seconds},
        {"api_key_env", g.api_key_env},
        {"api_key", ""},
    };
    j["generation"] = {
        {"turns", 10},         {"ablation", "full"}, {"reprompt_cap", 2},
        {"per_construal", 32}, {"seed", 0},          {"construals", nlohmann::json::array()},
    };
    j["split"] = {{"seed", 0}, {"train", 0.90}, {"validation", 0.05}, {"test", 0.05}};
    j["eval"] = {{"k", 0}, {"seed", 0}, {"sample_per_dialogue", 0}, {"embedding", "none"}};
    j["review"] = {{"tokens", nlohmann::json::object()}, {"snapshot_every", 100}};
    return j;
  }();
  return kDefaults;
}

RunConfig::RunConfig() : tree_(defaults()) {}

RunConfig RunConfig::from_json(const nlohmann::json& overlay) {
  if (!overlay.is_object()) fail(ErrorKind::configuration, "config must be a JSON object");
  RunConfig c;
  merge(c.tree_, overlay, "");
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::parse, "config '" + path + "' is not valid JSON", path);
  return from_json(j);
}

void RunConfig::set(std::string_view dotted_key, nlohmann::json value) {
  const std::string key(dotted_key);
  nlohmann::json overlay;
  overlay[pointer(dotted_key)] = std::move(value);
  try {
    merge(tree_, overlay, "");
  } catch (const Error& e) {
    throw Error(e.kind(), e.message(), key);
  }
}

const nlohmann::json& RunConfig::get(std::string_view dotted_key) const {
  auto ptr = pointer(dotted_key);
  if (!tree_.contains(ptr)) {
    fail(ErrorKind::configuration, "unknown setting '" + std::string(dotted_key) + "'", std::string(dotted_key));
  }
  return tree_.at(ptr);
}

std::string RunConfig::string(std::string_view key) const { return get(key).get<std::string>(); }
long long RunConfig::integer(std::string_view key) const { return get(key).get<long long>(); }
double RunConfig::number(std::string_view key) const { return get(key).get<double>(); }
bool RunConfig::boolean(std::string_view key) const { return get(key).get<bool>(); }

std::string RunConfig::secret(std::string_view key) const { return resolve_env_reference(string(key), std::string(key)); }

std::string RunConfig::digest() const {
  // nlohmann::json keeps object keys sorted, so dump() is canonical.
  return sha256_hex(tree_.dump()).substr(0, 16);
}

GatewayConfig RunConfig::gateway() const {
  GatewayConfig g;
  g.base_url = string("gateway.base_url");
  g.model = string("gateway.model");
  g.temperature = number("gateway.temperature");
  g.max_tokens = static_cast<int>(integer("gateway.max_tokens"));
  g.parallelism = static_cast<int>(integer("gateway.parallelism"));
  g.retry_cap = static_cast<int>(integer("gateway.retry_cap"));
  g.backoff_ms = static_cast<int>(integer("gateway.backoff_ms"));
  g.backoff_max_ms = static_cast<int>(integer("gateway.backoff_max_ms"));
  g.requests_per_second = number("gateway.requests_per_second");
  g.timeout_seconds = static_cast<int>(integer("gateway.timeout_seconds"));
  g.api_key_env = string("gateway.api_key_env");
  return g;
}

}  // namespace catbear
