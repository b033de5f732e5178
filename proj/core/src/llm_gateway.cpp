#include "catbear/llm_gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include "catbear/error.hpp"
#include "catbear/util.hpp"

namespace catbear {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  fail(ErrorKind::input, "unknown chat role '" + std::string(s) + "'");
}

void GenerationRequest::validate() const {
  if (messages.empty()) fail(ErrorKind::input, "request has no messages", "messages");
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    fail(ErrorKind::input, "temperature must be in [0, 2]", "temperature");
  }
  if (max_tokens <= 0) fail(ErrorKind::input, "max_tokens must be positive", "max_tokens");
  for (const auto& m : messages) {
    if (m.role != Role::assistant && m.content.empty()) {
      fail(ErrorKind::input, "system/user message content must be nonempty", "content");
    }
  }
}

nlohmann::ordered_json GenerationRequest::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model;
  auto& msgs = j["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : messages) {
    nlohmann::ordered_json mj;
    mj["role"] = to_string(m.role);
    mj["content"] = m.content;
    msgs.push_back(std::move(mj));
  }
  j["temperature"] = temperature;
  j["max_tokens"] = max_tokens;
  if (seed) j["seed"] = *seed;
  return j;
}

std::string prompt_hash(const GenerationRequest& req) {
  return sha256_hex(req.to_json().dump());
}

// --- MockBackend ------------------------------------------------------------

MockBackend::MockBackend(std::vector<Step> script, std::string id)
    : id_(std::move(id)), script_(std::move(script)) {}

MockBackend::MockBackend(Responder responder, std::string id)
    : id_(std::move(id)), responder_(std::move(responder)) {}

BackendReply MockBackend::send(const GenerationRequest& req) {
  std::size_t index;
  {
    std::lock_guard lock(mu_);
    index = requests_.size();
    requests_.push_back(req);
    ++in_flight_;
    max_in_flight_ = std::max(max_in_flight_, in_flight_);
  }
  struct Leave {
    MockBackend* self;
    ~Leave() {
      std::lock_guard lock(self->mu_);
      --self->in_flight_;
    }
  } leave{this};

  Step step;
  if (responder_) {
    step = responder_(req, index);
  } else if (index < script_.size()) {
    step = script_[index];
  } else {
    step = Step::error("mock script exhausted after " + std::to_string(script_.size()) + " calls");
  }
  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

  switch (step.kind) {
    case Step::Kind::reply: return {step.text, std::nullopt, std::nullopt};
    case Step::Kind::transient_failure: throw TransientFailure(step.text);
    case Step::Kind::application_error:
      fail(ErrorKind::backend, "mock backend error: " + step.text, step.text);
  }
  return {};
}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return requests_.size();
}

std::vector<GenerationRequest> MockBackend::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::size_t MockBackend::max_in_flight() const {
  std::lock_guard lock(mu_);
  return max_in_flight_;
}

// --- RequestJournal ---------------------------------------------------------

RequestJournal::RequestJournal(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;  // fresh journal
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
      GenerationResult r;
      r.prompt_hash = j.at("prompt_hash").get<std::string>();
      r.backend_id = j.at("backend").get<std::string>();
      r.text = j.at("text").get<std::string>();
      if (j.contains("prompt_tokens")) r.prompt_tokens = j["prompt_tokens"].get<int>();
      if (j.contains("completion_tokens")) r.completion_tokens = j["completion_tokens"].get<int>();
      r.from_journal = true;
      entries_[r.prompt_hash] = std::move(r);
    } catch (const nlohmann::json::exception& e) {
      // A torn final record is what an interrupted run leaves behind.
      if (i + 1 == lines.size()) break;
      fail(ErrorKind::data,
           "journal '" + path_ + "' line " + std::to_string(i + 1) + ": " + e.what(),
           std::to_string(i + 1));
    }
  }
}

std::optional<GenerationResult> RequestJournal::lookup(const std::string& hash) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(hash);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void RequestJournal::append(const GenerationRequest& req, const GenerationResult& result) {
  nlohmann::ordered_json j;
  j["prompt_hash"] = result.prompt_hash;
  j["backend"] = result.backend_id;
  j["request"] = req.to_json();
  j["text"] = result.text;
  if (result.prompt_tokens) j["prompt_tokens"] = *result.prompt_tokens;
  if (result.completion_tokens) j["completion_tokens"] = *result.completion_tokens;

  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app);
  if (!out) fail(ErrorKind::input, "cannot append to journal '" + path_ + "'", path_);
  out << j.dump() << '\n';
  out.flush();
  auto stored = result;
  stored.from_journal = true;
  entries_[result.prompt_hash] = std::move(stored);
}

std::size_t RequestJournal::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// --- Gateway ----------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
  if (!backend_) fail(ErrorKind::configuration, "gateway needs a backend");
  if (config_.parallelism < 1) fail(ErrorKind::configuration, "parallelism must be >= 1", "parallelism");
  if (config_.retry_cap < 0) fail(ErrorKind::configuration, "retry_cap must be >= 0", "retry_cap");
  if (config_.backoff_ms < 0) fail(ErrorKind::configuration, "backoff_ms must be >= 0", "backoff_ms");
  if (!config_.journal_path.empty()) journal_ = std::make_unique<RequestJournal>(config_.journal_path);
}

std::unique_ptr<Gateway> Gateway::from_config(const GatewayConfig& config) {
  const char* key = std::getenv(config.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    fail(ErrorKind::configuration,
         "environment variable " + config.api_key_env + " is not set", config.api_key_env);
  }
  auto backend = std::make_shared<HttpBackend>(config.base_url, key, config.timeout_seconds);
  return std::make_unique<Gateway>(std::move(backend), config);
}

GenerationRequest Gateway::make_request(std::vector<ChatMessage> messages) const {
  GenerationRequest req;
  req.model = config_.model;
  req.messages = std::move(messages);
  req.temperature = config_.temperature;
  req.max_tokens = config_.max_tokens;
  return req;
}

void Gateway::acquire_slot() {
  std::unique_lock lock(mu_);
  slot_cv_.wait(lock, [&] { return in_flight_ < config_.parallelism; });
  ++in_flight_;
}

void Gateway::release_slot() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  slot_cv_.notify_one();
}

void Gateway::pace() {
  if (config_.requests_per_second <= 0.0) return;
  const auto spacing = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / config_.requests_per_second));
  std::chrono::steady_clock::time_point start;
  {
    std::lock_guard lock(pace_mu_);
    auto now = std::chrono::steady_clock::now();
    start = std::max(now, next_start_);
    next_start_ = start + spacing;
  }
  std::this_thread::sleep_until(start);
}

std::size_t Gateway::attempts() const {
  std::lock_guard lock(mu_);
  return attempts_;
}

GenerationResult Gateway::complete(const GenerationRequest& req) {
  req.validate();
  const std::string hash = prompt_hash(req);
  if (journal_) {
    if (auto hit = journal_->lookup(hash)) return *hit;
  }

  acquire_slot();
  struct Release {
    Gateway* g;
    ~Release() { g->release_slot(); }
  } release{this};

  std::string last_failure;
  for (int attempt = 0; attempt <= config_.retry_cap; ++attempt) {
    if (attempt > 0 && config_.backoff_ms > 0) {
      long long delay = static_cast<long long>(config_.backoff_ms) << std::min(attempt - 1, 20);
      delay = std::min<long long>(delay, config_.backoff_max_ms);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    pace();
    {
      std::lock_guard lock(mu_);
      ++attempts_;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
      BackendReply reply = backend_->send(req);
      GenerationResult result;
      result.text = std::move(reply.text);
      result.prompt_hash = hash;
      result.backend_id = backend_->id();
      result.latency_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      result.prompt_tokens = reply.prompt_tokens;
      result.completion_tokens = reply.completion_tokens;
      if (journal_) journal_->append(req, result);
      return result;
    } catch (const TransientFailure& e) {
      last_failure = e.what();
    }
  }
  fail(ErrorKind::transport,
       "giving up after " + std::to_string(config_.retry_cap + 1) + " attempts: " + last_failure,
       hash);
}

}  // namespace catbear
