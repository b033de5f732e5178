#pragma once

#include <map>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "catbear/review_store.hpp"

namespace catbear {

struct Principal {
  std::string worker;
  bool admin = false;
};

struct ReviewServerConfig {
  /// Bearer token -> principal.
  std::map<std::string, Principal> tokens;
  /// Served at "/" when set; otherwise a placeholder page.
  std::string static_dir;
  int correlation_permutations = 1000;
};

/// Accepts {"token": "worker"} or {"token": {"worker": "w", "admin": true}}.
/// Throws a configuration error on anything else.
std::map<std::string, Principal> parse_tokens(const nlohmann::json& j);

/// JSON API under /api/v1/ over a ReviewStore:
///   GET  assignments                    own (admin: all)
///   POST assignments                    {dialogue_id, worker}          admin
///   POST assignments/{id}/status        {status}                       assignee
///   GET  dialogues/{id}                 layered view with originals
///   POST refinements                    {dialogue_id, turn, emotion?, utterance?}
///   POST ratings                        {dialogue_id, turn, variant, EmoCategory, ...}
///   GET  progress
///   GET  stats/aggregate?delta_base=after|before
///   GET  stats/correlation?dimension=EmoMatch&permutations=1000&seed=0
///   GET  export?partial=true                                             admin
///   GET  audit?rate=0.1&seed=0                                           admin
/// Errors are {"error": message, "field": name} with 400/401/403/404/409/422.
class ReviewServer {
 public:
  ReviewServer(ReviewStore& store, ReviewServerConfig config);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Binds and serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace catbear
