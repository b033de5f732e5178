#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "catbear/llm_gateway.hpp"

namespace catbear {

/// Layered settings: built-in defaults, then a JSON config file, then
/// explicit overrides (command-line flags). Keys are dotted paths such as
/// "gateway.model". Values of the form "${NAME}" are read from the
/// environment, and only in secret fields (keys ending in "api_key" or
/// "token"/"tokens"); the digest is computed before interpolation.
/// "${NAME}" -> value of NAME (configuration error when unset); any other
/// string is returned unchanged.
std::string resolve_env_reference(const std::string& value, const std::string& what);

class RunConfig {
 public:
  RunConfig();

  static const nlohmann::json& defaults();
  /// Throws input (unreadable), parse, or configuration (unknown key, wrong
  /// type, misplaced interpolation) errors.
  static RunConfig from_file(const std::string& path);
  static RunConfig from_json(const nlohmann::json& overlay);

  /// Override one setting; the key must exist in the defaults and the value
  /// must have the same JSON type (integers are accepted for numbers).
  void set(std::string_view dotted_key, nlohmann::json value);

  const nlohmann::json& get(std::string_view dotted_key) const;
  std::string string(std::string_view key) const;
  long long integer(std::string_view key) const;
  double number(std::string_view key) const;
  bool boolean(std::string_view key) const;
  /// Secret field with "${NAME}" resolved; configuration error when unset.
  std::string secret(std::string_view key) const;

  const nlohmann::json& tree() const { return tree_; }
  /// First 16 hex digits of SHA-256 over the canonical (sorted-key) dump.
  std::string digest() const;

  GatewayConfig gateway() const;

 private:
  nlohmann::json tree_;
};

}  // namespace catbear
