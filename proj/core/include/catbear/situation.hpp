#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "catbear/persona.hpp"

namespace catbear {

class Gateway;

struct SituationalConstrual {
  int id = 0;
  std::string text_zh;
  std::string text_en;

  friend bool operator==(const SituationalConstrual&, const SituationalConstrual&) = default;
};

/// A construal made concrete for one dialogue.
struct ExpandedScene {
  int construal_id = 0;
  std::string narrative;
  std::string prompt_hash;

  friend bool operator==(const ExpandedScene&, const ExpandedScene&) = default;
};

/// The bundled Riverside Situational Q-sort catalog (89 entries, id order).
const std::vector<SituationalConstrual>& load_catalog();

/// Parses catalog JSONL (`{"id":..,"text_zh":..,"text_en":..}` per line).
/// Throws a data error naming the offending line for malformed rows,
/// duplicate or missing ids, or empty texts.
std::vector<SituationalConstrual> parse_catalog(std::string_view jsonl);
std::vector<SituationalConstrual> load_catalog_file(const std::string& path);
std::string serialize_catalog(const std::vector<SituationalConstrual>& catalog);

/// Catalog entry by id; input error when out of range.
const SituationalConstrual& construal(int id);

/// Asks the model for a concrete 1-3 sentence scene grounded in both
/// speakers' factors. Throws a generation error on empty output.
ExpandedScene expand_scene(Gateway& gateway, const SituationalConstrual& construal,
                           const SpeakerProfile& a, const SpeakerProfile& b);

}  // namespace catbear
