#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "catbear/emotion_space.hpp"
#include "catbear/persona.hpp"
#include "catbear/situation.hpp"

namespace catbear {

enum class AppraisalLevel : std::uint8_t { low, medium, high };
using AppraisalLevels = std::array<AppraisalLevel, kDimensionCount>;

std::string_view to_string(AppraisalLevel l);
/// Accepts low/medium/high (any case) and 低/中/高.
std::optional<AppraisalLevel> try_parse_level(std::string_view s);

/// low -> 0, medium -> 0.5, high -> 1.
NormalizedVector level_vector(const AppraisalLevels& levels);
/// Nearest level per dimension (cut points 0.25 and 0.75).
AppraisalLevels quantize(const NormalizedVector& v);

struct Provenance {
  std::string prompt_hash;
  std::string backend_id;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Turn {
  int index = 0;
  SpeakerId speaker = SpeakerId::AA;
  /// Absent when generated without the dimension walk.
  std::optional<AppraisalLevels> appraisal;
  Emotion emotion = Emotion::happiness;
  std::string utterance;
  Provenance provenance;
  /// CAT-Dist between the level vector and the labeled emotion. Advisory.
  std::optional<double> consistency;

  friend bool operator==(const Turn&, const Turn&) = default;
};

enum class Split : std::uint8_t { none, train, validation, test };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

enum class Ablation : std::uint8_t { full, no_belief, no_appraisal };
std::string_view to_string(Ablation a);
Ablation parse_ablation(std::string_view s);

/// Settings a dialogue was generated under.
struct GenerationSnapshot {
  Ablation ablation = Ablation::full;
  int turns_target = 10;
  std::uint64_t seed = 0;
  int batch_position = 0;
  std::string model;
  double temperature = 1.0;
  int reprompt_cap = 2;
  std::string config_digest;

  friend bool operator==(const GenerationSnapshot&, const GenerationSnapshot&) = default;
};

/// A human edit materialized into the corpus; the original stays here.
struct Revision {
  int turn = 0;
  std::string field;  // "emotion" | "utterance"
  std::string before;
  std::string after;
  std::string worker;
  std::uint64_t event_seq = 0;

  friend bool operator==(const Revision&, const Revision&) = default;
};

struct Dialogue {
  std::string dialogue_id;
  int construal_id = 0;
  ExpandedScene scene;
  std::array<SpeakerProfile, 2> speakers;
  std::vector<Turn> turns;
  Split split = Split::none;
  GenerationSnapshot generation;
  std::vector<Revision> revisions;

  const SpeakerProfile& speaker(SpeakerId id) const {
    return speakers[id == SpeakerId::AA ? 0 : 1];
  }

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

/// Throws a validation error (detail = dialogue id) unless: >= 2 turns,
/// indices are 0..n-1, speakers alternate starting with AA, utterances are
/// nonempty, speakers are AA/BB, and both belief sets are complete (empty
/// under the no_belief ablation).
void validate_dialogue(const Dialogue& d);

nlohmann::ordered_json to_json(const Dialogue& d);
/// Throws a schema error naming the missing/mistyped field.
Dialogue dialogue_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const SpeakerProfile& s);
SpeakerProfile speaker_from_json(const nlohmann::json& j);

}  // namespace catbear
