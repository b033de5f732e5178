#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace catbear {

/// Number of Riverside situational construals; valid ids are 1..89.
inline constexpr int kConstrualCount = 89;

enum class Trait : std::uint8_t {
  openness,
  conscientiousness,
  extraversion,
  agreeableness,
  neuroticism,
};
inline constexpr std::size_t kTraitCount = 5;
inline constexpr std::size_t kPersonalityCount = 32;
inline constexpr std::size_t kGoalProfileCount = 4;

enum class Polarity : std::uint8_t { low, high };

std::string_view english_name(Trait t);
std::string_view to_string(Polarity p);
Polarity parse_polarity(std::string_view s);

/// Chinese adjective for one trait pole, from the bundled lexicon.
std::string_view adjective(Trait t, Polarity p);

/// Big-Five profile as five binary poles.
struct PersonalityProfile {
  std::array<Polarity, kTraitCount> poles{};

  /// Position in canonical order: openness is the most significant bit.
  int index() const;
  static PersonalityProfile from_index(int index);

  std::vector<std::string> adjectives() const;
  /// Adjectives joined with "、".
  std::string describe() const;

  friend bool operator==(const PersonalityProfile&, const PersonalityProfile&) = default;
};

struct GoalProfile {
  Polarity achievement = Polarity::low;
  Polarity affiliation = Polarity::low;

  int index() const;
  static GoalProfile from_index(int index);
  std::string describe() const;

  friend bool operator==(const GoalProfile&, const GoalProfile&) = default;
};

/// All 32 profiles, binary counting from all-low.
std::vector<PersonalityProfile> enumerate_personalities();
std::vector<GoalProfile> enumerate_goals();

struct BeliefSet {
  std::vector<std::string> empirical;
  std::vector<std::string> relational;
  std::vector<std::string> conceptual;
  std::vector<std::string> knowledge;

  bool empty() const;
  /// Every category has at least one nonempty statement.
  bool complete() const;

  friend bool operator==(const BeliefSet&, const BeliefSet&) = default;
};

enum class SpeakerId : std::uint8_t { AA, BB };
std::string_view to_string(SpeakerId id);
SpeakerId parse_speaker(std::string_view s);
constexpr SpeakerId other(SpeakerId id) {
  return id == SpeakerId::AA ? SpeakerId::BB : SpeakerId::AA;
}

struct SpeakerProfile {
  SpeakerId id = SpeakerId::AA;
  PersonalityProfile personality;
  GoalProfile goals;
  BeliefSet beliefs;
  std::string construal_view;

  friend bool operator==(const SpeakerProfile&, const SpeakerProfile&) = default;
};

/// Deterministic speaker pairing for dialogue `batch_position` of a
/// construal's batch. Within any 32 consecutive positions starting at a
/// multiple of 32, AA takes every personality exactly once (and so does BB).
/// Goals are independent seeded draws. Throws an input error when
/// construal_id is outside 1..89 or batch_position is negative.
std::pair<SpeakerProfile, SpeakerProfile> sample_pairing(std::uint64_t seed, int construal_id,
                                                         int batch_position = 0);

}  // namespace catbear
