#include "catbear/persona.hpp"

#include <map>

#include <nlohmann/json.hpp>

#include "catbear/error.hpp"
#include "catbear/util.hpp"
#include "embedded_assets.hpp"

namespace catbear {
namespace {

constexpr std::array<std::string_view, kTraitCount> kTraitNames{
    "openness", "conscientiousness", "extraversion", "agreeableness", "neuroticism"};

using Lexicon = std::array<std::array<std::string, 2>, kTraitCount>;

Lexicon load_lexicon() {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(assets::adjectives_json());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, std::string("adjective lexicon is not valid JSON: ") + e.what());
  }
  Lexicon lex;
  for (std::size_t t = 0; t < kTraitCount; ++t) {
    for (Polarity p : {Polarity::low, Polarity::high}) {
      std::string key = std::string(kTraitNames[t]) + "+" + std::string(to_string(p));
      auto it = doc.find(key);
      if (it == doc.end() || !it->is_string() || it->get<std::string>().empty()) {
        fail(ErrorKind::data, "adjective lexicon lacks '" + key + "'", key);
      }
      lex[t][static_cast<std::size_t>(p)] = it->get<std::string>();
    }
  }
  return lex;
}

const Lexicon& lexicon() {
  static const Lexicon kLexicon = load_lexicon();
  return kLexicon;
}

}  // namespace

std::string_view english_name(Trait t) { return kTraitNames[static_cast<std::size_t>(t)]; }

std::string_view to_string(Polarity p) { return p == Polarity::high ? "high" : "low"; }

Polarity parse_polarity(std::string_view s) {
  if (s == "high") return Polarity::high;
  if (s == "low") return Polarity::low;
  fail(ErrorKind::input, "polarity must be 'high' or 'low', got '" + std::string(s) + "'");
}

std::string_view adjective(Trait t, Polarity p) {
  return lexicon()[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
}

int PersonalityProfile::index() const {
  int v = 0;
  for (Polarity p : poles) v = (v << 1) | (p == Polarity::high ? 1 : 0);
  return v;
}

PersonalityProfile PersonalityProfile::from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kPersonalityCount)) {
    fail(ErrorKind::input, "personality index out of range: " + std::to_string(index));
  }
  PersonalityProfile p;
  for (std::size_t t = 0; t < kTraitCount; ++t) {
    int bit = (index >> (kTraitCount - 1 - t)) & 1;
    p.poles[t] = bit ? Polarity::high : Polarity::low;
  }
  return p;
}

std::vector<std::string> PersonalityProfile::adjectives() const {
  std::vector<std::string> out;
  out.reserve(kTraitCount);
  for (std::size_t t = 0; t < kTraitCount; ++t) {
    out.emplace_back(adjective(static_cast<Trait>(t), poles[t]));
  }
  return out;
}

std::string PersonalityProfile::describe() const {
  std::string out;
  for (const auto& a : adjectives()) {
    if (!out.empty()) out += "、";
    out += a;
  }
  return out;
}

int GoalProfile::index() const {
  return (achievement == Polarity::high ? 2 : 0) | (affiliation == Polarity::high ? 1 : 0);
}

GoalProfile GoalProfile::from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kGoalProfileCount)) {
    fail(ErrorKind::input, "goal index out of range: " + std::to_string(index));
  }
  return {index & 2 ? Polarity::high : Polarity::low, index & 1 ? Polarity::high : Polarity::low};
}

std::string GoalProfile::describe() const {
  std::string out = achievement == Polarity::high ? "成就目标高" : "成就目标低";
  out += "，";
  out += affiliation == Polarity::high ? "亲和目标高" : "亲和目标低";
  return out;
}

std::vector<PersonalityProfile> enumerate_personalities() {
  std::vector<PersonalityProfile> out;
  out.reserve(kPersonalityCount);
  for (int i = 0; i < static_cast<int>(kPersonalityCount); ++i) {
    out.push_back(PersonalityProfile::from_index(i));
  }
  return out;
}

std::vector<GoalProfile> enumerate_goals() {
  std::vector<GoalProfile> out;
  for (int i = 0; i < static_cast<int>(kGoalProfileCount); ++i) out.push_back(GoalProfile::from_index(i));
  return out;
}

bool BeliefSet::empty() const {
  return empirical.empty() && relational.empty() && conceptual.empty() && knowledge.empty();
}

bool BeliefSet::complete() const {
  auto ok = [](const std::vector<std::string>& v) {
    if (v.empty()) return false;
    for (const auto& s : v) {
      if (trim(s).empty()) return false;
    }
    return true;
  };
  return ok(empirical) && ok(relational) && ok(conceptual) && ok(knowledge);
}

std::string_view to_string(SpeakerId id) { return id == SpeakerId::AA ? "AA" : "BB"; }

SpeakerId parse_speaker(std::string_view s) {
  if (s == "AA") return SpeakerId::AA;
  if (s == "BB") return SpeakerId::BB;
  fail(ErrorKind::input, "speaker id must be AA or BB, got '" + std::string(s) + "'");
}

std::pair<SpeakerProfile, SpeakerProfile> sample_pairing(std::uint64_t seed, int construal_id,
                                                         int batch_position) {
  if (construal_id < 1 || construal_id > kConstrualCount) {
    fail(ErrorKind::input,
         "construal id must be in [1, 89], got " + std::to_string(construal_id),
         "construal_id");
  }
  if (batch_position < 0) fail(ErrorKind::input, "batch position must be non-negative");

  const auto round = static_cast<std::uint64_t>(batch_position) / kPersonalityCount;
  const auto slot = static_cast<std::size_t>(batch_position) % kPersonalityCount;

  auto permutation = [&](std::uint64_t stream) {
    std::vector<int> order(kPersonalityCount);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng rng(derive_seed(seed, construal_id, round, stream));
    shuffle(order, rng);
    return order;
  };
  const auto perm_a = permutation(0xA);
  const auto perm_b = permutation(0xB);

  Rng goal_rng(derive_seed(seed, construal_id, batch_position, 0x60A1));

  SpeakerProfile a;
  a.id = SpeakerId::AA;
  a.personality = PersonalityProfile::from_index(perm_a[slot]);
  a.goals = GoalProfile::from_index(static_cast<int>(uniform_below(goal_rng, kGoalProfileCount)));

  SpeakerProfile b;
  b.id = SpeakerId::BB;
  b.personality = PersonalityProfile::from_index(perm_b[slot]);
  b.goals = GoalProfile::from_index(static_cast<int>(uniform_below(goal_rng, kGoalProfileCount)));

  return {std::move(a), std::move(b)};
}

}  // namespace catbear
