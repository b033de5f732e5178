#include <set>

#include "catbear/dialogue.hpp"
#include "catbear/error.hpp"
#include "catbear/util.hpp"

namespace catbear {

std::string_view to_string(AppraisalLevel l) {
  switch (l) {
    case AppraisalLevel::low: return "low";
    case AppraisalLevel::medium: return "medium";
    case AppraisalLevel::high: return "high";
  }
  return "low";
}

std::optional<AppraisalLevel> try_parse_level(std::string_view s) {
  auto t = to_lower_ascii(trim(s));
  if (t == "low" || t == "低") return AppraisalLevel::low;
  if (t == "medium" || t == "mid" || t == "中") return AppraisalLevel::medium;
  if (t == "high" || t == "高") return AppraisalLevel::high;
  return std::nullopt;
}

NormalizedVector level_vector(const AppraisalLevels& levels) {
  NormalizedVector::Values v{};
  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    v[d] = levels[d] == AppraisalLevel::low ? 0.0 : levels[d] == AppraisalLevel::medium ? 0.5 : 1.0;
  }
  return NormalizedVector(v);
}

AppraisalLevels quantize(const NormalizedVector& v) {
  AppraisalLevels out{};
  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    double x = v.values()[d];
    out[d] = x < 0.25 ? AppraisalLevel::low : x < 0.75 ? AppraisalLevel::medium : AppraisalLevel::high;
  }
  return out;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::none: return "none";
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "none";
}

Split parse_split(std::string_view s) {
  if (s == "none") return Split::none;
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  fail(ErrorKind::input, "unknown split '" + std::string(s) + "'", "split");
}

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_belief: return "no_belief";
    case Ablation::no_appraisal: return "no_appraisal";
  }
  return "full";
}

Ablation parse_ablation(std::string_view s) {
  if (s == "full") return Ablation::full;
  if (s == "no_belief") return Ablation::no_belief;
  if (s == "no_appraisal") return Ablation::no_appraisal;
  fail(ErrorKind::input, "unknown ablation '" + std::string(s) + "' (full|no_belief|no_appraisal)",
       "ablation");
}

void validate_dialogue(const Dialogue& d) {
  auto bad = [&](const std::string& why) {
    fail(ErrorKind::validation, "dialogue '" + d.dialogue_id + "': " + why, d.dialogue_id);
  };
  if (d.dialogue_id.empty()) bad("empty dialogue_id");
  if (d.construal_id < 1 || d.construal_id > kConstrualCount) bad("construal_id out of range");
  if (d.speakers[0].id != SpeakerId::AA || d.speakers[1].id != SpeakerId::BB) bad("speakers must be AA then BB");
  if (d.turns.size() < 2) bad("fewer than 2 turns");
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    const auto& t = d.turns[i];
    if (t.index != static_cast<int>(i)) bad("turn " + std::to_string(i) + " has index " + std::to_string(t.index));
    SpeakerId expected = i % 2 == 0 ? SpeakerId::AA : SpeakerId::BB;
    if (t.speaker != expected) bad("speakers do not alternate at turn " + std::to_string(i));
    if (trim(t.utterance).empty()) bad("empty utterance at turn " + std::to_string(i));
  }
  for (const auto& s : d.speakers) {
    if (d.generation.ablation == Ablation::no_belief) {
      if (!s.beliefs.empty()) bad("beliefs present under no_belief ablation");
    } else if (!s.beliefs.complete()) {
      bad(std::string("incomplete beliefs for ") + std::string(to_string(s.id)));
    }
  }
}

// --- JSON -------------------------------------------------------------------

namespace {

nlohmann::ordered_json beliefs_json(const BeliefSet& b) {
  nlohmann::ordered_json j;
  j["empirical"] = b.empirical;
  j["relational"] = b.relational;
  j["conceptual"] = b.conceptual;
  j["knowledge"] = b.knowledge;
  return j;
}

template <class T>
T field(const nlohmann::json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) fail(ErrorKind::schema, std::string("missing field '") + name + "'", name);
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, std::string("field '") + name + "': " + e.what(), name);
  }
}

const nlohmann::json& object_field(const nlohmann::json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) fail(ErrorKind::schema, std::string("missing field '") + name + "'", name);
  return *it;
}

template <class Fn>
auto wrap(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::schema) throw;
    fail(ErrorKind::schema, std::string("field '") + name + "': " + e.what(), name);
  }
}

}  // namespace

nlohmann::ordered_json to_json(const SpeakerProfile& s) {
  nlohmann::ordered_json j;
  j["id"] = to_string(s.id);
  auto& p = j["personality"] = nlohmann::ordered_json::object();
  for (std::size_t t = 0; t < kTraitCount; ++t) {
    p[std::string(english_name(static_cast<Trait>(t)))] = to_string(s.personality.poles[t]);
  }
  j["adjectives"] = s.personality.adjectives();
  j["goals"] = {{"achievement", to_string(s.goals.achievement)},
                {"affiliation", to_string(s.goals.affiliation)}};
  j["construal_view"] = s.construal_view;
  j["beliefs"] = beliefs_json(s.beliefs);
  return j;
}

SpeakerProfile speaker_from_json(const nlohmann::json& j) {
  SpeakerProfile s;
  s.id = wrap("id", [&] { return parse_speaker(field<std::string>(j, "id")); });
  const auto& p = object_field(j, "personality");
  for (std::size_t t = 0; t < kTraitCount; ++t) {
    auto name = std::string(english_name(static_cast<Trait>(t)));
    s.personality.poles[t] = wrap("personality", [&] { return parse_polarity(field<std::string>(p, name.c_str())); });
  }
  const auto& g = object_field(j, "goals");
  s.goals.achievement = wrap("goals", [&] { return parse_polarity(field<std::string>(g, "achievement")); });
  s.goals.affiliation = wrap("goals", [&] { return parse_polarity(field<std::string>(g, "affiliation")); });
  s.construal_view = field<std::string>(j, "construal_view");
  const auto& b = object_field(j, "beliefs");
  s.beliefs.empirical = field<std::vector<std::string>>(b, "empirical");
  s.beliefs.relational = field<std::vector<std::string>>(b, "relational");
  s.beliefs.conceptual = field<std::vector<std::string>>(b, "conceptual");
  s.beliefs.knowledge = field<std::vector<std::string>>(b, "knowledge");
  return s;
}

nlohmann::ordered_json to_json(const Dialogue& d) {
  nlohmann::ordered_json j;
  j["dialogue_id"] = d.dialogue_id;
  j["construal_id"] = d.construal_id;
  j["split"] = to_string(d.split);
  j["scene"] = {{"construal_id", d.scene.construal_id},
                {"narrative", d.scene.narrative},
                {"prompt_hash", d.scene.prompt_hash}};
  j["speakers"] = {to_json(d.speakers[0]), to_json(d.speakers[1])};
  auto& turns = j["turns"] = nlohmann::ordered_json::array();
  for (const auto& t : d.turns) {
    nlohmann::ordered_json tj;
    tj["index"] = t.index;
    tj["speaker"] = to_string(t.speaker);
    if (t.appraisal) {
      nlohmann::ordered_json a;
      for (Dimension dim : all_dimensions()) {
        a[std::string(english_name(dim))] = to_string((*t.appraisal)[index_of(dim)]);
      }
      tj["appraisal"] = std::move(a);
    } else {
      tj["appraisal"] = nullptr;
    }
    tj["emotion"] = english_name(t.emotion);
    tj["utterance"] = t.utterance;
    tj["consistency"] = t.consistency ? nlohmann::ordered_json(*t.consistency) : nlohmann::ordered_json();
    tj["provenance"] = {{"prompt_hash", t.provenance.prompt_hash}, {"backend", t.provenance.backend_id}};
    turns.push_back(std::move(tj));
  }
  const auto& g = d.generation;
  j["generation"] = {{"ablation", to_string(g.ablation)},  {"turns_target", g.turns_target},
                     {"seed", g.seed},                     {"batch_position", g.batch_position},
                     {"model", g.model},                   {"temperature", g.temperature},
                     {"reprompt_cap", g.reprompt_cap},     {"config_digest", g.config_digest}};
  auto& revs = j["revisions"] = nlohmann::ordered_json::array();
  for (const auto& r : d.revisions) {
    revs.push_back({{"turn", r.turn},     {"field", r.field},   {"before", r.before},
                    {"after", r.after},   {"worker", r.worker}, {"event_seq", r.event_seq}});
  }
  return j;
}

Dialogue dialogue_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::schema, "dialogue record is not an object");
  Dialogue d;
  d.dialogue_id = field<std::string>(j, "dialogue_id");
  d.construal_id = field<int>(j, "construal_id");
  d.split = wrap("split", [&] { return parse_split(field<std::string>(j, "split")); });

  const auto& sc = object_field(j, "scene");
  d.scene.construal_id = field<int>(sc, "construal_id");
  d.scene.narrative = field<std::string>(sc, "narrative");
  d.scene.prompt_hash = field<std::string>(sc, "prompt_hash");

  const auto& sp = object_field(j, "speakers");
  if (!sp.is_array() || sp.size() != 2) fail(ErrorKind::schema, "field 'speakers' must hold 2 entries", "speakers");
  d.speakers[0] = speaker_from_json(sp[0]);
  d.speakers[1] = speaker_from_json(sp[1]);

  const auto& turns = object_field(j, "turns");
  if (!turns.is_array()) fail(ErrorKind::schema, "field 'turns' must be an array", "turns");
  for (const auto& tj : turns) {
    Turn t;
    t.index = field<int>(tj, "index");
    t.speaker = wrap("speaker", [&] { return parse_speaker(field<std::string>(tj, "speaker")); });
    const auto& a = object_field(tj, "appraisal");
    if (!a.is_null()) {
      AppraisalLevels levels{};
      for (Dimension dim : all_dimensions()) {
        auto name = std::string(english_name(dim));
        auto lv = try_parse_level(field<std::string>(a, name.c_str()));
        if (!lv) fail(ErrorKind::schema, "field 'appraisal." + name + "' is not a level", "appraisal");
        levels[index_of(dim)] = *lv;
      }
      t.appraisal = levels;
    }
    auto emo = try_parse_emotion(field<std::string>(tj, "emotion"));
    if (!emo) fail(ErrorKind::schema, "field 'emotion' is outside the vocabulary", "emotion");
    t.emotion = *emo;
    t.utterance = field<std::string>(tj, "utterance");
    if (auto c = tj.find("consistency"); c != tj.end() && !c->is_null()) t.consistency = c->get<double>();
    const auto& pv = object_field(tj, "provenance");
    t.provenance.prompt_hash = field<std::string>(pv, "prompt_hash");
    t.provenance.backend_id = field<std::string>(pv, "backend");
    d.turns.push_back(std::move(t));
  }

  const auto& g = object_field(j, "generation");
  d.generation.ablation = wrap("ablation", [&] { return parse_ablation(field<std::string>(g, "ablation")); });
  d.generation.turns_target = field<int>(g, "turns_target");
  d.generation.seed = field<std::uint64_t>(g, "seed");
  d.generation.batch_position = field<int>(g, "batch_position");
  d.generation.model = field<std::string>(g, "model");
  d.generation.temperature = field<double>(g, "temperature");
  d.generation.reprompt_cap = field<int>(g, "reprompt_cap");
  d.generation.config_digest = field<std::string>(g, "config_digest");

  if (auto revs = j.find("revisions"); revs != j.end()) {
    for (const auto& rj : *revs) {
      Revision r;
      r.turn = field<int>(rj, "turn");
      r.field = field<std::string>(rj, "field");
      r.before = field<std::string>(rj, "before");
      r.after = field<std::string>(rj, "after");
      r.worker = field<std::string>(rj, "worker");
      r.event_seq = field<std::uint64_t>(rj, "event_seq");
      d.revisions.push_back(std::move(r));
    }
  }
  return d;
}

}  // namespace catbear
