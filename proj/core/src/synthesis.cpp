#include "catbear/synthesis.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>
#include <optional>
#include <thread>

#include "catbear/error.hpp"
#include "catbear/persona.hpp"
#include "catbear/prompts.hpp"
#include "catbear/structured_output.hpp"
#include "catbear/util.hpp"

namespace catbear {
namespace {

bool recoverable(ErrorKind k) {
  return k == ErrorKind::parse || k == ErrorKind::schema || k == ErrorKind::label || k == ErrorKind::generation;
}

// Sends `messages`, parsing the answer with `parse`. Malformed answers are fed
// back with a correction request, at most `reprompt_cap` times.
template <class Parse>
auto ask(Gateway& gateway, std::vector<ChatMessage> messages, int reprompt_cap, Parse&& parse)
    -> std::pair<decltype(parse(std::string{})), GenerationResult> {
  std::optional<Error> last;
  std::string last_text;
  for (int attempt = 0; attempt <= reprompt_cap; ++attempt) {
    auto result = gateway.complete(gateway.make_request(messages));
    try {
      return {parse(result.text), std::move(result)};
    } catch (const Error& e) {
      if (!recoverable(e.kind())) throw;
      last = e;
      last_text = result.text;
      messages.push_back({Role::assistant, result.text});
      messages.push_back({Role::user, prompts::correction(e.message())});
    }
  }
  const auto kind = last->kind() == ErrorKind::label ? ErrorKind::label : ErrorKind::generation;
  fail(kind, std::string("unusable model output after ") + std::to_string(reprompt_cap + 1) +
                 " attempts: " + last->what(),
       last_text);
}

std::vector<std::string> statements(const nlohmann::json& v, const std::string& field) {
  std::vector<std::string> out;
  auto take = [&](const nlohmann::json& s) {
    if (!s.is_string()) fail(ErrorKind::schema, "'" + field + "' must hold strings", field);
    auto t = std::string(trim(s.get<std::string>()));
    if (!t.empty()) out.push_back(std::move(t));
  };
  if (v.is_array()) {
    for (const auto& s : v) take(s);
  } else {
    take(v);
  }
  if (out.empty()) fail(ErrorKind::schema, "'" + field + "' is empty", field);
  return out;
}

struct TurnAnswer {
  std::optional<AppraisalLevels> levels;
  Emotion emotion;
  std::string utterance;
};

TurnAnswer parse_turn_answer(const std::string& text, bool with_appraisal) {
  std::vector<std::string> fields{"emotion", "utterance"};
  if (with_appraisal) fields.insert(fields.begin(), "appraisal");
  auto f = parse_structured(text, fields);

  TurnAnswer a{};
  if (with_appraisal) {
    const auto& obj = f["appraisal"];
    if (!obj.is_object()) fail(ErrorKind::schema, "'appraisal' must be an object", "appraisal");
    AppraisalLevels levels{};
    for (Dimension d : all_dimensions()) {
      auto name = std::string(english_name(d));
      auto it = obj.find(name);
      if (it == obj.end()) it = obj.find(std::string(chinese_name(d)));
      if (it == obj.end() || !it->is_string()) fail(ErrorKind::schema, "missing appraisal level '" + name + "'", name);
      auto lv = try_parse_level(it->get<std::string>());
      if (!lv) fail(ErrorKind::schema, "appraisal level for '" + name + "' must be low/medium/high", name);
      levels[index_of(d)] = *lv;
    }
    a.levels = levels;
  }

  if (!f["emotion"].is_string()) fail(ErrorKind::label, "emotion must be a string", "emotion");
  auto label = f["emotion"].get<std::string>();
  auto emo = try_parse_emotion(label);
  if (!emo) fail(ErrorKind::label, "emotion '" + label + "' is not one of the 15 labels", label);
  a.emotion = *emo;

  if (!f["utterance"].is_string()) fail(ErrorKind::generation, "utterance must be a string", "utterance");
  a.utterance = std::string(trim(f["utterance"].get<std::string>()));
  if (a.utterance.empty()) fail(ErrorKind::generation, "utterance is empty", "utterance");
  return a;
}

}  // namespace

BeliefSet generate_beliefs(Gateway& gateway, const SpeakerProfile& speaker, const SpeakerProfile& partner,
                           const ExpandedScene& scene, int reprompt_cap) {
  static const std::vector<std::string> kFields{"empirical", "relational", "conceptual", "knowledge"};
  auto [beliefs, _] = ask(gateway, prompts::belief_generation(speaker, partner, scene), reprompt_cap,
                          [](const std::string& text) {
                            auto f = parse_structured(text, kFields);
                            BeliefSet b;
                            b.empirical = statements(f["empirical"], "empirical");
                            b.relational = statements(f["relational"], "relational");
                            b.conceptual = statements(f["conceptual"], "conceptual");
                            b.knowledge = statements(f["knowledge"], "knowledge");
                            return b;
                          });
  return beliefs;
}

Turn appraise_turn(Gateway& gateway, const AppraisalSpace& space, const Dialogue& so_far, SpeakerId next,
                   Ablation mode, int reprompt_cap) {
  const SpeakerId expected = so_far.turns.empty() ? SpeakerId::AA : other(so_far.turns.back().speaker);
  if (next != expected) {
    fail(ErrorKind::input, std::string("it is ") + std::string(to_string(expected)) + "'s turn, not " +
                               std::string(to_string(next)));
  }
  const bool walk = mode != Ablation::no_appraisal;
  auto [answer, result] = ask(gateway, prompts::turn_generation(mode, so_far, next), reprompt_cap,
                              [walk](const std::string& text) { return parse_turn_answer(text, walk); });

  Turn t;
  t.index = static_cast<int>(so_far.turns.size());
  t.speaker = next;
  t.appraisal = answer.levels;
  t.emotion = answer.emotion;
  t.utterance = std::move(answer.utterance);
  t.provenance = {result.prompt_hash, result.backend_id};
  if (t.appraisal) t.consistency = mean_abs_difference(level_vector(*t.appraisal), space.normalized(t.emotion));
  return t;
}

std::string dialogue_id_for(int construal_id, int batch_position) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%02d-d%03d", construal_id, batch_position);
  return buf;
}

Dialogue generate_dialogue(Gateway& gateway, const AppraisalSpace& space, const SituationalConstrual& c,
                           std::uint64_t seed, int batch_position, const SynthesisOptions& options) {
  if (options.turns_target < 2 || options.turns_target % 2 != 0) {
    fail(ErrorKind::input, "turns must be even and >= 2, got " + std::to_string(options.turns_target), "turns");
  }
  if (options.reprompt_cap < 0) fail(ErrorKind::input, "reprompt_cap must be >= 0", "reprompt_cap");

  Dialogue d;
  d.dialogue_id = dialogue_id_for(c.id, batch_position);
  d.construal_id = c.id;
  d.generation = {options.ablation,         options.turns_target,        seed,
                  batch_position,           gateway.config().model,      gateway.config().temperature,
                  options.reprompt_cap,     options.config_digest};

  auto [a, b] = sample_pairing(seed, c.id, batch_position);
  d.scene = expand_scene(gateway, c, a, b);
  a.construal_view = d.scene.narrative;
  b.construal_view = d.scene.narrative;
  d.speakers = {std::move(a), std::move(b)};

  if (options.ablation != Ablation::no_belief) {
    for (std::size_t i = 0; i < 2; ++i) {
      d.speakers[i].beliefs =
          generate_beliefs(gateway, d.speakers[i], d.speakers[1 - i], d.scene, options.reprompt_cap);
    }
  }

  for (int i = 0; i < options.turns_target; ++i) {
    const SpeakerId next = i % 2 == 0 ? SpeakerId::AA : SpeakerId::BB;
    try {
      d.turns.push_back(appraise_turn(gateway, space, d, next, options.ablation, options.reprompt_cap));
    } catch (const Error& e) {
      throw Error(e.kind(), d.dialogue_id + " turn " + std::to_string(i) + ": " + e.message(), e.detail());
    }
  }
  return d;
}

std::vector<Dialogue> generate_dialogues(Gateway& gateway, const AppraisalSpace& space, const CorpusPlan& plan,
                                         const std::function<void(std::size_t, std::size_t)>& progress) {
  if (plan.per_construal < 1) fail(ErrorKind::input, "per-construal must be >= 1", "per_construal");
  if (plan.construal_ids.empty()) fail(ErrorKind::input, "no construals selected", "construals");
  for (int id : plan.construal_ids) construal(id);  // range check up front

  const std::size_t total = plan.construal_ids.size() * static_cast<std::size_t>(plan.per_construal);
  std::vector<std::optional<Dialogue>> slots(total);
  std::atomic<std::size_t> next{0}, done{0};
  std::atomic<bool> stop{false};
  std::mutex err_mu;
  std::optional<Error> first_error;
  std::size_t first_error_index = total;

  auto work = [&] {
    for (std::size_t i; !stop && (i = next.fetch_add(1)) < total;) {
      const int cid = plan.construal_ids[i / plan.per_construal];
      const int pos = static_cast<int>(i % plan.per_construal);
      try {
        slots[i] = generate_dialogue(gateway, space, construal(cid), plan.seed, pos, plan.options);
      } catch (const Error& e) {
        std::lock_guard lock(err_mu);
        if (i < first_error_index) {
          first_error = e;
          first_error_index = i;
        }
        stop = true;
        continue;
      }
      auto n = ++done;
      if (progress) {
        std::lock_guard lock(err_mu);
        progress(n, total);
      }
    }
  };

  const int workers = std::max(1, plan.workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (first_error) throw *first_error;

  std::vector<Dialogue> out;
  out.reserve(total);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace catbear
