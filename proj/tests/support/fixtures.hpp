#pragma once

// Shared builders for tests.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "catbear/dataset.hpp"
#include "catbear/dialogue.hpp"
#include "catbear/eval_harness.hpp"
#include "catbear/llm_gateway.hpp"

namespace catbear::testing {

inline BeliefSet sample_beliefs(const std::string& who) {
  return {{who + "认为努力会有回报"}, {who + "信任对方"}, {who + "相信真诚最重要"}, {who + "知道这件事很重要"}};
}

inline SpeakerProfile sample_speaker(SpeakerId id, int personality, int goals, bool beliefs = true) {
  SpeakerProfile s;
  s.id = id;
  s.personality = PersonalityProfile::from_index(personality);
  s.goals = GoalProfile::from_index(goals);
  if (beliefs) s.beliefs = sample_beliefs(std::string(to_string(id)));
  s.construal_view = "两人在食堂吃午饭";
  return s;
}

/// Dialogue with `emotions.size()` turns; utterance i is "第<i>句：<id>".
inline Dialogue make_dialogue(const std::string& id, int construal_id, const std::vector<Emotion>& emotions,
                              Split split = Split::none) {
  Dialogue d;
  d.dialogue_id = id;
  d.construal_id = construal_id;
  d.scene = {construal_id, "AA和BB在食堂一起吃午饭，聊到了周末的安排。", "hash-" + id};
  d.speakers = {sample_speaker(SpeakerId::AA, 5, 1), sample_speaker(SpeakerId::BB, 26, 2)};
  d.split = split;
  d.generation.turns_target = static_cast<int>(emotions.size());
  d.generation.model = "fixture";
  for (std::size_t i = 0; i < emotions.size(); ++i) {
    Turn t;
    t.index = static_cast<int>(i);
    t.speaker = i % 2 == 0 ? SpeakerId::AA : SpeakerId::BB;
    t.emotion = emotions[i];
    t.utterance = "第" + std::to_string(i) + "句：" + id;
    t.provenance = {"p-" + id + "-" + std::to_string(i), "fixture"};
    d.turns.push_back(std::move(t));
  }
  return d;
}

/// `n` dialogues of `turns` turns, emotions cycling through the 15 labels.
inline Corpus make_corpus_of(std::size_t n, int turns = 10) {
  std::vector<Dialogue> ds;
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Emotion> es;
    for (int t = 0; t < turns; ++t) es.push_back(all_emotions()[k++ % kEmotionCount]);
    char id[32];
    std::snprintf(id, sizeof id, "c%02zu-d%03zu", i % 89 + 1, i);
    ds.push_back(make_dialogue(id, static_cast<int>(i % 89) + 1, es));
  }
  return make_corpus(std::move(ds), "fixture-digest");
}

/// Query block of an evaluation prompt (text after the last query marker).
inline std::string query_of(const GenerationRequest& req) {
  const auto& user = req.messages.back().content;
  auto p = user.rfind(kQueryMarker);
  return p == std::string::npos ? user : user.substr(p + kQueryMarker.size());
}

/// Mock that answers each evaluation instance with a fixed function of the
/// instance (e.g. its gold answer).
template <class Answer>
MockBackend::Responder echo_responder(const std::vector<EvalInstance>& instances, Answer answer) {
  std::map<std::string, std::string> by_query;
  for (const auto& in : instances) by_query[in.context] = answer(in);
  return [by_query](const GenerationRequest& req, std::size_t) {
    auto it = by_query.find(query_of(req));
    return it == by_query.end() ? MockBackend::Step::ok("???") : MockBackend::Step::ok(it->second);
  };
}

/// Fresh path under the system temp directory; any existing file is removed.
inline std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "catbear-tests";
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::filesystem::remove(p);
  return p.string();
}

inline GatewayConfig fast_config(int parallelism = 4) {
  GatewayConfig c;
  c.model = "mock-model";
  c.parallelism = parallelism;
  c.backoff_ms = 1;
  c.backoff_max_ms = 4;
  return c;
}

}  // namespace catbear::testing
