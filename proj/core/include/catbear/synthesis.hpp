#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "catbear/dialogue.hpp"
#include "catbear/emotion_space.hpp"
#include "catbear/llm_gateway.hpp"
#include "catbear/situation.hpp"

namespace catbear {

struct SynthesisOptions {
  int turns_target = 10;
  Ablation ablation = Ablation::full;
  /// Extra attempts after a malformed answer.
  int reprompt_cap = 2;
  std::string config_digest;
};

/// Stage 1. Reprompts on malformed output up to `reprompt_cap` times, then
/// throws a generation error whose detail is the last raw answer.
BeliefSet generate_beliefs(Gateway& gateway, const SpeakerProfile& speaker, const SpeakerProfile& partner,
                           const ExpandedScene& scene, int reprompt_cap = 2);

/// Stage 2, one turn. `so_far` supplies scene, speakers and history; `next`
/// must be the speaker whose turn it is. Out-of-vocabulary emotions end in a
/// label error, empty utterances or missing fields in a generation error.
/// Under Ablation::no_appraisal the dimension walk is skipped and the turn
/// carries no levels.
Turn appraise_turn(Gateway& gateway, const AppraisalSpace& space, const Dialogue& so_far, SpeakerId next,
                   Ablation mode = Ablation::full, int reprompt_cap = 2);

/// Full pipeline for one dialogue: pairing, scene, stage 1 (unless
/// no_belief), then `turns_target` alternating turns starting with AA.
/// turns_target must be even and >= 2. Errors are re-thrown with the turn
/// index prefixed.
Dialogue generate_dialogue(Gateway& gateway, const AppraisalSpace& space, const SituationalConstrual& c,
                           std::uint64_t seed, int batch_position, const SynthesisOptions& options);

std::string dialogue_id_for(int construal_id, int batch_position);

struct CorpusPlan {
  std::vector<int> construal_ids;
  int per_construal = 32;
  std::uint64_t seed = 0;
  SynthesisOptions options;
  int workers = 1;
};

/// Generates construal_ids x per_construal dialogues on a worker pool. Output
/// order is (construal, position) regardless of scheduling. If any dialogue
/// fails, the first failure is re-thrown after all workers stop.
std::vector<Dialogue> generate_dialogues(Gateway& gateway, const AppraisalSpace& space, const CorpusPlan& plan,
                                         const std::function<void(std::size_t done, std::size_t total)>& progress = {});

}  // namespace catbear
