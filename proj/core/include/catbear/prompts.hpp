#pragma once

// Prompt templates for scene expansion, belief/knowledge generation and the
// appraisal-guided turn loop.
//
// NOTE: the belief/knowledge guideline and the appraisal guideline are
// reconstructions from the published description of the two stages, not
// verbatim transcriptions of the original guideline figures (which are only
// available as images). The dimension order of the appraisal walk is fixed:
// unpleasantness, effort, attention, certainty, control, responsibility.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catbear/dialogue.hpp"
#include "catbear/llm_gateway.hpp"

namespace catbear::prompts {

// First line of each template; also lets offline responders route requests.
inline constexpr std::string_view kSceneTag = "【任务：情境扩展】";
inline constexpr std::string_view kBeliefTag = "【任务：信念与知识生成】";
inline constexpr std::string_view kAppraisalTag = "【任务：评价过程与情绪生成】";
inline constexpr std::string_view kDirectTag = "【任务：情绪与回复生成】";

/// "快乐、悲伤、…" in canonical order.
std::string emotion_menu();

std::string render_factors(const SpeakerProfile& s, bool with_beliefs);
/// One line per turn: "AA：…" or, with emotions, "AA（悲伤）：…".
std::string render_history(std::span<const Turn> turns, bool with_emotions);

std::vector<ChatMessage> scene_expansion(const SituationalConstrual& c, const SpeakerProfile& a,
                                         const SpeakerProfile& b);

std::vector<ChatMessage> belief_generation(const SpeakerProfile& speaker, const SpeakerProfile& partner,
                                           const ExpandedScene& scene);

/// System guideline for stage 2 with the six-dimension walk.
std::string appraisal_guideline();
/// System guideline without the walk (no_appraisal ablation).
std::string direct_guideline();

/// Full stage-2 request for the next turn of `so_far`.
std::vector<ChatMessage> turn_generation(Ablation mode, const Dialogue& so_far, SpeakerId next);

/// User follow-up asking the model to fix a malformed answer.
std::string correction(std::string_view problem);

}  // namespace catbear::prompts
