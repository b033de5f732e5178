#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "catbear/dataset.hpp"
#include "catbear/llm_gateway.hpp"
#include "catbear/metrics.hpp"

namespace catbear {

enum class EvalTask { emotion, utterance, joint };
std::string_view to_string(EvalTask t);
EvalTask parse_eval_task(std::string_view s);

inline constexpr std::string_view kEmotionTaskTag = "【任务：情绪预测】";
inline constexpr std::string_view kUtteranceTaskTag = "【任务：下一句预测】";
inline constexpr std::string_view kJointTaskTag = "【任务：情绪与下一句联合预测】";
/// Precedes the block the model must answer; exemplar blocks use kExampleMarker.
inline constexpr std::string_view kQueryMarker = "【待预测】\n";
inline constexpr std::string_view kExampleMarker = "【示例】\n";

struct EvalInstance {
  std::string dialogue_id;
  int cut = 1;  // predict turn `cut` from turns [0, cut)
  Split split = Split::none;
  SpeakerId speaker = SpeakerId::AA;
  std::string context;  // render_context(dialogue, cut)
  Emotion gold_emotion = Emotion::happiness;
  std::string gold_utterance;

  std::string id() const { return dialogue_id + "#" + std::to_string(cut); }
};

struct InstanceOptions {
  Split split = Split::test;
  /// When set, a seeded sample of this many cuts per dialogue.
  std::optional<int> sample_per_dialogue;
  std::uint64_t seed = 0;
  /// Restrict to these dialogues; each must carry `split`.
  std::vector<std::string> dialogue_ids;
};

/// One instance per non-opening turn of each dialogue in the split. Throws an
/// input error when the split is empty or a requested dialogue is missing or
/// belongs to another split.
std::vector<EvalInstance> build_instances(const Corpus& corpus, const InstanceOptions& options = {});

/// Seeded uniform draw of k instances from the train split.
std::vector<EvalInstance> select_exemplars(const Corpus& corpus, int k, std::uint64_t seed);

/// The answer an exemplar shows for `task`.
std::string reference_answer(EvalTask task, const EvalInstance& instance);

/// System instruction plus one user message holding k exemplar blocks and the
/// query block. Throws an input error when an exemplar is not from train or
/// the query is from train.
std::vector<ChatMessage> build_kshot_prompt(EvalTask task, const EvalInstance& instance,
                                            const std::vector<EvalInstance>& exemplars);

/// Exact match on a normalized surface form, then a scan in canonical emotion
/// order over names and aliases (English on word boundaries, Chinese as
/// substrings). nullopt when nothing matches.
Prediction parse_emotion_prediction(std::string_view text);

/// Strips whitespace, a leading "AA：" style speaker tag and wrapping quotes.
std::string clean_utterance(std::string_view text);

/// Label on the first line, utterance after the separator.
std::pair<Prediction, std::string> parse_joint_prediction(std::string_view text);

struct InstanceResult {
  std::string instance_id;
  std::string dialogue_id;
  int cut = 0;
  Emotion gold_emotion = Emotion::happiness;
  std::string gold_utterance;
  std::string prompt_hash;
  std::string raw;  // model output, verbatim
  std::optional<std::string> failure;  // set when no output was obtained
  Prediction predicted_emotion;
  std::string predicted_utterance;
};

struct EvalRun {
  EvalTask task = EvalTask::emotion;
  std::string model;
  int k = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::vector<std::string> exemplar_ids;
  std::vector<InstanceResult> results;
  std::size_t n_failed = 0;
  bool aborted = false;
  std::optional<ClassificationReport> classification;  // emotion, joint
  std::optional<OverlapReport> overlap;                // utterance, joint

  nlohmann::ordered_json to_json() const;
  static EvalRun from_json(const nlohmann::json& j);
};

struct EvalOptions {
  EvalTask task = EvalTask::emotion;
  int k = 0;
  std::uint64_t seed = 0;
  InstanceOptions instances;
  std::string config_digest;
  int workers = 4;
  EmbeddingBackend* embedding = nullptr;
  /// Fraction of instances allowed to fail in transport before the run stops.
  double max_failure_rate = 0.10;
  /// Written on completion, and on abort with the partial results.
  std::string artifact_path;
};

/// Builds instances and prompts, queries the model, parses and scores.
/// Failed instances are kept in the artifact and left out of the report.
/// Throws a transport error (detail = artifact path) when more than
/// max_failure_rate of the instances fail.
EvalRun run_task(Gateway& gateway, const Corpus& corpus, const AppraisalSpace& space, const EvalOptions& options);

/// Re-parses every raw output and recomputes the report(s).
void rescore(EvalRun& run, const AppraisalSpace& space, EmbeddingBackend* embedding = nullptr);

void save_run(const EvalRun& run, const std::string& path);
EvalRun load_run(const std::string& path);

}  // namespace catbear
