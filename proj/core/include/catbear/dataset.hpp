#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "catbear/dialogue.hpp"

namespace catbear {

inline constexpr int kCorpusSchemaVersion = 1;

struct CorpusManifest {
  int schema_version = kCorpusSchemaVersion;
  std::string config_digest;
  std::size_t n_dialogues = 0;
  std::size_t n_turns = 0;

  friend bool operator==(const CorpusManifest&, const CorpusManifest&) = default;
};

struct Corpus {
  CorpusManifest manifest;
  std::vector<Dialogue> dialogues;

  /// Recomputes the manifest counts from the body.
  void refresh_manifest();
  const Dialogue* find(std::string_view dialogue_id) const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

Corpus make_corpus(std::vector<Dialogue> dialogues, std::string config_digest = {});

/// Unique ids, every dialogue valid, manifest counts match the body.
/// Throws a validation error.
void validate_corpus(const Corpus& corpus);

/// JSONL: line 1 is {"manifest": {...}}, then one dialogue per line.
std::string serialize_corpus(const Corpus& corpus);
/// Throws format (schema version), parse (with line number as detail),
/// schema, or validation errors.
Corpus parse_corpus(std::string_view text);
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

// --- splits -----------------------------------------------------------------

struct SplitFractions {
  double train = 0.90;
  double validation = 0.05;
  double test = 0.05;
};

/// Largest-remainder apportionment of n dialogues; ties in the fractional
/// part go to train, then validation, then test. Throws an input error when
/// the fractions do not sum to 1 (within 1e-9) or any split would be empty.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitFractions& fractions = {});

/// Tags every dialogue with a split. Dialogues are ordered by id, shuffled
/// with `seed`, then assigned contiguously train | validation | test. The
/// corpus order is preserved.
Corpus split_corpus(Corpus corpus, std::uint64_t seed, const SplitFractions& fractions = {});

// --- statistics -------------------------------------------------------------

struct CorpusStats {
  std::size_t n_dialogs = 0;
  std::size_t n_utterances = 0;
  std::size_t n_situations = 0;
  std::size_t n_tokens = 0;
  double avg_utterances_per_dialog = 0.0;
  double avg_tokens_per_dialog = 0.0;
  double avg_tokens_per_utterance = 0.0;
  std::array<std::size_t, kEmotionCount> emotion_histogram{};
  std::map<Split, std::size_t> split_sizes;

  nlohmann::ordered_json to_json() const;
  std::string render_table() const;
  /// emotion,emotion_zh,count,share
  std::string histogram_csv() const;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

/// Throws an input error on an empty corpus.
CorpusStats compute_stats(const Corpus& corpus);

/// Regex pass for phone numbers, e-mail addresses, ID-card numbers and a
/// short profanity list. Returns human-readable warnings; never throws.
std::vector<std::string> scan_sensitive(const Corpus& corpus);

// --- instruction-tuning export ------------------------------------------------

enum class SftFormat { plain, conditional, joint };
std::string_view to_string(SftFormat f);
SftFormat parse_sft_format(std::string_view s);

/// Separates the emotion label from the utterance in joint targets.
inline constexpr std::string_view kJointSeparator = "\n";

/// Scene, both speakers' factors (the next speaker with beliefs) and the
/// history before turn `cut`, without emotion labels.
std::string render_context(const Dialogue& d, int cut);

struct SftRecord {
  std::string id;  // "<dialogue_id>#<turn>"
  SftFormat format = SftFormat::plain;
  std::string instruction;
  std::string input;
  std::string output;
  std::string config_digest;

  nlohmann::ordered_json to_json() const;
};

/// One record per non-opening turn of every train dialogue:
///   plain        context -> utterance
///   conditional  context + gold emotion -> utterance
///   joint        context -> emotion, separator, utterance
/// Throws an input error when no dialogue is tagged train.
std::vector<SftRecord> build_sft_records(const Corpus& corpus, SftFormat format);
/// Writes the records as JSONL; returns the record count.
std::size_t export_sft(const Corpus& corpus, SftFormat format, const std::string& path);

}  // namespace catbear
