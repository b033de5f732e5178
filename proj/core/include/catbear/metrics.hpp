#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "catbear/emotion_space.hpp"

namespace catbear {

/// nullopt marks a prediction that could not be mapped to a label.
using Prediction = std::optional<Emotion>;

struct LabelPair {
  Emotion gold;
  Prediction predicted;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int support = 0;  // gold occurrences

  friend bool operator==(const ClassScores&, const ClassScores&) = default;
};

struct ClassificationReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  // Unweighted means over all 15 classes; a class with no gold and no
  // predicted occurrence contributes 0.
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  // Macro F1 restricted to classes that occur in gold or predictions.
  double macro_f1_observed = 0.0;
  double mean_cat_dist = 0.0;
  std::size_t n_unparseable = 0;
  std::array<ClassScores, kEmotionCount> per_class{};

  nlohmann::ordered_json to_json() const;
  static ClassificationReport from_json(const nlohmann::json& j);
  friend bool operator==(const ClassificationReport&, const ClassificationReport&) = default;
};

/// Unparseable predictions are wrong for every classification metric (a
/// false negative for the gold class, no false positive) and contribute the
/// space's maximum pairwise distance to mean CAT-Dist. Throws an input error
/// on empty input.
ClassificationReport classification_report(std::span<const LabelPair> pairs,
                                           const AppraisalSpace& space);

enum class BleuMode {
  per_n,       // BLEU-n uses only n-gram precision
  cumulative,  // geometric mean of 1..n precisions
};

/// Sentence BLEU in percent: clipped n-gram precision times the brevity
/// penalty exp(1 - r/c) when c < r, with r the closest reference length
/// (shorter wins ties). Throws an input error for an empty candidate or no
/// references; n must be 1 or 2.
double bleu(std::span<const std::string> candidate,
            const std::vector<std::vector<std::string>>& references, int n,
            BleuMode mode = BleuMode::per_n);
double bleu(std::string_view candidate, std::string_view reference, int n,
            BleuMode mode = BleuMode::per_n);

double brevity_penalty(std::size_t candidate_length, std::size_t reference_length);

enum class RougeVariant { rouge1, rouge2, rougeL };

/// F-measure (beta = 1) in percent. Throws an input error when either side
/// is empty.
double rouge(std::span<const std::string> candidate, std::span<const std::string> reference,
             RougeVariant variant);
double rouge(std::string_view candidate, std::string_view reference, RougeVariant variant);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// Sentence-embedding provider for the similarity metric.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  /// Throws catbear::Error(metric) on failure.
  virtual std::vector<double> embed(std::string_view text) = 0;
  virtual std::string id() const = 0;
};

/// Local, dependency-free backend: hashed character uni+bigram counts.
/// Useful as a lexical stand-in; not comparable to encoder-based scores.
class HashingEmbeddingBackend : public EmbeddingBackend {
 public:
  explicit HashingEmbeddingBackend(std::size_t dimensions = 512) : dims_(dimensions) {}
  std::vector<double> embed(std::string_view text) override;
  std::string id() const override { return "hashing-" + std::to_string(dims_); }

 private:
  std::size_t dims_;
};

/// POST {base_url}/embeddings in the de-facto embeddings protocol.
class HttpEmbeddingBackend : public EmbeddingBackend {
 public:
  HttpEmbeddingBackend(std::string base_url, std::string api_key, std::string model,
                       int timeout_seconds = 60);
  std::vector<double> embed(std::string_view text) override;
  std::string id() const override { return "http-embed:" + model_; }

 private:
  std::string base_url_, api_key_, model_;
  int timeout_seconds_;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Cosine similarity mapped from [-1, 1] to [0, 100] via (cos + 1) * 50.
/// nullopt when no backend is configured. Identical strings score 100.
std::optional<double> embedding_similarity(EmbeddingBackend* backend, std::string_view candidate,
                                           std::string_view reference);

struct OverlapReport {
  std::size_t n = 0;
  double bleu1 = 0.0;
  double bleu2 = 0.0;
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
  std::optional<double> embedding;  // nullopt = unavailable
  std::string embedding_note;

  nlohmann::ordered_json to_json() const;
  static OverlapReport from_json(const nlohmann::json& j);
  friend bool operator==(const OverlapReport&, const OverlapReport&) = default;
};

struct TextPair {
  std::string candidate;
  std::string reference;
};

/// Means of sentence-level scores. An empty candidate scores 0 on every
/// metric. A failing embedding backend leaves `embedding` unavailable and
/// records the reason; the other metrics are still produced.
OverlapReport overlap_report(std::span<const TextPair> pairs, EmbeddingBackend* backend = nullptr,
                             BleuMode mode = BleuMode::per_n);

}  // namespace catbear
