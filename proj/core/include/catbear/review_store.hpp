#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "catbear/dataset.hpp"

namespace catbear {

/// Rejection from the review workflow, carrying the HTTP status it maps to
/// (400, 403, 404, 409, 422) and the offending field when there is one.
class ReviewError : public std::runtime_error {
 public:
  ReviewError(int status, const std::string& message, std::string field = {})
      : std::runtime_error(message), status_(status), field_(std::move(field)) {}
  int status() const noexcept { return status_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int status_;
  std::string field_;
};

enum class AssignmentStatus { pending, in_progress, done };
std::string_view to_string(AssignmentStatus s);
AssignmentStatus parse_assignment_status(std::string_view s);

enum class Variant { raw, refined };
std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

// --- ratings --------------------------------------------------------------------

inline constexpr std::size_t kRatingDimensionCount = 6;

struct RatingDimension {
  std::string_view name;
  int min;
  int max;
};

inline constexpr std::array<RatingDimension, kRatingDimensionCount> kRatingDimensions = {{
    {"EmoCategory", 0, 1},
    {"EmoMatch", 1, 5},
    {"SettingMatch", 1, 5},
    {"EmoIntensity", 0, 2},
    {"Coherence", 1, 5},
    {"Fluency", 1, 5},
}};

/// Index into kRatingDimensions; nullopt for an unknown name.
std::optional<std::size_t> rating_dimension_index(std::string_view name);

struct RatingRecord {
  std::string rater;
  std::string dialogue_id;
  int turn = 0;
  Variant variant = Variant::raw;
  std::array<int, kRatingDimensionCount> scores{};

  nlohmann::ordered_json to_json() const;
  /// Throws ReviewError(422) naming the first missing or out-of-range field.
  static RatingRecord from_json(const nlohmann::json& j, std::string rater);

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

/// Throws ReviewError(422) naming the first out-of-range dimension.
void validate_rating(const RatingRecord& r);

struct AggregateRow {
  std::size_t n = 0;
  std::array<double, kRatingDimensionCount> means{};
};

/// Unweighted per-dimension means; nullopt (the empty-result marker) when
/// there are no records.
std::optional<AggregateRow> aggregate(std::span<const RatingRecord> records);

enum class DeltaBase {
  after,   // (after - before) / after; 4.09 -> 4.52 renders 9.5%
  before,  // (after - before) / before; 4.09 -> 4.52 renders 10.5%
};

/// Percentage change between the two displayed (2-decimal) means.
double percent_change(double before, double after, DeltaBase base = DeltaBase::after);
/// "4.09 → 4.52 (↑9.5%)"
std::string format_delta(double before, double after, DeltaBase base = DeltaBase::after);

/// Before/after table with one row per dimension and its score range.
std::string render_aggregate_table(const std::optional<AggregateRow>& before, const std::optional<AggregateRow>& after,
                                   DeltaBase base = DeltaBase::after);

/// Spearman rank correlation with average ranks for ties. NaN when either
/// side is constant. Throws an input error on size mismatch or n < 2.
double spearman(std::span<const double> a, std::span<const double> b);

/// Two-sided permutation p-value for `spearman`: (hits + 1) / (permutations + 1).
double spearman_permutation_p(std::span<const double> a, std::span<const double> b, int permutations,
                              std::uint64_t seed);

struct RaterCorrelation {
  std::string rater_a;
  std::string rater_b;
  std::size_t n = 0;  // co-rated items
  std::optional<double> rho;
  std::optional<double> p_value;
  bool insufficient = false;  // fewer than kMinCoRated items or a constant side

  nlohmann::ordered_json to_json() const;
};

inline constexpr std::size_t kMinCoRated = 5;

// --- store ------------------------------------------------------------------------

struct Assignment {
  std::string dialogue_id;
  std::string worker;
  AssignmentStatus status = AssignmentStatus::pending;
};

/// Latest edit for one turn. Unset fields keep the original value.
struct Refinement {
  std::string worker;
  std::string dialogue_id;
  int turn = 0;
  std::optional<Emotion> emotion;
  std::optional<std::string> utterance;
  std::string timestamp;
  std::uint64_t event_seq = 0;
};

using Clock = std::function<std::string()>;
/// UTC, ISO-8601 with seconds.
std::string system_timestamp();

/// Review workflow state over a fixed corpus. Every accepted mutation is one
/// event appended to a JSONL log (when a path is given) before it is applied;
/// state is a fold over those events. Opening a store on an existing log
/// replays it, starting from the snapshot file "<log>.snapshot" when present.
/// Thread-safe; writes are serialized.
class ReviewStore {
 public:
  ReviewStore(Corpus corpus, std::string log_path = {}, Clock clock = system_timestamp,
              std::size_t snapshot_every = 100);

  // Mutations. Each returns the state version (last event sequence number).
  // Resubmitting an identical payload for the same (worker, target) key
  // appends nothing.

  /// 404 unknown dialogue; 409 when assigned to someone else.
  std::uint64_t assign(const std::string& dialogue_id, const std::string& worker);
  /// 404 unknown/unassigned dialogue; 403 when `worker` is not the assignee.
  std::uint64_t set_status(const std::string& dialogue_id, const std::string& worker, AssignmentStatus status);
  /// 404 unknown dialogue or turn; 403 non-assignee; 422 when nothing would
  /// change or the emotion is outside the vocabulary. Moves a pending
  /// assignment to in_progress.
  std::uint64_t refine(const std::string& worker, const std::string& dialogue_id, int turn,
                       std::optional<std::string> emotion, std::optional<std::string> utterance);
  /// 404 unknown dialogue or turn; 422 out-of-range score.
  std::uint64_t rate(const RatingRecord& record);

  // Queries.
  std::vector<Assignment> assignments(const std::string& worker = {}) const;
  /// Dialogue with layered edits; each edited turn lists its original.
  nlohmann::ordered_json dialogue_view(const std::string& dialogue_id) const;
  std::vector<RatingRecord> ratings(std::optional<Variant> variant = std::nullopt) const;
  std::optional<AggregateRow> aggregate_ratings(Variant variant) const;
  std::vector<RaterCorrelation> rater_correlation(std::string_view dimension, int permutations = 1000,
                                                  std::uint64_t seed = 0) const;
  nlohmann::ordered_json progress() const;

  /// Applies the layered edits and records each as a Revision. Dialogues
  /// without a done assignment block the export (409) unless `partial`, in
  /// which case they are left out. An empty `dialogue_ids` means all.
  Corpus export_refined(bool partial, const std::vector<std::string>& dialogue_ids = {}) const;

  /// Seeded sample of ceil(rate * n) completed dialogues for spot checks.
  std::vector<std::string> audit_sample(double rate, std::uint64_t seed) const;

  /// Canonical state rendering; equal for equal event sequences.
  std::string state_json() const;
  std::uint64_t version() const;
  /// Writes "<log>.snapshot" now.
  void snapshot() const;

  /// Rebuilds state from an event list without touching any file.
  static std::unique_ptr<ReviewStore> replay(Corpus corpus, const std::vector<nlohmann::json>& events);
  std::vector<nlohmann::json> events() const;

 private:
  using RatingKey = std::tuple<std::string, std::string, int, Variant>;  // rater, dialogue, turn, variant

  const Dialogue& dialogue_or_404(const std::string& id) const;
  const Turn& turn_or_404(const Dialogue& d, int turn) const;
  std::uint64_t commit(nlohmann::json event);
  void apply(const nlohmann::json& event);
  nlohmann::ordered_json state_locked() const;
  void load_state(const nlohmann::json& state);
  void write_snapshot_locked() const;

  Corpus corpus_;
  std::map<std::string, std::size_t> index_;
  std::string log_path_;
  Clock clock_;
  std::size_t snapshot_every_;

  mutable std::mutex mu_;
  std::uint64_t seq_ = 0;
  std::vector<nlohmann::json> events_;  // events applied since open (or all, without a log)
  std::map<std::string, Assignment> assignments_;
  std::map<std::pair<std::string, int>, Refinement> refinements_;
  std::map<RatingKey, RatingRecord> ratings_;
};

}  // namespace catbear
