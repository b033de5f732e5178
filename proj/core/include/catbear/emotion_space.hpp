#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>

namespace catbear {

/// The closed 15-emotion vocabulary, in canonical listing order. The
/// enumerator order is load-bearing: it is the tie-break order everywhere.
enum class Emotion : std::uint8_t {
  happiness,
  sadness,
  anger,
  boredom,
  challenge,
  hope,
  fear,
  interest,
  contempt,
  disgust,
  frustration,
  surprise,
  pride,
  shame,
  guilt,
};
inline constexpr std::size_t kEmotionCount = 15;

const std::array<Emotion, kEmotionCount>& all_emotions();
std::string_view english_name(Emotion e);
std::string_view chinese_name(Emotion e);
constexpr std::size_t index_of(Emotion e) { return static_cast<std::size_t>(e); }

/// Exact match against either surface form (English is case-insensitive,
/// surrounding whitespace ignored). Anything else is nullopt.
std::optional<Emotion> try_parse_emotion(std::string_view text);
/// Same as try_parse_emotion but throws an input error.
Emotion parse_emotion(std::string_view text);

/// Appraisal dimensions in table column order.
enum class Dimension : std::uint8_t {
  unpleasantness,
  effort,
  attention,
  certainty,
  control,
  responsibility,
};
inline constexpr std::size_t kDimensionCount = 6;

const std::array<Dimension, kDimensionCount>& all_dimensions();
std::string_view english_name(Dimension d);
std::string_view chinese_name(Dimension d);
constexpr std::size_t index_of(Dimension d) { return static_cast<std::size_t>(d); }

struct RawScale {};
struct NormalizedScale {};

/// Six appraisal scores tagged with the scale they live on. Arithmetic is only
/// defined between vectors of the same scale.
template <class Scale>
class AppraisalVector {
 public:
  using Values = std::array<double, kDimensionCount>;

  constexpr AppraisalVector() = default;
  constexpr explicit AppraisalVector(const Values& values) : values_(values) {}

  constexpr double operator[](Dimension d) const { return values_[index_of(d)]; }
  constexpr double& operator[](Dimension d) { return values_[index_of(d)]; }
  constexpr const Values& values() const { return values_; }

  friend constexpr bool operator==(const AppraisalVector&, const AppraisalVector&) = default;

 private:
  Values values_{};
};

using RawVector = AppraisalVector<RawScale>;
using NormalizedVector = AppraisalVector<NormalizedScale>;

/// Averaged Manhattan distance (sum of |a_d - b_d| over dimensions, / 6).
template <class Scale>
double mean_abs_difference(const AppraisalVector<Scale>& a,
                           const AppraisalVector<Scale>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < kDimensionCount; ++i) {
    double d = a.values()[i] - b.values()[i];
    sum += d < 0 ? -d : d;
  }
  return sum / static_cast<double>(kDimensionCount);
}

enum class Normalization {
  min_max,  // (x - min_d) / (max_d - min_d), lands in [0, 1]
  z_score,  // (x - mean_d) / stddev_d (population)
};

/// Smith–Ellsworth appraisal table and its per-dimension normalized form.
/// Immutable after build(); safe to share across threads.
class AppraisalSpace {
 public:
  static AppraisalSpace build(Normalization policy = Normalization::min_max);

  const RawVector& raw(Emotion e) const { return raw_[index_of(e)]; }
  const NormalizedVector& normalized(Emotion e) const { return normalized_[index_of(e)]; }
  NormalizedVector normalize(const RawVector& v) const;

  double dimension_min(Dimension d) const { return min_[index_of(d)]; }
  double dimension_max(Dimension d) const { return max_[index_of(d)]; }
  Normalization policy() const { return policy_; }

  /// Precomputed cat_dist.
  double distance(Emotion a, Emotion b) const {
    return distances_[index_of(a)][index_of(b)];
  }
  double max_pairwise_distance() const { return max_distance_; }

 private:
  AppraisalSpace() = default;

  Normalization policy_ = Normalization::min_max;
  std::array<RawVector, kEmotionCount> raw_{};
  std::array<NormalizedVector, kEmotionCount> normalized_{};
  std::array<double, kDimensionCount> min_{}, max_{}, center_{}, scale_{};
  std::array<std::array<double, kEmotionCount>, kEmotionCount> distances_{};
  double max_distance_ = 0.0;
};

/// Process-wide min-max space.
const AppraisalSpace& default_space();

/// CAT-Dist: averaged Manhattan distance between the normalized vectors.
double cat_dist(const AppraisalSpace& space, Emotion a, Emotion b);

struct NearestEmotion {
  Emotion emotion;
  double distance;
};

/// Label minimizing the averaged Manhattan distance to v; ties go to the
/// earlier label in canonical order. Throws an input error on non-finite v.
NearestEmotion nearest_emotion(const AppraisalSpace& space, const NormalizedVector& v);

/// Raw table as CSV: header plus 15 rows, two decimals.
void write_raw_csv(std::ostream& out, const AppraisalSpace& space);
/// Normalized table as CSV, six decimals.
void write_normalized_csv(std::ostream& out, const AppraisalSpace& space);

}  // namespace catbear
