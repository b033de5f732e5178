#include "catbear/emotion_space.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "catbear/error.hpp"
#include "catbear/util.hpp"

namespace catbear {
namespace {

struct EmotionInfo {
  std::string_view en;
  std::string_view zh;
};

constexpr std::array<EmotionInfo, kEmotionCount> kEmotionInfo{{
    {"happiness", "快乐"},
    {"sadness", "悲伤"},
    {"anger", "愤怒"},
    {"boredom", "无聊"},
    {"challenge", "挑战"},
    {"hope", "希望"},
    {"fear", "恐惧"},
    {"interest", "兴趣"},
    {"contempt", "轻蔑"},
    {"disgust", "厌恶"},
    {"frustration", "沮丧"},
    {"surprise", "惊讶"},
    {"pride", "自豪"},
    {"shame", "羞耻"},
    {"guilt", "内疚"},
}};

constexpr std::array<EmotionInfo, kDimensionCount> kDimensionInfo{{
    {"unpleasantness", "不愉快程度"},
    {"effort", "预期努力"},
    {"attention", "注意程度"},
    {"certainty", "确定程度"},
    {"control", "控制感"},
    {"responsibility", "责任归属"},
}};

// Smith & Ellsworth (1985) appraisal scores, exactly as printed. Columns
// follow the Dimension order.
constexpr std::array<std::array<double, kDimensionCount>, kEmotionCount> kRawTable{{
    {-1.46, -0.33, 0.15, -0.46, -0.21, 0.09},   // happiness
    {0.87, -0.14, -0.21, 0.00, 1.15, -0.36},    // sadness
    {0.85, 0.53, 0.12, -0.29, -0.96, -0.94},    // anger
    {0.34, -1.19, -1.27, -0.35, 0.12, -0.19},   // boredom
    {-0.37, 1.19, 0.52, -0.01, -0.20, 0.44},    // challenge
    {-0.50, -0.18, 0.31, 0.46, 0.35, 0.15},     // hope
    {0.44, 0.63, 0.03, 0.73, 0.59, -0.17},      // fear
    {-1.05, -0.07, 0.70, -0.07, 0.41, -0.13},   // interest
    {0.89, -0.07, 0.80, -0.12, -0.63, -0.50},   // contempt
    {0.38, 0.06, -0.96, -0.39, -0.19, -0.50},   // disgust
    {0.88, 0.48, 0.60, -0.08, 0.22, -0.37},     // frustration
    {-1.35, -0.66, 0.40, 0.73, 0.15, -0.94},    // surprise
    {-1.25, -0.31, 0.02, -0.32, -0.46, 0.81},   // pride
    {0.73, 0.07, -0.11, 0.21, -0.07, 1.31},     // shame
    {0.60, 0.00, -0.36, -0.15, -0.29, 1.31},    // guilt
}};

}  // namespace

const std::array<Emotion, kEmotionCount>& all_emotions() {
  static constexpr std::array<Emotion, kEmotionCount> kAll = [] {
    std::array<Emotion, kEmotionCount> a{};
    for (std::size_t i = 0; i < kEmotionCount; ++i) a[i] = static_cast<Emotion>(i);
    return a;
  }();
  return kAll;
}

std::string_view english_name(Emotion e) { return kEmotionInfo[index_of(e)].en; }
std::string_view chinese_name(Emotion e) { return kEmotionInfo[index_of(e)].zh; }

std::optional<Emotion> try_parse_emotion(std::string_view text) {
  auto t = trim(text);
  auto lower = to_lower_ascii(t);
  for (Emotion e : all_emotions()) {
    if (lower == english_name(e) || t == chinese_name(e)) return e;
  }
  return std::nullopt;
}

Emotion parse_emotion(std::string_view text) {
  if (auto e = try_parse_emotion(text)) return *e;
  fail(ErrorKind::input, "unknown emotion label '" + std::string(text) + "'",
       std::string(text));
}

const std::array<Dimension, kDimensionCount>& all_dimensions() {
  static constexpr std::array<Dimension, kDimensionCount> kAll{
      Dimension::unpleasantness, Dimension::effort,  Dimension::attention,
      Dimension::certainty,      Dimension::control, Dimension::responsibility};
  return kAll;
}

std::string_view english_name(Dimension d) { return kDimensionInfo[index_of(d)].en; }
std::string_view chinese_name(Dimension d) { return kDimensionInfo[index_of(d)].zh; }

AppraisalSpace AppraisalSpace::build(Normalization policy) {
  AppraisalSpace s;
  s.policy_ = policy;
  for (std::size_t e = 0; e < kEmotionCount; ++e) s.raw_[e] = RawVector(kRawTable[e]);

  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    double lo = kRawTable[0][d], hi = kRawTable[0][d], sum = 0.0;
    for (const auto& row : kRawTable) {
      lo = std::min(lo, row[d]);
      hi = std::max(hi, row[d]);
      sum += row[d];
    }
    s.min_[d] = lo;
    s.max_[d] = hi;
    if (policy == Normalization::min_max) {
      s.center_[d] = lo;
      s.scale_[d] = hi - lo;
    } else {
      double mean = sum / kEmotionCount, var = 0.0;
      for (const auto& row : kRawTable) var += (row[d] - mean) * (row[d] - mean);
      s.center_[d] = mean;
      s.scale_[d] = std::sqrt(var / kEmotionCount);
    }
  }

  for (std::size_t e = 0; e < kEmotionCount; ++e) s.normalized_[e] = s.normalize(s.raw_[e]);

  for (std::size_t a = 0; a < kEmotionCount; ++a) {
    for (std::size_t b = 0; b < kEmotionCount; ++b) {
      double d = mean_abs_difference(s.normalized_[a], s.normalized_[b]);
      s.distances_[a][b] = d;
      s.max_distance_ = std::max(s.max_distance_, d);
    }
  }
  return s;
}

NormalizedVector AppraisalSpace::normalize(const RawVector& v) const {
  NormalizedVector::Values out{};
  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    out[d] = (v.values()[d] - center_[d]) / scale_[d];
  }
  return NormalizedVector(out);
}

const AppraisalSpace& default_space() {
  static const AppraisalSpace kSpace = AppraisalSpace::build();
  return kSpace;
}

double cat_dist(const AppraisalSpace& space, Emotion a, Emotion b) {
  return space.distance(a, b);
}

NearestEmotion nearest_emotion(const AppraisalSpace& space, const NormalizedVector& v) {
  for (double x : v.values()) {
    if (!std::isfinite(x)) fail(ErrorKind::input, "appraisal vector has a non-finite component");
  }
  NearestEmotion best{Emotion::happiness, mean_abs_difference(v, space.normalized(Emotion::happiness))};
  for (Emotion e : all_emotions()) {
    double d = mean_abs_difference(v, space.normalized(e));
    if (d < best.distance) best = {e, d};  // strict: earlier label wins ties
  }
  return best;
}

namespace {

template <class Scale>
void write_csv(std::ostream& out, const AppraisalSpace& space, int digits,
               const AppraisalVector<Scale>& (AppraisalSpace::*row)(Emotion) const) {
  out << "emotion";
  for (Dimension d : all_dimensions()) out << ',' << english_name(d);
  out << '\n';
  for (Emotion e : all_emotions()) {
    out << english_name(e);
    const auto& v = (space.*row)(e);
    for (double x : v.values()) {
      // Avoid "-0.00" for a printed zero.
      out << ',' << format_fixed(x == 0.0 ? 0.0 : x, digits);
    }
    out << '\n';
  }
}

}  // namespace

void write_raw_csv(std::ostream& out, const AppraisalSpace& space) {
  write_csv(out, space, 2, &AppraisalSpace::raw);
}

void write_normalized_csv(std::ostream& out, const AppraisalSpace& space) {
  write_csv(out, space, 6, &AppraisalSpace::normalized);
}

}  // namespace catbear
