#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "catbear/emotion_space.hpp"
#include "catbear/error.hpp"

namespace catbear {
namespace {

// Independent transcription of the published table (rows in canonical order).
constexpr double kPublished[15][6] = {
    {-1.46, -0.33, 0.15, -0.46, -0.21, 0.09},   {0.87, -0.14, -0.21, 0.0, 1.15, -0.36},
    {0.85, 0.53, 0.12, -0.29, -0.96, -0.94},    {0.34, -1.19, -1.27, -0.35, 0.12, -0.19},
    {-0.37, 1.19, 0.52, -0.01, -0.2, 0.44},     {-0.50, -0.18, 0.31, 0.46, 0.35, 0.15},
    {0.44, 0.63, 0.03, 0.73, 0.59, -0.17},      {-1.05, -0.07, 0.70, -0.07, 0.41, -0.13},
    {0.89, -0.07, 0.80, -0.12, -0.63, -0.50},   {0.38, 0.06, -0.96, -0.39, -0.19, -0.50},
    {0.88, 0.48, 0.60, -0.08, 0.22, -0.37},     {-1.35, -0.66, 0.40, 0.73, 0.15, -0.94},
    {-1.25, -0.31, 0.02, -0.32, -0.46, 0.81},   {0.73, 0.07, -0.11, 0.21, -0.07, 1.31},
    {0.60, 0.0, -0.36, -0.15, -0.29, 1.31},
};

TEST(EmotionSpace, RawTableMatchesPublishedValues) {
  const auto& s = default_space();
  for (Emotion e : all_emotions()) {
    for (Dimension d : all_dimensions()) {
      EXPECT_DOUBLE_EQ(s.raw(e)[d], kPublished[index_of(e)][index_of(d)])
          << english_name(e) << "/" << english_name(d);
    }
  }
}

TEST(EmotionSpace, HappinessRowSpotCheck) {
  const auto& r = default_space().raw(Emotion::happiness);
  EXPECT_EQ(r.values(), (RawVector::Values{-1.46, -0.33, 0.15, -0.46, -0.21, 0.09}));
}

TEST(EmotionSpace, CanonicalOrderAndNames) {
  ASSERT_EQ(all_emotions().size(), 15u);
  EXPECT_EQ(all_emotions().front(), Emotion::happiness);
  EXPECT_EQ(all_emotions().back(), Emotion::guilt);
  EXPECT_EQ(chinese_name(Emotion::sadness), "悲伤");
  EXPECT_EQ(english_name(Emotion::frustration), "frustration");
  EXPECT_EQ(try_parse_emotion("Fear"), Emotion::fear);
  EXPECT_EQ(try_parse_emotion("内疚"), Emotion::guilt);
  EXPECT_FALSE(try_parse_emotion("melancholy"));
  EXPECT_THROW(parse_emotion("joyish"), Error);
}

TEST(EmotionSpace, NormalizedColumnsSpanUnitInterval) {
  const auto& s = default_space();
  for (Dimension d : all_dimensions()) {
    double lo = 1, hi = 0;
    for (Emotion e : all_emotions()) {
      lo = std::min(lo, s.normalized(e)[d]);
      hi = std::max(hi, s.normalized(e)[d]);
    }
    EXPECT_DOUBLE_EQ(lo, 0.0);
    EXPECT_DOUBLE_EQ(hi, 1.0);
  }
}

TEST(EmotionSpace, BoredomNormalizedOracle) {
  const NormalizedVector::Values want{0.7659574468085106, 0.0, 0.0, 0.09243697478991601, 0.5118483412322276,
                                      0.3333333333333333};
  const auto& got = default_space().normalized(Emotion::boredom).values();
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(got[i], want[i], 1e-12) << i;
}

TEST(EmotionSpace, CatDistOracles) {
  const auto& s = default_space();
  EXPECT_NEAR(cat_dist(s, Emotion::happiness, Emotion::sadness), 0.41272312047256876, 1e-12);
  EXPECT_NEAR(cat_dist(s, Emotion::fear, Emotion::anger), 0.3656542314103035, 1e-12);
  EXPECT_NEAR(cat_dist(s, Emotion::hope, Emotion::fear), 0.22640981488183334, 1e-12);
  EXPECT_NEAR(s.max_pairwise_distance(), 0.5703790868121564, 1e-12);
  EXPECT_NEAR(cat_dist(s, Emotion::surprise, Emotion::guilt), 0.5703790868121564, 1e-12);
}

TEST(EmotionSpace, MetricAxiomsOverAllTriples) {
  const auto& s = default_space();
  for (Emotion a : all_emotions()) {
    EXPECT_EQ(cat_dist(s, a, a), 0.0);
    for (Emotion b : all_emotions()) {
      const double ab = cat_dist(s, a, b);
      EXPECT_GE(ab, 0.0);
      EXPECT_LE(ab, 1.0);
      EXPECT_EQ(ab, cat_dist(s, b, a));
      if (a != b) {
        EXPECT_GT(ab, 0.0);
      }
      for (Emotion c : all_emotions()) EXPECT_LE(ab, cat_dist(s, a, c) + cat_dist(s, c, b) + 1e-15);
    }
  }
}

TEST(EmotionSpace, SelfRetrievalAndRenormalization) {
  const auto& s = default_space();
  for (Emotion e : all_emotions()) {
    auto hit = nearest_emotion(s, s.normalized(e));
    EXPECT_EQ(hit.emotion, e);
    EXPECT_EQ(hit.distance, 0.0);
    auto again = s.normalize(s.raw(e));
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(again.values()[i], s.normalized(e).values()[i], 1e-9);
  }
}

TEST(EmotionSpace, NearestToCentreIsHope) {
  NormalizedVector mid({0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
  auto hit = nearest_emotion(default_space(), mid);
  EXPECT_EQ(hit.emotion, Emotion::hope);
  EXPECT_NEAR(hit.distance, 0.13998708629655207, 1e-12);
}

TEST(EmotionSpace, NearestRejectsNonFinite) {
  NormalizedVector bad({0.5, std::numeric_limits<double>::quiet_NaN(), 0.5, 0.5, 0.5, 0.5});
  try {
    nearest_emotion(default_space(), bad);
    FAIL() << "expected an input error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::input);
  }
}

TEST(EmotionSpace, ZScorePolicyIsCentred) {
  auto s = AppraisalSpace::build(Normalization::z_score);
  EXPECT_EQ(s.policy(), Normalization::z_score);
  for (Dimension d : all_dimensions()) {
    double mean = 0, sq = 0;
    for (Emotion e : all_emotions()) mean += s.normalized(e)[d];
    mean /= 15;
    for (Emotion e : all_emotions()) sq += std::pow(s.normalized(e)[d] - mean, 2);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(sq / 15, 1.0, 1e-12);
  }
}

TEST(EmotionSpace, RawCsvDump) {
  std::ostringstream out;
  write_raw_csv(out, default_space());
  const std::string csv = out.str();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 16);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "emotion,unpleasantness,effort,attention,certainty,control,responsibility");
  EXPECT_NE(csv.find("happiness,-1.46,-0.33,0.15,-0.46,-0.21,0.09\n"), std::string::npos);
  EXPECT_NE(csv.find("sadness,0.87,-0.14,-0.21,0.00,1.15,-0.36\n"), std::string::npos);
}

}  // namespace
}  // namespace catbear
