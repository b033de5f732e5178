#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <httplib.h>

#include "catbear/error.hpp"
#include "catbear/review_server.hpp"
#include "catbear/review_store.hpp"
#include "support/fixtures.hpp"

namespace catbear {
namespace {

Clock counting_clock() {
  return [n = 0]() mutable {
    char buf[32];
    std::snprintf(buf, sizeof buf, "2026-01-01T00:00:%02dZ", n++ % 60);
    return std::string(buf);
  };
}

RatingRecord rating(std::string rater, std::string id, int turn, Variant v, std::array<int, 6> s) {
  return {std::move(rater), std::move(id), turn, v, s};
}

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ReviewError& e) {
    return e.status();
  }
  return 0;
}

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ReviewError& e) {
    return e.field();
  }
  return {};
}

class ReviewTest : public ::testing::Test {
 protected:
  void SetUp() override {
    corpus = testing::make_corpus_of(4, 4);
    store = std::make_unique<ReviewStore>(corpus, "", counting_clock());
  }
  Corpus corpus;
  std::unique_ptr<ReviewStore> store;
};

TEST(Ratings, OutOfRangeNamesTheDimension) {
  auto j = nlohmann::json{{"dialogue_id", "x"}, {"turn", 0},       {"variant", "raw"},  {"EmoCategory", 1},
                          {"EmoMatch", 6},      {"SettingMatch", 3}, {"EmoIntensity", 1}, {"Coherence", 3},
                          {"Fluency", 3}};
  try {
    RatingRecord::from_json(j, "w1");
    FAIL();
  } catch (const ReviewError& e) {
    EXPECT_EQ(e.status(), 422);
    EXPECT_EQ(e.field(), "EmoMatch");
  }
  j["EmoMatch"] = 5;
  j.erase("Fluency");
  EXPECT_EQ(field_of([&] { RatingRecord::from_json(j, "w1"); }), "Fluency");
  j["Fluency"] = 2.5;
  EXPECT_EQ(field_of([&] { RatingRecord::from_json(j, "w1"); }), "Fluency");
  j["Fluency"] = 1;
  j["variant"] = "final";
  EXPECT_EQ(status_of([&] { RatingRecord::from_json(j, "w1"); }), 422);
  j["variant"] = "refined";
  auto r = RatingRecord::from_json(j, "w1");
  EXPECT_EQ(r.scores, (std::array<int, 6>{1, 5, 3, 1, 3, 1}));
  EXPECT_EQ(RatingRecord::from_json(r.to_json(), "w1"), r);
  EXPECT_EQ(rating_dimension_index("Coherence"), 4u);
  EXPECT_FALSE(rating_dimension_index("coherence"));
}

TEST(Ratings, AggregateAndDelta) {
  std::vector<RatingRecord> none;
  EXPECT_FALSE(aggregate(none));
  std::vector<RatingRecord> rs{rating("a", "d", 0, Variant::raw, {1, 4, 3, 2, 5, 1}),
                               rating("b", "d", 0, Variant::raw, {0, 5, 4, 1, 4, 2})};
  auto row = *aggregate(rs);
  EXPECT_EQ(row.n, 2u);
  EXPECT_EQ(row.means, (std::array<double, 6>{0.5, 4.5, 3.5, 1.5, 4.5, 1.5}));

  EXPECT_NEAR(percent_change(4.09, 4.52), 43.0 / 4.52, 1e-9);
  EXPECT_NEAR(percent_change(4.09, 4.52, DeltaBase::before), 43.0 / 4.09, 1e-9);
  EXPECT_EQ(format_delta(4.09, 4.52), "4.09 → 4.52 (↑9.5%)");
  EXPECT_EQ(format_delta(4.09, 4.52, DeltaBase::before), "4.09 → 4.52 (↑10.5%)");
  // the delta uses the displayed values
  EXPECT_EQ(format_delta(4.0912, 4.5209), "4.09 → 4.52 (↑9.5%)");
  EXPECT_NE(format_delta(3.5, 3.0).find("↓"), std::string::npos);
  EXPECT_EQ(format_delta(3.0, 3.0), "3.00 → 3.00 (0.0%)");

  auto table = render_aggregate_table(row, row);
  EXPECT_NE(table.find("EmoMatch"), std::string::npos);
  EXPECT_NE(table.find("1-5"), std::string::npos);
  EXPECT_NE(render_aggregate_table(std::nullopt, row).find("n/a"), std::string::npos);
}

TEST(Ratings, SpearmanOracles) {
  std::vector<double> a{1, 2, 3, 4, 5}, same{1, 2, 3, 4, 5}, rev{5, 4, 3, 2, 1}, swapped{2, 1, 4, 3, 5};
  EXPECT_NEAR(spearman(a, same), 1.0, 1e-12);
  EXPECT_NEAR(spearman(a, rev), -1.0, 1e-12);
  EXPECT_NEAR(spearman(a, swapped), 0.8, 1e-12);
  // ties use average ranks: ranks (1.5, 1.5, 3) vs (1, 2, 3) -> pearson of ranks
  std::vector<double> t{1, 1, 2}, u{1, 2, 3};
  EXPECT_NEAR(spearman(t, u), 0.8660254037844387, 1e-12);
  std::vector<double> flat{3, 3, 3, 3, 3};
  EXPECT_TRUE(std::isnan(spearman(a, flat)));
  std::vector<double> shorter{1, 2};
  EXPECT_THROW(spearman(a, shorter), Error);
}

TEST(Ratings, PermutationPValue) {
  // Exact two-sided p for rho = 0.8 at n = 5 is 16/120.
  std::vector<double> a{1, 2, 3, 4, 5}, b{2, 1, 4, 3, 5};
  double p = spearman_permutation_p(a, b, 20000, 7);
  EXPECT_NEAR(p, 16.0 / 120.0, 0.015);
  EXPECT_EQ(p, spearman_permutation_p(a, b, 20000, 7));
  // perfect agreement: only the identity and its mirror reach |rho| = 1
  std::vector<double> c{1, 2, 3, 4, 5, 6, 7};
  EXPECT_LT(spearman_permutation_p(c, c, 5000, 1), 0.01);
}

TEST_F(ReviewTest, AssignmentRules) {
  EXPECT_EQ(store->assign("c01-d000", "w1"), 1u);
  EXPECT_EQ(store->assign("c01-d000", "w1"), 1u);  // idempotent
  EXPECT_EQ(status_of([&] { store->assign("c01-d000", "w2"); }), 409);
  EXPECT_EQ(status_of([&] { store->assign("nope", "w1"); }), 404);
  EXPECT_EQ(status_of([&] { store->set_status("c01-d000", "w2", AssignmentStatus::done); }), 403);
  EXPECT_EQ(status_of([&] { store->set_status("c02-d001", "w1", AssignmentStatus::done); }), 404);
  EXPECT_EQ(store->set_status("c01-d000", "w1", AssignmentStatus::done), 2u);
  EXPECT_EQ(store->assignments("w1").size(), 1u);
  EXPECT_TRUE(store->assignments("w2").empty());
  EXPECT_EQ(status_of([] { parse_assignment_status("finished"); }), 422);
}

TEST_F(ReviewTest, RefinementsLayerOverTheOriginal) {
  store->assign("c01-d000", "w1");
  EXPECT_EQ(status_of([&] { store->refine("w2", "c01-d000", 1, "fear", std::nullopt); }), 403);
  EXPECT_EQ(status_of([&] { store->refine("w1", "c01-d000", 9, "fear", std::nullopt); }), 404);
  EXPECT_EQ(field_of([&] { store->refine("w1", "c01-d000", 1, "melancholy", std::nullopt); }), "emotion");
  EXPECT_EQ(field_of([&] { store->refine("w1", "c01-d000", 1, std::nullopt, "  "); }), "utterance");
  EXPECT_EQ(status_of([&] { store->refine("w1", "c01-d000", 1, std::nullopt, std::nullopt); }), 422);
  // turn 1 is sadness in the fixture: no change
  EXPECT_EQ(status_of([&] { store->refine("w1", "c01-d000", 1, "悲伤", std::nullopt); }), 422);

  auto v1 = store->refine("w1", "c01-d000", 1, "fear", std::nullopt);
  EXPECT_EQ(store->assignments("w1")[0].status, AssignmentStatus::in_progress);
  auto v2 = store->refine("w1", "c01-d000", 1, std::nullopt, "改过的句子");
  EXPECT_GT(v2, v1);
  EXPECT_EQ(store->refine("w1", "c01-d000", 1, "fear", std::nullopt), v2);  // no-op resubmission

  auto view = store->dialogue_view("c01-d000");
  const auto& t1 = view["turns"][1];
  EXPECT_EQ(t1["emotion"], "fear");
  EXPECT_EQ(t1["utterance"], "改过的句子");
  EXPECT_EQ(t1["original"]["emotion"], "sadness");
  EXPECT_EQ(t1["original"]["utterance"], "第1句：c01-d000");
  EXPECT_EQ(t1["refined_by"], "w1");
  EXPECT_FALSE(view["turns"][0].contains("original"));
  EXPECT_EQ(view["assignment"]["status"], "in_progress");
  EXPECT_EQ(status_of([&] { store->dialogue_view("nope"); }), 404);
}

TEST_F(ReviewTest, RatingsAreIdempotentPerKey) {
  auto r = rating("w1", "c01-d000", 2, Variant::raw, {1, 4, 4, 1, 4, 4});
  auto v = store->rate(r);
  EXPECT_EQ(store->rate(r), v);
  r.scores[1] = 5;
  EXPECT_GT(store->rate(r), v);
  EXPECT_EQ(store->ratings().size(), 1u);
  EXPECT_EQ(store->ratings()[0].scores[1], 5);
  EXPECT_EQ(status_of([&] { store->rate(rating("w1", "c01-d000", 7, Variant::raw, {1, 4, 4, 1, 4, 4})); }), 404);
  EXPECT_EQ(field_of([&] { store->rate(rating("w1", "c01-d000", 1, Variant::raw, {1, 4, 4, 3, 4, 4})); }),
            "EmoIntensity");
  EXPECT_FALSE(store->aggregate_ratings(Variant::refined));
  EXPECT_EQ(store->aggregate_ratings(Variant::raw)->means[1], 5.0);
  EXPECT_EQ(store->progress()["workers"]["w1"]["ratings"], 1);
}

TEST_F(ReviewTest, CorrelationNeedsEnoughCoRatedItems) {
  std::vector<int> a{1, 2, 3, 4, 5}, b{2, 1, 4, 3, 5};
  for (int i = 0; i < 5; ++i) {
    std::string id = corpus.dialogues[i % 4].dialogue_id;
    store->rate(rating("r1", id, i / 4, Variant::raw, {1, a[i], 3, 1, 3, 3}));
    store->rate(rating("r2", id, i / 4, Variant::raw, {1, b[i], 3, 1, 3, 3}));
    if (i < 4) store->rate(rating("r3", id, i / 4, Variant::raw, {1, a[i], 3, 1, 3, 3}));
  }
  auto cs = store->rater_correlation("EmoMatch", 2000, 3);
  ASSERT_EQ(cs.size(), 3u);
  EXPECT_EQ(cs[0].rater_a, "r1");
  EXPECT_EQ(cs[0].rater_b, "r2");
  EXPECT_EQ(cs[0].n, 5u);
  EXPECT_NEAR(*cs[0].rho, 0.8, 1e-12);
  EXPECT_NEAR(*cs[0].p_value, 16.0 / 120.0, 0.03);
  EXPECT_TRUE(cs[1].insufficient);  // r1 / r3 share four items
  EXPECT_FALSE(cs[1].rho);
  EXPECT_EQ(cs[1].to_json()["status"], "insufficient_data");
  EXPECT_EQ(cs[0].to_json()["status"], "ok");
  // constant dimension
  auto flat = store->rater_correlation("SettingMatch", 1000);
  EXPECT_TRUE(flat[0].insufficient);
  EXPECT_EQ(status_of([&] { store->rater_correlation("EmoMatch", 999); }), 422);
  EXPECT_EQ(field_of([&] { store->rater_correlation("Nope"); }), "dimension");
}

TEST_F(ReviewTest, ExportAppliesEditsAsRevisions) {
  store->assign("c01-d000", "w1");
  store->refine("w1", "c01-d000", 1, "fear", std::nullopt);
  store->set_status("c01-d000", "w1", AssignmentStatus::done);
  store->assign("c02-d001", "w2");
  store->set_status("c02-d001", "w2", AssignmentStatus::done);

  EXPECT_EQ(status_of([&] { store->export_refined(false); }), 409);
  auto out = store->export_refined(true);
  ASSERT_EQ(out.dialogues.size(), 2u);
  EXPECT_NO_THROW(validate_corpus(out));
  EXPECT_EQ(out.manifest.config_digest, "fixture-digest");

  const auto& edited = out.dialogues[0];
  EXPECT_EQ(edited.turns[1].emotion, Emotion::fear);
  ASSERT_EQ(edited.revisions.size(), 1u);
  EXPECT_EQ(edited.revisions[0].field, "emotion");
  EXPECT_EQ(edited.revisions[0].before, "sadness");
  EXPECT_EQ(edited.revisions[0].after, "fear");
  EXPECT_EQ(edited.revisions[0].worker, "w1");
  // everything else is untouched
  auto copy = edited;
  copy.turns[1].emotion = Emotion::sadness;
  copy.revisions.clear();
  EXPECT_EQ(copy, *corpus.find("c01-d000"));
  EXPECT_EQ(out.dialogues[1], *corpus.find("c02-d001"));

  auto one = store->export_refined(false, {"c02-d001"});
  EXPECT_EQ(one.dialogues.size(), 1u);
}

TEST_F(ReviewTest, AuditSample) {
  for (const auto& d : corpus.dialogues) {
    store->assign(d.dialogue_id, "w1");
    store->set_status(d.dialogue_id, "w1", AssignmentStatus::done);
  }
  auto a = store->audit_sample(0.5, 4);
  EXPECT_EQ(a.size(), 2u);
  EXPECT_EQ(a, store->audit_sample(0.5, 4));
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(store->audit_sample(0.1, 4).size(), 1u);
  EXPECT_EQ(store->audit_sample(1.0, 4).size(), 4u);
  EXPECT_EQ(status_of([&] { store->audit_sample(0.0, 4); }), 422);
}

void populate(ReviewStore& s, const Corpus& c) {
  s.assign(c.dialogues[0].dialogue_id, "w1");
  s.assign(c.dialogues[1].dialogue_id, "w2");
  s.refine("w1", c.dialogues[0].dialogue_id, 2, "hope", "新的说法");
  s.rate(rating("w2", c.dialogues[1].dialogue_id, 0, Variant::raw, {1, 3, 3, 1, 3, 3}));
  s.rate(rating("w1", c.dialogues[0].dialogue_id, 2, Variant::refined, {1, 5, 4, 2, 5, 5}));
  s.set_status(c.dialogues[1].dialogue_id, "w2", AssignmentStatus::done);
  s.refine("w1", c.dialogues[0].dialogue_id, 3, std::nullopt, "再改一句");
}

TEST_F(ReviewTest, ReplayReproducesState) {
  populate(*store, corpus);
  auto again = ReviewStore::replay(corpus, store->events());
  EXPECT_EQ(again->state_json(), store->state_json());
  EXPECT_EQ(again->version(), 7u);

  // order of independent workers' events changes the log, not the content
  auto events = store->events();
  EXPECT_EQ(events.front()["seq"], 1);
  EXPECT_EQ(events.back()["type"], "refine");
}

TEST_F(ReviewTest, LogReopenAndSnapshot) {
  auto log = testing::temp_path("review.jsonl");
  std::filesystem::remove(log + ".snapshot");
  std::string state;
  {
    ReviewStore s(corpus, log, counting_clock(), 3);
    populate(s, corpus);
    state = s.state_json();
  }
  EXPECT_TRUE(std::filesystem::exists(log + ".snapshot"));
  {
    ReviewStore s(corpus, log, counting_clock(), 3);
    EXPECT_EQ(s.state_json(), state);
    s.rate(rating("w3", corpus.dialogues[2].dialogue_id, 1, Variant::raw, {0, 2, 2, 0, 2, 2}));
    state = s.state_json();
  }
  std::filesystem::remove(log + ".snapshot");
  ReviewStore cold(corpus, log, counting_clock());
  EXPECT_EQ(cold.state_json(), state);
  EXPECT_EQ(cold.version(), 8u);
}

TEST_F(ReviewTest, TornTailIsDroppedCorruptMiddleIsNot) {
  auto log = testing::temp_path("torn.jsonl");
  std::filesystem::remove(log + ".snapshot");
  std::string state;
  {
    ReviewStore s(corpus, log, counting_clock());
    populate(s, corpus);
    state = s.state_json();
  }
  { std::ofstream(log, std::ios::app) << R"({"seq": 8, "type": "rate", "rat)"; }
  {
    ReviewStore s(corpus, log, counting_clock());
    EXPECT_EQ(s.state_json(), state);
    EXPECT_EQ(s.version(), 7u);
    // the next write lands on a clean line
    s.assign(corpus.dialogues[3].dialogue_id, "w4");
  }
  {
    ReviewStore s(corpus, log, counting_clock());
    EXPECT_EQ(s.version(), 8u);
  }

  std::string text;
  {
    std::ifstream in(log);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto second = text.find('\n') + 1;
  text.insert(second, "garbage\n");
  { std::ofstream(log, std::ios::trunc) << text; }
  try {
    ReviewStore s(corpus, log, counting_clock());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_EQ(e.detail(), "2");
  }
}

TEST_F(ReviewTest, ResultsDoNotDependOnRatingOrder) {
  std::vector<RatingRecord> rs;
  for (int i = 0; i < 12; ++i) {
    rs.push_back(rating("r" + std::to_string(i % 3), corpus.dialogues[i % 4].dialogue_id, i % 2,
                        i % 2 ? Variant::raw : Variant::refined,
                        {i % 2, 1 + i % 5, 1 + (i * 3) % 5, i % 3, 1 + (i * 7) % 5, 1 + (i * 2) % 5}));
  }
  ReviewStore forward(corpus, "", counting_clock()), backward(corpus, "", counting_clock());
  for (const auto& r : rs) forward.rate(r);
  for (auto it = rs.rbegin(); it != rs.rend(); ++it) backward.rate(*it);
  for (Variant v : {Variant::raw, Variant::refined}) {
    EXPECT_EQ(forward.aggregate_ratings(v)->means, backward.aggregate_ratings(v)->means);
  }
  auto a = forward.rater_correlation("EmoMatch", 1000, 2);
  auto b = backward.rater_correlation("EmoMatch", 1000, 2);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].to_json(), b[i].to_json());
}

class ReviewServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    corpus = testing::make_corpus_of(3, 4);
    store = std::make_unique<ReviewStore>(corpus, "", counting_clock());
    ReviewServerConfig cfg;
    cfg.tokens = parse_tokens(nlohmann::json{{"tok-w1", "w1"}, {"tok-admin", {{"worker", "boss"}, {"admin", true}}}});
    server = std::make_unique<ReviewServer>(*store, cfg);
    port = server->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  void TearDown() override { server->stop(); }

  httplib::Result post(const std::string& path, const nlohmann::json& body, const std::string& token) {
    return client->Post(path, {{"Authorization", "Bearer " + token}}, body.dump(), "application/json");
  }
  httplib::Result get(const std::string& path, const std::string& token) {
    return client->Get(path, {{"Authorization", "Bearer " + token}});
  }

  Corpus corpus;
  std::unique_ptr<ReviewStore> store;
  std::unique_ptr<ReviewServer> server;
  std::unique_ptr<httplib::Client> client;
  int port = 0;
};

TEST_F(ReviewServerTest, AuthAndRoles) {
  auto r = client->Get("/api/v1/progress");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 401);
  EXPECT_EQ(get("/api/v1/progress", "wrong")->status, 401);
  EXPECT_EQ(get("/api/v1/progress", "tok-w1")->status, 200);
  EXPECT_EQ(post("/api/v1/assignments", {{"dialogue_id", "c01-d000"}, {"worker", "w1"}}, "tok-w1")->status, 403);
  EXPECT_EQ(post("/api/v1/assignments", {{"dialogue_id", "c01-d000"}, {"worker", "w1"}}, "tok-admin")->status, 200);
  EXPECT_EQ(get("/api/v1/export", "tok-w1")->status, 403);
  EXPECT_EQ(client->Get("/")->status, 200);
  EXPECT_THROW(parse_tokens(nlohmann::json{{"t", 3}}), Error);
}

TEST_F(ReviewServerTest, WorkflowOverHttp) {
  post("/api/v1/assignments", {{"dialogue_id", "c01-d000"}, {"worker", "w1"}}, "tok-admin");
  auto mine = nlohmann::json::parse(get("/api/v1/assignments", "tok-w1")->body);
  ASSERT_EQ(mine["assignments"].size(), 1u);

  auto ref = post("/api/v1/refinements", {{"dialogue_id", "c01-d000"}, {"turn", 1}, {"emotion", "希望"}}, "tok-w1");
  EXPECT_EQ(ref->status, 200);
  auto view = nlohmann::json::parse(get("/api/v1/dialogues/c01-d000", "tok-w1")->body);
  EXPECT_EQ(view["turns"][1]["emotion"], "hope");
  EXPECT_EQ(get("/api/v1/dialogues/nope", "tok-w1")->status, 404);

  nlohmann::json bad = {{"dialogue_id", "c01-d000"}, {"turn", 0},        {"variant", "raw"},  {"EmoCategory", 1},
                        {"EmoMatch", 9},             {"SettingMatch", 3}, {"EmoIntensity", 1}, {"Coherence", 3},
                        {"Fluency", 3}};
  auto rej = post("/api/v1/ratings", bad, "tok-w1");
  EXPECT_EQ(rej->status, 422);
  EXPECT_EQ(nlohmann::json::parse(rej->body)["field"], "EmoMatch");
  bad["EmoMatch"] = 4;
  EXPECT_EQ(post("/api/v1/ratings", bad, "tok-w1")->status, 200);

  auto agg = nlohmann::json::parse(get("/api/v1/stats/aggregate?delta_base=before", "tok-w1")->body);
  EXPECT_EQ(agg["raw"]["n"], 1);
  EXPECT_EQ(agg["refined"]["status"], "empty");
  EXPECT_EQ(get("/api/v1/stats/aggregate?delta_base=sideways", "tok-w1")->status, 422);
  EXPECT_EQ(get("/api/v1/stats/correlation?dimension=EmoMatch&permutations=10", "tok-w1")->status, 422);
  auto corr = nlohmann::json::parse(get("/api/v1/stats/correlation?dimension=EmoMatch", "tok-w1")->body);
  EXPECT_TRUE(corr["pairs"].empty());

  EXPECT_EQ(get("/api/v1/export", "tok-admin")->status, 409);
  EXPECT_EQ(post("/api/v1/assignments/c01-d000/status", {{"status", "done"}}, "tok-w1")->status, 200);
  auto exported = get("/api/v1/export?partial=true", "tok-admin");
  ASSERT_EQ(exported->status, 200);
  auto parsed = parse_corpus(exported->body);
  ASSERT_EQ(parsed.dialogues.size(), 1u);
  EXPECT_EQ(parsed.dialogues[0].turns[1].emotion, Emotion::hope);

  auto audit = nlohmann::json::parse(get("/api/v1/audit?rate=1&seed=2", "tok-admin")->body);
  EXPECT_EQ(audit["dialogue_ids"], nlohmann::json::array({"c01-d000"}));
  auto progress = nlohmann::json::parse(get("/api/v1/progress", "tok-admin")->body);
  EXPECT_EQ(progress["workers"]["w1"]["done"], 1);
}

}  // namespace
}  // namespace catbear
