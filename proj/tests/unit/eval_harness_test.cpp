#include <gtest/gtest.h>

#include <filesystem>

#include "catbear/error.hpp"
#include "catbear/eval_harness.hpp"
#include "support/fixtures.hpp"

namespace catbear {
namespace {

using Step = MockBackend::Step;

class EvalTest : public ::testing::Test {
 protected:
  void SetUp() override {
    corpus = split_corpus(testing::make_corpus_of(20, 10), 1);
    for (const auto& d : corpus.dialogues) {
      if (d.split == Split::test) test_id = d.dialogue_id;
    }
    instances = build_instances(corpus);
  }

  EvalRun run_with(MockBackend::Responder responder, EvalTask task, int k = 0, int workers = 4) {
    Gateway gw(std::make_shared<MockBackend>(std::move(responder)), testing::fast_config());
    EvalOptions o;
    o.task = task;
    o.k = k;
    o.workers = workers;
    return run_task(gw, corpus, default_space(), o);
  }

  Corpus corpus;
  std::string test_id;
  std::vector<EvalInstance> instances;
};

TEST_F(EvalTest, InstancesCoverEveryNonOpeningTurn) {
  ASSERT_EQ(instances.size(), 9u);
  EXPECT_EQ(instances[0].dialogue_id, test_id);
  EXPECT_EQ(instances[0].cut, 1);
  EXPECT_EQ(instances[0].id(), test_id + "#1");
  EXPECT_EQ(instances[0].speaker, SpeakerId::BB);
  // one turn of history at cut 1
  EXPECT_NE(instances[0].context.find("第0句"), std::string::npos);
  EXPECT_EQ(instances[0].context.find("第1句"), std::string::npos);
  EXPECT_EQ(instances[8].gold_utterance, "第9句：" + test_id);
  EXPECT_EQ(instances[8].context, render_context(*corpus.find(test_id), 9));
}

TEST_F(EvalTest, InstanceSelectionErrors) {
  InstanceOptions o;
  o.split = Split::none;
  EXPECT_THROW(build_instances(corpus, o), Error);
  o.split = Split::test;
  o.dialogue_ids = {"missing"};
  EXPECT_THROW(build_instances(corpus, o), Error);
  o.dialogue_ids = {corpus.dialogues[0].split == Split::train ? corpus.dialogues[0].dialogue_id
                                                              : corpus.dialogues[1].dialogue_id};
  EXPECT_THROW(build_instances(corpus, o), Error);
  o.dialogue_ids = {test_id};
  EXPECT_EQ(build_instances(corpus, o).size(), 9u);
}

TEST_F(EvalTest, SampledCutsAreSeededAndSorted) {
  InstanceOptions o;
  o.split = Split::train;
  o.sample_per_dialogue = 3;
  o.seed = 5;
  auto a = build_instances(corpus, o);
  auto b = build_instances(corpus, o);
  ASSERT_EQ(a.size(), 18u * 3u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id(), b[i].id());
  EXPECT_LT(a[0].cut, a[1].cut);
  EXPECT_LT(a[1].cut, a[2].cut);
}

TEST_F(EvalTest, ExemplarsComeFromTrainDeterministically) {
  auto a = select_exemplars(corpus, 4, 9);
  auto b = select_exemplars(corpus, 4, 9);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a[i].id(), b[i].id());
    EXPECT_EQ(a[i].split, Split::train);
  }
  EXPECT_TRUE(select_exemplars(corpus, 0, 9).empty());
  EXPECT_THROW(select_exemplars(corpus, -1, 9), Error);
  EXPECT_THROW(select_exemplars(corpus, 10000, 9), Error);
}

TEST_F(EvalTest, PromptLayout) {
  auto zero = build_kshot_prompt(EvalTask::emotion, instances[0], {});
  ASSERT_EQ(zero.size(), 2u);
  EXPECT_EQ(zero[0].role, Role::system);
  EXPECT_EQ(zero[0].content.rfind(kEmotionTaskTag, 0), 0u);
  for (Emotion e : all_emotions()) EXPECT_NE(zero[0].content.find(chinese_name(e)), std::string::npos);
  EXPECT_EQ(zero[1].content, std::string(kQueryMarker) + instances[0].context);

  auto ex = select_exemplars(corpus, 4, 3);
  auto four = build_kshot_prompt(EvalTask::joint, instances[0], ex);
  EXPECT_EQ(four, build_kshot_prompt(EvalTask::joint, instances[0], ex));
  std::size_t blocks = 0;
  for (auto p = four[1].content.find(kExampleMarker); p != std::string::npos;
       p = four[1].content.find(kExampleMarker, p + 1)) {
    ++blocks;
  }
  EXPECT_EQ(blocks, 4u);
  EXPECT_NE(four[1].content.find("答案：" + reference_answer(EvalTask::joint, ex[0])), std::string::npos);
  // the query's gold never appears in its own prompt
  EXPECT_EQ(four[1].content.find(instances[0].gold_utterance), std::string::npos);

  auto utt = build_kshot_prompt(EvalTask::utterance, instances[0], {});
  EXPECT_EQ(utt[0].content.find("惊讶"), std::string::npos);
}

TEST_F(EvalTest, LeakageGuard) {
  auto train = select_exemplars(corpus, 1, 0);
  EXPECT_THROW(build_kshot_prompt(EvalTask::emotion, train[0], {}), Error);
  EXPECT_THROW(build_kshot_prompt(EvalTask::emotion, instances[0], {instances[1]}), Error);
}

TEST(EvalParsing, EmotionPredictions) {
  EXPECT_EQ(parse_emotion_prediction("悲伤"), Emotion::sadness);
  EXPECT_EQ(parse_emotion_prediction("  悲伤。 "), Emotion::sadness);
  EXPECT_EQ(parse_emotion_prediction("I think the emotion is: Fear."), Emotion::fear);
  EXPECT_EQ(parse_emotion_prediction("**Guilt**"), Emotion::guilt);
  EXPECT_EQ(parse_emotion_prediction("他有点难过"), Emotion::sadness);
  EXPECT_EQ(parse_emotion_prediction("melancholy"), std::nullopt);
  EXPECT_EQ(parse_emotion_prediction("fearless"), std::nullopt);
  EXPECT_EQ(parse_emotion_prediction(""), std::nullopt);
}

TEST(EvalParsing, UtterancesAndJoint) {
  EXPECT_EQ(clean_utterance("  BB：“好啊，一起去吧。” "), "好啊，一起去吧。");
  EXPECT_EQ(clean_utterance("回复：没问题"), "没问题");
  auto [label, utt] = parse_joint_prediction("希望\nAA：下次一定行。");
  EXPECT_EQ(label, Emotion::hope);
  EXPECT_EQ(utt, "下次一定行。");
  auto [l2, u2] = parse_joint_prediction("不知道");
  EXPECT_EQ(l2, std::nullopt);
  EXPECT_EQ(u2, "");
}

TEST_F(EvalTest, GoldEchoReachesMaxima) {
  for (EvalTask task : {EvalTask::emotion, EvalTask::utterance, EvalTask::joint}) {
    auto run = run_with(testing::echo_responder(instances, [task](const EvalInstance& in) {
                          return reference_answer(task, in);
                        }),
                        task, 2);
    EXPECT_EQ(run.results.size(), 9u);
    EXPECT_EQ(run.n_failed, 0u);
    EXPECT_EQ(run.exemplar_ids.size(), 2u);
    if (task != EvalTask::utterance) {
      ASSERT_TRUE(run.classification);
      EXPECT_DOUBLE_EQ(run.classification->accuracy, 1.0);
      EXPECT_DOUBLE_EQ(run.classification->mean_cat_dist, 0.0);
      EXPECT_DOUBLE_EQ(run.classification->macro_f1_observed, 1.0);
    } else {
      EXPECT_FALSE(run.classification);
    }
    if (task != EvalTask::emotion) {
      ASSERT_TRUE(run.overlap);
      EXPECT_DOUBLE_EQ(run.overlap->bleu1, 100.0);
      EXPECT_DOUBLE_EQ(run.overlap->bleu2, 100.0);
      EXPECT_DOUBLE_EQ(run.overlap->rougeL, 100.0);
    } else {
      EXPECT_FALSE(run.overlap);
    }
  }
}

TEST_F(EvalTest, AlwaysWrongScoresZero) {
  auto run = run_with(testing::echo_responder(instances,
                                              [](const EvalInstance& in) {
                                                auto i = (index_of(in.gold_emotion) + 1) % kEmotionCount;
                                                return std::string(english_name(all_emotions()[i]));
                                              }),
                      EvalTask::emotion);
  ASSERT_TRUE(run.classification);
  EXPECT_DOUBLE_EQ(run.classification->accuracy, 0.0);
  EXPECT_DOUBLE_EQ(run.classification->macro_f1, 0.0);
  EXPECT_GT(run.classification->mean_cat_dist, 0.0);
}

TEST_F(EvalTest, WorkerCountDoesNotChangeResults) {
  auto answer = [](const EvalInstance& in) { return std::string(english_name(in.gold_emotion)); };
  auto one = run_with(testing::echo_responder(instances, answer), EvalTask::emotion, 3, 1);
  auto many = run_with(testing::echo_responder(instances, answer), EvalTask::emotion, 3, 4);
  EXPECT_EQ(one.to_json(), many.to_json());
}

TEST_F(EvalTest, RescoreAfterReloadIsExact) {
  auto run = run_with(testing::echo_responder(instances,
                                              [](const EvalInstance& in) {
                                                return in.cut % 3 == 0 ? std::string("说不清")
                                                                       : "我觉得是" + std::string(chinese_name(
                                                                                         in.gold_emotion)) +
                                                                             "\n" + in.gold_utterance.substr(3);
                                              }),
                      EvalTask::joint, 1);
  auto path = testing::temp_path("run.json");
  save_run(run, path);
  auto loaded = load_run(path);
  EXPECT_EQ(loaded.to_json(), run.to_json());
  auto report = *loaded.classification;
  auto overlap = *loaded.overlap;
  loaded.classification.reset();
  loaded.overlap.reset();
  rescore(loaded, default_space());
  EXPECT_EQ(*loaded.classification, report);
  EXPECT_EQ(*loaded.overlap, overlap);
  EXPECT_EQ(report.n_unparseable, 3u);
}

TEST_F(EvalTest, TransportFailuresAbortWithPartialArtifact) {
  Gateway gw(std::make_shared<MockBackend>(MockBackend::Responder([](const GenerationRequest& req, std::size_t) {
               return testing::query_of(req).find("第3句") != std::string::npos ? Step::ok("快乐")
                                                                                : Step::transient("down");
             })),
             [] {
               auto c = testing::fast_config();
               c.retry_cap = 1;
               return c;
             }());
  EvalOptions o;
  o.workers = 2;
  o.artifact_path = testing::temp_path("partial.json");
  try {
    run_task(gw, corpus, default_space(), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::transport);
    EXPECT_EQ(e.detail(), o.artifact_path);
  }
  ASSERT_TRUE(std::filesystem::exists(o.artifact_path));
  auto partial = load_run(o.artifact_path);
  EXPECT_TRUE(partial.aborted);
  EXPECT_EQ(partial.results.size(), 9u);
  EXPECT_GE(partial.n_failed, 2u);
  for (const auto& r : partial.results) EXPECT_EQ(r.failure.has_value(), r.raw.empty());
}

TEST_F(EvalTest, FewTransportFailuresAreTolerated) {
  Gateway gw(std::make_shared<MockBackend>(MockBackend::Responder([](const GenerationRequest& req, std::size_t) {
               return testing::query_of(req).find("第8句") != std::string::npos ? Step::transient("down")
                                                                                : Step::ok("快乐");
             })),
             testing::fast_config());
  EvalOptions o;
  o.max_failure_rate = 0.2;
  auto run = run_task(gw, corpus, default_space(), o);
  EXPECT_FALSE(run.aborted);
  EXPECT_EQ(run.n_failed, 1u);
  EXPECT_EQ(run.classification->n, 8u);
}

TEST(EvalTask, Names) {
  EXPECT_EQ(parse_eval_task("joint"), EvalTask::joint);
  EXPECT_EQ(to_string(EvalTask::utterance), "utterance");
  EXPECT_THROW(parse_eval_task("emotions"), Error);
}

}  // namespace
}  // namespace catbear
