#include "catbear/offline_model.hpp"

#include <string>
#include <string_view>

#include "catbear/dialogue.hpp"
#include "catbear/emotion_space.hpp"
#include "catbear/eval_harness.hpp"
#include "catbear/prompts.hpp"

namespace catbear {
namespace {

constexpr std::string_view kBank[kEmotionCount][3] = {
    {"太好了，今天真是让人开心的一天！", "听你这么说我心里特别高兴。", "哈哈，这下终于可以松口气了。"},
    {"唉，我有点难过，事情怎么会变成这样。", "想到这些我心里就空落落的。", "我真的很舍不得。"},
    {"这也太过分了，我没法接受！", "你怎么能这样对我？", "我已经忍了很久了，真的很生气。"},
    {"又是这些，真没意思。", "我们能不能聊点别的？", "时间过得好慢啊。"},
    {"这件事不容易，但我想试一试。", "难度不小，我得好好准备。", "来吧，我们一起把它拿下。"},
    {"说不定明天就会好起来。", "我觉得还有机会，别放弃。", "要是这次能成功就好了。"},
    {"我有点害怕，万一出事怎么办？", "这里让我心里发毛。", "我不敢想接下来会发生什么。"},
    {"这个挺有意思的，你再多讲讲？", "我以前没注意过，想了解一下。", "听起来很新鲜，具体是怎么回事？"},
    {"就这点水平也好意思拿出来？", "哼，我早就看透他了。", "这种做法真让人瞧不起。"},
    {"太恶心了，我受不了这个。", "别再提了，想想就反胃。", "这种事我真的看不下去。"},
    {"怎么试了这么多次还是不行。", "我已经尽力了，可还是卡在这里。", "真让人泄气。"},
    {"啊？真的假的？", "没想到会是这样！", "这也太突然了吧。"},
    {"这是我自己一点点做出来的。", "能做到这一步，我挺为自己骄傲的。", "大家都说我这次表现得很好。"},
    {"让大家看到我这样，真不好意思。", "我都不知道该把脸往哪儿放了。", "这太丢人了。"},
    {"都怪我，要是我早点说就好了。", "对不起，是我让你受委屈了。", "我心里一直过意不去。"},
};

std::uint64_t hash_of(const GenerationRequest& req) {
  return std::stoull(prompt_hash(req).substr(0, 16), nullptr, 16);
}


bool mentions(const GenerationRequest& req, std::string_view tag) {
  for (const auto& m : req.messages) {
    if (m.content.find(tag) != std::string::npos) return true;
  }
  return false;
}

std::string scene_reply(const GenerationRequest& req) {
  // The first user message carries the construal line.
  std::string_view text = req.messages.size() > 1 ? std::string_view(req.messages[1].content) : "";
  constexpr std::string_view key = "基础情境：";
  auto p = text.find(key);
  std::string base = "一件日常小事";
  if (p != std::string_view::npos) {
    auto start = p + key.size();
    auto end = text.find("（", start);
    if (end == std::string_view::npos) end = text.find('\n', start);
    base = std::string(text.substr(start, end - start));
  }
  return "AA和BB下班后在小区楼下碰面，聊起了最近的一件事：" + base;
}

std::string belief_reply(std::uint64_t h) {
  static constexpr std::string_view kEmpirical[] = {"努力总会有回报", "生活中的小事也值得认真对待",
                                                    "规则应该被遵守"};
  static constexpr std::string_view kRelational[] = {"对方是值得信任的朋友", "对方有时说话不太顾及别人",
                                                     "对方一直很照顾自己"};
  static constexpr std::string_view kConceptual[] = {"真诚是人与人相处的基础", "每个人都应该为自己的选择负责",
                                                     "和气才能生财"};
  static constexpr std::string_view kKnowledge[] = {"这件事如果处理不好会影响两人的关系",
                                                    "这次机会对自己的发展很重要", "对方最近压力很大"};
  nlohmann::ordered_json j;
  j["empirical"] = {std::string(kEmpirical[h % 3])};
  j["relational"] = {std::string(kRelational[(h >> 8) % 3])};
  j["conceptual"] = {std::string(kConceptual[(h >> 16) % 3])};
  j["knowledge"] = {std::string(kKnowledge[(h >> 24) % 3])};
  return j.dump();
}

Emotion pick_emotion(std::uint64_t h) { return all_emotions()[h % kEmotionCount]; }

std::string pick_utterance(Emotion e, std::uint64_t h) { return std::string(kBank[index_of(e)][(h >> 32) % 3]); }

std::string turn_reply(std::uint64_t h, bool with_appraisal) {
  const Emotion e = pick_emotion(h);
  nlohmann::ordered_json j;
  if (with_appraisal) {
    auto levels = quantize(default_space().normalized(e));
    auto& a = j["appraisal"];
    for (Dimension d : all_dimensions()) a[std::string(english_name(d))] = to_string(levels[index_of(d)]);
  }
  j["emotion"] = std::string(chinese_name(e));
  j["utterance"] = pick_utterance(e, h);
  return j.dump();
}

}  // namespace

MockBackend::Responder offline_model_responder() {
  return [](const GenerationRequest& req, std::size_t) -> MockBackend::Step {
    const auto h = hash_of(req);
    if (mentions(req, prompts::kSceneTag)) return MockBackend::Step::ok(scene_reply(req));
    if (mentions(req, prompts::kBeliefTag)) return MockBackend::Step::ok(belief_reply(h));
    if (mentions(req, prompts::kAppraisalTag)) return MockBackend::Step::ok(turn_reply(h, true));
    if (mentions(req, prompts::kDirectTag)) return MockBackend::Step::ok(turn_reply(h, false));

    const Emotion e = pick_emotion(h);
    if (mentions(req, kJointTaskTag)) {
      return MockBackend::Step::ok(std::string(chinese_name(e)) + std::string(kJointSeparator) +
                                   pick_utterance(e, h));
    }
    if (mentions(req, kEmotionTaskTag)) return MockBackend::Step::ok(std::string(chinese_name(e)));
    if (mentions(req, kUtteranceTaskTag)) return MockBackend::Step::ok(pick_utterance(e, h));
    return MockBackend::Step::ok("好的。");
  };
}

std::shared_ptr<MockBackend> make_offline_backend() {
  return std::make_shared<MockBackend>(offline_model_responder(), "offline");
}

}  // namespace catbear
