#include "catbear/prompts.hpp"

namespace catbear::prompts {
namespace {

void append_list(std::string& out, std::string_view title, const std::vector<std::string>& items) {
  out += "- ";
  out += title;
  out += "：";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += "；";
    out += items[i];
  }
  out += "\n";
}

// Dimension explanations, in walk order.
constexpr std::string_view kDimensionHelp[kDimensionCount] = {
    "当前情境让你感到多么不愉快",
    "你预期需要付出多少身体或心理上的努力来应对当前情境",
    "你想多大程度地关注当前情境，还是想回避、不去理会它",
    "你对正在发生的事情以及接下来会发生什么有多确定",
    "你觉得当前情境在多大程度上由你自己掌控（而不是由他人或环境决定）",
    "你认为自己需要为当前情境承担多少责任",
};

}  // namespace

std::string emotion_menu() {
  std::string out;
  for (Emotion e : all_emotions()) {
    if (!out.empty()) out += "、";
    out += chinese_name(e);
  }
  return out;
}

std::string render_factors(const SpeakerProfile& s, bool with_beliefs) {
  std::string out(to_string(s.id));
  out += "：\n- 性格：" + s.personality.describe() + "\n";
  out += "- 目标：" + s.goals.describe() + "\n";
  if (!s.construal_view.empty()) out += "- 对情境的理解：" + s.construal_view + "\n";
  if (with_beliefs && !s.beliefs.empty()) {
    append_list(out, "经验信念", s.beliefs.empirical);
    append_list(out, "关系信念", s.beliefs.relational);
    append_list(out, "观念信念", s.beliefs.conceptual);
    append_list(out, "知识", s.beliefs.knowledge);
  }
  return out;
}

std::string render_history(std::span<const Turn> turns, bool with_emotions) {
  std::string out;
  for (const auto& t : turns) {
    out += to_string(t.speaker);
    if (with_emotions) {
      out += "（";
      out += chinese_name(t.emotion);
      out += "）";
    }
    out += "：" + t.utterance + "\n";
  }
  return out;
}

std::vector<ChatMessage> scene_expansion(const SituationalConstrual& c, const SpeakerProfile& a,
                                         const SpeakerProfile& b) {
  std::string user(kSceneTag);
  user += "\n基础情境：" + c.text_zh + "（" + c.text_en + "）\n";
  for (const auto* s : {&a, &b}) {
    user += std::string(to_string(s->id)) + "：性格" + s->personality.describe() + "；" + s->goals.describe() + "\n";
  }
  user +=
      "请结合两人的性格和目标，把基础情境扩展为一个具体的对话场景，用1到3句中文描述"
      "（例如两人在哪里、正在做什么、在讨论什么）。用AA和BB指代两人。只输出场景描述，不要输出其他内容。";
  return {{Role::system, "你是一名擅长设计中文日常对话情境的编剧。"}, {Role::user, std::move(user)}};
}

std::vector<ChatMessage> belief_generation(const SpeakerProfile& speaker, const SpeakerProfile& partner,
                                           const ExpandedScene& scene) {
  std::string sys(kBeliefTag);
  sys +=
      "\n你将根据人物的性格、目标和所处情境，生成该人物在本次对话中持有的个人信念和知识。"
      "信念是人物认为规范上可接受、可行且正当的东西，分为三类：\n"
      "1. 经验信念（empirical）：对事物或其价值的看法；\n"
      "2. 关系信念（relational）：对某人（尤其是对话另一方）的信任与看法；\n"
      "3. 观念信念（conceptual）：所相信的观念或叙事。\n"
      "知识（knowledge）指人物对当前情境中潜在利害的理解，它会影响人物把情境评价为有利还是不利。\n"
      "生成的内容必须与人物的性格、目标和情境一致。每一类给出1到3条简短的中文陈述。\n"
      "只输出一个JSON对象，格式为："
      "{\"empirical\": [\"…\"], \"relational\": [\"…\"], \"conceptual\": [\"…\"], \"knowledge\": [\"…\"]}";

  std::string user = "对话场景：" + scene.narrative + "\n\n需要生成信念和知识的人物：\n";
  user += render_factors(speaker, false);
  user += "\n对话另一方：\n" + render_factors(partner, false);
  return {{Role::system, std::move(sys)}, {Role::user, std::move(user)}};
}

std::string appraisal_guideline() {
  std::string sys(kAppraisalTag);
  sys +=
      "\n你将扮演对话中的下一位说话者。根据认知评价理论，情绪来自个体依据自身因素（性格、目标、信念、知识和对情境的理解）"
      "对外部刺激的评价。请结合说话者的个人因素和对话历史，按以下顺序逐一判断六个评价维度的程度（low/medium/high），"
      "顺序不可调换：\n";
  for (Dimension d : all_dimensions()) {
    sys += std::to_string(index_of(d) + 1) + ". " + std::string(chinese_name(d)) + "（" +
           std::string(english_name(d)) + "）：" + std::string(kDimensionHelp[index_of(d)]) + "；\n";
  }
  sys += "完成评价后，从以下15种情绪中选出说话者此刻最可能产生的一种：" + emotion_menu() +
         "。\n最后生成一句与该情绪一致、符合说话者个人因素和对话历史的中文口语化回复。\n"
         "只输出一个JSON对象，格式为：{\"appraisal\": {";
  for (Dimension d : all_dimensions()) {
    if (d != Dimension::unpleasantness) sys += ", ";
    sys += "\"" + std::string(english_name(d)) + "\": \"low|medium|high\"";
  }
  sys += "}, \"emotion\": \"情绪\", \"utterance\": \"回复\"}";
  return sys;
}

std::string direct_guideline() {
  std::string sys(kDirectTag);
  sys += "\n你将扮演对话中的下一位说话者。请结合说话者的个人因素和对话历史，从以下15种情绪中选出说话者此刻的情绪：" +
         emotion_menu() +
         "。然后生成一句与该情绪一致的中文口语化回复。\n"
         "只输出一个JSON对象，格式为：{\"emotion\": \"情绪\", \"utterance\": \"回复\"}";
  return sys;
}

std::vector<ChatMessage> turn_generation(Ablation mode, const Dialogue& so_far, SpeakerId next) {
  const bool beliefs = mode != Ablation::no_belief;
  std::string user = "对话场景：" + so_far.scene.narrative + "\n\n";
  user += "下一位说话者：\n" + render_factors(so_far.speaker(next), beliefs);
  user += "\n对话另一方：\n" + render_factors(so_far.speaker(other(next)), false);
  user += "\n对话历史：\n";
  user += so_far.turns.empty() ? std::string("（对话尚未开始，请由") + std::string(to_string(next)) + "开启话题）\n"
                               : render_history(so_far.turns, true);
  user += "\n请生成" + std::string(to_string(next)) + "的下一句话。";
  std::string sys = mode == Ablation::no_appraisal ? direct_guideline() : appraisal_guideline();
  return {{Role::system, std::move(sys)}, {Role::user, std::move(user)}};
}

std::string correction(std::string_view problem) {
  return "你的上一条回答无法使用：" + std::string(problem) + "。请严格按照要求的JSON格式重新回答，只输出JSON对象。";
}

}  // namespace catbear::prompts
