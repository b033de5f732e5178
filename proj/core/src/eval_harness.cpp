#include "catbear/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <set>
#include <thread>

#include "catbear/error.hpp"
#include "catbear/prompts.hpp"
#include "catbear/util.hpp"

namespace catbear {

std::string_view to_string(EvalTask t) {
  switch (t) {
    case EvalTask::emotion: return "emotion";
    case EvalTask::utterance: return "utterance";
    case EvalTask::joint: return "joint";
  }
  return "emotion";
}

EvalTask parse_eval_task(std::string_view s) {
  if (s == "emotion") return EvalTask::emotion;
  if (s == "utterance") return EvalTask::utterance;
  if (s == "joint") return EvalTask::joint;
  fail(ErrorKind::input, "unknown task '" + std::string(s) + "' (emotion|utterance|joint)", "task");
}

// --- instances ----------------------------------------------------------------

namespace {

EvalInstance make_instance(const Dialogue& d, int cut) {
  const auto& t = d.turns[static_cast<std::size_t>(cut)];
  EvalInstance in;
  in.dialogue_id = d.dialogue_id;
  in.cut = cut;
  in.split = d.split;
  in.speaker = t.speaker;
  in.context = render_context(d, cut);
  in.gold_emotion = t.emotion;
  in.gold_utterance = t.utterance;
  return in;
}

}  // namespace

std::vector<EvalInstance> build_instances(const Corpus& corpus, const InstanceOptions& options) {
  std::vector<const Dialogue*> chosen;
  if (!options.dialogue_ids.empty()) {
    for (const auto& id : options.dialogue_ids) {
      const Dialogue* d = corpus.find(id);
      if (!d) fail(ErrorKind::input, "dialogue '" + id + "' is not in the corpus", id);
      if (d->split != options.split) {
        fail(ErrorKind::input,
             "dialogue '" + id + "' belongs to the " + std::string(to_string(d->split)) + " split, not " +
                 std::string(to_string(options.split)),
             id);
      }
      chosen.push_back(d);
    }
  } else {
    for (const auto& d : corpus.dialogues) {
      if (d.split == options.split) chosen.push_back(&d);
    }
  }
  if (chosen.empty()) {
    fail(ErrorKind::input, "the " + std::string(to_string(options.split)) + " split is empty", "split");
  }
  if (options.sample_per_dialogue && *options.sample_per_dialogue < 1) {
    fail(ErrorKind::input, "sample-per-dialogue must be >= 1", "sample_per_dialogue");
  }

  std::vector<EvalInstance> out;
  for (const Dialogue* d : chosen) {
    std::vector<int> cuts;
    for (int t = 1; t < static_cast<int>(d->turns.size()); ++t) cuts.push_back(t);
    if (options.sample_per_dialogue && static_cast<std::size_t>(*options.sample_per_dialogue) < cuts.size()) {
      Rng rng(derive_seed(options.seed, std::stoull(sha256_hex(d->dialogue_id).substr(0, 16), nullptr, 16)));
      shuffle(cuts, rng);
      cuts.resize(static_cast<std::size_t>(*options.sample_per_dialogue));
      std::sort(cuts.begin(), cuts.end());
    }
    for (int t : cuts) out.push_back(make_instance(*d, t));
  }
  return out;
}

std::vector<EvalInstance> select_exemplars(const Corpus& corpus, int k, std::uint64_t seed) {
  if (k < 0) fail(ErrorKind::input, "k must be >= 0", "k");
  if (k == 0) return {};
  InstanceOptions opts;
  opts.split = Split::train;
  auto pool = build_instances(corpus, opts);
  if (pool.size() < static_cast<std::size_t>(k)) {
    fail(ErrorKind::input, "the train split has only " + std::to_string(pool.size()) + " instances", "k");
  }
  Rng rng(derive_seed(seed, 0xe8e3));
  shuffle(pool, rng);
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

std::string reference_answer(EvalTask task, const EvalInstance& in) {
  switch (task) {
    case EvalTask::emotion: return std::string(chinese_name(in.gold_emotion));
    case EvalTask::utterance: return in.gold_utterance;
    case EvalTask::joint:
      return std::string(chinese_name(in.gold_emotion)) + std::string(kJointSeparator) + in.gold_utterance;
  }
  return {};
}

std::vector<ChatMessage> build_kshot_prompt(EvalTask task, const EvalInstance& instance,
                                            const std::vector<EvalInstance>& exemplars) {
  if (instance.split == Split::train) {
    fail(ErrorKind::input, "instance " + instance.id() + " is from the train split", instance.id());
  }
  for (const auto& ex : exemplars) {
    if (ex.split != Split::train) {
      fail(ErrorKind::input, "exemplar " + ex.id() + " is not from the train split", ex.id());
    }
  }

  std::string sys;
  switch (task) {
    case EvalTask::emotion:
      sys = std::string(kEmotionTaskTag) +
            "\n根据对话场景、两位说话者的个人因素（性格、目标、信念、知识）和对话历史，预测下一位说话者此刻的情绪。"
            "情绪必须从以下15种中选择一种：" +
            prompts::emotion_menu() + "。只输出情绪名称。";
      break;
    case EvalTask::utterance:
      sys = std::string(kUtteranceTaskTag) +
            "\n根据对话场景、两位说话者的个人因素（性格、目标、信念、知识）和对话历史，生成下一位说话者的下一句话。"
            "回复要符合说话者的性格、目标和信念，与对话历史连贯。只输出这句话本身。";
      break;
    case EvalTask::joint:
      sys = std::string(kJointTaskTag) +
            "\n根据对话场景、两位说话者的个人因素（性格、目标、信念、知识）和对话历史，先预测下一位说话者的情绪，"
            "情绪必须从以下15种中选择一种：" +
            prompts::emotion_menu() + "。第一行只输出情绪名称，换行后输出与该情绪一致的下一句话。";
      break;
  }

  std::string user;
  for (const auto& ex : exemplars) {
    user += kExampleMarker;
    user += ex.context;
    user += "答案：" + reference_answer(task, ex) + "\n\n";
  }
  user += kQueryMarker;
  user += instance.context;
  return {{Role::system, std::move(sys)}, {Role::user, std::move(user)}};
}

// --- parsing ------------------------------------------------------------------

namespace {

struct Alias {
  Emotion emotion;
  std::vector<std::string_view> english;
  std::vector<std::string_view> chinese;
};

const std::vector<Alias>& alias_table() {
  static const std::vector<Alias> kTable = {
      {Emotion::happiness, {"happiness", "happy", "joy", "joyful"}, {"快乐", "开心", "高兴", "愉快"}},
      {Emotion::sadness, {"sadness", "sad", "sorrow"}, {"悲伤", "难过", "伤心"}},
      {Emotion::anger, {"anger", "angry", "furious"}, {"愤怒", "生气", "恼火"}},
      {Emotion::boredom, {"boredom", "bored", "boring"}, {"无聊", "厌倦"}},
      {Emotion::challenge, {"challenge", "challenged"}, {"挑战"}},
      {Emotion::hope, {"hope", "hopeful"}, {"希望", "期待"}},
      {Emotion::fear, {"fear", "afraid", "scared", "fearful"}, {"恐惧", "害怕"}},
      {Emotion::interest, {"interest", "interested", "curious", "curiosity"}, {"兴趣", "好奇"}},
      {Emotion::contempt, {"contempt", "contemptuous", "scorn"}, {"轻蔑", "鄙视", "不屑"}},
      {Emotion::disgust, {"disgust", "disgusted"}, {"厌恶", "恶心"}},
      {Emotion::frustration, {"frustration", "frustrated"}, {"沮丧", "挫败"}},
      {Emotion::surprise, {"surprise", "surprised"}, {"惊讶", "吃惊", "意外"}},
      {Emotion::pride, {"pride", "proud"}, {"自豪", "骄傲"}},
      {Emotion::shame, {"shame", "ashamed"}, {"羞耻", "羞愧"}},
      {Emotion::guilt, {"guilt", "guilty"}, {"内疚", "愧疚"}},
  };
  return kTable;
}

bool ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

bool contains_word(std::string_view text, std::string_view word) {
  for (auto p = text.find(word); p != std::string_view::npos; p = text.find(word, p + 1)) {
    bool left = p == 0 || !ascii_letter(text[p - 1]);
    bool right = p + word.size() >= text.size() || !ascii_letter(text[p + word.size()]);
    if (left && right) return true;
  }
  return false;
}

std::string_view strip_edges(std::string_view s) {
  static constexpr std::string_view kEdge[] = {"。", "！", "？", "“", "”", "「", "」", "：", "\"", "'", ".", "!",
                                               "?", ":", "*", "`"};
  for (bool changed = true; changed;) {
    changed = false;
    s = trim(s);
    for (auto e : kEdge) {
      if (s.size() >= e.size() && s.substr(0, e.size()) == e) {
        s.remove_prefix(e.size());
        changed = true;
      }
      if (s.size() >= e.size() && s.substr(s.size() - e.size()) == e) {
        s.remove_suffix(e.size());
        changed = true;
      }
    }
  }
  return s;
}

}  // namespace

Prediction parse_emotion_prediction(std::string_view text) {
  const std::string lowered = to_lower_ascii(text);
  const std::string_view core = strip_edges(lowered);
  if (auto e = try_parse_emotion(core)) return e;
  for (const auto& a : alias_table()) {
    for (auto w : a.english) {
      if (contains_word(lowered, w)) return a.emotion;
    }
    for (auto w : a.chinese) {
      if (lowered.find(w) != std::string::npos) return a.emotion;
    }
  }
  return std::nullopt;
}

std::string clean_utterance(std::string_view text) {
  std::string_view s = trim(text);
  for (std::string_view tag : {"AA：", "BB：", "AA:", "BB:", "回复：", "回复:"}) {
    if (s.substr(0, tag.size()) == tag) {
      s = trim(s.substr(tag.size()));
      break;
    }
  }
  for (auto [open, close] : {std::pair<std::string_view, std::string_view>{"“", "”"}, {"\"", "\""}, {"「", "」"}}) {
    if (s.size() >= open.size() + close.size() && s.substr(0, open.size()) == open &&
        s.substr(s.size() - close.size()) == close) {
      s = trim(s.substr(open.size(), s.size() - open.size() - close.size()));
      break;
    }
  }
  return std::string(s);
}

std::pair<Prediction, std::string> parse_joint_prediction(std::string_view text) {
  std::string_view s = trim(text);
  auto sep = s.find(kJointSeparator);
  if (sep == std::string_view::npos) return {parse_emotion_prediction(s), std::string()};
  return {parse_emotion_prediction(s.substr(0, sep)), clean_utterance(s.substr(sep + kJointSeparator.size()))};
}

// --- runs -----------------------------------------------------------------------

namespace {

void parse_result(EvalTask task, InstanceResult& r) {
  r.predicted_emotion.reset();
  r.predicted_utterance.clear();
  if (r.failure) return;
  switch (task) {
    case EvalTask::emotion:
      r.predicted_emotion = parse_emotion_prediction(r.raw);
      break;
    case EvalTask::utterance:
      r.predicted_utterance = clean_utterance(r.raw);
      break;
    case EvalTask::joint: {
      auto [label, utterance] = parse_joint_prediction(r.raw);
      r.predicted_emotion = label;
      r.predicted_utterance = std::move(utterance);
      break;
    }
  }
}

nlohmann::ordered_json result_json(const InstanceResult& r) {
  nlohmann::ordered_json j;
  j["instance_id"] = r.instance_id;
  j["dialogue_id"] = r.dialogue_id;
  j["cut"] = r.cut;
  j["gold_emotion"] = english_name(r.gold_emotion);
  j["gold_utterance"] = r.gold_utterance;
  j["prompt_hash"] = r.prompt_hash;
  j["raw"] = r.raw;
  j["failure"] = r.failure ? nlohmann::ordered_json(*r.failure) : nlohmann::ordered_json(nullptr);
  j["predicted_emotion"] =
      r.predicted_emotion ? nlohmann::ordered_json(english_name(*r.predicted_emotion)) : nlohmann::ordered_json(nullptr);
  j["predicted_utterance"] = r.predicted_utterance;
  return j;
}

template <typename T>
T field(const nlohmann::json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) fail(ErrorKind::schema, std::string("run artifact is missing '") + name + "'", name);
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::schema, std::string("run artifact field '") + name + "' has the wrong type", name);
  }
}

InstanceResult result_from_json(const nlohmann::json& j) {
  InstanceResult r;
  r.instance_id = field<std::string>(j, "instance_id");
  r.dialogue_id = field<std::string>(j, "dialogue_id");
  r.cut = field<int>(j, "cut");
  r.gold_emotion = parse_emotion(field<std::string>(j, "gold_emotion"));
  r.gold_utterance = field<std::string>(j, "gold_utterance");
  r.prompt_hash = field<std::string>(j, "prompt_hash");
  r.raw = field<std::string>(j, "raw");
  if (auto f = j.find("failure"); f != j.end() && f->is_string()) r.failure = f->get<std::string>();
  if (auto p = j.find("predicted_emotion"); p != j.end() && p->is_string()) {
    r.predicted_emotion = parse_emotion(p->get<std::string>());
  }
  r.predicted_utterance = j.value("predicted_utterance", "");
  return r;
}

}  // namespace

nlohmann::ordered_json EvalRun::to_json() const {
  nlohmann::ordered_json j;
  j["task"] = to_string(task);
  j["model"] = model;
  j["k"] = k;
  j["seed"] = seed;
  j["config_digest"] = config_digest;
  j["aborted"] = aborted;
  j["n_instances"] = results.size();
  j["n_failed"] = n_failed;
  j["exemplar_ids"] = exemplar_ids;
  auto& rep = j["report"] = nlohmann::ordered_json::object();
  if (classification) rep["classification"] = classification->to_json();
  if (overlap) rep["overlap"] = overlap->to_json();
  auto& rs = j["results"] = nlohmann::ordered_json::array();
  for (const auto& r : results) rs.push_back(result_json(r));
  return j;
}

EvalRun EvalRun::from_json(const nlohmann::json& j) {
  EvalRun run;
  run.task = parse_eval_task(field<std::string>(j, "task"));
  run.model = field<std::string>(j, "model");
  run.k = field<int>(j, "k");
  run.seed = field<std::uint64_t>(j, "seed");
  run.config_digest = field<std::string>(j, "config_digest");
  run.aborted = j.value("aborted", false);
  run.n_failed = j.value("n_failed", std::size_t{0});
  run.exemplar_ids = field<std::vector<std::string>>(j, "exemplar_ids");
  if (auto rep = j.find("report"); rep != j.end() && rep->is_object()) {
    if (rep->contains("classification")) run.classification = ClassificationReport::from_json(rep->at("classification"));
    if (rep->contains("overlap")) run.overlap = OverlapReport::from_json(rep->at("overlap"));
  }
  for (const auto& r : field<nlohmann::json>(j, "results")) run.results.push_back(result_from_json(r));
  return run;
}

void rescore(EvalRun& run, const AppraisalSpace& space, EmbeddingBackend* embedding) {
  std::vector<LabelPair> labels;
  std::vector<TextPair> texts;
  run.n_failed = 0;
  for (auto& r : run.results) {
    parse_result(run.task, r);
    if (r.failure) {
      ++run.n_failed;
      continue;
    }
    labels.push_back({r.gold_emotion, r.predicted_emotion});
    texts.push_back({r.predicted_utterance, r.gold_utterance});
  }
  run.classification.reset();
  run.overlap.reset();
  if (labels.empty()) return;
  if (run.task != EvalTask::utterance) run.classification = classification_report(labels, space);
  if (run.task != EvalTask::emotion) run.overlap = overlap_report(texts, embedding);
}

void save_run(const EvalRun& run, const std::string& path) { write_file(path, run.to_json().dump(2) + "\n"); }

EvalRun load_run(const std::string& path) {
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::parse, "run artifact '" + path + "' is not valid JSON", path);
  return EvalRun::from_json(j);
}

EvalRun run_task(Gateway& gateway, const Corpus& corpus, const AppraisalSpace& space, const EvalOptions& options) {
  const auto instances = build_instances(corpus, options.instances);
  const auto exemplars = select_exemplars(corpus, options.k, options.seed);

  EvalRun run;
  run.task = options.task;
  run.model = gateway.config().model;
  run.k = options.k;
  run.seed = options.seed;
  run.config_digest = options.config_digest;
  for (const auto& ex : exemplars) run.exemplar_ids.push_back(ex.id());
  run.results.resize(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto& r = run.results[i];
    const auto& in = instances[i];
    r.instance_id = in.id();
    r.dialogue_id = in.dialogue_id;
    r.cut = in.cut;
    r.gold_emotion = in.gold_emotion;
    r.gold_utterance = in.gold_utterance;
    r.failure = "not attempted";
  }

  const double allowed = options.max_failure_rate * static_cast<double>(instances.size());
  std::atomic<std::size_t> next{0}, failed{0};
  std::atomic<bool> stop{false};
  std::mutex err_mu;
  std::optional<Error> fatal;

  auto work = [&] {
    for (std::size_t i; !stop && (i = next.fetch_add(1)) < instances.size();) {
      auto& r = run.results[i];
      try {
        auto req = gateway.make_request(build_kshot_prompt(options.task, instances[i], exemplars));
        auto res = gateway.complete(req);
        r.raw = res.text;
        r.prompt_hash = res.prompt_hash;
        r.failure.reset();
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::transport) {
          r.failure = e.what();
          if (static_cast<double>(++failed) > allowed) stop = true;
          continue;
        }
        std::lock_guard lock(err_mu);
        if (!fatal) fatal = e;
        r.failure = e.what();
        stop = true;
      }
    }
  };

  const int workers = std::max(1, options.workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  const bool too_many = static_cast<double>(failed.load()) > allowed;
  if (fatal || too_many) {
    run.aborted = true;
    rescore(run, space, options.embedding);
    if (!options.artifact_path.empty()) save_run(run, options.artifact_path);
    if (fatal) throw Error(fatal->kind(), std::string("evaluation aborted: ") + fatal->message(), options.artifact_path);
    fail(ErrorKind::transport,
         "evaluation aborted: " + std::to_string(failed.load()) + " of " + std::to_string(instances.size()) +
             " instances failed in transport",
         options.artifact_path);
  }

  rescore(run, space, options.embedding);
  if (!options.artifact_path.empty()) save_run(run, options.artifact_path);
  return run;
}

}  // namespace catbear
