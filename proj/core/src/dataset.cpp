#include "catbear/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "catbear/error.hpp"
#include "catbear/prompts.hpp"
#include "catbear/tokenizer.hpp"
#include "catbear/util.hpp"

namespace catbear {

// --- tokenizer --------------------------------------------------------------

namespace {

bool ascii_alnum(char32_t c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' || c == 0x3000 ||
         c == 0x00A0;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string run;
  for (char32_t c : utf8_decode(text)) {
    if (ascii_alnum(c)) {
      run.push_back(static_cast<char>(c));
      continue;
    }
    if (!run.empty()) out.push_back(std::exchange(run, {}));
    if (!is_space(c)) out.push_back(utf8_encode(c));
  }
  if (!run.empty()) out.push_back(std::move(run));
  return out;
}

std::size_t count_tokens(std::string_view text) {
  std::size_t n = 0;
  bool in_run = false;
  for (char32_t c : utf8_decode(text)) {
    if (ascii_alnum(c)) {
      if (!in_run) ++n;
      in_run = true;
      continue;
    }
    in_run = false;
    if (!is_space(c)) ++n;
  }
  return n;
}

// --- corpus -----------------------------------------------------------------

void Corpus::refresh_manifest() {
  manifest.n_dialogues = dialogues.size();
  manifest.n_turns = 0;
  for (const auto& d : dialogues) manifest.n_turns += d.turns.size();
}

const Dialogue* Corpus::find(std::string_view dialogue_id) const {
  for (const auto& d : dialogues) {
    if (d.dialogue_id == dialogue_id) return &d;
  }
  return nullptr;
}

Corpus make_corpus(std::vector<Dialogue> dialogues, std::string config_digest) {
  Corpus c;
  c.dialogues = std::move(dialogues);
  c.manifest.config_digest = std::move(config_digest);
  c.refresh_manifest();
  return c;
}

void validate_corpus(const Corpus& corpus) {
  std::set<std::string_view> ids;
  std::size_t turns = 0;
  for (const auto& d : corpus.dialogues) {
    validate_dialogue(d);
    if (!ids.insert(d.dialogue_id).second) {
      fail(ErrorKind::validation, "duplicate dialogue id '" + d.dialogue_id + "'", d.dialogue_id);
    }
    turns += d.turns.size();
  }
  if (corpus.manifest.n_dialogues != corpus.dialogues.size() || corpus.manifest.n_turns != turns) {
    fail(ErrorKind::validation,
         "manifest counts (" + std::to_string(corpus.manifest.n_dialogues) + " dialogues, " +
             std::to_string(corpus.manifest.n_turns) + " turns) differ from body (" +
             std::to_string(corpus.dialogues.size()) + ", " + std::to_string(turns) + ")",
         "manifest");
  }
}

std::string serialize_corpus(const Corpus& corpus) {
  nlohmann::ordered_json m;
  m["schema_version"] = corpus.manifest.schema_version;
  m["config_digest"] = corpus.manifest.config_digest;
  m["n_dialogues"] = corpus.manifest.n_dialogues;
  m["n_turns"] = corpus.manifest.n_turns;
  nlohmann::ordered_json head;
  head["manifest"] = std::move(m);

  std::string out = head.dump() + "\n";
  for (const auto& d : corpus.dialogues) {
    out += to_json(d).dump();
    out += '\n';
  }
  return out;
}

Corpus parse_corpus(std::string_view text) {
  Corpus c;
  bool have_manifest = false;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    ++line_no;
    if (trim(line).empty()) continue;

    const auto where = std::to_string(line_no);
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::parse, "corpus line " + where + " is not valid JSON", where);

    if (!have_manifest) {
      auto m = j.find("manifest");
      if (m == j.end() || !m->is_object()) fail(ErrorKind::format, "corpus line 1 must be the manifest", where);
      int version = m->value("schema_version", -1);
      if (version != kCorpusSchemaVersion) {
        fail(ErrorKind::format,
             "corpus schema version " + std::to_string(version) + " is not supported (expected " +
                 std::to_string(kCorpusSchemaVersion) + ")",
             "schema_version");
      }
      c.manifest.schema_version = version;
      c.manifest.config_digest = m->value("config_digest", "");
      c.manifest.n_dialogues = m->value("n_dialogues", std::size_t{0});
      c.manifest.n_turns = m->value("n_turns", std::size_t{0});
      have_manifest = true;
      continue;
    }
    try {
      c.dialogues.push_back(dialogue_from_json(j));
    } catch (const Error& e) {
      throw Error(e.kind(), "corpus line " + where + ": " + e.message(), where);
    }
  }
  if (!have_manifest) fail(ErrorKind::format, "corpus has no manifest line");
  validate_corpus(c);
  return c;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  validate_corpus(corpus);
  write_file(path, serialize_corpus(corpus));
}

Corpus load_corpus(const std::string& path) { return parse_corpus(read_file(path)); }

// --- splits -----------------------------------------------------------------

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitFractions& f) {
  const std::array<double, 3> frac{f.train, f.validation, f.test};
  double sum = 0.0;
  for (double x : frac) {
    if (!(x >= 0.0)) fail(ErrorKind::input, "split fractions must be non-negative", "fractions");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail(ErrorKind::input, "split fractions must sum to 1", "fractions");

  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    double quota = frac[i] * static_cast<double>(n);
    double whole = std::floor(quota + 1e-9);
    sizes[i] = static_cast<std::size_t>(whole);
    // Rounded so that equal quotas compare equal despite representation noise.
    remainder[i] = std::round((quota - whole) * 1e9) / 1e9;
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];

  for (std::size_t i = 0; i < 3; ++i) {
    if (sizes[i] == 0) {
      static constexpr const char* kNames[] = {"train", "validation", "test"};
      fail(ErrorKind::input, std::string(kNames[i]) + " split would be empty for " + std::to_string(n) + " dialogues",
           kNames[i]);
    }
  }
  return sizes;
}

Corpus split_corpus(Corpus corpus, std::uint64_t seed, const SplitFractions& fractions) {
  const auto sizes = split_sizes(corpus.dialogues.size(), fractions);
  std::vector<std::size_t> order(corpus.dialogues.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return corpus.dialogues[a].dialogue_id < corpus.dialogues[b].dialogue_id;
  });
  Rng rng(derive_seed(seed, 0x5b117));
  shuffle(order, rng);
  for (std::size_t k = 0; k < order.size(); ++k) {
    corpus.dialogues[order[k]].split = k < sizes[0] ? Split::train
                                       : k < sizes[0] + sizes[1] ? Split::validation
                                                                 : Split::test;
  }
  return corpus;
}

// --- statistics -------------------------------------------------------------

CorpusStats compute_stats(const Corpus& corpus) {
  if (corpus.dialogues.empty()) fail(ErrorKind::input, "cannot compute statistics of an empty corpus");
  CorpusStats s;
  std::set<int> situations;
  for (Split sp : {Split::train, Split::validation, Split::test, Split::none}) s.split_sizes[sp] = 0;
  for (const auto& d : corpus.dialogues) {
    ++s.n_dialogs;
    situations.insert(d.construal_id);
    ++s.split_sizes[d.split];
    for (const auto& t : d.turns) {
      ++s.n_utterances;
      s.n_tokens += count_tokens(t.utterance);
      ++s.emotion_histogram[index_of(t.emotion)];
    }
  }
  s.n_situations = situations.size();
  s.avg_utterances_per_dialog = static_cast<double>(s.n_utterances) / static_cast<double>(s.n_dialogs);
  s.avg_tokens_per_dialog = static_cast<double>(s.n_tokens) / static_cast<double>(s.n_dialogs);
  s.avg_tokens_per_utterance =
      s.n_utterances ? static_cast<double>(s.n_tokens) / static_cast<double>(s.n_utterances) : 0.0;
  return s;
}

nlohmann::ordered_json CorpusStats::to_json() const {
  nlohmann::ordered_json j;
  j["n_dialogs"] = n_dialogs;
  j["n_utterances"] = n_utterances;
  j["n_situations"] = n_situations;
  j["n_tokens"] = n_tokens;
  j["avg_utterances_per_dialog"] = avg_utterances_per_dialog;
  j["avg_tokens_per_dialog"] = avg_tokens_per_dialog;
  j["avg_tokens_per_utterance"] = avg_tokens_per_utterance;
  auto& h = j["emotion_histogram"] = nlohmann::ordered_json::object();
  for (Emotion e : all_emotions()) h[std::string(english_name(e))] = emotion_histogram[index_of(e)];
  auto& sp = j["splits"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : split_sizes) sp[std::string(to_string(k))] = v;
  return j;
}

std::string CorpusStats::render_table() const {
  auto count = [&](Split s) {
    auto it = split_sizes.find(s);
    return it == split_sizes.end() ? std::size_t{0} : it->second;
  };
  std::ostringstream o;
  auto row = [&](std::string_view label, const std::string& value) {
    o << label;
    for (std::size_t i = label.size(); i < 32; ++i) o << ' ';
    o << "| " << value << '\n';
  };
  row("# Dialogs", std::to_string(n_dialogs));
  row("# Utterances", std::to_string(n_utterances));
  row("# Situations", std::to_string(n_situations));
  o << std::string(44, '-') << '\n';
  row("Avg. # utterances per dialog", format_fixed(avg_utterances_per_dialog, 1));
  row("Avg. # tokens per dialog", format_fixed(avg_tokens_per_dialog, 1));
  row("Avg. # tokens per utterance", format_fixed(avg_tokens_per_utterance, 1));
  o << std::string(44, '-') << '\n';
  row("# Dialogs in Train Set", std::to_string(count(Split::train)));
  row("# Dialogs in Validation Set", std::to_string(count(Split::validation)));
  row("# Dialogs in Test Set", std::to_string(count(Split::test)));
  if (count(Split::none) > 0) row("# Dialogs without split", std::to_string(count(Split::none)));
  return o.str();
}

std::string CorpusStats::histogram_csv() const {
  std::string out = "emotion,emotion_zh,count,share\n";
  for (Emotion e : all_emotions()) {
    auto n = emotion_histogram[index_of(e)];
    double share = n_utterances ? static_cast<double>(n) / static_cast<double>(n_utterances) : 0.0;
    out += std::string(english_name(e)) + "," + std::string(chinese_name(e)) + "," + std::to_string(n) + "," +
           format_fixed(share, 6) + "\n";
  }
  return out;
}

std::vector<std::string> scan_sensitive(const Corpus& corpus) {
  static const std::vector<std::pair<std::string, std::regex>> kPatterns = {
      {"phone number", std::regex(R"((^|[^0-9])1[3-9][0-9]{9}([^0-9]|$))")},
      {"e-mail address", std::regex(R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})")},
      {"ID-card number", std::regex(R"((^|[^0-9])[1-9][0-9]{16}[0-9Xx]([^0-9]|$))")},
      {"profanity", std::regex("(傻逼|他妈的|操你|fuck|shit)", std::regex::icase)},
  };
  std::vector<std::string> warnings;
  for (const auto& d : corpus.dialogues) {
    for (const auto& t : d.turns) {
      for (const auto& [what, re] : kPatterns) {
        if (std::regex_search(t.utterance, re)) {
          warnings.push_back(d.dialogue_id + " turn " + std::to_string(t.index) + ": possible " + what);
        }
      }
    }
  }
  return warnings;
}

// --- SFT export ---------------------------------------------------------------

std::string_view to_string(SftFormat f) {
  switch (f) {
    case SftFormat::plain: return "plain";
    case SftFormat::conditional: return "conditional";
    case SftFormat::joint: return "joint";
  }
  return "plain";
}

SftFormat parse_sft_format(std::string_view s) {
  if (s == "plain") return SftFormat::plain;
  if (s == "conditional") return SftFormat::conditional;
  if (s == "joint") return SftFormat::joint;
  fail(ErrorKind::input, "unknown SFT format '" + std::string(s) + "' (plain|conditional|joint)", "format");
}

std::string render_context(const Dialogue& d, int cut) {
  if (cut < 0 || cut >= static_cast<int>(d.turns.size())) {
    fail(ErrorKind::input, "cut index " + std::to_string(cut) + " outside dialogue '" + d.dialogue_id + "'");
  }
  const SpeakerId next = d.turns[static_cast<std::size_t>(cut)].speaker;
  std::string out = "对话场景：" + d.scene.narrative + "\n\n";
  out += "下一位说话者：\n" + prompts::render_factors(d.speaker(next), true);
  out += "\n对话另一方：\n" + prompts::render_factors(d.speaker(other(next)), false);
  out += "\n对话历史：\n";
  out += prompts::render_history(std::span(d.turns).first(static_cast<std::size_t>(cut)), false);
  return out;
}

nlohmann::ordered_json SftRecord::to_json() const {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["format"] = to_string(format);
  j["instruction"] = instruction;
  j["input"] = input;
  j["output"] = output;
  j["config_digest"] = config_digest;
  return j;
}

std::vector<SftRecord> build_sft_records(const Corpus& corpus, SftFormat format) {
  const bool any_train = std::any_of(corpus.dialogues.begin(), corpus.dialogues.end(),
                                     [](const Dialogue& d) { return d.split == Split::train; });
  if (!any_train) fail(ErrorKind::input, "corpus has no train-split dialogues; run split first", "split");

  std::string instruction;
  switch (format) {
    case SftFormat::plain:
      instruction = "根据人物的个人因素、对话场景和对话历史，生成下一位说话者符合其情绪和人物设定的回复。";
      break;
    case SftFormat::conditional:
      instruction = "根据人物的个人因素、对话场景、对话历史以及给定的情绪，生成下一位说话者表达该情绪的回复。";
      break;
    case SftFormat::joint:
      instruction = "根据人物的个人因素、对话场景和对话历史，先从以下15种情绪中预测下一位说话者的情绪（" +
                    prompts::emotion_menu() + "），换行后再生成与该情绪一致的回复。";
      break;
  }

  std::vector<SftRecord> out;
  for (const auto& d : corpus.dialogues) {
    if (d.split != Split::train) continue;
    for (std::size_t t = 1; t < d.turns.size(); ++t) {
      const auto& turn = d.turns[t];
      SftRecord r;
      r.id = d.dialogue_id + "#" + std::to_string(t);
      r.format = format;
      r.instruction = instruction;
      r.input = render_context(d, static_cast<int>(t));
      r.config_digest = corpus.manifest.config_digest;
      switch (format) {
        case SftFormat::plain:
          r.output = turn.utterance;
          break;
        case SftFormat::conditional:
          r.input += "\n目标情绪：" + std::string(chinese_name(turn.emotion)) + "\n";
          r.output = turn.utterance;
          break;
        case SftFormat::joint:
          r.output = std::string(chinese_name(turn.emotion)) + std::string(kJointSeparator) + turn.utterance;
          break;
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::size_t export_sft(const Corpus& corpus, SftFormat format, const std::string& path) {
  auto records = build_sft_records(corpus, format);
  std::string body;
  for (const auto& r : records) {
    body += r.to_json().dump();
    body += '\n';
  }
  write_file(path, body);
  return records.size();
}

}  // namespace catbear
