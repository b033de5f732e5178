#include "catbear/situation.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "catbear/error.hpp"
#include "catbear/llm_gateway.hpp"
#include "catbear/prompts.hpp"
#include "catbear/util.hpp"
#include "embedded_assets.hpp"

namespace catbear {

std::vector<SituationalConstrual> parse_catalog(std::string_view jsonl) {
  std::vector<SituationalConstrual> out;
  std::set<int> seen;
  std::size_t line_no = 0, pos = 0;
  while (pos < jsonl.size()) {
    auto eol = jsonl.find('\n', pos);
    auto line = jsonl.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? jsonl.size() : eol + 1;
    ++line_no;
    if (trim(line).empty()) continue;

    const std::string where = "catalog line " + std::to_string(line_no);
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(ErrorKind::data, where + ": not a JSON object", where);
    SituationalConstrual c;
    try {
      c.id = j.at("id").get<int>();
      c.text_zh = j.at("text_zh").get<std::string>();
      c.text_en = j.at("text_en").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::data, where + ": " + e.what(), where);
    }
    if (c.text_zh.empty() || c.text_en.empty()) fail(ErrorKind::data, where + ": empty text", where);
    if (c.id < 1 || c.id > kConstrualCount) {
      fail(ErrorKind::data, where + ": id " + std::to_string(c.id) + " out of range", where);
    }
    if (!seen.insert(c.id).second) {
      fail(ErrorKind::data, where + ": duplicate id " + std::to_string(c.id), where);
    }
    out.push_back(std::move(c));
  }
  if (out.size() != static_cast<std::size_t>(kConstrualCount)) {
    fail(ErrorKind::data, "catalog has " + std::to_string(out.size()) + " entries, expected 89");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].id != static_cast<int>(i) + 1) {
      fail(ErrorKind::data, "catalog ids must be listed in order 1..89; entry " + std::to_string(i + 1) +
                                " has id " + std::to_string(out[i].id));
    }
  }
  return out;
}

std::vector<SituationalConstrual> load_catalog_file(const std::string& path) {
  return parse_catalog(read_file(path));
}

std::string serialize_catalog(const std::vector<SituationalConstrual>& catalog) {
  std::string out;
  for (const auto& c : catalog) {
    nlohmann::ordered_json j;
    j["id"] = c.id;
    j["text_zh"] = c.text_zh;
    j["text_en"] = c.text_en;
    out += j.dump();
    out += '\n';
  }
  return out;
}

const std::vector<SituationalConstrual>& load_catalog() {
  static const std::vector<SituationalConstrual> kCatalog = parse_catalog(assets::situations_jsonl());
  return kCatalog;
}

const SituationalConstrual& construal(int id) {
  if (id < 1 || id > kConstrualCount) {
    fail(ErrorKind::input, "construal id must be in [1, 89], got " + std::to_string(id), "construal_id");
  }
  return load_catalog()[static_cast<std::size_t>(id - 1)];
}

ExpandedScene expand_scene(Gateway& gateway, const SituationalConstrual& c, const SpeakerProfile& a,
                           const SpeakerProfile& b) {
  auto result = gateway.complete(gateway.make_request(prompts::scene_expansion(c, a, b)));
  auto narrative = std::string(trim(result.text));
  if (narrative.empty()) {
    fail(ErrorKind::generation, "scene expansion returned empty text", result.text);
  }
  return {c.id, std::move(narrative), result.prompt_hash};
}

}  // namespace catbear
