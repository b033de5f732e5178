#include "catbear/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "catbear/error.hpp"
#include "catbear/tokenizer.hpp"
#include "catbear/util.hpp"

namespace catbear {

// --- classification ---------------------------------------------------------

ClassificationReport classification_report(std::span<const LabelPair> pairs,
                                           const AppraisalSpace& space) {
  if (pairs.empty()) fail(ErrorKind::input, "classification report needs at least one pair");

  std::array<int, kEmotionCount> tp{}, fp{}, fn{}, predicted{};
  ClassificationReport r;
  r.n = pairs.size();
  std::size_t correct = 0;
  double dist_sum = 0.0;

  for (const auto& p : pairs) {
    const auto g = index_of(p.gold);
    ++r.per_class[g].support;
    if (!p.predicted) {
      ++r.n_unparseable;
      ++fn[g];
      dist_sum += space.max_pairwise_distance();
      continue;
    }
    const auto q = index_of(*p.predicted);
    ++predicted[q];
    dist_sum += space.distance(p.gold, *p.predicted);
    if (q == g) {
      ++correct;
      ++tp[g];
    } else {
      ++fp[q];
      ++fn[g];
    }
  }

  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
  r.mean_cat_dist = dist_sum / static_cast<double>(r.n);

  double sp = 0.0, sr = 0.0, sf = 0.0, sf_obs = 0.0;
  int observed = 0;
  for (std::size_t c = 0; c < kEmotionCount; ++c) {
    auto& cs = r.per_class[c];
    cs.precision = tp[c] + fp[c] > 0 ? static_cast<double>(tp[c]) / (tp[c] + fp[c]) : 0.0;
    cs.recall = tp[c] + fn[c] > 0 ? static_cast<double>(tp[c]) / (tp[c] + fn[c]) : 0.0;
    cs.f1 = cs.precision + cs.recall > 0
                ? 2.0 * cs.precision * cs.recall / (cs.precision + cs.recall)
                : 0.0;
    sp += cs.precision;
    sr += cs.recall;
    sf += cs.f1;
    if (cs.support > 0 || predicted[c] > 0) {
      ++observed;
      sf_obs += cs.f1;
    }
  }
  r.macro_precision = sp / kEmotionCount;
  r.macro_recall = sr / kEmotionCount;
  r.macro_f1 = sf / kEmotionCount;
  r.macro_f1_observed = observed > 0 ? sf_obs / observed : 0.0;
  return r;
}

nlohmann::ordered_json ClassificationReport::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["accuracy"] = accuracy;
  j["macro_precision"] = macro_precision;
  j["macro_recall"] = macro_recall;
  j["macro_f1"] = macro_f1;
  j["macro_f1_observed"] = macro_f1_observed;
  j["mean_cat_dist"] = mean_cat_dist;
  j["n_unparseable"] = n_unparseable;
  auto& pc = j["per_class"] = nlohmann::ordered_json::object();
  for (Emotion e : all_emotions()) {
    const auto& c = per_class[index_of(e)];
    pc[std::string(english_name(e))] = {
        {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}};
  }
  return j;
}

ClassificationReport ClassificationReport::from_json(const nlohmann::json& j) {
  ClassificationReport r;
  r.n = j.at("n").get<std::size_t>();
  r.accuracy = j.at("accuracy").get<double>();
  r.macro_precision = j.at("macro_precision").get<double>();
  r.macro_recall = j.at("macro_recall").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.macro_f1_observed = j.at("macro_f1_observed").get<double>();
  r.mean_cat_dist = j.at("mean_cat_dist").get<double>();
  r.n_unparseable = j.at("n_unparseable").get<std::size_t>();
  const auto& pc = j.at("per_class");
  for (Emotion e : all_emotions()) {
    const auto& c = pc.at(std::string(english_name(e)));
    auto& out = r.per_class[index_of(e)];
    out.precision = c.at("precision").get<double>();
    out.recall = c.at("recall").get<double>();
    out.f1 = c.at("f1").get<double>();
    out.support = c.at("support").get<int>();
  }
  return r;
}

// --- n-gram helpers ---------------------------------------------------------

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(std::span<const std::string> tokens, int n) {
  NgramCounts out;
  if (tokens.size() < static_cast<std::size_t>(n)) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  }
  return out;
}

int total(const NgramCounts& c) {
  int t = 0;
  for (const auto& [_, v] : c) t += v;
  return t;
}

int clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
  int hits = 0;
  for (const auto& [g, count] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) hits += std::min(count, it->second);
  }
  return hits;
}

// Clipped n-gram precision against multiple references (max count per n-gram
// over references).
double modified_precision(std::span<const std::string> candidate,
                          const std::vector<std::vector<std::string>>& references, int n) {
  auto cand = ngrams(candidate, n);
  const int denom = total(cand);
  if (denom == 0) return 0.0;
  NgramCounts max_ref;
  for (const auto& ref : references) {
    for (const auto& [g, c] : ngrams(ref, n)) max_ref[g] = std::max(max_ref[g], c);
  }
  return static_cast<double>(clipped_overlap(cand, max_ref)) / denom;
}

}  // namespace

double brevity_penalty(std::size_t candidate_length, std::size_t reference_length) {
  if (candidate_length == 0) return 0.0;
  if (candidate_length >= reference_length) return 1.0;
  return std::exp(1.0 - static_cast<double>(reference_length) / static_cast<double>(candidate_length));
}

double bleu(std::span<const std::string> candidate,
            const std::vector<std::vector<std::string>>& references, int n, BleuMode mode) {
  if (candidate.empty()) fail(ErrorKind::input, "BLEU candidate is empty");
  if (references.empty()) fail(ErrorKind::input, "BLEU needs at least one reference");
  if (n != 1 && n != 2) fail(ErrorKind::input, "BLEU order must be 1 or 2");

  const std::size_t c = candidate.size();
  std::size_t r = references.front().size();
  for (const auto& ref : references) {
    auto diff = [&](std::size_t len) { return len > c ? len - c : c - len; };
    if (diff(ref.size()) < diff(r) || (diff(ref.size()) == diff(r) && ref.size() < r)) r = ref.size();
  }
  const double bp = brevity_penalty(c, r);

  double score;
  if (mode == BleuMode::per_n) {
    score = modified_precision(candidate, references, n);
  } else {
    double log_sum = 0.0;
    for (int k = 1; k <= n; ++k) {
      double p = modified_precision(candidate, references, k);
      if (p == 0.0) return 0.0;
      log_sum += std::log(p);
    }
    score = std::exp(log_sum / n);
  }
  return 100.0 * bp * score;
}

double bleu(std::string_view candidate, std::string_view reference, int n, BleuMode mode) {
  auto c = tokenize(candidate);
  return bleu(c, {tokenize(reference)}, n, mode);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge(std::span<const std::string> candidate, std::span<const std::string> reference,
             RougeVariant variant) {
  if (candidate.empty() || reference.empty()) fail(ErrorKind::input, "ROUGE inputs must be nonempty");

  double hits, cand_total, ref_total;
  if (variant == RougeVariant::rougeL) {
    hits = static_cast<double>(lcs_length(candidate, reference));
    cand_total = static_cast<double>(candidate.size());
    ref_total = static_cast<double>(reference.size());
  } else {
    const int n = variant == RougeVariant::rouge1 ? 1 : 2;
    auto c = ngrams(candidate, n);
    auto r = ngrams(reference, n);
    hits = clipped_overlap(c, r);
    cand_total = total(c);
    ref_total = total(r);
  }
  if (hits == 0.0 || cand_total == 0.0 || ref_total == 0.0) return 0.0;
  const double p = hits / cand_total, rec = hits / ref_total;
  return 100.0 * 2.0 * p * rec / (p + rec);
}

double rouge(std::string_view candidate, std::string_view reference, RougeVariant variant) {
  auto c = tokenize(candidate);
  auto r = tokenize(reference);
  return rouge(c, r, variant);
}

// --- embeddings -------------------------------------------------------------

std::vector<double> HashingEmbeddingBackend::embed(std::string_view text) {
  std::vector<double> v(dims_, 0.0);
  auto cps = utf8_decode(text);
  auto bump = [&](std::uint64_t h) { v[mix64(h) % dims_] += 1.0; };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    bump(cps[i]);
    if (i + 1 < cps.size()) bump((static_cast<std::uint64_t>(cps[i]) << 32) ^ cps[i + 1] ^ 0x5bd1e995ULL);
  }
  return v;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::metric, "embedding dimensions differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::optional<double> embedding_similarity(EmbeddingBackend* backend, std::string_view candidate,
                                           std::string_view reference) {
  if (backend == nullptr) return std::nullopt;
  if (candidate == reference) return 100.0;
  auto a = backend->embed(candidate);
  auto b = backend->embed(reference);
  return (cosine_similarity(a, b) + 1.0) * 50.0;
}

// --- overlap report ---------------------------------------------------------

OverlapReport overlap_report(std::span<const TextPair> pairs, EmbeddingBackend* backend,
                             BleuMode mode) {
  if (pairs.empty()) fail(ErrorKind::input, "overlap report needs at least one pair");
  OverlapReport r;
  r.n = pairs.size();
  double emb_sum = 0.0;
  bool emb_ok = backend != nullptr;
  if (!backend) r.embedding_note = "no embedding backend configured";

  for (const auto& p : pairs) {
    auto cand = tokenize(p.candidate);
    auto ref = tokenize(p.reference);
    if (!cand.empty() && !ref.empty()) {
      r.bleu1 += bleu(cand, {ref}, 1, mode);
      r.bleu2 += bleu(cand, {ref}, 2, mode);
      r.rouge1 += rouge(cand, ref, RougeVariant::rouge1);
      r.rouge2 += rouge(cand, ref, RougeVariant::rouge2);
      r.rougeL += rouge(cand, ref, RougeVariant::rougeL);
    }
    if (emb_ok) {
      try {
        emb_sum += p.candidate.empty() ? 0.0 : *embedding_similarity(backend, p.candidate, p.reference);
      } catch (const Error& e) {
        emb_ok = false;
        r.embedding_note = e.what();
      }
    }
  }
  const double n = static_cast<double>(r.n);
  r.bleu1 /= n;
  r.bleu2 /= n;
  r.rouge1 /= n;
  r.rouge2 /= n;
  r.rougeL /= n;
  if (emb_ok) {
    r.embedding = emb_sum / n;
    r.embedding_note = backend->id();
  }
  return r;
}

nlohmann::ordered_json OverlapReport::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["bleu1"] = bleu1;
  j["bleu2"] = bleu2;
  j["rouge1"] = rouge1;
  j["rouge2"] = rouge2;
  j["rougeL"] = rougeL;
  j["embedding_similarity"] = embedding ? nlohmann::ordered_json(*embedding) : nlohmann::ordered_json();
  j["embedding_note"] = embedding_note;
  return j;
}

OverlapReport OverlapReport::from_json(const nlohmann::json& j) {
  OverlapReport r;
  r.n = j.at("n").get<std::size_t>();
  r.bleu1 = j.at("bleu1").get<double>();
  r.bleu2 = j.at("bleu2").get<double>();
  r.rouge1 = j.at("rouge1").get<double>();
  r.rouge2 = j.at("rouge2").get<double>();
  r.rougeL = j.at("rougeL").get<double>();
  if (!j.at("embedding_similarity").is_null()) r.embedding = j["embedding_similarity"].get<double>();
  r.embedding_note = j.value("embedding_note", "");
  return r;
}

}  // namespace catbear
