#include "catbear/review_store.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "catbear/error.hpp"
#include "catbear/util.hpp"

namespace catbear {

std::string_view to_string(AssignmentStatus s) {
  switch (s) {
    case AssignmentStatus::pending: return "pending";
    case AssignmentStatus::in_progress: return "in_progress";
    case AssignmentStatus::done: return "done";
  }
  return "pending";
}

AssignmentStatus parse_assignment_status(std::string_view s) {
  if (s == "pending") return AssignmentStatus::pending;
  if (s == "in_progress") return AssignmentStatus::in_progress;
  if (s == "done") return AssignmentStatus::done;
  throw ReviewError(422, "status must be pending, in_progress or done", "status");
}

std::string_view to_string(Variant v) { return v == Variant::raw ? "raw" : "refined"; }

Variant parse_variant(std::string_view s) {
  if (s == "raw") return Variant::raw;
  if (s == "refined") return Variant::refined;
  throw ReviewError(422, "variant must be raw or refined", "variant");
}

// --- ratings --------------------------------------------------------------------

std::optional<std::size_t> rating_dimension_index(std::string_view name) {
  for (std::size_t i = 0; i < kRatingDimensions.size(); ++i) {
    if (kRatingDimensions[i].name == name) return i;
  }
  return std::nullopt;
}

void validate_rating(const RatingRecord& r) {
  for (std::size_t i = 0; i < kRatingDimensionCount; ++i) {
    const auto& dim = kRatingDimensions[i];
    if (r.scores[i] < dim.min || r.scores[i] > dim.max) {
      throw ReviewError(422,
                        std::string(dim.name) + " must be an integer in [" + std::to_string(dim.min) + ", " +
                            std::to_string(dim.max) + "], got " + std::to_string(r.scores[i]),
                        std::string(dim.name));
    }
  }
}

nlohmann::ordered_json RatingRecord::to_json() const {
  nlohmann::ordered_json j;
  j["rater"] = rater;
  j["dialogue_id"] = dialogue_id;
  j["turn"] = turn;
  j["variant"] = to_string(variant);
  for (std::size_t i = 0; i < kRatingDimensionCount; ++i) j[std::string(kRatingDimensions[i].name)] = scores[i];
  return j;
}

RatingRecord RatingRecord::from_json(const nlohmann::json& j, std::string rater) {
  if (!j.is_object()) throw ReviewError(422, "rating must be a JSON object");
  RatingRecord r;
  r.rater = std::move(rater);
  auto dialogue = j.find("dialogue_id");
  if (dialogue == j.end() || !dialogue->is_string()) throw ReviewError(422, "dialogue_id is required", "dialogue_id");
  r.dialogue_id = dialogue->get<std::string>();
  auto turn = j.find("turn");
  if (turn == j.end() || !turn->is_number_integer()) throw ReviewError(422, "turn must be an integer", "turn");
  r.turn = turn->get<int>();
  auto variant = j.find("variant");
  if (variant == j.end() || !variant->is_string()) throw ReviewError(422, "variant is required", "variant");
  r.variant = parse_variant(variant->get<std::string>());
  for (std::size_t i = 0; i < kRatingDimensionCount; ++i) {
    const std::string name(kRatingDimensions[i].name);
    auto v = j.find(name);
    if (v == j.end()) throw ReviewError(422, name + " is required", name);
    if (!v->is_number_integer()) throw ReviewError(422, name + " must be an integer", name);
    auto x = v->get<long long>();
    if (x < kRatingDimensions[i].min || x > kRatingDimensions[i].max) {
      throw ReviewError(422,
                        name + " must be in [" + std::to_string(kRatingDimensions[i].min) + ", " +
                            std::to_string(kRatingDimensions[i].max) + "], got " + std::to_string(x),
                        name);
    }
    r.scores[i] = static_cast<int>(x);
  }
  return r;
}

std::optional<AggregateRow> aggregate(std::span<const RatingRecord> records) {
  if (records.empty()) return std::nullopt;
  AggregateRow row;
  row.n = records.size();
  std::array<long long, kRatingDimensionCount> sums{};
  for (const auto& r : records) {
    for (std::size_t i = 0; i < kRatingDimensionCount; ++i) sums[i] += r.scores[i];
  }
  for (std::size_t i = 0; i < kRatingDimensionCount; ++i) {
    row.means[i] = static_cast<double>(sums[i]) / static_cast<double>(row.n);
  }
  return row;
}

namespace {

double round2(double x) { return std::round(x * 100.0) / 100.0; }

}  // namespace

double percent_change(double before, double after, DeltaBase base) {
  const double b = round2(before), a = round2(after);
  const double denom = base == DeltaBase::after ? a : b;
  if (denom == 0.0) return 0.0;
  return (a - b) / denom * 100.0;
}

namespace {

std::string delta_suffix(double before, double after, DeltaBase base) {
  double pct = percent_change(before, after, base);
  std::string mag = format_fixed(std::abs(pct), 1);
  if (mag == "0.0") return "(0.0%)";
  return std::string("(") + (pct > 0 ? "↑" : "↓") + mag + "%)";
}

}  // namespace

std::string format_delta(double before, double after, DeltaBase base) {
  return format_fixed(before, 2) + " → " + format_fixed(after, 2) + " " + delta_suffix(before, after, base);
}

std::string render_aggregate_table(const std::optional<AggregateRow>& before, const std::optional<AggregateRow>& after,
                                   DeltaBase base) {
  auto pad = [](std::string s, std::size_t width) {
    // Width in display columns; the arrows are single-column but multibyte.
    std::size_t cols = utf8_decode(s).size();
    if (cols < width) s.append(width - cols, ' ');
    return s;
  };
  std::ostringstream o;
  o << pad("Dimensions", 14) << pad("Score Range", 13) << pad("Ratings before", 16) << "Ratings after\n";
  for (std::size_t i = 0; i < kRatingDimensionCount; ++i) {
    const auto& dim = kRatingDimensions[i];
    std::string b = before ? format_fixed(before->means[i], 2) : "n/a";
    std::string a = after ? format_fixed(after->means[i], 2) : "n/a";
    if (before && after) a += " " + delta_suffix(before->means[i], after->means[i], base);
    o << pad(std::string(dim.name), 14) << pad(std::to_string(dim.min) + "-" + std::to_string(dim.max), 13)
      << pad(b, 16) << a << '\n';
  }
  o << "n = " << (before ? before->n : 0) << " / " << (after ? after->n : 0) << '\n';
  return o.str();
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::input, "spearman needs equally long samples");
  if (a.size() < 2) fail(ErrorKind::input, "spearman needs at least two items");
  auto ra = average_ranks(a);
  auto rb = average_ranks(b);
  return pearson(ra, rb);
}

double spearman_permutation_p(std::span<const double> a, std::span<const double> b, int permutations,
                              std::uint64_t seed) {
  if (permutations < 1) fail(ErrorKind::input, "permutations must be >= 1", "permutations");
  auto ra = average_ranks(a);
  auto rb = average_ranks(b);
  const double observed = pearson(ra, rb);
  if (std::isnan(observed)) return std::nan("");
  Rng rng(derive_seed(seed, 0x9e37));
  int hits = 0;
  for (int i = 0; i < permutations; ++i) {
    shuffle(rb, rng);
    if (std::abs(pearson(ra, rb)) >= std::abs(observed) - 1e-12) ++hits;
  }
  return static_cast<double>(hits + 1) / static_cast<double>(permutations + 1);
}

nlohmann::ordered_json RaterCorrelation::to_json() const {
  nlohmann::ordered_json j;
  j["rater_a"] = rater_a;
  j["rater_b"] = rater_b;
  j["n"] = n;
  if (insufficient) {
    j["status"] = "insufficient_data";
    j["rho"] = nullptr;
    j["p_value"] = nullptr;
  } else {
    j["status"] = "ok";
    j["rho"] = *rho;
    j["p_value"] = *p_value;
  }
  return j;
}

std::string system_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// --- store ------------------------------------------------------------------------

namespace {

std::string snapshot_path(const std::string& log) { return log + ".snapshot"; }

nlohmann::json optional_string(const std::optional<std::string>& s) {
  return s ? nlohmann::json(*s) : nlohmann::json(nullptr);
}

}  // namespace

ReviewStore::ReviewStore(Corpus corpus, std::string log_path, Clock clock, std::size_t snapshot_every)
    : corpus_(std::move(corpus)),
      log_path_(std::move(log_path)),
      clock_(std::move(clock)),
      snapshot_every_(snapshot_every) {
  for (std::size_t i = 0; i < corpus_.dialogues.size(); ++i) {
    if (!index_.emplace(corpus_.dialogues[i].dialogue_id, i).second) {
      fail(ErrorKind::validation, "duplicate dialogue id '" + corpus_.dialogues[i].dialogue_id + "'");
    }
  }
  if (log_path_.empty()) return;

  std::uint64_t from = 0;
  if (std::filesystem::exists(snapshot_path(log_path_))) {
    auto snap = nlohmann::json::parse(read_file(snapshot_path(log_path_)), nullptr, false);
    if (snap.is_discarded() || !snap.contains("state")) {
      fail(ErrorKind::data, "review snapshot '" + snapshot_path(log_path_) + "' is unreadable");
    }
    load_state(snap["state"]);
    from = seq_;
  }
  if (!std::filesystem::exists(log_path_)) return;

  const std::string text = read_file(log_path_);
  std::size_t pos = 0, line_no = 0, good_end = 0;
  std::uint64_t expected = 1;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    const bool last = eol == std::string::npos;
    std::string_view line(text.data() + pos, (last ? text.size() : eol) - pos);
    ++line_no;
    auto ev = nlohmann::json::parse(line, nullptr, false);
    if (ev.is_discarded() || !ev.contains("seq")) {
      if (last) break;  // torn final write; dropped below
      fail(ErrorKind::data, "review log line " + std::to_string(line_no) + " is corrupt", std::to_string(line_no));
    }
    if (ev["seq"].get<std::uint64_t>() != expected) {
      fail(ErrorKind::data, "review log line " + std::to_string(line_no) + " is out of sequence",
           std::to_string(line_no));
    }
    ++expected;
    events_.push_back(ev);
    if (ev["seq"].get<std::uint64_t>() > from) apply(ev);
    pos = last ? text.size() : eol + 1;
    good_end = pos;
  }
  if (good_end < text.size() || (!text.empty() && text.back() != '\n')) {
    std::filesystem::resize_file(log_path_, good_end);
    if (good_end > 0 && text[good_end - 1] != '\n') {
      std::ofstream(log_path_, std::ios::app | std::ios::binary) << '\n';
    }
  }
  if (expected - 1 < from) fail(ErrorKind::data, "review snapshot is newer than the log");
}

const Dialogue& ReviewStore::dialogue_or_404(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ReviewError(404, "unknown dialogue '" + id + "'", "dialogue_id");
  return corpus_.dialogues[it->second];
}

const Turn& ReviewStore::turn_or_404(const Dialogue& d, int turn) const {
  if (turn < 0 || turn >= static_cast<int>(d.turns.size())) {
    throw ReviewError(404, "dialogue '" + d.dialogue_id + "' has no turn " + std::to_string(turn), "turn");
  }
  return d.turns[static_cast<std::size_t>(turn)];
}

std::uint64_t ReviewStore::commit(nlohmann::json event) {
  event["seq"] = seq_ + 1;
  event["ts"] = clock_ ? clock_() : std::string();
  if (!log_path_.empty()) {
    std::ofstream out(log_path_, std::ios::app | std::ios::binary);
    out << event.dump() << '\n';
    out.flush();
    if (!out) fail(ErrorKind::input, "cannot append to review log '" + log_path_ + "'", log_path_);
  }
  events_.push_back(event);
  apply(event);
  if (!log_path_.empty() && snapshot_every_ > 0 && seq_ % snapshot_every_ == 0) write_snapshot_locked();
  return seq_;
}

void ReviewStore::apply(const nlohmann::json& ev) {
  seq_ = ev.at("seq").get<std::uint64_t>();
  const std::string type = ev.at("type").get<std::string>();
  if (type == "assign") {
    auto& a = assignments_[ev.at("dialogue_id").get<std::string>()];
    a.dialogue_id = ev.at("dialogue_id").get<std::string>();
    a.worker = ev.at("worker").get<std::string>();
    a.status = AssignmentStatus::pending;
  } else if (type == "status") {
    assignments_.at(ev.at("dialogue_id").get<std::string>()).status =
        parse_assignment_status(ev.at("status").get<std::string>());
  } else if (type == "refine") {
    const std::string id = ev.at("dialogue_id").get<std::string>();
    const int turn = ev.at("turn").get<int>();
    auto& r = refinements_[{id, turn}];
    r.worker = ev.at("worker").get<std::string>();
    r.dialogue_id = id;
    r.turn = turn;
    if (ev.at("emotion").is_string()) r.emotion = parse_emotion(ev.at("emotion").get<std::string>());
    if (ev.at("utterance").is_string()) r.utterance = ev.at("utterance").get<std::string>();
    r.timestamp = ev.value("ts", "");
    r.event_seq = seq_;
    auto a = assignments_.find(id);
    if (a != assignments_.end() && a->second.status == AssignmentStatus::pending) {
      a->second.status = AssignmentStatus::in_progress;
    }
  } else if (type == "rate") {
    auto rec = RatingRecord::from_json(ev.at("rating"), ev.at("rating").at("rater").get<std::string>());
    ratings_[{rec.rater, rec.dialogue_id, rec.turn, rec.variant}] = rec;
  } else {
    fail(ErrorKind::data, "unknown review event type '" + type + "'", type);
  }
}

std::uint64_t ReviewStore::assign(const std::string& dialogue_id, const std::string& worker) {
  if (worker.empty()) throw ReviewError(422, "worker is required", "worker");
  std::lock_guard lock(mu_);
  dialogue_or_404(dialogue_id);
  if (auto it = assignments_.find(dialogue_id); it != assignments_.end()) {
    if (it->second.worker == worker) return seq_;
    throw ReviewError(409, "dialogue '" + dialogue_id + "' is already assigned to " + it->second.worker, "worker");
  }
  return commit({{"type", "assign"}, {"dialogue_id", dialogue_id}, {"worker", worker}});
}

std::uint64_t ReviewStore::set_status(const std::string& dialogue_id, const std::string& worker,
                                      AssignmentStatus status) {
  std::lock_guard lock(mu_);
  dialogue_or_404(dialogue_id);
  auto it = assignments_.find(dialogue_id);
  if (it == assignments_.end()) throw ReviewError(404, "dialogue '" + dialogue_id + "' is not assigned", "dialogue_id");
  if (it->second.worker != worker) throw ReviewError(403, "dialogue '" + dialogue_id + "' is assigned to another worker");
  if (it->second.status == status) return seq_;
  return commit({{"type", "status"},
                 {"dialogue_id", dialogue_id},
                 {"worker", worker},
                 {"status", std::string(to_string(status))}});
}

std::uint64_t ReviewStore::refine(const std::string& worker, const std::string& dialogue_id, int turn,
                                  std::optional<std::string> emotion, std::optional<std::string> utterance) {
  std::lock_guard lock(mu_);
  const Dialogue& d = dialogue_or_404(dialogue_id);
  const Turn& original = turn_or_404(d, turn);
  auto a = assignments_.find(dialogue_id);
  if (a == assignments_.end() || a->second.worker != worker) {
    throw ReviewError(403, "dialogue '" + dialogue_id + "' is not assigned to " + worker);
  }
  if (!emotion && !utterance) throw ReviewError(422, "a refinement needs a new emotion or utterance", "emotion");

  std::optional<Emotion> new_emotion;
  if (emotion) {
    new_emotion = try_parse_emotion(trim(*emotion));
    if (!new_emotion) throw ReviewError(422, "emotion '" + *emotion + "' is not one of the 15 labels", "emotion");
  }
  if (utterance) {
    utterance = std::string(trim(*utterance));
    if (utterance->empty()) throw ReviewError(422, "utterance must not be empty", "utterance");
  }

  // Layered result after this edit.
  const auto prev = refinements_.find({dialogue_id, turn});
  std::optional<Emotion> layered_emotion = new_emotion;
  std::optional<std::string> layered_utterance = utterance;
  if (prev != refinements_.end()) {
    if (!layered_emotion) layered_emotion = prev->second.emotion;
    if (!layered_utterance) layered_utterance = prev->second.utterance;
    if (layered_emotion == prev->second.emotion && layered_utterance == prev->second.utterance) return seq_;
  } else {
    const bool emotion_changes = new_emotion && *new_emotion != original.emotion;
    const bool utterance_changes = utterance && *utterance != original.utterance;
    if (!emotion_changes && !utterance_changes) {
      throw ReviewError(422, "the refinement does not change the turn", new_emotion ? "emotion" : "utterance");
    }
  }

  nlohmann::json ev = {{"type", "refine"}, {"worker", worker}, {"dialogue_id", dialogue_id}, {"turn", turn}};
  ev["emotion"] = layered_emotion ? nlohmann::json(std::string(english_name(*layered_emotion))) : nlohmann::json(nullptr);
  ev["utterance"] = optional_string(layered_utterance);
  return commit(std::move(ev));
}

std::uint64_t ReviewStore::rate(const RatingRecord& record) {
  if (record.rater.empty()) throw ReviewError(422, "rater is required", "rater");
  validate_rating(record);
  std::lock_guard lock(mu_);
  const Dialogue& d = dialogue_or_404(record.dialogue_id);
  turn_or_404(d, record.turn);
  auto it = ratings_.find({record.rater, record.dialogue_id, record.turn, record.variant});
  if (it != ratings_.end() && it->second == record) return seq_;
  return commit({{"type", "rate"}, {"rating", record.to_json()}});
}

std::vector<Assignment> ReviewStore::assignments(const std::string& worker) const {
  std::lock_guard lock(mu_);
  std::vector<Assignment> out;
  for (const auto& [id, a] : assignments_) {
    if (worker.empty() || a.worker == worker) out.push_back(a);
  }
  return out;
}

nlohmann::ordered_json ReviewStore::dialogue_view(const std::string& dialogue_id) const {
  std::lock_guard lock(mu_);
  const Dialogue& d = dialogue_or_404(dialogue_id);
  nlohmann::ordered_json j = to_json(d);
  j.erase("generation");
  j.erase("split");
  if (auto a = assignments_.find(dialogue_id); a != assignments_.end()) {
    j["assignment"] = {{"worker", a->second.worker}, {"status", to_string(a->second.status)}};
  } else {
    j["assignment"] = nullptr;
  }
  for (auto& t : j["turns"]) {
    t.erase("provenance");
    const int idx = t["index"].get<int>();
    auto r = refinements_.find({dialogue_id, idx});
    if (r == refinements_.end()) continue;
    nlohmann::ordered_json original;
    original["emotion"] = t["emotion"];
    original["utterance"] = t["utterance"];
    if (r->second.emotion) t["emotion"] = english_name(*r->second.emotion);
    if (r->second.utterance) t["utterance"] = *r->second.utterance;
    t["original"] = std::move(original);
    t["refined_by"] = r->second.worker;
    t["refined_at"] = r->second.timestamp;
  }
  return j;
}

std::vector<RatingRecord> ReviewStore::ratings(std::optional<Variant> variant) const {
  std::lock_guard lock(mu_);
  std::vector<RatingRecord> out;
  for (const auto& [key, r] : ratings_) {
    if (!variant || r.variant == *variant) out.push_back(r);
  }
  return out;
}

std::optional<AggregateRow> ReviewStore::aggregate_ratings(Variant variant) const {
  auto rs = ratings(variant);
  return aggregate(rs);
}

std::vector<RaterCorrelation> ReviewStore::rater_correlation(std::string_view dimension, int permutations,
                                                             std::uint64_t seed) const {
  auto dim = rating_dimension_index(dimension);
  if (!dim) throw ReviewError(422, "unknown rating dimension '" + std::string(dimension) + "'", "dimension");
  if (permutations < 1000) throw ReviewError(422, "permutations must be >= 1000", "permutations");

  // item -> rater -> score
  using Item = std::tuple<std::string, int, Variant>;
  std::map<Item, std::map<std::string, double>> items;
  std::set<std::string> raters;
  for (const auto& r : ratings()) {
    items[{r.dialogue_id, r.turn, r.variant}][r.rater] = r.scores[*dim];
    raters.insert(r.rater);
  }
  std::vector<std::string> names(raters.begin(), raters.end());
  std::vector<RaterCorrelation> out;
  std::uint64_t pair_index = 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t k = i + 1; k < names.size(); ++k, ++pair_index) {
      RaterCorrelation c;
      c.rater_a = names[i];
      c.rater_b = names[k];
      std::vector<double> a, b;
      for (const auto& [item, scores] : items) {
        auto x = scores.find(names[i]);
        auto y = scores.find(names[k]);
        if (x != scores.end() && y != scores.end()) {
          a.push_back(x->second);
          b.push_back(y->second);
        }
      }
      c.n = a.size();
      if (c.n >= kMinCoRated) {
        double rho = spearman(a, b);
        if (!std::isnan(rho)) {
          c.rho = rho;
          c.p_value = spearman_permutation_p(a, b, permutations, derive_seed(seed, pair_index));
        }
      }
      c.insufficient = !c.rho;
      out.push_back(std::move(c));
    }
  }
  return out;
}

nlohmann::ordered_json ReviewStore::progress() const {
  std::lock_guard lock(mu_);
  std::map<std::string, std::array<std::size_t, 3>> by_worker;
  for (const auto& [id, a] : assignments_) ++by_worker[a.worker][static_cast<std::size_t>(a.status)];
  std::map<std::string, std::size_t> rated;
  for (const auto& [key, r] : ratings_) ++rated[r.rater];

  nlohmann::ordered_json j;
  j["dialogues"] = corpus_.dialogues.size();
  j["assigned"] = assignments_.size();
  j["refinements"] = refinements_.size();
  j["ratings"] = ratings_.size();
  auto& workers = j["workers"] = nlohmann::ordered_json::object();
  for (const auto& [w, counts] : by_worker) {
    workers[w] = {{"pending", counts[0]}, {"in_progress", counts[1]}, {"done", counts[2]}, {"ratings", rated[w]}};
  }
  for (const auto& [w, n] : rated) {
    if (!workers.contains(w)) workers[w] = {{"pending", 0}, {"in_progress", 0}, {"done", 0}, {"ratings", n}};
  }
  return j;
}

Corpus ReviewStore::export_refined(bool partial, const std::vector<std::string>& dialogue_ids) const {
  std::lock_guard lock(mu_);
  std::vector<const Dialogue*> wanted;
  if (dialogue_ids.empty()) {
    for (const auto& d : corpus_.dialogues) wanted.push_back(&d);
  } else {
    for (const auto& id : dialogue_ids) wanted.push_back(&dialogue_or_404(id));
  }

  std::vector<std::string> pending;
  std::vector<Dialogue> out;
  for (const Dialogue* d : wanted) {
    auto a = assignments_.find(d->dialogue_id);
    if (a == assignments_.end() || a->second.status != AssignmentStatus::done) {
      pending.push_back(d->dialogue_id);
      continue;
    }
    Dialogue copy = *d;
    for (auto& t : copy.turns) {
      auto r = refinements_.find({d->dialogue_id, t.index});
      if (r == refinements_.end()) continue;
      const auto& ref = r->second;
      if (ref.emotion && *ref.emotion != t.emotion) {
        copy.revisions.push_back({t.index, "emotion", std::string(english_name(t.emotion)),
                                  std::string(english_name(*ref.emotion)), ref.worker, ref.event_seq});
        t.emotion = *ref.emotion;
        if (t.appraisal) t.consistency = mean_abs_difference(level_vector(*t.appraisal), default_space().normalized(t.emotion));
      }
      if (ref.utterance && *ref.utterance != t.utterance) {
        copy.revisions.push_back({t.index, "utterance", t.utterance, *ref.utterance, ref.worker, ref.event_seq});
        t.utterance = *ref.utterance;
      }
    }
    out.push_back(std::move(copy));
  }
  if (!pending.empty() && !partial) {
    std::string list;
    for (std::size_t i = 0; i < pending.size() && i < 5; ++i) list += (i ? ", " : "") + pending[i];
    if (pending.size() > 5) list += ", ...";
    throw ReviewError(409, std::to_string(pending.size()) + " dialogue(s) not done (" + list + "); use partial export",
                      "partial");
  }
  Corpus c = make_corpus(std::move(out), corpus_.manifest.config_digest);
  validate_corpus(c);
  return c;
}

std::vector<std::string> ReviewStore::audit_sample(double rate, std::uint64_t seed) const {
  if (!(rate > 0.0 && rate <= 1.0)) throw ReviewError(422, "rate must be in (0, 1]", "rate");
  std::vector<std::string> done;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, a] : assignments_) {
      if (a.status == AssignmentStatus::done) done.push_back(id);
    }
  }
  const auto n = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(done.size()) - 1e-9));
  Rng rng(derive_seed(seed, 0xa0d1));
  shuffle(done, rng);
  done.resize(std::min(n, done.size()));
  std::sort(done.begin(), done.end());
  return done;
}

nlohmann::ordered_json ReviewStore::state_locked() const {
  nlohmann::ordered_json j;
  j["version"] = seq_;
  auto& as = j["assignments"] = nlohmann::ordered_json::array();
  for (const auto& [id, a] : assignments_) {
    as.push_back({{"dialogue_id", id}, {"worker", a.worker}, {"status", to_string(a.status)}});
  }
  auto& rs = j["refinements"] = nlohmann::ordered_json::array();
  for (const auto& [key, r] : refinements_) {
    nlohmann::ordered_json e;
    e["dialogue_id"] = r.dialogue_id;
    e["turn"] = r.turn;
    e["worker"] = r.worker;
    e["emotion"] = r.emotion ? nlohmann::ordered_json(english_name(*r.emotion)) : nlohmann::ordered_json(nullptr);
    e["utterance"] = r.utterance ? nlohmann::ordered_json(*r.utterance) : nlohmann::ordered_json(nullptr);
    e["timestamp"] = r.timestamp;
    e["event_seq"] = r.event_seq;
    rs.push_back(std::move(e));
  }
  auto& ra = j["ratings"] = nlohmann::ordered_json::array();
  for (const auto& [key, r] : ratings_) ra.push_back(r.to_json());
  return j;
}

void ReviewStore::load_state(const nlohmann::json& state) {
  seq_ = state.at("version").get<std::uint64_t>();
  assignments_.clear();
  refinements_.clear();
  ratings_.clear();
  for (const auto& a : state.at("assignments")) {
    Assignment x{a.at("dialogue_id").get<std::string>(), a.at("worker").get<std::string>(),
                 parse_assignment_status(a.at("status").get<std::string>())};
    assignments_[x.dialogue_id] = x;
  }
  for (const auto& e : state.at("refinements")) {
    Refinement r;
    r.dialogue_id = e.at("dialogue_id").get<std::string>();
    r.turn = e.at("turn").get<int>();
    r.worker = e.at("worker").get<std::string>();
    if (e.at("emotion").is_string()) r.emotion = parse_emotion(e.at("emotion").get<std::string>());
    if (e.at("utterance").is_string()) r.utterance = e.at("utterance").get<std::string>();
    r.timestamp = e.at("timestamp").get<std::string>();
    r.event_seq = e.at("event_seq").get<std::uint64_t>();
    refinements_[{r.dialogue_id, r.turn}] = r;
  }
  for (const auto& e : state.at("ratings")) {
    auto r = RatingRecord::from_json(e, e.at("rater").get<std::string>());
    ratings_[{r.rater, r.dialogue_id, r.turn, r.variant}] = r;
  }
}

std::string ReviewStore::state_json() const {
  std::lock_guard lock(mu_);
  return state_locked().dump();
}

std::uint64_t ReviewStore::version() const {
  std::lock_guard lock(mu_);
  return seq_;
}

void ReviewStore::write_snapshot_locked() const {
  nlohmann::ordered_json snap;
  snap["seq"] = seq_;
  snap["state"] = state_locked();
  const std::string path = snapshot_path(log_path_);
  write_file(path + ".tmp", snap.dump());
  std::filesystem::rename(path + ".tmp", path);
}

void ReviewStore::snapshot() const {
  if (log_path_.empty()) fail(ErrorKind::input, "store has no log; nothing to snapshot");
  std::lock_guard lock(mu_);
  write_snapshot_locked();
}

std::unique_ptr<ReviewStore> ReviewStore::replay(Corpus corpus, const std::vector<nlohmann::json>& events) {
  auto store = std::make_unique<ReviewStore>(std::move(corpus));
  for (const auto& ev : events) {
    store->events_.push_back(ev);
    store->apply(ev);
  }
  return store;
}

std::vector<nlohmann::json> ReviewStore::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

}  // namespace catbear
