// catbear: command-line entry point.
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>

#include "catbear/dataset.hpp"
#include "catbear/emotion_space.hpp"
#include "catbear/error.hpp"
#include "catbear/eval_harness.hpp"
#include "catbear/llm_gateway.hpp"
#include "catbear/metrics.hpp"
#include "catbear/offline_model.hpp"
#include "catbear/persona.hpp"
#include "catbear/review_server.hpp"
#include "catbear/review_store.hpp"
#include "catbear/run_config.hpp"
#include "catbear/situation.hpp"
#include "catbear/synthesis.hpp"
#include "catbear/util.hpp"

namespace {

using namespace catbear;

// Flag values land here; only flags the user actually passed override the
// config file.
struct Flags {
  std::string config;

  bool list = false;
  bool json = false;
  bool dump = false;
  bool normalized = false;

  std::string corpus, out, histogram, run, log, host = "127.0.0.1", tokens, static_dir;
  std::vector<int> construals;
  bool all = false;
  int per_construal = 0, turns = 0, workers = 0, port = 8080, k = 0, sample_per_dialogue = 0;
  std::uint64_t seed = 0;
  std::string ablation, backend, model, journal, base_url, format, task, embedding, fractions;
};

RunConfig load_config(const Flags& f) {
  return f.config.empty() ? RunConfig() : RunConfig::from_file(f.config);
}

void override_if(RunConfig& cfg, const CLI::App& cmd, const char* flag, const char* key, nlohmann::json value) {
  if (cmd.count(flag) > 0) cfg.set(key, std::move(value));
}

std::unique_ptr<Gateway> make_gateway(const RunConfig& cfg, const std::string& journal) {
  GatewayConfig g = cfg.gateway();
  g.journal_path = journal;
  const std::string backend = cfg.string("gateway.backend");
  if (backend == "offline") return std::make_unique<Gateway>(make_offline_backend(), g);
  if (backend != "http") fail(ErrorKind::configuration, "unknown backend '" + backend + "' (http|offline)", "backend");
  if (!cfg.string("gateway.api_key").empty()) {
    auto http = std::make_shared<HttpBackend>(g.base_url, cfg.secret("gateway.api_key"), g.timeout_seconds);
    return std::make_unique<Gateway>(std::move(http), g);
  }
  return Gateway::from_config(g);
}

std::unique_ptr<EmbeddingBackend> make_embedding(const RunConfig& cfg) {
  const std::string kind = cfg.string("eval.embedding");
  if (kind == "none") return nullptr;
  if (kind == "hashing") return std::make_unique<HashingEmbeddingBackend>();
  if (kind.rfind("http:", 0) == 0) {
    GatewayConfig g = cfg.gateway();
    const char* key = std::getenv(g.api_key_env.c_str());
    if (!key || !*key) fail(ErrorKind::configuration, g.api_key_env + " is not set", g.api_key_env);
    return std::make_unique<HttpEmbeddingBackend>(g.base_url, key, kind.substr(5), g.timeout_seconds);
  }
  fail(ErrorKind::configuration, "unknown embedding backend '" + kind + "' (none|hashing|http:MODEL)", "embedding");
}

void print_classification(const ClassificationReport& r) {
  std::printf("instances        %zu (unparseable %zu)\n", r.n, r.n_unparseable);
  std::printf("accuracy         %.4f\n", r.accuracy);
  std::printf("macro-F1         %.4f (observed classes %.4f)\n", r.macro_f1, r.macro_f1_observed);
  std::printf("macro-P / R      %.4f / %.4f\n", r.macro_precision, r.macro_recall);
  std::printf("CAT-Dist         %.4f\n", r.mean_cat_dist);
}

void print_overlap(const OverlapReport& r) {
  std::printf("instances        %zu\n", r.n);
  std::printf("BLEU-1 / BLEU-2  %.2f / %.2f\n", r.bleu1, r.bleu2);
  std::printf("ROUGE-1/2/L      %.2f / %.2f / %.2f\n", r.rouge1, r.rouge2, r.rougeL);
  if (r.embedding) {
    std::printf("embedding        %.2f\n", *r.embedding);
  } else {
    std::printf("embedding        n/a%s%s\n", r.embedding_note.empty() ? "" : " - ", r.embedding_note.c_str());
  }
}

void print_run(const EvalRun& run) {
  std::printf("task %s, model %s, k=%d, failed %zu\n", std::string(to_string(run.task)).c_str(), run.model.c_str(),
              run.k, run.n_failed);
  if (run.classification) print_classification(*run.classification);
  if (run.overlap) print_overlap(*run.overlap);
}

// --- verbs ------------------------------------------------------------------

int cmd_situations(const Flags& f) {
  const auto& catalog = load_catalog();
  if (f.json) {
    std::cout << serialize_catalog(catalog);
    return 0;
  }
  for (const auto& c : catalog) std::cout << c.id << '\t' << c.text_zh << '\t' << c.text_en << '\n';
  return 0;
}

int cmd_profiles(const Flags& f) {
  if (f.json) {
    nlohmann::ordered_json j;
    auto& ps = j["personalities"] = nlohmann::ordered_json::array();
    for (const auto& p : enumerate_personalities()) ps.push_back({{"index", p.index()}, {"description", p.describe()}});
    auto& gs = j["goals"] = nlohmann::ordered_json::array();
    for (const auto& g : enumerate_goals()) gs.push_back({{"index", g.index()}, {"description", g.describe()}});
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  std::cout << "# personality profiles (" << kPersonalityCount << ")\n";
  for (const auto& p : enumerate_personalities()) std::cout << p.index() << '\t' << p.describe() << '\n';
  std::cout << "# goal profiles (" << kGoalProfileCount << ")\n";
  for (const auto& g : enumerate_goals()) std::cout << g.index() << '\t' << g.describe() << '\n';
  return 0;
}

int cmd_space(const Flags& f) {
  const auto& space = default_space();
  if (f.normalized) {
    write_normalized_csv(std::cout, space);
  } else {
    write_raw_csv(std::cout, space);
  }
  return 0;
}

int cmd_generate(const Flags& f, const CLI::App& cmd) {
  RunConfig cfg = load_config(f);
  override_if(cfg, cmd, "--per-construal", "generation.per_construal", f.per_construal);
  override_if(cfg, cmd, "--turns", "generation.turns", f.turns);
  override_if(cfg, cmd, "--ablation", "generation.ablation", f.ablation);
  override_if(cfg, cmd, "--seed", "generation.seed", f.seed);
  override_if(cfg, cmd, "--construals", "generation.construals", f.construals);
  override_if(cfg, cmd, "--backend", "gateway.backend", f.backend);
  override_if(cfg, cmd, "--model", "gateway.model", f.model);
  override_if(cfg, cmd, "--base-url", "gateway.base_url", f.base_url);
  override_if(cfg, cmd, "--workers", "gateway.parallelism", f.workers);
  if (f.all) cfg.set("generation.construals", nlohmann::json::array());

  CorpusPlan plan;
  plan.per_construal = static_cast<int>(cfg.integer("generation.per_construal"));
  plan.seed = cfg.get("generation.seed").get<std::uint64_t>();
  plan.options.turns_target = static_cast<int>(cfg.integer("generation.turns"));
  plan.options.ablation = parse_ablation(cfg.string("generation.ablation"));
  plan.options.reprompt_cap = static_cast<int>(cfg.integer("generation.reprompt_cap"));
  plan.options.config_digest = cfg.digest();
  plan.workers = static_cast<int>(cfg.integer("gateway.parallelism"));
  plan.construal_ids = cfg.get("generation.construals").get<std::vector<int>>();
  if (plan.construal_ids.empty()) {
    for (const auto& c : load_catalog()) plan.construal_ids.push_back(c.id);
  }
  if (plan.options.turns_target < 2 || plan.options.turns_target % 2 != 0) {
    fail(ErrorKind::input, "--turns must be even and >= 2, got " + std::to_string(plan.options.turns_target), "turns");
  }

  auto gateway = make_gateway(cfg, f.journal);
  const bool tty = ::isatty(STDERR_FILENO);
  auto dialogues = generate_dialogues(*gateway, default_space(), plan, [tty](std::size_t done, std::size_t total) {
    if (tty) std::fprintf(stderr, "\rgenerated %zu/%zu", done, total);
    if (done == total) std::fprintf(stderr, tty ? "\n" : "generated %zu/%zu\n", done, total);
  });
  Corpus corpus = make_corpus(std::move(dialogues), cfg.digest());
  for (const auto& w : scan_sensitive(corpus)) std::cerr << "warning: " << w << '\n';
  save_corpus(corpus, f.out);
  std::cerr << "wrote " << corpus.manifest.n_dialogues << " dialogues (" << corpus.manifest.n_turns << " turns) to "
            << f.out << ", config " << cfg.digest() << '\n';
  return 0;
}

int cmd_stats(const Flags& f) {
  auto stats = compute_stats(load_corpus(f.corpus));
  if (f.json) {
    std::cout << stats.to_json().dump(2) << '\n';
  } else {
    std::cout << stats.render_table();
  }
  if (!f.histogram.empty()) write_file(f.histogram, stats.histogram_csv());
  return 0;
}

SplitFractions parse_fractions(const std::string& text) {
  std::vector<double> v;
  std::stringstream in(text);
  for (std::string part; std::getline(in, part, ',');) {
    try {
      v.push_back(std::stod(part));
    } catch (const std::exception&) {
      fail(ErrorKind::input, "--fractions expects three numbers, e.g. 0.9,0.05,0.05", "fractions");
    }
  }
  if (v.size() != 3) fail(ErrorKind::input, "--fractions expects three numbers, e.g. 0.9,0.05,0.05", "fractions");
  return {v[0], v[1], v[2]};
}

int cmd_split(const Flags& f, const CLI::App& cmd) {
  RunConfig cfg = load_config(f);
  override_if(cfg, cmd, "--seed", "split.seed", f.seed);
  if (cmd.count("--fractions") > 0) {
    auto fr = parse_fractions(f.fractions);
    cfg.set("split.train", fr.train);
    cfg.set("split.validation", fr.validation);
    cfg.set("split.test", fr.test);
  }
  SplitFractions fr{cfg.number("split.train"), cfg.number("split.validation"), cfg.number("split.test")};
  Corpus corpus = split_corpus(load_corpus(f.corpus), cfg.get("split.seed").get<std::uint64_t>(), fr);
  corpus.manifest.config_digest = cfg.digest();
  save_corpus(corpus, f.out);
  auto stats = compute_stats(corpus);
  std::cerr << "train " << stats.split_sizes[Split::train] << ", validation " << stats.split_sizes[Split::validation]
            << ", test " << stats.split_sizes[Split::test] << '\n';
  return 0;
}

int cmd_export_sft(const Flags& f) {
  RunConfig cfg = load_config(f);
  Corpus corpus = load_corpus(f.corpus);
  corpus.manifest.config_digest = cfg.digest();
  auto n = export_sft(corpus, parse_sft_format(f.format), f.out);
  std::cerr << "wrote " << n << " " << f.format << " records to " << f.out << '\n';
  return 0;
}

int cmd_eval(const Flags& f, const CLI::App& cmd) {
  RunConfig cfg = load_config(f);
  cfg.set("gateway.model", f.model);
  override_if(cfg, cmd, "--k", "eval.k", f.k);
  override_if(cfg, cmd, "--seed", "eval.seed", f.seed);
  override_if(cfg, cmd, "--sample-per-dialogue", "eval.sample_per_dialogue", f.sample_per_dialogue);
  override_if(cfg, cmd, "--embedding", "eval.embedding", f.embedding);
  override_if(cfg, cmd, "--backend", "gateway.backend", f.backend);
  override_if(cfg, cmd, "--base-url", "gateway.base_url", f.base_url);
  override_if(cfg, cmd, "--workers", "gateway.parallelism", f.workers);

  EvalOptions opts;
  opts.task = parse_eval_task(f.task);
  opts.k = static_cast<int>(cfg.integer("eval.k"));
  opts.seed = cfg.get("eval.seed").get<std::uint64_t>();
  opts.instances.seed = opts.seed;
  if (auto spd = cfg.integer("eval.sample_per_dialogue"); spd > 0) opts.instances.sample_per_dialogue = static_cast<int>(spd);
  opts.config_digest = cfg.digest();
  opts.workers = static_cast<int>(cfg.integer("gateway.parallelism"));
  opts.artifact_path = f.out;
  auto embedding = make_embedding(cfg);
  opts.embedding = embedding.get();

  Corpus corpus = load_corpus(f.corpus);
  auto gateway = make_gateway(cfg, f.journal);
  auto run = run_task(*gateway, corpus, default_space(), opts);
  print_run(run);
  return 0;
}

int cmd_score(const Flags& f, const CLI::App& cmd) {
  RunConfig cfg = load_config(f);
  override_if(cfg, cmd, "--embedding", "eval.embedding", f.embedding);
  EvalRun stored = load_run(f.run);
  EvalRun fresh = stored;
  auto embedding = make_embedding(cfg);
  rescore(fresh, default_space(), embedding.get());
  const bool same = fresh.classification == stored.classification && fresh.overlap == stored.overlap;
  if (f.json) {
    nlohmann::ordered_json j;
    j["run"] = f.run;
    j["reproduced"] = same;
    if (fresh.classification) j["classification"] = fresh.classification->to_json();
    if (fresh.overlap) j["overlap"] = fresh.overlap->to_json();
    std::cout << j.dump(2) << '\n';
  } else {
    print_run(fresh);
    std::cout << (same ? "stored report reproduced\n" : "stored report differs from re-scored outputs\n");
  }
  return same ? 0 : 1;
}

int cmd_review_serve(const Flags& f) {
  RunConfig cfg = load_config(f);
  ReviewServerConfig sc;
  sc.static_dir = f.static_dir;
  if (!f.tokens.empty()) {
    auto j = nlohmann::json::parse(read_file(f.tokens), nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::parse, "tokens file '" + f.tokens + "' is not valid JSON", f.tokens);
    sc.tokens = parse_tokens(j);
  } else {
    // Token values in the config file may be "${ENV}" references.
    nlohmann::json resolved = nlohmann::json::object();
    for (auto& [token, who] : cfg.get("review.tokens").items()) {
      resolved[resolve_env_reference(token, "review.tokens")] = who;
    }
    sc.tokens = parse_tokens(resolved);
  }
  if (sc.tokens.empty()) fail(ErrorKind::configuration, "no worker tokens configured (--tokens or review.tokens)", "tokens");

  ReviewStore store(load_corpus(f.corpus), f.log, system_timestamp,
                    static_cast<std::size_t>(cfg.integer("review.snapshot_every")));
  ReviewServer server(store, sc);
  std::cerr << "review service on http://" << f.host << ":" << f.port << "/ (" << store.version() << " events)\n";
  server.listen(f.host, f.port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"catbear: appraisal-guided dialogue synthesis and evaluation"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "JSON config file (flags override it)")->check(CLI::ExistingFile);

  auto* situations = app.add_subcommand("situations", "List the 89 situational construals");
  situations->add_flag("--list", f.list, "Tab-separated listing (default)");
  situations->add_flag("--json", f.json, "JSONL output");

  auto* profiles = app.add_subcommand("profiles", "List personality and goal profiles");
  profiles->add_flag("--json", f.json, "JSON output");

  auto* space = app.add_subcommand("space", "Print the emotion appraisal table");
  space->add_flag("--dump", f.dump, "CSV of the raw table (default)");
  space->add_flag("--normalized", f.normalized, "Print the normalized table instead");

  auto* generate = app.add_subcommand("generate", "Synthesize dialogues into a corpus");
  generate->add_option("--out", f.out, "Output corpus (JSONL)")->required();
  generate->add_option("--construals", f.construals, "Construal ids (default: all)")->delimiter(',');
  generate->add_flag("--all", f.all, "All 89 construals");
  generate->add_option("--per-construal", f.per_construal, "Dialogues per construal (default 32)");
  generate->add_option("--turns", f.turns, "Turns per dialogue, even (default 10)");
  generate->add_option("--ablation", f.ablation, "full | no_belief | no_appraisal");
  generate->add_option("--seed", f.seed, "Pairing seed");
  generate->add_option("--backend", f.backend, "http | offline");
  generate->add_option("--model", f.model, "Model name");
  generate->add_option("--base-url", f.base_url, "Chat-completion endpoint base URL");
  generate->add_option("--workers", f.workers, "Concurrent requests");
  generate->add_option("--journal", f.journal, "Request journal for resumable runs");

  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  stats->add_option("--corpus", f.corpus, "Corpus (JSONL)")->required()->check(CLI::ExistingFile);
  stats->add_flag("--json", f.json, "JSON output");
  stats->add_option("--histogram", f.histogram, "Write the emotion histogram CSV here");

  auto* split = app.add_subcommand("split", "Assign train/validation/test splits");
  split->add_option("--corpus", f.corpus, "Input corpus")->required()->check(CLI::ExistingFile);
  split->add_option("--out", f.out, "Output corpus")->required();
  split->add_option("--seed", f.seed, "Shuffle seed");
  split->add_option("--fractions", f.fractions, "train,validation,test (default 0.9,0.05,0.05)");

  auto* sft = app.add_subcommand("export-sft", "Export instruction-tuning records from the train split");
  sft->add_option("--corpus", f.corpus, "Split corpus")->required()->check(CLI::ExistingFile);
  sft->add_option("--format", f.format, "plain | conditional | joint")->required();
  sft->add_option("--out", f.out, "Output JSONL")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a model on the test split");
  eval->add_option("--task", f.task, "emotion | utterance | joint")->required();
  eval->add_option("--model", f.model, "Model name")->required();
  eval->add_option("--corpus", f.corpus, "Split corpus")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", f.out, "Run artifact (JSON)")->required();
  eval->add_option("--k", f.k, "In-context exemplars (0 or 4)");
  eval->add_option("--seed", f.seed, "Exemplar and sampling seed");
  eval->add_option("--sample-per-dialogue", f.sample_per_dialogue, "Cuts sampled per dialogue (default: all)");
  eval->add_option("--embedding", f.embedding, "none | hashing | http:MODEL");
  eval->add_option("--backend", f.backend, "http | offline");
  eval->add_option("--base-url", f.base_url, "Chat-completion endpoint base URL");
  eval->add_option("--workers", f.workers, "Concurrent requests");
  eval->add_option("--journal", f.journal, "Request journal");

  auto* score = app.add_subcommand("score", "Re-score a stored run artifact");
  score->add_option("--run", f.run, "Run artifact")->required()->check(CLI::ExistingFile);
  score->add_option("--embedding", f.embedding, "none | hashing | http:MODEL");
  score->add_flag("--json", f.json, "JSON output");

  auto* serve = app.add_subcommand("review-serve", "Run the review HTTP service");
  serve->add_option("--corpus", f.corpus, "Corpus under review")->required()->check(CLI::ExistingFile);
  serve->add_option("--log", f.log, "Event log (JSONL)")->required();
  serve->add_option("--host", f.host, "Bind address");
  serve->add_option("--port", f.port, "Port");
  serve->add_option("--tokens", f.tokens, "JSON map of bearer token to worker")->check(CLI::ExistingFile);
  serve->add_option("--static", f.static_dir, "UI bundle directory served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*situations) return cmd_situations(f);
    if (*profiles) return cmd_profiles(f);
    if (*space) return cmd_space(f);
    if (*generate) return cmd_generate(f, *generate);
    if (*stats) return cmd_stats(f);
    if (*split) return cmd_split(f, *split);
    if (*sft) return cmd_export_sft(f);
    if (*eval) return cmd_eval(f, *eval);
    if (*score) return cmd_score(f, *score);
    if (*serve) return cmd_review_serve(f);
  } catch (const Error& e) {
    std::cerr << "catbear: " << e.what();
    if (!e.detail().empty() && e.detail().size() < 200) std::cerr << " [" << e.detail() << "]";
    std::cerr << '\n';
    return 1;
  } catch (const ReviewError& e) {
    std::cerr << "catbear: review error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
