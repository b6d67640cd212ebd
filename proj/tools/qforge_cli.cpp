#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qforge/answer_loop.hpp"
#include "qforge/config.hpp"
#include "qforge/crowd_generator.hpp"
#include "qforge/dataset.hpp"
#include "qforge/error.hpp"
#include "qforge/eval.hpp"
#include "qforge/game_service.hpp"
#include "qforge/http_server.hpp"
#include "qforge/json_io.hpp"
#include "qforge/leakage.hpp"
#include "qforge/prompts.hpp"
#include "qforge/simulation.hpp"
#include "qforge/text.hpp"

using namespace qforge;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  bool json = false;
};

PlatformConfig load(const Globals& g) {
  PlatformConfig cfg = g.config_path.empty() ? PlatformConfig{} : load_config(g.config_path);
  cfg.rng_seed = g.seed;
  validate(cfg);
  return cfg;
}

std::array<double, 3> parse_ratios(const std::string& s) {
  std::array<double, 3> r{};
  std::stringstream in(s);
  std::string part;
  std::size_t i = 0;
  while (std::getline(in, part, ',')) {
    if (i >= 3) throw Error("bad_request", "--ratios takes exactly three values");
    r[i++] = std::stod(part);
  }
  if (i != 3) throw Error("bad_request", "--ratios takes exactly three values");
  return r;
}

std::vector<std::int64_t> parse_int_list(const std::string& s) {
  std::vector<std::int64_t> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) out.push_back(std::stoll(part));
  return out;
}

void emit(const Globals& g, const nlohmann::json& j, const std::string& table) {
  if (g.json) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << table;
  }
}

std::vector<SeedExample> read_seed(const fs::path& p) {
  std::vector<SeedExample> out;
  for (const auto& row : read_jsonl(p)) out.push_back(row.get<SeedExample>());
  return out;
}

std::pair<std::string, int> host_port(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw Error("bad_request", "expected host:port, got " + s);
  return {s.substr(0, colon), std::stoi(s.substr(colon + 1))};
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qforge: yes/no question collection platform"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Platform config file (key = value)");
  app.add_option("--seed", g.seed, "RNG seed");
  app.add_flag("--json", g.json, "Machine-readable output");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the game service");
  std::string host = "127.0.0.1", graph_path, seed_path, verifier_path, answerer_url, snippets_path,
              cache_dir = ".qforge-cache", experts_path, relational_path;
  int port = 8080;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--graph", graph_path, "Concept graph TSV")->required()->check(CLI::ExistingFile);
  serve->add_option("--relational", relational_path, "Relational prompt TSV (default: built-in)");
  serve->add_option("--seed-data", seed_path, "Seed examples JSONL (default: built from --graph)");
  serve->add_option("--verifier", verifier_path, "Trained verifier JSON");
  serve->add_option("--answerer-url", answerer_url, "External answerer host:port");
  serve->add_option("--snippets", snippets_path, "Mock snippet corpus JSONL (enables leak checks)");
  serve->add_option("--cache-dir", cache_dir);
  serve->add_option("--experts", experts_path, "Expert items JSONL {question_id,text,gold}");

  // seed-data
  auto* seed = app.add_subcommand("seed-data", "Build templated triples and corruptions");
  std::string out_path;
  seed->add_option("--graph", graph_path)->required()->check(CLI::ExistingFile);
  seed->add_option("--out", out_path)->required();

  // train-answerer
  auto* ta = app.add_subcommand("train-answerer", "Train the baseline answerer");
  std::string in_path;
  int version = 0;
  ta->add_option("--in", in_path, "Seed examples JSONL")->required()->check(CLI::ExistingFile);
  ta->add_option("--out", out_path)->required();
  ta->add_option("--version", version);

  // train-verifier
  auto* tv = app.add_subcommand("train-verifier", "Train the gold-label verifier");
  std::size_t synthetic = 0;
  tv->add_option("--in", in_path, "JSONL {features, gold}");
  tv->add_option("--synthetic", synthetic, "Generate N synthetic crowd questions instead");
  tv->add_option("--out", out_path)->required();

  // leak-check
  auto* lc = app.add_subcommand("leak-check", "Check questions against search snippets");
  std::string corpus_path;
  lc->add_option("--questions", in_path, "JSONL with id and question/text")->required()->check(CLI::ExistingFile);
  lc->add_option("--corpus", corpus_path, "Snippet corpus JSONL")->required()->check(CLI::ExistingFile);
  lc->add_option("--cache-dir", cache_dir);
  lc->add_option("--out", out_path);

  // split
  auto* sp = app.add_subcommand("split", "Topic-disjoint train/dev/test assignment");
  std::string ratios = "0.6472,0.1774,0.1754";
  sp->add_option("--in", in_path, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  sp->add_option("--ratios", ratios);
  sp->add_option("--out", out_path, "Assignment JSONL {id, split}");

  // export
  auto* ex = app.add_subcommand("export", "Write train/dev/test JSONL from collected questions");
  std::string out_dir;
  bool withhold = false;
  ex->add_option("--in", in_path, "Question JSONL (GET /export?scope=all)")->required()->check(CLI::ExistingFile);
  ex->add_option("--out-dir", out_dir)->required();
  ex->add_option("--ratios", ratios);
  ex->add_flag("--withhold-test", withhold, "Drop answers from test.jsonl");

  // stats
  auto* st = app.add_subcommand("stats", "Dataset statistics");
  st->add_option("--in", in_path)->required()->check(CLI::ExistingFile);

  // eval
  auto* ev = app.add_subcommand("eval", "Accuracy and contrast metrics");
  std::string pred_path, gold_path, contrast_path;
  bool macro = false;
  ev->add_option("--pred", pred_path, "Predictions JSONL {id, prediction}")->required();
  ev->add_option("--gold", gold_path, "Dataset JSONL")->required();
  ev->add_option("--contrast", contrast_path, "Contrast groups JSONL");
  ev->add_flag("--macro", macro, "Macro-average contrast accuracy over groups");

  // prompt-build
  auto* pb = app.add_subcommand("prompt-build", "Few-shot prompt construction");
  std::string question, exclude;
  std::size_t k = 5, snippet_k = 5, char_budget = 0;
  pb->add_option("--train", in_path, "Train JSONL")->required()->check(CLI::ExistingFile);
  pb->add_option("--question", question)->required();
  pb->add_option("--k", k);
  pb->add_option("--exclude", exclude, "Id to keep out of the exemplars");
  pb->add_option("--snippets", snippets_path, "Snippet corpus JSONL for augmentation");
  pb->add_option("--snippet-k", snippet_k);
  pb->add_option("--char-budget", char_budget);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Drive scripted agents through the service");
  std::string agents_path, thresholds;
  std::size_t n_questions = 500, parallelism = 8;
  sim->add_option("--agents", agents_path, "AgentProfile JSONL (default: built-in mix)");
  sim->add_option("--out", out_path);
  sim->add_option("--questions", n_questions);
  sim->add_option("--parallelism", parallelism);
  sim->add_option("--thresholds", thresholds, "Override retrain thresholds, e.g. 50,100");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const PlatformConfig cfg = load(g);

    if (*serve) {
      const ConceptGraph graph = load_concept_graph(graph_path);
      const auto relational = relational_path.empty() ? default_relational_prompts()
                                                      : load_relational_prompts(relational_path);
      BankBuild bank = build_bank(graph, cfg.top_n_concepts, relational, cfg);
      for (const auto& w : bank.warnings) std::cerr << "warning: " << w << '\n';
      ServiceOptions so;
      so.cfg = cfg;
      so.bank = bank.bank;
      Rng rng(g.seed);
      so.seed_examples = seed_path.empty() ? build_seed_corpus(graph.triples, bank.bank, rng).examples
                                           : read_seed(seed_path);
      if (!answerer_url.empty()) {
        const auto [h, p] = host_port(answerer_url);
        so.answerer = std::make_shared<HttpAnswerer>(h, p);
      } else {
        so.answerer = std::make_shared<AnswerModel>(train_answerer(so.seed_examples, cfg, g.seed, 0));
      }
      if (!verifier_path.empty()) so.verifier = read_json_file(verifier_path).get<VerifierModel>();
      if (!snippets_path.empty()) {
        std::shared_ptr<SnippetSource> src = MockSnippetSource::from_jsonl(snippets_path);
        so.snippets = std::make_shared<SnippetFetcher>(src, cache_dir, cfg.max_snippets);
      }
      if (!experts_path.empty()) {
        for (const auto& row : read_jsonl(experts_path)) {
          so.expert_pool.push_back(ExpertItem{row.at("question_id").get<std::string>(),
                                              row.at("text").get<std::string>(),
                                              parse_gold_label(row.at("gold").get<std::string>())});
        }
      }
      GameService service(so);
      HttpServer server(service);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving on " << host << ':' << port << '\n';
      server.listen(host, port);
      return 0;
    }

    if (*seed) {
      const ConceptGraph graph = load_concept_graph(graph_path);
      BankBuild bank = build_bank(graph, cfg.top_n_concepts, default_relational_prompts(), cfg);
      Rng rng(g.seed);
      const SeedCorpus corpus = build_seed_corpus(graph.triples, bank.bank, rng);
      std::vector<nlohmann::json> rows;
      for (const auto& e : corpus.examples) rows.push_back(e);
      write_jsonl(out_path, rows);
      emit(g, {{"examples", corpus.examples.size()}, {"skipped_unknown_relation", corpus.skipped_unknown_relation}},
           "wrote " + std::to_string(corpus.examples.size()) + " examples (" +
               std::to_string(corpus.skipped_unknown_relation) + " triples skipped: unknown relation)\n");
      return 0;
    }

    if (*ta) {
      const auto examples = read_seed(in_path);
      const AnswererTraining t = train_answerer_detailed(examples, cfg, g.seed, version);
      write_json_file(out_path, answer_model_to_json(t.model));
      std::size_t correct = 0;
      for (const auto& e : examples) correct += t.model.answer(e.text).label == e.label ? 1 : 0;
      const double acc = examples.empty() ? 0.0 : static_cast<double>(correct) / examples.size();
      emit(g, {{"examples", examples.size()}, {"epochs", t.epochs_run}, {"final_loss", t.epoch_loss.back()},
               {"train_accuracy", acc}},
           "trained on " + std::to_string(examples.size()) + " examples, " + std::to_string(t.epochs_run) +
               " epochs, train accuracy " + std::to_string(acc) + "\n");
      return 0;
    }

    if (*tv) {
      std::vector<VerifierExample> data;
      if (synthetic > 0) {
        CrowdConfig cc;
        cc.n_questions = synthetic;
        Rng rng(g.seed);
        data = verifier_examples(generate_crowd(cc, rng), cfg);
      } else if (!in_path.empty()) {
        for (const auto& row : read_jsonl(in_path)) {
          data.push_back(VerifierExample{row.at("features").get<VerifierFeatureVector>(),
                                         parse_gold_label(row.at("gold").get<std::string>())});
        }
      } else {
        throw Error("bad_request", "train-verifier needs --in or --synthetic");
      }
      const VerifierTraining t = train_verifier(data, cfg, g.seed);
      write_json_file(out_path, t.model);
      emit(g, {{"n_train", t.n_train}, {"n_heldout", t.n_heldout}, {"heldout_accuracy", t.heldout_accuracy}},
           "held-out accuracy " + std::to_string(t.heldout_accuracy) + " (" + std::to_string(t.n_heldout) +
               " held out of " + std::to_string(t.n_train + t.n_heldout) + ")\n");
      return 0;
    }

    if (*lc) {
      std::shared_ptr<SnippetSource> src = MockSnippetSource::from_jsonl(corpus_path);
      SnippetFetcher fetcher(src, cache_dir, cfg.max_snippets);
      std::vector<nlohmann::json> rows;
      std::size_t leaked = 0;
      for (const auto& row : read_jsonl(in_path)) {
        const std::string text = row.contains("question") ? row.at("question").get<std::string>()
                                                          : row.at("text").get<std::string>();
        const FetchResult f = fetcher.fetch(text);
        for (const auto& w : f.warnings) std::cerr << "warning: " << w << '\n';
        const LeakReport r = check_leak(text, f.snippets, cfg);
        leaked += r.leaked ? 1 : 0;
        nlohmann::json j = r;
        j["id"] = row.value("id", std::string{});
        rows.push_back(std::move(j));
      }
      if (!out_path.empty()) write_jsonl(out_path, rows);
      emit(g, {{"checked", rows.size()}, {"leaked", leaked}},
           std::to_string(leaked) + " of " + std::to_string(rows.size()) + " questions leaked\n");
      return 0;
    }

    if (*sp) {
      std::vector<SplitItem> items;
      for (const auto& e : read_dataset_jsonl(in_path)) items.push_back(SplitItem{e.id, e.topic_prompt});
      const SplitAssignment a = topic_split(items, parse_ratios(ratios), g.seed);
      for (const auto& w : a.warnings) std::cerr << "warning: " << w << '\n';
      if (!out_path.empty()) {
        std::vector<nlohmann::json> rows;
        for (const auto& [id, s] : a.question_split) rows.push_back({{"id", id}, {"split", to_string(s)}});
        write_jsonl(out_path, rows);
      }
      const auto sizes = a.sizes();
      emit(g, {{"train", sizes[0]}, {"dev", sizes[1]}, {"test", sizes[2]}},
           "train " + std::to_string(sizes[0]) + "  dev " + std::to_string(sizes[1]) + "  test " +
               std::to_string(sizes[2]) + "\n");
      return 0;
    }

    if (*ex) {
      std::vector<Question> kept;
      for (const auto& row : read_jsonl(in_path)) {
        Question q = row.get<Question>();
        if (q.state == QuestionState::Validated && !q.leaked && q.gold()) kept.push_back(std::move(q));
      }
      const SplitAssignment a = topic_split(kept, parse_ratios(ratios), g.seed);
      for (const auto& w : a.warnings) std::cerr << "warning: " << w << '\n';
      const ExportPaths paths = export_jsonl(kept, a, out_dir, withhold);
      const auto sizes = a.sizes();
      emit(g, {{"train", sizes[0]}, {"dev", sizes[1]}, {"test", sizes[2]}, {"dir", out_dir}},
           "exported " + std::to_string(kept.size()) + " questions to " + out_dir + "\n");
      return 0;
    }

    if (*st) {
      const StatsReport r = dataset_stats(read_dataset_jsonl(in_path));
      emit(g, stats_to_json(r), format_stats_table(r));
      return 0;
    }

    if (*ev) {
      const auto gold = read_dataset_jsonl(gold_path);
      const Predictions pred = read_predictions(pred_path);
      EvalReport r = evaluate(pred, gold);
      if (!contrast_path.empty()) r.contrast = contrast_metrics(read_contrast_groups(contrast_path), pred, macro);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      emit(g, eval_report_to_json(r), format_eval_table(r));
      return 0;
    }

    if (*pb) {
      Rng rng(g.seed);
      std::string q = question;
      if (!snippets_path.empty()) {
        auto src = MockSnippetSource::from_jsonl(snippets_path);
        const auto got = src->search(question);
        if (got) q = augment_with_snippets(question, *got, snippet_k, char_budget);
      }
      const std::string prompt = build_fewshot_prompt(read_dataset_jsonl(in_path), k, rng, q, exclude);
      if (g.json) {
        std::cout << nlohmann::json{{"prompt", prompt}}.dump(2) << '\n';
      } else {
        std::cout << prompt << '\n';
      }
      return 0;
    }

    if (*sim) {
      SimOptions so;
      so.cfg = cfg;
      if (!thresholds.empty()) so.cfg.retrain_thresholds = parse_int_list(thresholds);
      validate(so.cfg);
      so.agents = agents_path.empty() ? default_agents(g.seed) : read_agents(agents_path);
      so.n_questions = n_questions;
      so.parallelism = parallelism;
      so.seed = g.seed;
      const SimReport r = run_simulation(so);
      const nlohmann::json j = sim_report_to_json(r);
      if (!out_path.empty()) write_json_file(out_path, j);
      std::cout << j.dump(2) << '\n';
      if (r.error) {
        std::cerr << "simulation error: " << *r.error << '\n';
        return 1;
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << e.code() << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
