// reprobe: command-line entry point for stimulus generation, toy training,
// scoring, sweeps and reports.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "reprobe/benchmarks.hpp"
#include "reprobe/common.hpp"
#include "reprobe/metrics.hpp"
#include "reprobe/provider.hpp"
#include "reprobe/report.hpp"
#include "reprobe/stats.hpp"
#include "reprobe/stimulus.hpp"
#include "reprobe/sweep.hpp"
#include "reprobe/toylm/checkpoint.hpp"
#include "reprobe/toylm/config.hpp"
#include "reprobe/toylm/tokenizer.hpp"
#include "reprobe/toylm/toy_provider.hpp"
#include "reprobe/toylm/train.hpp"
#include "reprobe/wordpool.hpp"

namespace fs = std::filesystem;
using namespace reprobe;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPartial = 2;

struct Common {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<double> trim;
  std::optional<std::size_t> bootstrap_b;
  std::optional<fs::path> out;
  bool force = false;
  std::optional<std::string> condition;
  std::optional<std::string> subtoken_mode;
};

void add_common(CLI::App* cmd, Common& c, bool stats) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--out", c.out, "Output path");
  cmd->add_flag("--force", c.force, "Overwrite or recompute existing outputs");
  if (stats) {
    cmd->add_option("--trim", c.trim, "Trimmed-mean proportion per side")->check(CLI::Range(0.0, 0.4999));
    cmd->add_option("--bootstrap-b", c.bootstrap_b, "Bootstrap resamples")->check(CLI::Range(100, 10000000));
  }
}

nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

void require_fresh(const fs::path& p, bool force) {
  if (fs::exists(p) && !force) throw InputError(p.string() + " exists; pass --force to overwrite");
}

// --- gen-stimuli ---------------------------------------------------------

struct GenArgs {
  std::optional<fs::path> pool;
  bool toy_pool = false;
  std::size_t toy_vocab = 2048;
  std::optional<fs::path> norms;
  std::string rating_column{kDefaultRatingColumn};
  bool allow_any_size = false;
  std::size_t n_extremes = 500;
  std::size_t n_lists = 23, base_len = 10, cap = 3;
};

int gen_stimuli(const Common& c, const GenArgs& g) {
  const fs::path out = c.out.value_or("stimuli");
  const Condition cond = parse_condition(c.condition.value_or("repeat"));
  const std::uint64_t seed = c.seed.value_or(0);
  if (g.norms) {
    const auto norms = load_concreteness_norms(*g.norms, g.rating_column);
    const auto extremes = select_extremes(norms, g.n_extremes);
    ConcretenessSetOptions o;
    o.cap = g.cap;
    o.condition = cond;
    o.seed = seed;
    o.allow_any_size = g.allow_any_size;
    o.expected_size = g.n_extremes;
    const auto sets = generate_concreteness_sets(extremes, o);
    for (const auto& [name, set] : {std::pair{"concrete", &sets.concrete}, std::pair{"abstract", &sets.abstract}}) {
      const auto p = out / (std::string(name) + "-" + std::string(to_string(cond)) + ".jsonl");
      require_fresh(p, c.force);
      save_stimulus_set(*set, p);
      std::cout << p.string() << ": " << set->vignettes.size() << " vignettes\n";
    }
    return kExitOk;
  }
  if (!g.pool && !g.toy_pool) throw InputError("gen-stimuli: give --pool, --toy-pool or --norms");
  const NounPool pool = g.toy_pool ? toylm::toy_noun_pool(g.toy_vocab) : load_noun_pool(*g.pool);
  ArbitrarySetOptions o;
  o.n_lists = g.n_lists;
  o.base_len = g.base_len;
  o.cap = g.cap;
  o.condition = cond;
  o.seed = seed;
  const auto set = generate_arbitrary_set(pool, o);
  const auto p = out / ("arbitrary-" + std::string(to_string(cond)) + ".jsonl");
  require_fresh(p, c.force);
  save_stimulus_set(set, p);
  std::ofstream prov(out / "pool_provenance.jsonl");
  write_pool_provenance(pool, prov);
  std::cout << p.string() << ": " << set.vignettes.size() << " vignettes\n";
  return kExitOk;
}

// --- toy-train -----------------------------------------------------------

int toy_train(const Common& c, bool resume) {
  toylm::ToyConfig model;
  toylm::SynthCorpusConfig corpus;
  toylm::TrainConfig train;
  if (c.config) {
    const auto j = read_json(*c.config);
    if (j.contains("model")) model = j.at("model").get<toylm::ToyConfig>();
    if (j.contains("corpus")) corpus = j.at("corpus").get<toylm::SynthCorpusConfig>();
    if (j.contains("train")) train = j.at("train").get<toylm::TrainConfig>();
  }
  if (c.seed) {
    model.seed = *c.seed;
    corpus.seed = derive_seed(*c.seed, 1);
  }
  const fs::path out = c.out.value_or("toy-run");
  std::string log_csv = "step,tokens_seen,heldout_bits\n";
  toylm::TrainOptions opts;
  opts.keep_checkpoints = false;
  opts.on_checkpoint = [&](const toylm::ToyCheckpoint& ck, const toylm::EvalPoint& ep) {
    toylm::save_checkpoint(ck, out / toylm::checkpoint_filename(ck.step));
    log_csv += std::to_string(ep.step) + "," + std::to_string(ep.tokens_seen) + "," + format_double(ep.loss_bits) + "\n";
    std::cout << "step " << ep.step << "  tokens " << ep.tokens_seen << "  held-out " << ep.loss_bits << " bits\n"
              << std::flush;
  };
  toylm::TrainResult result;
  if (resume) {
    const auto cks = toylm::list_checkpoints(out);
    if (cks.empty()) throw InputError("toy-train --resume: no checkpoints in " + out.string());
    const auto last = toylm::load_checkpoint(cks.back().path);
    if (fs::exists(out / "train_log.csv")) {
      // Keep log rows up to the resumed checkpoint; later ones are rewritten.
      log_csv.clear();
      for (const auto& line : split(read_file(out / "train_log.csv"), '\n')) {
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells[0] != "step" && std::stoull(cells[0]) >= last.step) continue;
        log_csv += line + "\n";
      }
    }
    std::cout << "resuming from step " << last.step << "\n";
    result = toylm::resume(last, opts);
  } else {
    if (fs::exists(out) && !toylm::list_checkpoints(out).empty() && !c.force) {
      throw InputError(out.string() + " already holds checkpoints; pass --force or --resume");
    }
    fs::create_directories(out);
    nlohmann::ordered_json cfg;
    cfg["model"] = nlohmann::json(model);
    cfg["corpus"] = nlohmann::json(corpus);
    cfg["train"] = nlohmann::json(train);
    write_file_atomic(out / "config.json", cfg.dump(2) + "\n");
    result = toylm::train(model, corpus, train, opts);
  }
  write_file_atomic(out / "train_log.csv", log_csv);
  return kExitOk;
}

// --- score ---------------------------------------------------------------

struct ScoreArgs {
  fs::path stimuli;
  std::optional<std::string> endpoint;  // toy:<dir>
  std::optional<std::string> url;
  std::optional<std::string> model;
  std::string revision;
};

int score_cmd(const Common& c, const ScoreArgs& a) {
  const auto set = load_stimulus_set(a.stimuli);
  std::unique_ptr<Provider> provider;
  if (a.endpoint && a.endpoint->rfind("toy:", 0) == 0) {
    const fs::path dir = a.endpoint->substr(4);
    std::optional<fs::path> ck;
    for (const auto& e : toylm::list_checkpoints(dir)) {
      if (toylm::step_revision(e.step) == a.revision || (a.revision.empty())) ck = e.path;
    }
    if (!ck) throw InputError("score: no checkpoint for revision '" + a.revision + "' in " + dir.string());
    provider = toylm::ToyProvider::from_checkpoint(toylm::load_checkpoint(*ck));
  } else {
    ProviderEndpoint pe;
    pe.base_url = a.url.value_or(ProviderEndpoint::default_base_url());
    if (pe.base_url.empty()) throw InputError(std::string("score: give --url or set ") + kProviderUrlEnv);
    if (!a.model) throw InputError("score: --model is required for HTTP endpoints");
    pe.model_id = *a.model;
    pe.revision = a.revision;
    provider = std::make_unique<HttpProvider>(pe);
  }
  const auto mode = parse_subtoken_mode(c.subtoken_mode.value_or("sum"));
  provider->preflight();
  const auto scores = score_stimuli(*provider, set, mode, 4);
  std::string body;
  std::vector<double> lr;
  std::size_t degenerate = 0;
  for (const auto& s : scores) {
    body += score_to_json(s).dump() + "\n";
    if (s.degenerate) {
      ++degenerate;
    } else {
      lr.push_back(100.0 * s.lr);
    }
  }
  if (c.out) {
    require_fresh(*c.out, c.force);
    write_file_atomic(*c.out, body);
  } else {
    std::cout << body;
  }
  if (!lr.empty()) {
    const Eigen::Map<const Vector<double>> v(lr.data(), static_cast<Eigen::Index>(lr.size()));
    std::cerr << provider->model_id() << " " << provider->revision() << ": L^r trimmed mean "
              << trimmed_mean(v, c.trim.value_or(0.2)) << "% over " << lr.size() << " vignettes, " << degenerate
              << " degenerate excluded\n";
  }
  return kExitOk;
}

// --- sweep ---------------------------------------------------------------

int sweep_cmd(const Common& c) {
  if (!c.config) throw InputError("sweep: --config is required");
  auto j = read_json(*c.config);
  if (c.condition && j.contains("stimuli")) {
    for (auto& s : j["stimuli"]) {
      if (s.contains("generate")) s["generate"]["condition"] = *c.condition;
    }
  }
  if (c.subtoken_mode) j["subtoken_mode"] = *c.subtoken_mode;
  auto cfg = parse_sweep_config(j, c.config->parent_path());
  if (c.out) cfg.output_dir = *c.out;
  if (c.trim) cfg.trim = *c.trim;
  if (c.bootstrap_b) cfg.bootstrap_b = *c.bootstrap_b;
  if (c.seed) cfg.bootstrap_seed = *c.seed;
  cfg.force = c.force;
  const auto rep = run_sweep(cfg, std::cerr);
  std::cerr << rep.scored << " scored, " << rep.skipped << " already present, " << rep.failures.size()
            << " failed\n";
  if (rep.scored + rep.skipped == 0 && rep.failures.empty()) {
    std::cerr << "no results\n";
    return kExitUsage;
  }
  return rep.failures.empty() ? kExitOk : kExitPartial;
}

// --- import-benchmarks / correlate / concreteness / report ---------------

int import_cmd(const Common& c, const fs::path& dir) {
  const auto recs = import_benchmarks(dir);
  if (recs.empty()) {
    std::cerr << "no benchmark records in " << dir.string() << "\n";
    return kExitUsage;
  }
  const fs::path out = c.out.value_or("benchmarks.csv");
  require_fresh(out, c.force);
  write_file_atomic(out, benchmarks_to_csv(recs));
  std::cerr << recs.size() << " records written to " << out.string() << "\n";
  for (const auto& key : {"lambada_openai"}) {
    if (auto ch = chance_level(key)) std::cerr << "chance level " << key << ": " << *ch << "\n";
  }
  return kExitOk;
}

int correlate_cmd(const Common& c, const fs::path& store, const fs::path& benchmarks, const std::string& set) {
  const auto results = load_results(store);
  if (results.empty()) {
    std::cerr << "no results\n";
    return kExitUsage;
  }
  const std::size_t b = c.bootstrap_b.value_or(5000);
  const std::uint64_t seed = c.seed.value_or(0);
  const auto rows = summarize_all(results, c.trim.value_or(0.2), b, seed);
  const auto corr = correlate_all(rows, set, load_benchmarks_csv(benchmarks), b, seed, std::cerr);
  const auto body = correlations_csv(corr);
  if (c.out) {
    write_file_atomic(*c.out, body);
  } else {
    std::cout << body;
  }
  return corr.empty() ? kExitUsage : kExitOk;
}

int concreteness_cmd(const Common& c, const fs::path& store) {
  const auto results = load_results(store);
  const auto rows = summarize_all(results, c.trim.value_or(0.2), c.bootstrap_b.value_or(5000), c.seed.value_or(0));
  const auto deltas = concreteness_deltas(rows);
  if (deltas.empty()) {
    std::cerr << "no results (need sets named 'concrete' and 'abstract')\n";
    return kExitUsage;
  }
  const auto body = concreteness_delta_csv(deltas);
  if (c.out) {
    write_file_atomic(*c.out, body);
  } else {
    std::cout << body;
  }
  return kExitOk;
}

int report_cmd(const Common& c, const fs::path& store, const std::optional<fs::path>& benchmarks,
               const std::string& set) {
  ReportOptions o;
  o.store_dir = store;
  o.out_dir = c.out.value_or(store / "report");
  o.benchmarks_csv = benchmarks;
  o.retrieval_set = set;
  o.trim = c.trim.value_or(o.trim);
  o.bootstrap_b = c.bootstrap_b.value_or(o.bootstrap_b);
  o.bootstrap_seed = c.seed.value_or(o.bootstrap_seed);
  const auto files = write_report(o, std::cerr);
  for (const auto& p : files.csv) std::cout << p.string() << "\n";
  for (const auto& p : files.svg) std::cout << p.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reprobe: verbatim in-context retrieval probes for language models"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("gen-stimuli", "Generate vignette stimulus sets");
  GenArgs g;
  add_common(gen, common, false);
  gen->add_option("--pool", g.pool, "Noun pool file, one word per line");
  gen->add_flag("--toy-pool", g.toy_pool, "Use the toy model's noun pool");
  gen->add_option("--toy-vocab", g.toy_vocab, "Toy vocabulary size for --toy-pool");
  gen->add_option("--norms", g.norms, "Concreteness norms table; generates concrete and abstract sets");
  gen->add_option("--rating-column", g.rating_column, "Rating column of the norms table");
  gen->add_flag("--allow-any-size", g.allow_any_size, "Accept categories with other than --n-extremes words");
  gen->add_option("--n-extremes", g.n_extremes, "Words per concreteness category");
  gen->add_option("--n-lists", g.n_lists, "Lists in the arbitrary set");
  gen->add_option("--base-len", g.base_len, "Nouns per source list");
  gen->add_option("--cap", g.cap, "Nouns per rendered list");
  gen->add_option("--condition", common.condition, "repeat or control")->check(CLI::IsMember({"repeat", "control"}));

  auto* tt = app.add_subcommand("toy-train", "Train the toy transformer and save checkpoints");
  bool resume = false;
  add_common(tt, common, false);
  tt->add_flag("--resume", resume, "Continue from the latest checkpoint in --out");

  auto* sc = app.add_subcommand("score", "Score one stimulus set with one endpoint");
  ScoreArgs sa;
  add_common(sc, common, true);
  sc->add_option("--stimuli", sa.stimuli, "Stimulus JSONL")->required();
  sc->add_option("--endpoint", sa.endpoint, "toy:<checkpoint-dir>");
  sc->add_option("--url", sa.url, "Provider base URL");
  sc->add_option("--model", sa.model, "Model id for HTTP endpoints");
  sc->add_option("--revision", sa.revision, "Revision, e.g. step143000");
  sc->add_option("--subtoken-mode", common.subtoken_mode, "sum or mean")->check(CLI::IsMember({"sum", "mean"}));

  auto* sw = app.add_subcommand("sweep", "Score every endpoint x step x stimulus set");
  add_common(sw, common, true);
  sw->add_option("--condition", common.condition, "Override the condition of generated sets")
      ->check(CLI::IsMember({"repeat", "control"}));
  sw->add_option("--subtoken-mode", common.subtoken_mode, "sum or mean")->check(CLI::IsMember({"sum", "mean"}));

  auto* ib = app.add_subcommand("import-benchmarks", "Validate and merge benchmark CSVs");
  fs::path bench_dir;
  add_common(ib, common, false);
  ib->add_option("dir", bench_dir, "Directory of model,task_key,step,accuracy CSVs")->required();

  fs::path store;
  fs::path bench_csv;
  std::optional<fs::path> report_bench;
  std::string set = "arbitrary";

  auto* co = app.add_subcommand("correlate", "Correlate retrieval and benchmark trajectories");
  add_common(co, common, true);
  co->add_option("--store", store, "Sweep output directory")->required();
  co->add_option("--benchmarks", bench_csv, "CSV written by import-benchmarks")->required();
  co->add_option("--set", set, "Stimulus set used as the retrieval trajectory");

  auto* cc = app.add_subcommand("concreteness", "Concrete minus abstract L^r per checkpoint");
  add_common(cc, common, true);
  cc->add_option("--store", store, "Sweep output directory")->required();

  auto* rp = app.add_subcommand("report", "Write CSV tables and SVG charts");
  add_common(rp, common, true);
  rp->add_option("--store", store, "Sweep output directory")->required();
  rp->add_option("--benchmarks", report_bench, "CSV written by import-benchmarks");
  rp->add_option("--set", set, "Stimulus set used as the retrieval trajectory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return gen_stimuli(common, g);
    if (*tt) return toy_train(common, resume);
    if (*sc) return score_cmd(common, sa);
    if (*sw) return sweep_cmd(common);
    if (*ib) return import_cmd(common, bench_dir);
    if (*co) return correlate_cmd(common, store, bench_csv, set);
    if (*cc) return concreteness_cmd(common, store);
    if (*rp) return report_cmd(common, store, report_bench, set);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPartial;
  }
  return kExitUsage;
}
