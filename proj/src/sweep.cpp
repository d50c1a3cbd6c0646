#include "reprobe/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>

#include "reprobe/common.hpp"
#include "reprobe/toylm/checkpoint.hpp"
#include "reprobe/toylm/tokenizer.hpp"
#include "reprobe/toylm/toy_provider.hpp"

namespace reprobe {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

std::int64_t parse_step_label(const std::string& revision) {
  static const std::regex re(R"(step(\d+))");
  std::smatch m;
  if (!std::regex_match(revision, m, re)) throw InputError("not a step revision: '" + revision + "'");
  return std::stoll(m[1].str());
}

std::string revision_for(std::int64_t step) { return "step" + std::to_string(step); }

std::string pct(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

nlohmann::ordered_json meta_to_json(const ResultMeta& m) {
  nlohmann::ordered_json j;
  j["model"] = m.model;
  j["revision"] = m.revision;
  j["set"] = m.set;
  j["condition"] = std::string(to_string(m.condition));
  j["step"] = m.step;
  j["tokens_seen"] = m.tokens_seen;
  j["stimulus_hash"] = m.stimulus_hash;
  j["subtoken_mode"] = std::string(to_string(m.subtoken_mode));
  return j;
}

ResultMeta meta_from_json(const nlohmann::json& j) {
  ResultMeta m;
  m.model = j.at("model").get<std::string>();
  m.revision = j.at("revision").get<std::string>();
  m.set = j.at("set").get<std::string>();
  m.condition = parse_condition(j.at("condition").get<std::string>());
  m.step = j.at("step").get<std::int64_t>();
  m.tokens_seen = j.at("tokens_seen").get<std::int64_t>();
  m.stimulus_hash = j.at("stimulus_hash").get<std::string>();
  m.subtoken_mode = parse_subtoken_mode(j.at("subtoken_mode").get<std::string>());
  return m;
}

std::filesystem::path meta_path(std::filesystem::path p) {
  p.replace_extension(".meta.json");
  return p;
}

StimulusSet generate_from_spec(const nlohmann::json& g, const std::filesystem::path& base) {
  const std::string kind = g.value("kind", "arbitrary");
  const Condition condition = parse_condition(g.value("condition", "repeat"));
  const std::uint64_t seed = g.value("seed", std::uint64_t{0});
  if (kind == "arbitrary") {
    const std::string pool_spec = g.at("pool").get<std::string>();
    NounPool pool = pool_spec == "toy"
                        ? toylm::toy_noun_pool(g.value("toy_vocab_size", std::size_t{2048}))
                        : load_noun_pool(resolve(base, pool_spec));
    ArbitrarySetOptions o;
    o.n_lists = g.value("n_lists", o.n_lists);
    o.base_len = g.value("base_len", o.base_len);
    o.cap = g.value("cap", o.cap);
    o.condition = condition;
    o.seed = seed;
    return generate_arbitrary_set(pool, o);
  }
  if (kind == "concreteness") {
    const auto norms = load_concreteness_norms(resolve(base, g.at("norms").get<std::string>()),
                                               g.value("rating_column", std::string(kDefaultRatingColumn)));
    const auto extremes = select_extremes(norms, g.value("n", std::size_t{500}));
    ConcretenessSetOptions o;
    o.cap = g.value("cap", o.cap);
    o.condition = condition;
    o.seed = seed;
    o.allow_any_size = g.value("allow_any_size", false);
    o.expected_size = g.value("n", std::size_t{500});
    auto sets = generate_concreteness_sets(extremes, o);
    const std::string category = g.at("category").get<std::string>();
    if (category == "concrete") return std::move(sets.concrete);
    if (category == "abstract") return std::move(sets.abstract);
    throw InputError("stimuli: category must be 'concrete' or 'abstract'");
  }
  throw InputError("stimuli: unknown generator kind '" + kind + "'");
}

// One step of one endpoint, ready to score.
struct Target {
  std::int64_t step = 0;
  std::string revision;
  std::int64_t tokens_seen = 0;
  std::filesystem::path checkpoint;  // toy only
};

std::vector<Target> targets_for(const EndpointSpec& ep, const std::optional<std::vector<std::int64_t>>& steps) {
  std::vector<Target> out;
  switch (ep.kind) {
    case EndpointSpec::Kind::kHttp: {
      const auto& list = steps ? *steps : pythia_retrieval_steps();
      for (auto s : list) out.push_back({s, revision_for(s), s * ep.tokens_per_step, {}});
      break;
    }
    case EndpointSpec::Kind::kToy: {
      std::map<std::int64_t, std::filesystem::path> avail;
      for (const auto& c : toylm::list_checkpoints(ep.dir)) {
        avail[static_cast<std::int64_t>(c.step)] = c.path;
      }
      if (steps) {
        for (auto s : *steps) {
          auto it = avail.find(s);
          out.push_back({s, revision_for(s), -1,
                         it == avail.end() ? ep.dir / toylm::checkpoint_filename(static_cast<std::size_t>(s))
                                           : it->second});
        }
      } else {
        for (const auto& [s, p] : avail) out.push_back({s, revision_for(s), -1, p});
      }
      break;
    }
    case EndpointSpec::Kind::kReplay: {
      std::set<std::int64_t> avail;
      if (std::filesystem::is_directory(ep.dir)) {
        for (const auto& e : std::filesystem::recursive_directory_iterator(ep.dir)) {
          if (e.is_regular_file() && e.path().extension() == ".jsonl") {
            avail.insert(parse_step_label(e.path().stem().string()));
          }
        }
      } else {
        throw InputError("replay directory not found: " + ep.dir.string());
      }
      if (steps) {
        for (auto s : *steps) out.push_back({s, revision_for(s), -1, {}});
      } else {
        for (auto s : avail) out.push_back({s, revision_for(s), -1, {}});
      }
      break;
    }
  }
  return out;
}

}  // namespace

EndpointSpec parse_endpoint(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  EndpointSpec ep;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s.rfind("toy:", 0) == 0) {
      ep.kind = EndpointSpec::Kind::kToy;
      ep.dir = resolve(base_dir, s.substr(4));
      ep.model = "toy";
    } else if (s.rfind("replay:", 0) == 0) {
      ep.kind = EndpointSpec::Kind::kReplay;
      ep.dir = resolve(base_dir, s.substr(7));
    } else {
      throw InputError("endpoint: expected 'toy:<dir>', 'replay:<dir>' or an object, got '" + s + "'");
    }
    return ep;
  }
  if (!j.is_object()) throw InputError("endpoint: expected a string or an object");
  if (j.contains("toy")) {
    ep.kind = EndpointSpec::Kind::kToy;
    ep.dir = resolve(base_dir, j.at("toy").get<std::string>());
    ep.model = j.value("model", std::string("toy"));
  } else if (j.contains("replay")) {
    ep.kind = EndpointSpec::Kind::kReplay;
    ep.dir = resolve(base_dir, j.at("replay").get<std::string>());
    ep.model = j.value("model", std::string());
  } else {
    ep.kind = EndpointSpec::Kind::kHttp;
    ep.base_url = j.value("base_url", ProviderEndpoint::default_base_url());
    if (ep.base_url.empty()) {
      throw InputError(std::string("endpoint: no base_url and ") + kProviderUrlEnv + " is unset");
    }
    ep.model = j.at("model").get<std::string>();
    ep.tokens_per_step = j.value("tokens_per_step", kPythiaTokensPerStep);
  }
  if (j.contains("timeout_s")) {
    ep.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(j.at("timeout_s").get<double>() * 1000));
  }
  ep.max_inflight = j.value("max_inflight", std::size_t{0});
  return ep;
}

NamedStimulusSet resolve_stimuli(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  NamedStimulusSet out;
  out.name = j.at("name").get<std::string>();
  if (out.name.empty() || path_component(out.name) != out.name) {
    throw InputError("stimuli: set name '" + out.name + "' must be a plain identifier");
  }
  if (j.contains("path")) {
    out.set = load_stimulus_set(resolve(base_dir, j.at("path").get<std::string>()));
  } else if (j.contains("generate")) {
    out.set = generate_from_spec(j.at("generate"), base_dir);
  } else {
    throw InputError("stimuli '" + out.name + "': needs 'path' or 'generate'");
  }
  if (out.set.vignettes.empty()) throw InputError("stimuli '" + out.name + "': empty set");
  out.hash = fnv1a_hex(serialize_stimulus_set(out.set));
  return out;
}

SweepConfig parse_sweep_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  SweepConfig c;
  for (const auto& e : j.at("endpoints")) c.endpoints.push_back(parse_endpoint(e, base_dir));
  if (c.endpoints.empty()) throw InputError("sweep config: no endpoints");
  if (j.contains("steps")) {
    auto steps = j.at("steps").get<std::vector<std::int64_t>>();
    std::set<std::int64_t> uniq(steps.begin(), steps.end());
    if (uniq.size() != steps.size()) throw InputError("sweep config: duplicate steps");
    c.steps = std::move(steps);
  }
  for (const auto& s : j.at("stimuli")) c.stimuli.push_back(resolve_stimuli(s, base_dir));
  if (c.stimuli.empty()) throw InputError("sweep config: no stimuli");
  std::set<std::string> names;
  for (const auto& s : c.stimuli) {
    if (!names.insert(s.name).second) throw InputError("sweep config: duplicate stimulus name '" + s.name + "'");
  }
  c.subtoken_mode = parse_subtoken_mode(j.value("subtoken_mode", std::string("sum")));
  c.trim = j.value("trim", c.trim);
  c.bootstrap_b = j.value("bootstrap_b", c.bootstrap_b);
  c.bootstrap_seed = j.value("bootstrap_seed", c.bootstrap_seed);
  if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
  c.max_inflight = j.value("max_inflight", c.max_inflight);
  if (c.max_inflight == 0) throw InputError("sweep config: max_inflight must be >= 1");
  if (!(c.trim >= 0.0 && c.trim < 0.5)) throw InputError("sweep config: trim must be in [0, 0.5)");
  if (c.bootstrap_b < kMinBootstrapResamples) throw InputError("sweep config: bootstrap_b must be >= 100");
  return c;
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return parse_sweep_config(j, path.parent_path());
}

std::string path_component(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
    if (!ok) c = '_';
  }
  return out;
}

std::filesystem::path result_path(const std::filesystem::path& out_dir, const ResultMeta& m) {
  return out_dir / "results" / path_component(m.model) / m.set / (path_component(m.revision) + ".jsonl");
}

std::filesystem::path response_path(const std::filesystem::path& out_dir, const ResultMeta& m) {
  return out_dir / "responses" / path_component(m.model) / m.set / (path_component(m.revision) + ".jsonl");
}

void write_result(const std::filesystem::path& out_dir, const StoredResult& r) {
  std::string body;
  for (const auto& s : r.scores) body += score_to_json(s).dump() + "\n";
  const auto p = result_path(out_dir, r.meta);
  write_file_atomic(p, body);
  // The meta file marks the pair complete, so it goes last.
  write_file_atomic(meta_path(p), meta_to_json(r.meta).dump(2) + "\n");
}

std::vector<StoredResult> load_results(const std::filesystem::path& out_dir) {
  std::vector<StoredResult> out;
  const auto root = out_dir / "results";
  if (!std::filesystem::is_directory(root)) return out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    const auto name = e.path().filename().string();
    if (!e.is_regular_file() || name.size() < 10 || name.substr(name.size() - 10) != ".meta.json") continue;
    StoredResult r;
    r.meta = meta_from_json(nlohmann::json::parse(read_file(e.path())));
    auto data = e.path();
    data.replace_filename(name.substr(0, name.size() - 10) + ".jsonl");
    for (const auto& line : split(read_file(data), '\n')) {
      if (trim(line).empty()) continue;
      r.scores.push_back(score_from_json(nlohmann::json::parse(line)));
    }
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const StoredResult& a, const StoredResult& b) {
    return std::tie(a.meta.model, a.meta.set, a.meta.step) < std::tie(b.meta.model, b.meta.set, b.meta.step);
  });
  return out;
}

std::vector<RetrievalScore> score_stimuli(const Provider& provider, const StimulusSet& set,
                                          SubtokenMode mode, std::size_t max_inflight,
                                          std::vector<ScoredText>* responses) {
  std::vector<ScoreRequest> reqs;
  reqs.reserve(set.vignettes.size());
  for (const auto& v : set.vignettes) reqs.push_back({v.id, v.text});
  auto scored = score_batch(provider, reqs, max_inflight);
  std::vector<RetrievalScore> out;
  out.reserve(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    const auto& v = set.vignettes[i];
    try {
      const auto aligned = align_noun_losses(v, scored[i], mode);
      out.push_back(repeat_loss_change(aligned.losses, v.id, aligned.repeat_token_gap));
    } catch (const Error& e) {
      throw ProtocolError(v.id + ": " + e.what());
    }
  }
  if (responses) *responses = std::move(scored);
  return out;
}

ReplayProvider::ReplayProvider(std::string model, std::string revision, std::vector<ScoredText> responses)
    : model_(std::move(model)), revision_(std::move(revision)) {
  for (auto& r : responses) {
    auto text = r.text;
    by_text_.insert_or_assign(std::move(text), std::move(r));
  }
}

std::unique_ptr<ReplayProvider> ReplayProvider::from_dir(const std::filesystem::path& dir,
                                                         const std::string& revision) {
  std::vector<ScoredText> responses;
  std::string model;
  std::int64_t tokens_seen = -1;
  const std::string want = path_component(revision) + ".jsonl";
  if (!std::filesystem::is_directory(dir)) throw InputError("replay directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() == want) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("replay: no recorded responses for " + revision + " in " + dir.string());
  for (const auto& f : files) {
    bool header = true;
    for (const auto& line : split(read_file(f), '\n')) {
      if (trim(line).empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (header) {
        model = j.at("model").get<std::string>();
        tokens_seen = j.at("tokens_seen").get<std::int64_t>();
        header = false;
        continue;
      }
      const auto text = j.at("text").get<std::string>();
      responses.push_back(parse_score_response(j.at("response"), text, j.at("id").get<std::string>()));
    }
  }
  auto out = std::make_unique<ReplayProvider>(model, revision, std::move(responses));
  out->tokens_seen_ = tokens_seen;
  return out;
}

ScoredText ReplayProvider::score(const std::string& text) const {
  auto it = by_text_.find(text);
  if (it == by_text_.end()) throw ProtocolError("replay: no recorded response for this text");
  return it->second;
}

SweepReport run_sweep(const SweepConfig& cfg, std::ostream& log) {
  SweepReport rep;
  for (const auto& ep : cfg.endpoints) {
    std::vector<Target> targets;
    try {
      targets = targets_for(ep, cfg.steps);
    } catch (const Error& e) {
      rep.failures.push_back(ep.model + ": " + e.what());
      log << "error: " << rep.failures.back() << "\n";
      continue;
    }
    const std::size_t inflight = std::max<std::size_t>(
        1, ep.max_inflight ? std::min(ep.max_inflight, cfg.max_inflight) : cfg.max_inflight);
    bool preflighted = false;
    for (const auto& t : targets) {
      // Resolve the provider lazily: nothing is loaded for pairs already on disk.
      std::unique_ptr<Provider> provider;
      std::int64_t tokens_seen = t.tokens_seen;
      std::string model = ep.model;
      auto open = [&] {
        if (provider) return;
        switch (ep.kind) {
          case EndpointSpec::Kind::kHttp: {
            ProviderEndpoint pe;
            pe.base_url = ep.base_url;
            pe.model_id = ep.model;
            pe.revision = t.revision;
            pe.timeout = ep.timeout;
            pe.max_inflight = inflight;
            provider = std::make_unique<HttpProvider>(pe);
            break;
          }
          case EndpointSpec::Kind::kToy: {
            const auto ckpt = toylm::load_checkpoint(t.checkpoint);
            tokens_seen = static_cast<std::int64_t>(ckpt.tokens_seen);
            provider = toylm::ToyProvider::from_checkpoint(ckpt, ep.model);
            break;
          }
          case EndpointSpec::Kind::kReplay: {
            auto rp = ReplayProvider::from_dir(ep.dir, t.revision);
            tokens_seen = rp->tokens_seen();
            provider = std::move(rp);
            break;
          }
        }
      };
      if (ep.kind == EndpointSpec::Kind::kReplay && model.empty()) {
        try {
          open();
          model = provider->model_id();
        } catch (const Error& e) {
          rep.failures.push_back("replay " + t.revision + ": " + e.what());
          log << "error: " << rep.failures.back() << "\n";
          continue;
        }
      }
      for (const auto& stim : cfg.stimuli) {
        ResultMeta meta;
        meta.model = model;
        meta.revision = t.revision;
        meta.set = stim.name;
        meta.condition = stim.set.vignettes.front().condition;
        meta.step = t.step;
        meta.stimulus_hash = stim.hash;
        meta.subtoken_mode = cfg.subtoken_mode;
        const auto rpath = result_path(cfg.output_dir, meta);
        const std::string label = model + " " + t.revision + " " + stim.name;
        if (!cfg.force && std::filesystem::exists(meta_path(rpath))) {
          const auto old = meta_from_json(nlohmann::json::parse(read_file(meta_path(rpath))));
          if (old.stimulus_hash != stim.hash || old.subtoken_mode != cfg.subtoken_mode) {
            rep.failures.push_back(label + ": stored result was made with different stimuli or "
                                   "subtoken mode; rerun with --force");
            log << "error: " << rep.failures.back() << "\n";
          } else {
            ++rep.skipped;
          }
          continue;
        }
        try {
          open();
          if (!preflighted) {
            provider->preflight();
            preflighted = true;
          }
          meta.tokens_seen = tokens_seen;
          std::vector<ScoredText> responses;
          StoredResult res{meta, score_stimuli(*provider, stim.set, cfg.subtoken_mode, inflight, &responses)};
          std::string rec;
          {
            nlohmann::ordered_json h;
            h["model"] = meta.model;
            h["revision"] = meta.revision;
            h["set"] = meta.set;
            h["step"] = meta.step;
            h["tokens_seen"] = meta.tokens_seen;
            rec += h.dump() + "\n";
          }
          for (std::size_t i = 0; i < responses.size(); ++i) {
            nlohmann::ordered_json line;
            line["id"] = stim.set.vignettes[i].id;
            line["text"] = responses[i].text;
            line["response"] = score_response_to_json(responses[i]);
            rec += line.dump() + "\n";
          }
          write_file_atomic(response_path(cfg.output_dir, meta), rec);
          write_result(cfg.output_dir, res);
          ++rep.scored;
          log << "scored " << label << " (" << res.scores.size() << " vignettes)\n";
        } catch (const Error& e) {
          rep.failures.push_back(label + ": " + e.what());
          log << "error: " << rep.failures.back() << "\n";
        }
      }
    }
  }
  const auto rows = summarize_all(load_results(cfg.output_dir), cfg.trim, cfg.bootstrap_b, cfg.bootstrap_seed);
  write_file_atomic(cfg.output_dir / "summary.csv", summary_csv(rows));
  write_file_atomic(cfg.output_dir / "per_position.csv", per_position_csv(rows));
  return rep;
}

SummaryRow summarize(const StoredResult& r, double trim, std::size_t b, std::uint64_t seed) {
  SummaryRow row;
  row.meta = r.meta;
  std::vector<double> lr;
  std::vector<std::vector<double>> pos;
  for (const auto& s : r.scores) {
    if (s.degenerate) {
      ++row.n_degenerate;
      continue;
    }
    lr.push_back(100.0 * s.lr);
    if (pos.size() < s.lr_per_position.size()) pos.resize(s.lr_per_position.size());
    for (std::size_t p = 0; p < s.lr_per_position.size(); ++p) pos[p].push_back(100.0 * s.lr_per_position[p]);
  }
  row.n = lr.size();
  const double nan = std::nan("");
  auto stat = [trim](const auto& xs) { return trimmed_mean(xs, trim); };
  auto describe = [&](const std::vector<double>& xs, double& mean, double& lo, double& hi) {
    if (xs.empty()) {
      mean = lo = hi = nan;
      return;
    }
    const Eigen::Map<const Vector<double>> v(xs.data(), static_cast<Eigen::Index>(xs.size()));
    mean = trimmed_mean(v, trim);
    if (xs.size() < 2) {
      lo = hi = nan;
      return;
    }
    const auto ci = bootstrap_ci(v, stat, b, 0.05, seed);
    lo = ci.lo;
    hi = ci.hi;
  };
  describe(lr, row.lr, row.ci_lo, row.ci_hi);
  row.mean = lr.empty() ? nan : std::accumulate(lr.begin(), lr.end(), 0.0) / static_cast<double>(lr.size());
  for (std::size_t p = 0; p < pos.size(); ++p) {
    PositionSummary ps;
    ps.position = p + 1;
    describe(pos[p], ps.lr, ps.ci_lo, ps.ci_hi);
    row.positions.push_back(ps);
  }
  return row;
}

std::vector<SummaryRow> summarize_all(const std::vector<StoredResult>& results, double trim,
                                      std::size_t b, std::uint64_t seed) {
  std::vector<SummaryRow> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(summarize(r, trim, b, seed));
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out =
      "model,set,condition,revision,step,tokens_seen,n,n_degenerate,lr_trimmed_pct,ci_lo_pct,ci_hi_pct,lr_mean_pct\n";
  for (const auto& r : rows) {
    out += r.meta.model + "," + r.meta.set + "," + std::string(to_string(r.meta.condition)) + "," +
           r.meta.revision + "," + std::to_string(r.meta.step) + "," + std::to_string(r.meta.tokens_seen) + "," +
           std::to_string(r.n) + "," + std::to_string(r.n_degenerate) + "," + pct(r.lr) + "," + pct(r.ci_lo) +
           "," + pct(r.ci_hi) + "," + pct(r.mean) + "\n";
  }
  return out;
}

std::string per_position_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "model,set,condition,revision,step,tokens_seen,position,lr_trimmed_pct,ci_lo_pct,ci_hi_pct\n";
  for (const auto& r : rows) {
    for (const auto& p : r.positions) {
      out += r.meta.model + "," + r.meta.set + "," + std::string(to_string(r.meta.condition)) + "," +
             r.meta.revision + "," + std::to_string(r.meta.step) + "," + std::to_string(r.meta.tokens_seen) +
             "," + std::to_string(p.position) + "," + pct(p.lr) + "," + pct(p.ci_lo) + "," + pct(p.ci_hi) + "\n";
    }
  }
  return out;
}

std::map<std::string, Trajectory> retrieval_trajectories(const std::vector<SummaryRow>& rows,
                                                         const std::string& set) {
  std::map<std::string, std::map<std::int64_t, double>> by;
  for (const auto& r : rows) {
    if (r.meta.set == set && std::isfinite(r.lr)) by[r.meta.model][r.meta.step] = r.lr;
  }
  std::map<std::string, Trajectory> out;
  for (const auto& [model, pts] : by) {
    std::vector<std::int64_t> steps;
    Vector<double> v(static_cast<Eigen::Index>(pts.size()));
    Eigen::Index i = 0;
    for (const auto& [s, x] : pts) {
      steps.push_back(s);
      v(i++) = x;
    }
    out.emplace(model, Trajectory(model, std::move(steps), std::move(v)));
  }
  return out;
}

std::vector<CorrelationRow> correlate_all(const std::vector<SummaryRow>& rows, const std::string& set,
                                          const std::vector<BenchmarkRecord>& records, std::size_t b,
                                          std::uint64_t seed, std::ostream& log, std::size_t min_points) {
  const auto retrieval = retrieval_trajectories(rows, set);
  const auto bench = benchmark_trajectories(records);
  std::map<std::string, std::optional<std::string>> group_of;
  for (const auto& r : records) group_of[r.task_key] = r.group;

  std::vector<CorrelationRow> out;
  for (const auto& [model, ret] : retrieval) {
    auto bit = bench.find(model);
    if (bit == bench.end()) {
      log << "warning: no benchmark records for model " << model << "\n";
      continue;
    }
    std::vector<Trajectory> singles;
    std::vector<Trajectory> grouped;
    std::map<std::string, std::string> grouping;
    for (const auto& t : bit->second) {
      const auto& g = group_of[t.label];
      if (g) {
        grouping[t.label] = *g;
        grouped.push_back(t);
      } else {
        singles.push_back(t);
      }
    }
    std::vector<std::pair<Trajectory, std::optional<std::string>>> tasks;
    for (auto& t : singles) tasks.emplace_back(std::move(t), std::nullopt);
    if (!grouped.empty()) {
      for (auto& [g, t] : group_average(grouped, grouping)) tasks.emplace_back(std::move(t), g);
    }
    for (const auto& [t, g] : tasks) {
      const auto shared = shared_steps(ret, t);
      if (shared.size() < min_points) {
        log << "warning: " << model << " " << t.label << ": only " << shared.size()
            << " shared checkpoints, skipped\n";
        continue;
      }
      try {
        const auto res = trajectory_correlation(restrict_to(ret, shared), restrict_to(t, shared), b, seed);
        if (res.redraws > 0) {
          log << "note: " << model << " " << t.label << ": " << res.redraws << " constant resamples redrawn\n";
        }
        out.push_back({model, t.label, g, res});
      } catch (const InputError& e) {
        log << "warning: " << model << " " << t.label << ": " << e.what() << ", skipped\n";
      }
    }
  }
  return out;
}

std::string correlations_csv(const std::vector<CorrelationRow>& rows) {
  std::string out = "model,task_key,group,rho,ci_lo,ci_hi,n_points,b,seed\n";
  for (const auto& r : rows) {
    out += r.model + "," + r.task_key + "," + r.group.value_or("None") + "," + format_double(r.result.rho) +
           "," + format_double(r.result.ci_lo) + "," + format_double(r.result.ci_hi) + "," +
           std::to_string(r.result.n_points) + "," + std::to_string(r.result.bootstrap_b) + "," +
           std::to_string(r.result.seed) + "\n";
  }
  return out;
}

std::vector<ConcretenessDeltaRow> concreteness_deltas(const std::vector<SummaryRow>& rows,
                                                      const std::string& concrete_set,
                                                      const std::string& abstract_set) {
  std::map<std::pair<std::string, std::int64_t>, const SummaryRow*> conc, abst;
  for (const auto& r : rows) {
    if (r.meta.set == concrete_set) conc[{r.meta.model, r.meta.step}] = &r;
    if (r.meta.set == abstract_set) abst[{r.meta.model, r.meta.step}] = &r;
  }
  std::vector<ConcretenessDeltaRow> out;
  for (const auto& [key, c] : conc) {
    auto it = abst.find(key);
    if (it == abst.end()) continue;
    ConcretenessDeltaRow d;
    d.model = key.first;
    d.step = key.second;
    d.tokens_seen = c->meta.tokens_seen;
    d.concrete = c->mean;
    d.abstract = it->second->mean;
    d.delta = d.concrete - d.abstract;
    out.push_back(d);
  }
  return out;
}

std::string concreteness_delta_csv(const std::vector<ConcretenessDeltaRow>& rows) {
  std::string out = "model,step,tokens_seen,concrete_mean_pct,abstract_mean_pct,delta_pct\n";
  for (const auto& r : rows) {
    out += r.model + "," + std::to_string(r.step) + "," + std::to_string(r.tokens_seen) + "," + pct(r.concrete) +
           "," + pct(r.abstract) + "," + pct(r.delta) + "\n";
  }
  return out;
}

}  // namespace reprobe
