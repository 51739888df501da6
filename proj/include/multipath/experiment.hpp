#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "hmm_sampler.hpp"
#include "io.hpp"
#include "lda_sampler.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "synth.hpp"

namespace multipath::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

// A config or eval spec that fails validation; the message names the field.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

namespace detail {

template <class T>
T field(const json& j, const std::string& name) {
  if (!j.contains(name)) throw ConfigError("missing required field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + name + "' has the wrong type");
  }
}

template <class T>
T field_or(const json& j, const std::string& name, T fallback) {
  if (!j.contains(name) || j.at(name).is_null()) return fallback;
  return field<T>(j, name);
}

inline std::size_t positive(const json& j, const std::string& name, std::size_t fallback) {
  if (j.contains(name) && j.at(name).is_number_integer() && j.at(name).get<long long>() < 1) {
    throw ConfigError("field '" + name + "' must be >= 1");
  }
  const auto v = field_or<std::size_t>(j, name, fallback);
  if (v < 1) throw ConfigError("field '" + name + "' must be >= 1");
  return v;
}

inline double positive_real(const json& j, const std::string& name, double fallback) {
  const auto v = field_or<double>(j, name, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("field '" + name + "' must be a positive number");
  return v;
}

inline fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

}  // namespace detail

/// SHA-256 of the given files' bytes, concatenated in order, as lowercase hex.
inline std::string digest_files(const std::vector<fs::path>& files) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  for (const auto& f : files) {
    auto in = io::open_in(f, std::ios::in | std::ios::binary);
    char buf[1 << 15];
    while (in) {
      in.read(buf, sizeof buf);
      if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char two[3];
  for (unsigned int k = 0; k < len; ++k) {
    std::snprintf(two, sizeof two, "%02x", md[k]);
    hex += two;
  }
  return hex;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

/// A dataset directory: metadata.json plus the files it names.
struct Dataset {
  fs::path dir;
  json metadata;
  std::string model;
  std::string label;  // dataset name used in tables
  // hmm
  ObservationSequence observations;
  std::optional<HmmParams> hmm_truth;
  // lda
  Corpus corpus;
  std::optional<TopicMatrix> lda_truth;
};

inline Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  ds.dir = dir;
  const fs::path meta_path = dir / "metadata.json";
  if (!fs::exists(meta_path)) throw io::IoError("dataset '" + dir.string() + "' has no metadata.json");
  ds.metadata = io::read_json(meta_path);
  ds.model = detail::field<std::string>(ds.metadata, "model");
  ds.label = dir.filename().string();
  if (ds.label.empty()) ds.label = dir.parent_path().filename().string();
  if (ds.model == "hmm") {
    const auto w = detail::field<std::size_t>(ds.metadata, "W");
    const auto obs = detail::field_or<std::string>(ds.metadata, "observations", "observations.txt");
    ds.observations = io::load_observations(dir / obs, w);
    if (ds.metadata.contains("ground_truth")) {
      ds.hmm_truth = io::hmm_params_from_json(io::read_json(dir / ds.metadata["ground_truth"].get<std::string>()));
    }
  } else if (ds.model == "lda") {
    const auto corpus = detail::field_or<std::string>(ds.metadata, "corpus", "corpus.jsonl");
    const auto vocab = detail::field_or<std::string>(ds.metadata, "vocab", "vocab.txt");
    ds.corpus = io::load_corpus_with_vocab(dir / corpus, dir / vocab);
    if (ds.metadata.contains("ground_truth")) {
      ds.lda_truth = io::topics_from_json(io::read_json(dir / ds.metadata["ground_truth"].get<std::string>()));
    }
  } else {
    throw ConfigError("dataset '" + dir.string() + "': field 'model' must be hmm or lda");
  }
  return ds;
}

struct GenerateResult {
  std::string digest;
  std::vector<fs::path> files;
};

/// Writes a synthetic dataset described by a generator spec into out_dir.
inline GenerateResult cmd_generate(const json& spec, const fs::path& out_dir, const Overrides& ov = {}) {
  const auto model = detail::field<std::string>(spec, "model");
  const std::uint64_t seed = ov.seed ? *ov.seed : detail::field_or<std::uint64_t>(spec, "seed", 0);
  fs::create_directories(out_dir);
  json meta;
  meta["model"] = model;
  meta["seed"] = seed;
  meta["spec"] = spec;
  GenerateResult result;

  if (model == "hmm") {
    SynthHmmSpec s;
    s.states = detail::positive(spec, "S", 2);
    s.symbols = detail::positive(spec, "W", 10);
    s.switch_prob = detail::field_or<double>(spec, "switch_prob", 0.45);
    s.length = detail::positive(spec, "N", 200000);
    s.seed = seed;
    if (spec.contains("emission_l1")) {
      const auto range = detail::field<std::vector<double>>(spec, "emission_l1");
      if (range.size() != 2) throw ConfigError("field 'emission_l1' must be [min, max]");
      s.min_emission_l1 = range[0];
      s.max_emission_l1 = range[1];
    }
    try {
      s.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    const auto format = detail::field_or<std::string>(spec, "format", "text");
    if (format != "text" && format != "binary") throw ConfigError("field 'format' must be text or binary");
    const std::string obs_name = format == "text" ? "observations.txt" : "observations.bin";

    const SynthHmm data = make_hard_hmm(s);
    io::save_observations(out_dir / obs_name, data.observations.symbols(),
                          format == "text" ? io::SequenceFormat::text : io::SequenceFormat::binary);
    io::save_observations(out_dir / "states.txt", std::vector<std::uint32_t>(data.states.begin(), data.states.end()),
                          io::SequenceFormat::text);
    io::write_json(out_dir / "ground_truth.json", io::to_json(data.params));
    result.files = {out_dir / obs_name, out_dir / "states.txt", out_dir / "ground_truth.json"};

    meta["S"] = s.states;
    meta["W"] = s.symbols;
    meta["N"] = s.length;
    meta["switch_prob"] = s.switch_prob;
    meta["emission_l1_range"] = {s.min_emission_l1, s.max_emission_l1};
    meta["emission_attempts"] = data.emission_attempts;
    meta["observations"] = obs_name;
    meta["states"] = "states.txt";
    meta["ground_truth"] = "ground_truth.json";
    meta["ground_truth_log_likelihood"] = forward_log_likelihood(data.params, data.observations);
  } else if (model == "lda") {
    SynthLdaSpec s;
    s.topics = detail::positive(spec, "T", 10);
    s.vocab = detail::positive(spec, "W", 100);
    s.docs = detail::positive(spec, "docs", 1500);
    s.doc_len = detail::positive(spec, "doc_len", 10);
    s.alpha = detail::positive_real(spec, "alpha", 1.0);
    s.band_weight = detail::field_or<double>(spec, "band_weight", 0.95);
    s.seed = seed;
    if (spec.contains("years")) {
      const auto& y = spec["years"];
      s.years = YearRange{detail::field<int>(y, "first"), detail::field<int>(y, "last")};
    }
    try {
      s.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    const SynthLda data = make_synth_lda(s);
    io::save_corpus(data.corpus, out_dir / "corpus.jsonl");
    std::vector<std::string> vocab(s.vocab);
    for (std::size_t w = 0; w < s.vocab; ++w) vocab[w] = "w" + std::to_string(w);
    io::save_vocab(vocab, out_dir / "vocab.txt");
    io::write_json(out_dir / "ground_truth.json", io::to_json(data.topics, std::nullopt));
    io::write_assignments_csv(out_dir / "truth_assignments.csv", LdaPathSet{{data.truth}});
    result.files = {out_dir / "corpus.jsonl", out_dir / "vocab.txt", out_dir / "ground_truth.json",
                    out_dir / "truth_assignments.csv"};

    meta["T"] = s.topics;
    meta["W"] = s.vocab;
    meta["docs"] = s.docs;
    meta["doc_len"] = s.doc_len;
    meta["tokens"] = data.corpus.size();
    meta["alpha"] = s.alpha;
    meta["band_weight"] = s.band_weight;
    meta["corpus"] = "corpus.jsonl";
    meta["vocab"] = "vocab.txt";
    meta["ground_truth"] = "ground_truth.json";
  } else {
    throw ConfigError("field 'model' must be hmm or lda (got '" + model + "')");
  }

  result.digest = digest_files(result.files);
  meta["digest"] = result.digest;
  io::write_json(out_dir / "metadata.json", meta);
  return result;
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::string model;
  Variant variant = Variant::collapsed;
  std::vector<std::size_t> paths{1};
  std::size_t iterations = 1000;
  std::size_t repetitions = 1;
  std::size_t cadence = 100;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t path_threads = 1;
  std::vector<fs::path> datasets;
  // hmm
  std::size_t states = 2;
  HmmPriors hmm_priors;
  // lda
  std::size_t topics = 10;
  LdaPriors lda_priors;

  /// Parses and validates. Relative dataset paths are resolved against base_dir.
  static ExperimentConfig from_json(const json& j, const fs::path& base_dir) {
    using namespace detail;
    ExperimentConfig c;
    c.model = field<std::string>(j, "model");
    if (c.model != "hmm" && c.model != "lda") throw ConfigError("field 'model' must be hmm or lda");
    try {
      c.variant = parse_variant(field_or<std::string>(j, "variant", "collapsed"));
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("field 'variant': ") + e.what());
    }
    if (j.contains("m") && j["m"].is_array()) {
      c.paths.clear();
      for (const auto& v : j["m"]) {
        if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError("field 'm' entries must be >= 1");
        c.paths.push_back(v.get<std::size_t>());
      }
      if (c.paths.empty()) throw ConfigError("field 'm' must not be empty");
    } else {
      c.paths = {positive(j, "m", 1)};
    }
    c.iterations = positive(j, "iterations", 1000);
    c.repetitions = positive(j, "repetitions", 1);
    c.cadence = positive(j, "cadence", 100);
    c.seed = field_or<std::uint64_t>(j, "seed", 0);
    c.threads = positive(j, "threads", 1);
    c.path_threads = positive(j, "path_threads", 1);

    if (!j.contains("dataset")) throw ConfigError("missing required field 'dataset'");
    if (j["dataset"].is_array()) {
      for (const auto& d : j["dataset"]) {
        if (!d.is_string()) throw ConfigError("field 'dataset' entries must be paths");
        c.datasets.push_back(resolve(base_dir, d.get<std::string>()));
      }
      if (c.datasets.empty()) throw ConfigError("field 'dataset' must not be empty");
    } else {
      c.datasets.push_back(resolve(base_dir, field<std::string>(j, "dataset")));
    }

    const json priors = j.value("priors", json::object());
    if (c.model == "hmm") {
      c.states = positive(j, "states", 2);
      c.hmm_priors.init = positive_real(priors, "init", 1.0);
      c.hmm_priors.trans = positive_real(priors, "trans", 1.0);
      c.hmm_priors.emit = positive_real(priors, "emit", 1.0);
    } else {
      c.topics = positive(j, "T", 10);
      c.lda_priors.eta = positive_real(priors, "eta", 0.01);
      c.lda_priors.alpha = positive_real(priors, "alpha", 10.0 / static_cast<double>(c.topics));
    }
    return c;
  }

  json to_json() const {
    json j;
    j["model"] = model;
    j["variant"] = to_string(variant);
    j["m"] = paths;
    j["iterations"] = iterations;
    j["repetitions"] = repetitions;
    j["cadence"] = cadence;
    j["seed"] = seed;
    j["threads"] = threads;
    j["path_threads"] = path_threads;
    std::vector<std::string> ds;
    for (const auto& d : datasets) ds.push_back(d.string());
    j["dataset"] = ds;
    if (model == "hmm") {
      j["states"] = states;
      j["priors"] = {{"init", hmm_priors.init}, {"trans", hmm_priors.trans}, {"emit", hmm_priors.emit}};
    } else {
      j["T"] = topics;
      j["priors"] = {{"eta", lda_priors.eta}, {"alpha", lda_priors.alpha}};
    }
    return j;
  }
};

struct Cell {
  std::size_t m = 1;
  std::size_t dataset = 0;
  fs::path dir;  // relative to the run directory
};

inline std::string rep_name(std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep_%03zu", r);
  return buf;
}

struct RepOutcome {
  double value = 0.0;                 // hmm: final log-likelihood; lda: final collapsed log joint
  std::optional<double> disc_value;   // lda with ground truth
};

inline RepOutcome run_one(const ExperimentConfig& cfg, const Dataset& ds, std::size_t m, std::size_t rep,
                          const fs::path& rep_dir) {
  RepOutcome outcome;
  if (cfg.model == "hmm") {
    HmmSamplerConfig sc;
    sc.variant = cfg.variant;
    sc.states = cfg.states;
    sc.paths = m;
    sc.iterations = cfg.iterations;
    sc.cadence = cfg.cadence;
    sc.seed = cfg.seed;
    sc.run = rep;
    sc.priors = cfg.hmm_priors;
    sc.path_threads = cfg.path_threads;
    const HmmRunResult r = run_hmm_sampler(sc, ds.observations);
    io::write_trace_csv(rep_dir / "trace.csv", r.trace);
    io::write_json(rep_dir / "params.json", io::to_json(r.params));
    io::write_assignments_csv(rep_dir / "paths.csv", r.paths, "state");
    outcome.value = forward_log_likelihood(r.params, ds.observations);
  } else {
    LdaSamplerConfig sc;
    sc.variant = cfg.variant;
    sc.topics = cfg.topics;
    sc.paths = m;
    sc.iterations = cfg.iterations;
    sc.cadence = cfg.cadence;
    sc.seed = cfg.seed;
    sc.run = rep;
    sc.priors = cfg.lda_priors;
    sc.path_threads = cfg.path_threads;
    const LdaRunResult r = run_lda_sampler(sc, ds.corpus);
    io::write_trace_csv(rep_dir / "trace.csv", r.trace, "log_joint");
    io::write_json(rep_dir / "topics.json", io::to_json(r.topics, cfg.lda_priors.eta));
    io::write_assignments_csv(rep_dir / "assignments.csv", r.paths, "topic");
    outcome.value = r.trace.back().value;
    if (ds.lda_truth) outcome.disc_value = disc(*ds.lda_truth, r.topics);
  }
  return outcome;
}

inline void write_summary(const fs::path& path, const std::string& model, const std::vector<RepOutcome>& reps) {
  std::vector<std::size_t> order(reps.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  const bool has_disc = model == "lda" && !reps.empty() && reps.front().disc_value.has_value();
  auto key = [&](std::size_t k) { return has_disc ? *reps[k].disc_value : reps[k].value; };
  if (model == "hmm" || has_disc) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  }
  if (model == "hmm") {
    io::CsvWriter csv(path, {"rank", "repetition", "log_likelihood"});
    for (std::size_t k = 0; k < order.size(); ++k) {
      csv.row({std::to_string(k), std::to_string(order[k]), io::fmt(reps[order[k]].value)});
    }
  } else if (has_disc) {
    io::CsvWriter csv(path, {"rank", "repetition", "disc", "log_joint"});
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& r = reps[order[k]];
      csv.row({std::to_string(k), std::to_string(order[k]), io::fmt(*r.disc_value), io::fmt(r.value)});
    }
  } else {
    io::CsvWriter csv(path, {"rank", "repetition", "log_joint"});
    for (std::size_t k = 0; k < order.size(); ++k) {
      csv.row({std::to_string(k), std::to_string(order[k]), io::fmt(reps[order[k]].value)});
    }
  }
}

struct RunSummary {
  std::vector<Cell> cells;
  std::vector<std::vector<RepOutcome>> outcomes;  // per cell, per repetition
};

/// Executes every (m, dataset) cell for the configured number of
/// repetitions. Repetition r of every cell uses stream ids (seed, r, ...).
/// A single cell writes straight into out_dir; a sweep writes one
/// subdirectory per cell. run.json lists the cells.
inline RunSummary cmd_run(const json& config_json, const fs::path& base_dir, const fs::path& out_dir,
                          const Overrides& ov = {}) {
  ExperimentConfig cfg = ExperimentConfig::from_json(config_json, base_dir);
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.threads) {
    if (*ov.threads < 1) throw ConfigError("--threads must be >= 1");
    cfg.threads = *ov.threads;
  }

  std::vector<Dataset> datasets;
  for (const auto& d : cfg.datasets) {
    datasets.push_back(load_dataset(d));
    if (datasets.back().model != cfg.model) {
      throw ConfigError("dataset '" + d.string() + "' is a " + datasets.back().model + " dataset but 'model' is " +
                        cfg.model);
    }
  }

  fs::create_directories(out_dir);
  const fs::path marker = out_dir / "_INCOMPLETE";
  { io::open_out(marker) << "run in progress or failed; outputs in this directory are partial\n"; }

  RunSummary summary;
  const bool sweep = cfg.paths.size() > 1 || datasets.size() > 1;
  for (std::size_t di = 0; di < datasets.size(); ++di) {
    for (std::size_t m : cfg.paths) {
      fs::path dir = sweep ? fs::path("m" + std::to_string(m) + "_" + datasets[di].label) : fs::path(".");
      summary.cells.push_back({m, di, dir});
    }
  }
  summary.outcomes.assign(summary.cells.size(), std::vector<RepOutcome>(cfg.repetitions));

  const std::size_t tasks = summary.cells.size() * cfg.repetitions;
  try {
    parallel_for(tasks, cfg.threads, [&](std::size_t k) {
      const std::size_t ci = k / cfg.repetitions;
      const std::size_t rep = k % cfg.repetitions;
      const Cell& cell = summary.cells[ci];
      const fs::path rep_dir = out_dir / cell.dir / rep_name(rep);
      fs::create_directories(rep_dir);
      summary.outcomes[ci][rep] = run_one(cfg, datasets[cell.dataset], cell.m, rep, rep_dir);
    });
  } catch (const std::exception& e) {
    io::open_out(out_dir / "FAILED.txt") << e.what() << '\n';
    throw;
  }

  json cells = json::array();
  for (std::size_t ci = 0; ci < summary.cells.size(); ++ci) {
    const Cell& cell = summary.cells[ci];
    write_summary(out_dir / cell.dir / "summary.csv", cfg.model, summary.outcomes[ci]);
    cells.push_back({{"m", cell.m},
                     {"dataset", datasets[cell.dataset].dir.string()},
                     {"dataset_label", datasets[cell.dataset].label},
                     {"dataset_digest", datasets[cell.dataset].metadata.value("digest", "")},
                     {"dir", cell.dir.string()}});
  }
  io::write_json(out_dir / "run.json", {{"config", cfg.to_json()}, {"cells", cells}});
  fs::remove(marker);
  return summary;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalSpec {
  fs::path run_dir;
  std::vector<std::string> metrics;
  double gamma = 0.05;
  std::vector<std::size_t> topics;  // for topic weight series
  std::size_t path_choice = 0;
  std::size_t bw_max_iters = 500;
  double bw_tol = 1e-6;
  std::uint64_t bw_seed = 0;

  static EvalSpec from_json(const json& j, const fs::path& base_dir) {
    using namespace detail;
    EvalSpec s;
    s.run_dir = resolve(base_dir, field<std::string>(j, "run"));
    s.metrics = field<std::vector<std::string>>(j, "metrics");
    static const std::vector<std::string> known = {"disc", "baum_welch", "entropy", "buckets", "topic_weights"};
    for (const auto& m : s.metrics) {
      if (std::find(known.begin(), known.end(), m) == known.end()) {
        throw ConfigError("field 'metrics': unknown metric '" + m + "'");
      }
    }
    s.gamma = field_or<double>(j, "gamma", 0.05);
    if (!(s.gamma > 0.0 && s.gamma < 1.0)) throw ConfigError("field 'gamma' must lie in (0, 1)");
    s.topics = field_or<std::vector<std::size_t>>(j, "topics", {});
    s.path_choice = field_or<std::size_t>(j, "path_choice", 0);
    const json bw = j.value("baum_welch", json::object());
    s.bw_max_iters = positive(bw, "max_iters", 500);
    s.bw_tol = field_or<double>(bw, "tol", 1e-6);
    s.bw_seed = field_or<std::uint64_t>(bw, "seed", 0);
    return s;
  }
};

/// Random starting point for Baum-Welch: every row a Dir(1) draw.
inline HmmParams random_hmm_params(std::size_t states, std::size_t symbols, RngStream& rng) {
  std::vector<double> s_flat(states, 1.0), w_flat(symbols, 1.0);
  std::vector<SimplexVector> tr, em;
  for (std::size_t r = 0; r < states; ++r) tr.push_back(sample_dirichlet(s_flat, rng));
  for (std::size_t r = 0; r < states; ++r) em.push_back(sample_dirichlet(w_flat, rng));
  return HmmParams(sample_dirichlet(s_flat, rng), tr, em);
}

inline std::vector<YearTopicTable> year_tables_for_cell(const Dataset& ds, const fs::path& cell_dir,
                                                       std::size_t reps, std::size_t topics,
                                                       std::size_t path_choice) {
  if (!ds.corpus.has_years()) {
    throw InvalidArgument("dataset '" + ds.dir.string() + "' has documents without year stamps");
  }
  std::vector<int> years;
  for (const auto& y : ds.corpus.years()) years.push_back(*y);
  std::vector<YearTopicTable> tables;
  for (std::size_t r = 0; r < reps; ++r) {
    const LdaPathSet ps = io::read_assignments_csv(cell_dir / rep_name(r) / "assignments.csv", ds.corpus.size());
    std::vector<SimplexVector> thetas;
    for (std::size_t d = 0; d < ds.corpus.docs(); ++d) thetas.push_back(theta_doc(ps, ds.corpus, d, topics, path_choice));
    tables.push_back(yearly_topic_table(thetas, years));
  }
  return tables;
}

inline void write_histogram(const fs::path& path, const std::map<int, double>& hist) {
  io::CsvWriter csv(path, {"bin", "count"});
  for (const auto& [bin, count] : hist) csv.row({std::to_string(bin), io::fmt(count)});
}

/// Computes the requested metrics over a finished run and writes CSV/JSON
/// files into out_dir. Returns the single-value metrics.
inline json cmd_eval(const json& spec_json, const fs::path& base_dir, const fs::path& out_dir) {
  const EvalSpec spec = EvalSpec::from_json(spec_json, base_dir);
  const json run = io::read_json(spec.run_dir / "run.json");
  const ExperimentConfig cfg = ExperimentConfig::from_json(run.at("config"), spec.run_dir);
  auto wants = [&](const std::string& m) {
    return std::find(spec.metrics.begin(), spec.metrics.end(), m) != spec.metrics.end();
  };
  if (cfg.model == "hmm" && (wants("disc") || wants("entropy") || wants("buckets") || wants("topic_weights"))) {
    throw InvalidArgument("topic metrics requested on an hmm run");
  }
  if (cfg.model == "lda" && wants("baum_welch")) throw InvalidArgument("baum_welch requested on an lda run");

  fs::create_directories(out_dir);
  std::map<std::string, Dataset> datasets;
  for (const auto& cell : run.at("cells")) {
    const std::string d = cell.at("dataset").get<std::string>();
    if (!datasets.count(d)) datasets.emplace(d, load_dataset(d));
  }
  json scalars = json::array();
  auto scalar = [&](const std::string& name, double v) { scalars.push_back({{"name", name}, {"value", v}}); };

  // (m, dataset label) -> mean disc
  std::map<std::size_t, std::map<std::string, double>> disc_grid;
  std::vector<std::string> grid_columns;
  std::optional<io::CsvWriter> disc_csv;
  if (wants("disc")) disc_csv.emplace(out_dir / "disc.csv", std::vector<std::string>{"m", "dataset", "repetition", "disc"});

  for (const auto& cell : run.at("cells")) {
    const Dataset& ds = datasets.at(cell.at("dataset").get<std::string>());
    const auto m = cell.at("m").get<std::size_t>();
    const fs::path cell_dir = spec.run_dir / cell.at("dir").get<std::string>();
    const std::string label = "m" + std::to_string(m) + "_" + ds.label;

    if (wants("disc")) {
      if (!ds.lda_truth) throw InvalidArgument("disc requested but dataset '" + ds.dir.string() + "' has no ground truth");
      std::string column = ds.metadata.contains("docs") ? std::to_string(ds.metadata["docs"].get<std::size_t>()) : ds.label;
      if (std::find(grid_columns.begin(), grid_columns.end(), column) == grid_columns.end()) grid_columns.push_back(column);
      double sum = 0.0;
      for (std::size_t r = 0; r < cfg.repetitions; ++r) {
        const TopicMatrix learned = io::topics_from_json(io::read_json(cell_dir / rep_name(r) / "topics.json"));
        const double d = disc(*ds.lda_truth, learned);
        disc_csv->row({std::to_string(m), ds.label, std::to_string(r), io::fmt(d)});
        sum += d;
      }
      const double mean = sum / static_cast<double>(cfg.repetitions);
      disc_grid[m][column] = mean;
      scalar("mean_disc[" + label + "]", mean);
    }

    if (wants("entropy") || wants("buckets") || wants("topic_weights")) {
      const auto tables = year_tables_for_cell(ds, cell_dir, cfg.repetitions, cfg.topics, spec.path_choice);
      for (std::size_t r = 0; r < tables.size(); ++r) {
        const fs::path base = out_dir / label;
        if (wants("entropy")) {
          io::CsvWriter csv(base / ("entropy_" + rep_name(r) + ".csv"), {"year", "entropy"});
          for (const auto& [year, h] : yearly_entropy_curve(tables[r])) csv.row({std::to_string(year), io::fmt(h)});
        }
        if (wants("buckets")) {
          io::CsvWriter csv(base / ("buckets_" + rep_name(r) + ".csv"), {"topic", "bucket_index", "length"});
          for (std::size_t t = 0; t < tables[r].topics(); ++t) {
            if (!(total_topic_weight(tables[r], t) > 0.0)) continue;
            const auto series = topic_weight_series(tables[r], t);
            const BucketSet b = quantile_buckets(series, spec.gamma, t);
            for (std::size_t k = 0; k < b.lengths.size(); ++k) {
              csv.row({std::to_string(t), std::to_string(k), std::to_string(b.lengths[k])});
            }
          }
        }
        if (wants("topic_weights")) {
          io::CsvWriter totals(base / ("topic_totals_" + rep_name(r) + ".csv"), {"topic", "total_weight"});
          for (std::size_t t = 0; t < tables[r].topics(); ++t) {
            totals.row({std::to_string(t), io::fmt(total_topic_weight(tables[r], t))});
          }
          for (std::size_t t : spec.topics) {
            io::CsvWriter csv(base / ("topic_" + std::to_string(t) + "_" + rep_name(r) + ".csv"), {"year", "weight"});
            for (const auto& [year, w] : topic_weight_series(tables[r], t)) csv.row({std::to_string(year), io::fmt(w)});
          }
        }
      }
      if (wants("buckets")) {
        write_histogram(out_dir / label / "histogram_none.csv", bucket_histogram(tables, spec.gamma, BucketWeighting::none));
        write_histogram(out_dir / label / "histogram_by-topic-weight.csv",
                        bucket_histogram(tables, spec.gamma, BucketWeighting::by_topic_weight));
      }
    }

    if (cfg.model == "hmm") {
      std::vector<double> finals;
      for (std::size_t r = 0; r < cfg.repetitions; ++r) {
        const HmmParams p = io::hmm_params_from_json(io::read_json(cell_dir / rep_name(r) / "params.json"));
        finals.push_back(forward_log_likelihood(p, ds.observations));
      }
      std::sort(finals.begin(), finals.end());
      scalar("median_log_likelihood[" + label + "]", finals[finals.size() / 2]);
      scalar("best_log_likelihood[" + label + "]", finals.back());
    }
  }

  if (wants("disc")) {
    std::vector<std::string> header{"m"};
    header.insert(header.end(), grid_columns.begin(), grid_columns.end());
    io::CsvWriter grid(out_dir / "disc_grid.csv", header);
    for (const auto& [m, row] : disc_grid) {
      std::vector<std::string> cells{std::to_string(m)};
      for (const auto& col : grid_columns) cells.push_back(row.count(col) ? io::fmt(row.at(col)) : "");
      grid.row(cells);
    }
  }

  if (wants("baum_welch")) {
    for (const auto& [path, ds] : datasets) {
      RngStream rng(spec.bw_seed, {0, 0, Phase::aux});
      const HmmParams init = random_hmm_params(cfg.states, ds.observations.alphabet(), rng);
      const BaumWelchResult bw =
          baum_welch(ds.observations, cfg.states, ds.observations.alphabet(), init, spec.bw_max_iters, spec.bw_tol);
      scalar("baum_welch_log_likelihood[" + ds.label + "]", bw.trace.back());
      std::vector<TracePoint> trace;
      for (std::size_t k = 0; k < bw.trace.size(); ++k) trace.push_back({k, bw.trace[k]});
      io::write_trace_csv(out_dir / ("baum_welch_" + ds.label + ".csv"), trace);
      io::write_json(out_dir / ("baum_welch_" + ds.label + "_params.json"), io::to_json(bw.params));
      if (ds.hmm_truth) scalar("ground_truth_log_likelihood[" + ds.label + "]", forward_log_likelihood(*ds.hmm_truth, ds.observations));
    }
  }

  io::write_json(out_dir / "metrics.json", scalars);
  return scalars;
}

}  // namespace multipath::experiment
