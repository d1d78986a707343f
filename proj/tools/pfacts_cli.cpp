// pfacts: command-line front end for the personal-fact pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>

#include "pfacts/agreement.hpp"
#include "pfacts/analyze.hpp"
#include "pfacts/baseline.hpp"
#include "pfacts/config.hpp"
#include "pfacts/dataio.hpp"
#include "pfacts/embed.hpp"
#include "pfacts/metrics.hpp"
#include "pfacts/model.hpp"
#include "pfacts/sampling.hpp"

namespace fs = std::filesystem;
using namespace pfacts;

namespace {

constexpr int kUsageExit = 64;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

RunConfig resolve_config(const Common& common) {
  RunConfig config = common.config_path.empty() ? RunConfig{} : load_config(common.config_path);
  for (const auto& o : common.overrides) apply_override(config, o);
  config.check();
  return config;
}

std::string require(const RunConfig& config, const std::string& flag, const std::string& key) {
  std::string value = flag.empty() ? config.path_or(key) : flag;
  if (value.empty()) {
    throw Error(ErrorCategory::kConfig, "ConfigError",
                "missing --" + key + " (or paths." + key + " in the config)");
  }
  return value;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::kIo, "WriteError", "cannot write " + path.string());
  out << text;
}

void finish(const std::string& command, const RunConfig& config,
            const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
            const fs::path& manifest_path) {
  RunManifest m = make_manifest(command, config, inputs);
  for (const auto& o : outputs) m.outputs.push_back(o.string());
  write_manifest(manifest_path, m);
}

fs::path sibling_manifest(const fs::path& out) {
  return fs::path(out.string() + ".manifest.json");
}

std::vector<FactRecord> facts_by_ids(const std::vector<FactRecord>& facts,
                                     const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < facts.size(); ++i) index.emplace(facts[i].id, i);
  std::vector<FactRecord> out;
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw Error(ErrorCategory::kData, "UnknownId", "split id '" + id + "' not in facts");
    }
    out.push_back(facts[it->second]);
  }
  return out;
}

// A split file applies to every seed; otherwise each seed draws its own split.
SplitAssignment obtain_split(const RunConfig& config, const std::vector<FactRecord>& facts,
                             const std::string& split_path, std::uint64_t seed) {
  if (!split_path.empty()) return read_split(split_path);
  SplitSpec spec = config.split;
  spec.seed = seed;
  return stratified_split(supervised_only(facts), spec);
}

MetricsReport score(const MultiHeadModel& model, const EmbeddingMatrix& emb,
                    const std::vector<FactRecord>& test) {
  std::vector<std::string> ids;
  std::vector<LabelSet> gold;
  for (const auto& f : test) {
    ids.push_back(f.id);
    gold.push_back(*f.labels);
  }
  std::vector<LabelSet> pred;
  for (const auto& p : predict(model, emb.gather(ids))) pred.push_back(to_labelset(model, p));
  return evaluate(gold, pred);
}

std::string seed_file(const fs::path& dir, const std::string& stem, std::uint64_t seed,
                      const std::string& ext) {
  return (dir / (stem + "_seed" + std::to_string(seed) + ext)).string();
}

// ---- subcommands ----

int cmd_canon(const Common& common, const std::string& raw_flag, const std::string& out_flag,
              const std::string& log_flag) {
  const RunConfig config = resolve_config(common);
  const fs::path raw = require(config, raw_flag, "raw");
  const fs::path out = require(config, out_flag, "out");
  const fs::path log = log_flag.empty() ? fs::path(out.string() + ".exclusions.tsv") : fs::path(log_flag);

  std::vector<FactRecord> facts;
  std::ostringstream log_text;
  log_text << "id\treason\n";
  for (const auto& rec : read_raw_annotations(raw)) {
    FactRecord fact = rec.fact;
    try {
      const CanonResult c = canonicalize(rec.annotation);
      fact.labels = c.labels;
      fact.excluded = c.excluded;
      fact.exclusion_reason = c.exclusion_reason;
      if (c.excluded) log_text << fact.id << "\t" << c.exclusion_reason.value_or("") << "\n";
      facts.push_back(std::move(fact));
    } catch (const Error& e) {
      log_text << fact.id << "\trejected: " << e.kind() << ": " << e.what() << "\n";
    }
  }
  write_facts(out, facts);
  write_text(log, log_text.str());
  finish("canon", config, {raw}, {out, log}, sibling_manifest(out));
  return 0;
}

int cmd_sample(const Common& common, const std::string& facts_flag, const std::string& emb_flag,
               const std::string& out_flag, std::optional<std::uint64_t> seed) {
  const RunConfig config = resolve_config(common);
  const fs::path facts_path = require(config, facts_flag, "facts");
  const fs::path emb_path = require(config, emb_flag, "embeddings");
  const fs::path out = require(config, out_flag, "out");

  const auto facts = read_facts(facts_path);
  const auto emb = l2_normalize(load_embeddings(emb_path));
  std::vector<std::string> ids;
  for (const auto& f : facts) ids.push_back(f.id);
  KMeansOptions opts;
  opts.k = config.sampling.k;
  opts.seed = seed.value_or(config.seeds.front());
  opts.max_iter = config.sampling.max_iter;
  opts.tol = config.sampling.tol;
  const auto model = kmeans_fit(emb.gather(ids), opts);
  write_facts(out, cluster_sample(facts, model, config.sampling.cap, opts.seed));
  finish("sample", config, {facts_path, emb_path}, {out}, sibling_manifest(out));
  return 0;
}

int cmd_split(const Common& common, const std::string& facts_flag, const std::string& out_flag) {
  const RunConfig config = resolve_config(common);
  const fs::path facts_path = require(config, facts_flag, "facts");
  const fs::path out = require(config, out_flag, "out");
  const auto split = stratified_split(supervised_only(read_facts(facts_path)), config.split);
  write_split(out, config.split, split);
  finish("split", config, {facts_path}, {out}, sibling_manifest(out));
  return 0;
}

int cmd_embed_fetch(const Common& common, const std::string& facts_flag,
                    const std::string& out_flag, const std::string& endpoint_flag) {
  const RunConfig config = resolve_config(common);
  const fs::path facts_path = require(config, facts_flag, "facts");
  const fs::path out = require(config, out_flag, "out");
  HttpEmbedConfig http;
  http.endpoint = endpoint_flag.empty() ? config.embedding.endpoint : endpoint_flag;
  if (http.endpoint.empty()) {
    throw Error(ErrorCategory::kConfig, "ConfigError", "missing --endpoint or embedding.endpoint");
  }
  http.batch_size = config.embedding.batch_size;
  http.timeout = std::chrono::milliseconds(config.embedding.timeout_ms);
  http.retries = config.embedding.retries;
  http.bearer_token = embed_token_from_env();

  std::vector<std::string> texts;
  std::vector<std::string> ids;
  for (const auto& f : read_facts(facts_path)) {
    texts.push_back(f.text);
    ids.push_back(f.id);
  }
  save_embeddings(out, fetch_embeddings(http, texts, ids));
  finish("embed-fetch", config, {facts_path}, {out}, sibling_manifest(out));
  return 0;
}

int cmd_train(const Common& common, const std::string& facts_flag, const std::string& emb_flag,
              const std::string& split_flag, const std::string& out_flag) {
  const RunConfig config = resolve_config(common);
  const fs::path facts_path = require(config, facts_flag, "facts");
  const fs::path emb_path = require(config, emb_flag, "embeddings");
  const fs::path out_dir = require(config, out_flag, "out");
  const std::string split_path = split_flag.empty() ? config.path_or("split") : split_flag;
  fs::create_directories(out_dir);

  const auto facts = read_facts(facts_path);
  const auto emb = load_embeddings(emb_path);
  std::vector<MetricsReport> reports;
  std::vector<fs::path> outputs;
  for (auto seed : config.seeds) {
    const auto split = obtain_split(config, facts, split_path, seed);
    const auto test = facts_by_ids(facts, split.test);
    TrainConfig tc = config.train;
    tc.seed = seed;
    auto init = MultiHeadModel::create(emb.dim(), config.model.hidden,
                                       taxonomy_dimension_names(), taxonomy_label_space(), seed,
                                       config.model.dropout);
    const auto result = train(init, emb, facts, split, tc);
    const fs::path ckpt = seed_file(out_dir, "model", seed, ".pfmh");
    save_model(ckpt, result.model);
    std::ostringstream hist;
    hist << "epoch\ttrain_loss\tval_macro_f1\n";
    for (const auto& r : result.history) {
      hist << r.epoch << "\t" << r.train_loss << "\t" << r.val_macro_f1 << "\n";
    }
    hist << "# best_epoch=" << result.best_epoch << "\n";
    const fs::path hist_path = seed_file(out_dir, "history", seed, ".tsv");
    write_text(hist_path, hist.str());
    reports.push_back(score(result.model, emb, test));
    outputs.push_back(ckpt);
    outputs.push_back(hist_path);
    std::cerr << "seed " << seed << ": pooled macro-F1 " << reports.back().overall_macro_f1
              << "\n";
  }
  const fs::path report_path = out_dir / "report.txt";
  write_text(report_path, format_summary(aggregate_seeds(reports)));
  outputs.push_back(report_path);
  std::vector<fs::path> inputs{facts_path, emb_path};
  if (!split_path.empty()) inputs.emplace_back(split_path);
  finish("train", config, inputs, outputs, out_dir / "manifest.json");
  return 0;
}

int cmd_eval(const Common& common, const std::vector<std::string>& models,
             const std::string& facts_flag, const std::string& emb_flag,
             const std::string& split_flag, const std::string& out_flag) {
  const RunConfig config = resolve_config(common);
  const fs::path facts_path = require(config, facts_flag, "facts");
  const fs::path emb_path = require(config, emb_flag, "embeddings");
  const fs::path out = require(config, out_flag, "out");
  const std::string split_path = split_flag.empty() ? config.path_or("split") : split_flag;
  if (models.empty()) throw Error(ErrorCategory::kConfig, "ConfigError", "no --models given");

  const auto facts = read_facts(facts_path);
  const auto emb = load_embeddings(emb_path);
  if (split_path.empty() && models.size() != config.seeds.size()) {
    throw Error(ErrorCategory::kConfig, "ConfigError",
                "without --split, give one model per configured seed, in seed order");
  }
  std::vector<MetricsReport> reports;
  std::vector<fs::path> inputs{facts_path, emb_path};
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto seed = split_path.empty() ? config.seeds[i] : config.split.seed;
    const auto test = facts_by_ids(facts, obtain_split(config, facts, split_path, seed).test);
    reports.push_back(score(load_model(models[i]), emb, test));
    inputs.emplace_back(models[i]);
  }
  write_text(out, format_summary(aggregate_seeds(reports)));
  if (!split_path.empty()) inputs.emplace_back(split_path);
  finish("eval", config, inputs, {out}, sibling_manifest(out));
  return 0;
}

int cmd_baseline(const Common& common, const std::string& facts_flag,
                 const std::string& split_flag, const std::string& out_flag) {
  const RunConfig config = resolve_config(common);
  const fs::path facts_path = require(config, facts_flag, "facts");
  const fs::path out = require(config, out_flag, "out");
  const std::string split_path = split_flag.empty() ? config.path_or("split") : split_flag;

  const auto facts = read_facts(facts_path);
  std::vector<MetricsReport> reports;
  for (auto seed : config.seeds) {
    const auto split = obtain_split(config, facts, split_path, seed);
    std::vector<std::string> texts;
    std::vector<LabelSet> labels;
    for (const auto& f : facts_by_ids(facts, split.train)) {
      texts.push_back(f.text);
      labels.push_back(*f.labels);
    }
    std::vector<std::string> test_texts;
    std::vector<LabelSet> gold;
    for (const auto& f : facts_by_ids(facts, split.test)) {
      test_texts.push_back(f.text);
      gold.push_back(*f.labels);
    }
    LogRegConfig lr;
    lr.seed = seed;
    const auto model = baseline_train(texts, labels, TfidfConfig{}, lr);
    reports.push_back(baseline_eval(model.heads, tfidf_transform(model.vocab, test_texts), gold));
  }
  write_text(out, format_summary(aggregate_seeds(reports)));
  std::vector<fs::path> inputs{facts_path};
  if (!split_path.empty()) inputs.emplace_back(split_path);
  finish("baseline", config, inputs, {out}, sibling_manifest(out));
  return 0;
}

int cmd_agree(const Common& common, const std::vector<std::string>& annotators,
              const std::string& out_flag) {
  const RunConfig config = resolve_config(common);
  const fs::path out = require(config, out_flag, "out");
  if (annotators.size() < 2) {
    throw Error(ErrorCategory::kConfig, "ConfigError", "need at least two --annotators files");
  }
  std::vector<std::string> units;
  std::unordered_map<std::string, std::size_t> unit_index;
  std::vector<std::unordered_map<std::string, LabelSet>> by_rater;
  std::vector<fs::path> inputs;
  for (const auto& path : annotators) {
    inputs.emplace_back(path);
    std::unordered_map<std::string, LabelSet> labels;
    for (const auto& f : read_facts(path)) {
      if (unit_index.emplace(f.id, units.size()).second) units.push_back(f.id);
      if (f.labels && !f.excluded) labels.emplace(f.id, *f.labels);
    }
    by_rater.push_back(std::move(labels));
  }
  std::vector<AgreementReport> rows;
  for (auto dim : kAllDimensions) {
    RatingsTable table;
    table.dimension = dim;
    for (const auto& id : units) {
      std::vector<std::optional<std::string>> unit;
      for (const auto& rater : by_rater) {
        auto it = rater.find(id);
        if (it == rater.end()) {
          unit.emplace_back();
        } else {
          unit.emplace_back(std::string(label_name(dim, it->second.index(dim))));
        }
      }
      table.values.push_back(std::move(unit));
    }
    rows.push_back(agreement_report(table, std::string(dimension_name(dim))));
  }
  write_text(out, format_agreement(rows, average_report(rows)));
  finish("agree", config, inputs, {out}, sibling_manifest(out));
  return 0;
}

int cmd_analyze(const Common& common, const std::vector<std::string>& models,
                const std::string& corpus_flag, const std::string& emb_flag,
                const std::string& train_flag, const std::string& out_flag) {
  const RunConfig config = resolve_config(common);
  const fs::path corpus_path = require(config, corpus_flag, "corpus");
  const fs::path emb_path = require(config, emb_flag, "embeddings");
  const fs::path out = require(config, out_flag, "out");
  const std::string train_path = train_flag.empty() ? config.path_or("train_facts") : train_flag;
  if (models.empty()) throw Error(ErrorCategory::kConfig, "ConfigError", "no --models given");

  std::vector<MultiHeadModel> loaded;
  std::vector<fs::path> inputs{corpus_path, emb_path};
  for (const auto& m : models) {
    loaded.push_back(load_model(m));
    inputs.emplace_back(m);
  }
  const auto corpus = read_facts(corpus_path);
  std::vector<std::string> ids;
  for (const auto& f : corpus) ids.push_back(f.id);
  const auto emb = load_embeddings(emb_path);
  RowMatrixF rows = emb.gather(ids).cast<float>();
  const auto tables = predict_corpus(loaded, EmbeddingMatrix(std::move(rows), ids));

  std::string text = format_distribution(aggregate_distribution(tables),
                                         corpus_path.filename().string());
  if (!train_path.empty()) {
    inputs.emplace_back(train_path);
    text += "\n" + format_leakage(leakage_audit(read_facts(train_path), corpus, tables));
  }
  write_text(out, text);
  finish("analyze", config, inputs, {out}, sibling_manifest(out));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pfacts: personal-fact taxonomy pipeline"};
  app.require_subcommand(1);
  Common common;
  app.add_option("-c,--config", common.config_path, "INI run configuration");
  app.add_option("--set", common.overrides, "override as section.key=value (repeatable)");

  std::string raw, out, log, facts, emb, split, endpoint, corpus, train_facts;
  std::vector<std::string> models, annotators;

  auto* canon = app.add_subcommand("canon", "canonicalize raw annotations");
  canon->add_option("--raw", raw, "raw annotation JSONL");
  canon->add_option("--out", out, "canonical facts JSONL");
  canon->add_option("--exclusions", log, "exclusion log (TSV)");

  auto* sample = app.add_subcommand("sample", "k-means diversity sampling");
  sample->add_option("--facts", facts);
  sample->add_option("--embeddings", emb);
  sample->add_option("--out", out);
  std::optional<std::uint64_t> sample_seed;
  sample->add_option_function<std::string>(
      "--k", [&](const std::string& v) { common.overrides.push_back("sampling.k=" + v); });
  sample->add_option_function<std::string>(
      "--cap", [&](const std::string& v) { common.overrides.push_back("sampling.cap=" + v); });
  sample->add_option("--seed", sample_seed, "k-means and sampling seed (default: first run seed)");

  auto* split_cmd = app.add_subcommand("split", "stratified train/val/test split");
  split_cmd->add_option("--facts", facts);
  split_cmd->add_option("--out", out);

  auto* fetch = app.add_subcommand("embed-fetch", "fetch embeddings over HTTP");
  fetch->add_option("--facts", facts);
  fetch->add_option("--out", out);
  fetch->add_option("--endpoint", endpoint);

  auto* train_cmd = app.add_subcommand("train", "train one multi-head model per seed");
  train_cmd->add_option("--facts", facts);
  train_cmd->add_option("--embeddings", emb);
  train_cmd->add_option("--split", split);
  train_cmd->add_option("--out", out, "output directory");

  auto* eval = app.add_subcommand("eval", "evaluate checkpoints on the test split");
  eval->add_option("--models", models)->expected(1, -1);
  eval->add_option("--facts", facts);
  eval->add_option("--embeddings", emb);
  eval->add_option("--split", split);
  eval->add_option("--out", out);

  auto* base = app.add_subcommand("baseline", "TF-IDF + logistic regression baseline");
  base->add_option("--facts", facts);
  base->add_option("--split", split);
  base->add_option("--out", out);

  auto* agree = app.add_subcommand("agree", "inter-annotator agreement");
  agree->add_option("--annotators", annotators, "one facts file per annotator")->expected(2, -1);
  agree->add_option("--out", out);

  auto* analyze = app.add_subcommand("analyze", "corpus label distribution and leakage audit");
  analyze->add_option("--models", models)->expected(1, -1);
  analyze->add_option("--corpus", corpus);
  analyze->add_option("--embeddings", emb);
  analyze->add_option("--train-facts", train_facts);
  analyze->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: UsageError: " << e.what() << "\n" << app.help();
    return kUsageExit;
  }

  try {
    if (*canon) return cmd_canon(common, raw, out, log);
    if (*sample) return cmd_sample(common, facts, emb, out, sample_seed);
    if (*split_cmd) return cmd_split(common, facts, out);
    if (*fetch) return cmd_embed_fetch(common, facts, out, endpoint);
    if (*train_cmd) return cmd_train(common, facts, emb, split, out);
    if (*eval) return cmd_eval(common, models, facts, emb, split, out);
    if (*base) return cmd_baseline(common, facts, split, out);
    if (*agree) return cmd_agree(common, annotators, out);
    if (*analyze) return cmd_analyze(common, models, corpus, emb, train_facts, out);
  } catch (const Error& e) {
    std::cerr << "error: " << category_name(e.category()) << ": " << e.kind() << ": " << e.what()
              << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << e.what() << "\n";
    return 1;
  }
  std::cerr << app.help();
  return kUsageExit;
}
