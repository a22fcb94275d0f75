#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cmdsim/analytics.hpp"
#include "cmdsim/clustering.hpp"
#include "cmdsim/contrastive.hpp"
#include "cmdsim/embedding.hpp"
#include "cmdsim/error.hpp"
#include "cmdsim/evaluation.hpp"
#include "cmdsim/io.hpp"
#include "cmdsim/llm.hpp"
#include "cmdsim/synthesis.hpp"

#ifndef CMDSIM_VERSION
#define CMDSIM_VERSION "0.0.0"
#endif
#ifndef CMDSIM_DATA_DIR
#define CMDSIM_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace cmdsim;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  fs::path output_dir = ".";
};

struct BackendOptions {
  std::string kind = "local";
  std::size_t dim = 256;
  std::size_t ngram = 3;
  std::string providers;
  std::string provider;
  std::string cache;
  std::string adapter;
};

class Context {
 public:
  explicit Context(const Globals& g) : g_(g) {}

  // Output paths live under --output-dir; anything else is refused.
  fs::path out(const std::string& path) const {
    fs::path root = fs::weakly_canonical(fs::absolute(g_.output_dir));
    fs::path p = fs::path(path).is_absolute() ? fs::path(path) : g_.output_dir / path;
    p = fs::weakly_canonical(fs::absolute(p));
    auto rel = p.lexically_relative(root);
    if (rel.empty() || *rel.begin() == "..") {
      throw UsageError("output path " + path + " lies outside --output-dir " + g_.output_dir.string());
    }
    fs::create_directories(p.parent_path());
    return p;
  }

  void meta(const fs::path& artifact, const std::string& stage) const {
    nlohmann::ordered_json j = {{"stage", stage},
                                {"seed", g_.seed},
                                {"toolkit_version", CMDSIM_VERSION},
                                {"template_version", std::string(prompt_template_version())}};
    io::write_file(artifact.string() + ".meta.json", j.dump(2) + "\n");
  }

  const Globals& globals() const { return g_; }

 private:
  const Globals& g_;
};

// Installed layout first (<prefix>/bin/cmdsim, <prefix>/share/cmdsim/data), then the source tree.
fs::path data_dir() {
  std::error_code ec;
  auto exe = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    auto installed = exe.parent_path().parent_path() / "share" / "cmdsim" / "data";
    if (fs::is_directory(installed, ec)) return installed;
  }
  return CMDSIM_DATA_DIR;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::size_t> parse_ks(const std::string& csv) {
  std::vector<std::size_t> ks;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      long long k = std::stoll(item, &used);
      if (used != item.size() || k <= 0) throw std::invalid_argument(item);
      ks.push_back(static_cast<std::size_t>(k));
    } catch (const std::logic_error&) {
      throw UsageError("--k expects a comma-separated list of positive integers, got '" + csv + "'");
    }
  }
  if (ks.empty()) throw UsageError("--k is empty");
  return ks;
}

void add_backend_options(CLI::App* cmd, BackendOptions& b, bool with_adapter) {
  cmd->add_option("--backend", b.kind, "Embedding backend")->check(CLI::IsMember({"local", "remote"}));
  cmd->add_option("--dim", b.dim, "Embedding dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--ngram", b.ngram, "Character n-gram order of the local backend")->check(CLI::PositiveNumber);
  cmd->add_option("--providers", b.providers, "Provider configuration (remote backend)")->check(CLI::ExistingFile);
  cmd->add_option("--embed-provider", b.provider, "Provider name serving embeddings (remote backend)");
  cmd->add_option("--cache", b.cache, "Embedding cache file (JSON Lines)");
  if (with_adapter) cmd->add_option("--adapter", b.adapter, "Adapter checkpoint")->check(CLI::ExistingFile);
}

struct Backend {
  std::unique_ptr<EmbeddingBackend> backend;
  std::unique_ptr<EmbeddingCache> cache;
  std::optional<AdapterModel> adapter;

  Encoder encoder() {
    if (adapter) return make_adapted_encoder(*backend, *adapter, cache.get());
    return make_encoder(*backend, cache.get());
  }
};

Backend open_backend(const BackendOptions& b, const Context& ctx) {
  Backend out;
  if (b.kind == "local") {
    out.backend = std::make_unique<LocalDeterministicBackend>(b.dim, b.ngram);
  } else {
    if (b.providers.empty() || b.provider.empty()) {
      throw UsageError("the remote backend needs --providers and --embed-provider");
    }
    auto pool = load_provider_config(b.providers);
    out.backend = std::make_unique<RemoteEmbeddingBackend>(pool.find(b.provider), b.dim);
  }
  if (!b.cache.empty()) out.cache = std::make_unique<EmbeddingCache>(ctx.out(b.cache));
  if (!b.adapter.empty()) {
    out.adapter = AdapterModel::load(b.adapter);
    if (out.adapter->d_in != out.backend->dim()) {
      throw InvalidArgument("adapter expects " + std::to_string(out.adapter->d_in) + "-dimensional input, backend gives " +
                            std::to_string(out.backend->dim()));
    }
    if (!out.adapter->backend_identity.empty() && out.adapter->backend_identity != out.backend->identity()) {
      throw InvalidArgument("adapter was trained on backend '" + out.adapter->backend_identity + "', not '" +
                            out.backend->identity() + "'");
    }
  }
  return out;
}

std::vector<std::string> texts_of(const std::vector<CommandLine>& cmds) {
  std::vector<std::string> out;
  out.reserve(cmds.size());
  for (const auto& c : cmds) out.push_back(c.text);
  return out;
}

std::vector<std::string> explanation_texts(const std::vector<io::ExplanationRecord>& records) {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.explanation);
  return out;
}

std::vector<CommandLine> to_commands(const std::vector<CommandLinePair>& pairs) {
  std::vector<CommandLine> out;
  for (const auto& p : pairs) {
    out.push_back(p.anchor);
    out.push_back(p.positive);
  }
  return out;
}

std::string stats_report(const DatasetStats& s) {
  std::ostringstream os;
  os << "num_pairs " << s.num_pairs << "\n"
     << "num_unique " << s.num_unique << "\n"
     << "avg_len " << fmt(s.avg_len) << "\n"
     << "std_len " << fmt(s.std_len) << "\n"
     << "max_len " << s.max_len << "\n"
     << "min_len " << s.min_len << "\n";
  return os.str();
}

void emit(const Context& ctx, const std::string& out, const std::string& stage, const std::string& text) {
  std::cout << text;
  if (out.empty()) return;
  auto path = ctx.out(out);
  io::write_file(path, text);
  ctx.meta(path, stage);
}

// ---------------------------------------------------------------------------

struct SynthRunOpts {
  std::string seeds, providers, out = "synthesized.jsonl", checkpoint_dir;
  std::size_t target = 28520;
  std::size_t max_failures = 50;
};

void synth_run(const Context& ctx, const SynthRunOpts& o) {
  auto seeds = io::read_commands(o.seeds, Source::initial_seed);
  ClientPool clients(load_provider_config(o.providers));
  SynthesisConfig cfg;
  cfg.target_count = o.target;
  cfg.rng_seed = ctx.globals().seed;
  cfg.in_flight = ctx.globals().jobs;
  cfg.max_consecutive_failures = o.max_failures;
  if (!o.checkpoint_dir.empty()) cfg.checkpoint_dir = ctx.out(o.checkpoint_dir);
  auto path = ctx.out(o.out);
  std::vector<CommandLine> result;
  try {
    result = run_synthesis(clients, seeds, cfg);
  } catch (const SynthesisAborted& e) {
    io::write_commands(path, e.partial());
    ctx.meta(path, "synth run");
    throw;
  }
  io::write_commands(path, result);
  ctx.meta(path, "synth run");
  std::cout << "synthesized " << result.size() << " command lines -> " << path.string() << "\n";
}

struct SynthPairsOpts {
  std::string in, providers, provider, out = "pairs.jsonl", rejects;
};

void write_rejects(const Context& ctx, const std::string& out, const std::vector<Reject>& rejects,
                   const std::string& stage) {
  if (out.empty()) return;
  auto path = ctx.out(out);
  std::string text;
  for (const auto& r : rejects) {
    text += nlohmann::json{{"index", r.index}, {"text", r.text}, {"reason", r.reason}}.dump() + "\n";
  }
  io::write_file(path, text);
  ctx.meta(path, stage);
}

void synth_pairs(const Context& ctx, const SynthPairsOpts& o) {
  auto cmds = io::read_commands(o.in, Source::llm_synthesized);
  ClientPool clients(load_provider_config(o.providers));
  Rng rng(ctx.globals().seed);
  ChatClient& client = o.provider.empty() ? clients.pick(rng) : clients.get(o.provider);
  auto result = generate_pairs(cmds, client, ctx.globals().jobs);
  auto path = ctx.out(o.out);
  io::write_pairs(path, result.pairs);
  ctx.meta(path, "synth pairs");
  write_rejects(ctx, o.rejects, result.rejects, "synth pairs");
  std::cout << "pairs " << result.pairs.size() << ", rejected " << result.rejects.size() << " -> " << path.string()
            << "\n";
}

void synth_explain(const Context& ctx, const SynthPairsOpts& o) {
  auto cmds = io::read_commands(o.in, Source::real_world);
  ClientPool clients(load_provider_config(o.providers));
  Rng rng(ctx.globals().seed);
  ChatClient& client = o.provider.empty() ? clients.pick(rng) : clients.get(o.provider);
  auto result = generate_explanations(cmds, client, ctx.globals().jobs);
  std::vector<io::ExplanationRecord> records;
  records.reserve(result.explanations.size());
  for (auto& e : result.explanations) records.push_back({e.command, e.text});
  auto path = ctx.out(o.out);
  io::write_explanations(path, records);
  ctx.meta(path, "synth explain");
  write_rejects(ctx, o.rejects, result.rejects, "synth explain");
  std::cout << "explanations " << records.size() << ", rejected " << result.rejects.size() << " -> "
            << path.string() << "\n";
}

// ---------------------------------------------------------------------------

struct EmbedOpts {
  std::string in, out = "embeddings.jsonl";
  bool explanations = false;
  BackendOptions backend;
};

void embed(const Context& ctx, const EmbedOpts& o) {
  auto b = open_backend(o.backend, ctx);
  std::vector<std::string> texts =
      o.explanations ? explanation_texts(io::read_explanations(o.in)) : texts_of(io::read_commands(o.in));
  auto vecs = b.encoder()(texts);
  std::vector<io::EmbeddingRecord> records;
  records.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto v = vecs[i].values();
    records.push_back({texts[i], std::vector<double>(v.begin(), v.end())});
  }
  auto path = ctx.out(o.out);
  io::write_embeddings(path, records);
  ctx.meta(path, "embed");
  std::cout << "embedded " << records.size() << " texts -> " << path.string() << "\n";
}

// ---------------------------------------------------------------------------

struct ClusterOpts {
  std::string in, out, pairs, testset, corpus;
  double eps = 0.08;
  std::size_t min_pts = 5;
  std::size_t keep = 2;
  std::size_t n = 1000;
  BackendOptions backend;
};

std::vector<EmbeddingVector> embed_explanations(const Context& ctx, const BackendOptions& opts,
                                                const std::vector<io::ExplanationRecord>& records) {
  auto b = open_backend(opts, ctx);
  return b.encoder()(explanation_texts(records));
}

void cluster_dedup(const Context& ctx, const ClusterOpts& o) {
  auto records = io::read_explanations(o.in);
  DbscanParams params{o.eps, o.min_pts};
  params.validate();
  auto labeling = dbscan(embed_explanations(ctx, o.backend, records), params);
  auto keep = dedup_by_clusters(labeling, o.keep);
  std::vector<io::ExplanationRecord> kept;
  kept.reserve(keep.size());
  for (auto i : keep) kept.push_back(records[i]);
  auto path = ctx.out(o.out.empty() ? "dedup.jsonl" : o.out);
  io::write_explanations(path, kept);
  ctx.meta(path, "cluster dedup");
  std::cout << "clusters " << labeling.num_clusters << ", kept " << kept.size() << " of " << records.size() << " -> "
            << path.string() << "\n";
}

void cluster_negatives(const Context& ctx, const ClusterOpts& o) {
  auto records = io::read_explanations(o.in);
  auto embs = embed_explanations(ctx, o.backend, records);

  std::unordered_map<std::string, std::string> positive_of;
  std::unordered_map<std::string, std::size_t> index_of;
  if (!o.pairs.empty()) {
    for (auto& p : io::read_pairs(o.pairs)) positive_of.emplace(canonical_dedup_key(p.anchor.text), p.positive.text);
  }
  for (std::size_t i = 0; i < records.size(); ++i) index_of.emplace(canonical_dedup_key(records[i].command.text), i);

  std::vector<io::NegativesRecord> negatives;
  std::vector<io::TestsetRecord> testset;
  for (std::size_t q = 0; q < records.size(); ++q) {
    std::optional<std::size_t> positive_index;
    auto pos = positive_of.find(canonical_dedup_key(records[q].command.text));
    if (pos != positive_of.end()) {
      if (auto it = index_of.find(canonical_dedup_key(pos->second)); it != index_of.end()) positive_index = it->second;
    }
    auto ids = mine_negatives(q, embs, o.n, positive_index);
    if (pos != positive_of.end()) testset.push_back({records[q].command.text, pos->second, ids});
    negatives.push_back({q, std::move(ids)});
  }
  auto path = ctx.out(o.out.empty() ? "negatives.jsonl" : o.out);
  io::write_negatives(path, negatives);
  ctx.meta(path, "cluster negatives");
  if (!o.testset.empty()) {
    if (o.pairs.empty()) throw UsageError("--testset needs --pairs to supply positives");
    auto tpath = ctx.out(o.testset);
    io::write_testset(tpath, testset);
    ctx.meta(tpath, "cluster negatives");
  }
  if (!o.corpus.empty()) {
    std::vector<CommandLine> corpus;
    for (const auto& r : records) corpus.push_back(r.command);
    auto cpath = ctx.out(o.corpus);
    io::write_commands(cpath, corpus);
    ctx.meta(cpath, "cluster negatives");
  }
  std::cout << "negatives for " << negatives.size() << " queries -> " << path.string() << "\n";
}

void cluster_cov(const Context& ctx, const ClusterOpts& o) {
  auto records = io::read_explanations(o.in);
  DbscanParams params{o.eps, o.min_pts};
  params.validate();
  auto labeling = dbscan(embed_explanations(ctx, o.backend, records), params);
  std::vector<std::string> tags;
  for (const auto& r : records) {
    tags.push_back(r.command.provenance.value_or(std::string(to_string(r.command.source))));
  }
  auto cov = cluster_coverage(labeling, tags);
  std::string text = "num_clusters " + std::to_string(cov.num_clusters) + "\n";
  for (const auto& [source, rate] : cov.per_source) text += "coverage[" + source + "] " + fmt(rate) + "\n";
  text += "coverage[all] " + fmt(cov.union_rate) + "\n";
  emit(ctx, o.out, "cluster coverage", text);
}

// ---------------------------------------------------------------------------

struct TrainOpts {
  std::string pairs, out = "adapter.json", history;
  TrainConfig cfg;
  BackendOptions backend;
};

void train_cmd(const Context& ctx, TrainOpts o) {
  auto path = ctx.out(o.out);
  std::optional<fs::path> hpath;
  if (!o.history.empty()) hpath = ctx.out(o.history);
  auto pairs = io::read_pairs(o.pairs);
  auto b = open_backend(o.backend, ctx);
  o.cfg.rng_seed = ctx.globals().seed;
  auto result = train(pairs, *b.backend, o.cfg, b.cache.get());
  result.best.save(path);
  ctx.meta(path, "train");
  if (hpath) {
    std::string csv = "step,train_loss,val_mrr3\n";
    for (const auto& h : result.history) {
      csv += std::to_string(h.step) + "," + fmt(h.train_loss) + "," + fmt(h.val_mrr3) + "\n";
    }
    io::write_file(*hpath, csv);
    ctx.meta(*hpath, "train");
  }
  double best = 0.0;
  for (const auto& h : result.history) {
    if (h.step == result.best_step) best = h.val_mrr3;
  }
  std::cout << "best step " << result.best_step << ", validation MRR@3 " << fmt(best) << " -> " << path.string()
            << "\n";
}

// ---------------------------------------------------------------------------

struct EvalOpts {
  std::string testset, corpus, techniques, out, ranks, mode = "concatenated", k = "3,10";
  int r = 50;
  std::optional<double> threshold;
  std::size_t per_class = 7000;
  std::size_t iterations = 300;
  BackendOptions backend;
};

void eval_retrieval(const Context& ctx, const EvalOpts& o) {
  auto records = io::read_testset(o.testset);
  std::vector<std::string> corpus;
  if (o.corpus.empty()) {
    for (const auto& r : records) corpus.push_back(r.query);
  } else {
    corpus = texts_of(io::read_commands(o.corpus));
  }
  auto ks = parse_ks(o.k);
  auto cases = make_retrieval_cases(records, corpus);
  auto b = open_backend(o.backend, ctx);
  auto report = evaluate_retrieval(cases, b.encoder(), ks);
  std::string text = "cases " + std::to_string(cases.size()) + "\n";
  for (auto k : ks) text += "mrr@" + std::to_string(k) + " " + fmt(report.mrr.at(k)) + "\n";
  for (auto k : ks) text += "top@" + std::to_string(k) + " " + fmt(report.top.at(k)) + "\n";
  emit(ctx, o.out, "eval retrieval", text);
  if (!o.ranks.empty()) {
    std::string csv = "case,rank\n";
    for (std::size_t i = 0; i < report.ranks.size(); ++i) {
      csv += std::to_string(i) + "," + std::to_string(report.ranks[i]) + "\n";
    }
    auto path = ctx.out(o.ranks);
    io::write_file(path, csv);
    ctx.meta(path, "eval retrieval");
  }
}

void eval_detect(const Context& ctx, const EvalOpts& o) {
  auto corpus = TechniqueCorpus::from_records(io::read_technique_records(o.techniques));
  auto b = open_backend(o.backend, ctx);
  auto mode = o.mode == "averaged" ? AucMode::averaged : AucMode::concatenated;
  auto pools = build_gene_pools(corpus, o.r);
  std::vector<std::string> texts = texts_of(pools.all);
  auto scores = score_gene_pools(pools, b.encoder()(texts));
  std::string text = "r " + std::to_string(o.r) + "\n" + "techniques " + std::to_string(scores.size()) + "\n" +
                     "auc " + fmt(aggregate_auc(scores, mode)) + "\n";
  if (o.threshold) {
    // Fixed-threshold operating point: a command is flagged when its score reaches the threshold.
    std::size_t tp = 0, np = 0, fp = 0, nn = 0;
    for (const auto& s : scores) {
      for (double v : s.positive_scores) tp += v >= *o.threshold ? 1 : 0;
      for (double v : s.negative_scores) fp += v >= *o.threshold ? 1 : 0;
      np += s.positive_scores.size();
      nn += s.negative_scores.size();
    }
    text += "threshold " + fmt(*o.threshold) + "\n" + "detection_rate " + fmt(100.0 * tp / np) + "\n" +
            "false_positive_rate " + fmt(100.0 * fp / nn) + "\n";
  }
  emit(ctx, o.out, "eval detect", text);
}

void eval_classify(const Context& ctx, const EvalOpts& o) {
  Rng rng(ctx.globals().seed);
  ClassificationConfig cc;
  cc.per_class = o.per_class;
  auto ds = synth_classification_dataset(rng, cc);
  auto b = open_backend(o.backend, ctx);
  auto encoder = b.encoder();
  auto featurize = [&](const std::vector<ClassificationRecord>& recs, std::vector<std::vector<double>>& x,
                       std::vector<std::size_t>& y) {
    std::vector<std::string> texts;
    for (const auto& r : recs) {
      texts.push_back(r.text);
      y.push_back(r.label);
    }
    for (const auto& v : encoder(texts)) x.emplace_back(v.values().begin(), v.values().end());
  };
  std::vector<std::vector<double>> train_x, test_x;
  std::vector<std::size_t> train_y, test_y;
  featurize(ds.train, train_x, train_y);
  featurize(ds.test, test_x, test_y);
  auto grid = default_logreg_grid();
  for (auto& h : grid) h.iterations = o.iterations;
  auto result = train_logreg(train_x, train_y, test_x, test_y, grid, rng);
  std::string text = "train " + std::to_string(ds.train.size()) + "\n" + "test " + std::to_string(ds.test.size()) +
                     "\n" + "l2 " + fmt(result.chosen.l2) + "\n" + "learning_rate " +
                     fmt(result.chosen.learning_rate) + "\n" + "val_accuracy " + fmt(result.val_accuracy) + "\n" +
                     "test_accuracy " + fmt(result.test_accuracy) + "\n";
  emit(ctx, o.out, "eval classify", text);
}

// ---------------------------------------------------------------------------

struct AnalyzeOpts {
  std::string in, seeds, pairs, out, per_command, universe, extensions, variant = "f1";
};

RougeVariant rouge_variant(const std::string& name) {
  if (name == "precision") return RougeVariant::precision;
  if (name == "recall") return RougeVariant::recall;
  return RougeVariant::f1;
}

void analyze_rouge(const Context& ctx, const AnalyzeOpts& o) {
  auto variant = rouge_variant(o.variant);
  OverlapHistogram hist;
  if (!o.pairs.empty()) {
    hist = pair_overlap_distribution(io::read_pairs(o.pairs), variant);
  } else {
    if (o.in.empty() || o.seeds.empty()) throw UsageError("analyze rouge needs --pairs, or --in with --seeds");
    auto generated = io::read_commands(o.in, Source::llm_synthesized);
    auto seeds = io::read_commands(o.seeds, Source::initial_seed);
    auto result = max_overlap_vs_seeds(generated, seeds, variant, ctx.globals().jobs);
    hist = result.histogram;
    if (!o.per_command.empty()) {
      std::string csv = "index,max_rouge_l\n";
      for (std::size_t i = 0; i < result.per_command.size(); ++i) {
        csv += std::to_string(i) + "," + fmt(result.per_command[i]) + "\n";
      }
      auto path = ctx.out(o.per_command);
      io::write_file(path, csv);
      ctx.meta(path, "analyze rouge");
    }
  }
  emit(ctx, o.out, "analyze rouge", hist.to_csv());
}

void analyze_coverage(const Context& ctx, const AnalyzeOpts& o) {
  std::vector<CommandLine> cmds;
  if (!o.pairs.empty()) {
    cmds = to_commands(io::read_pairs(o.pairs));
  } else if (!o.in.empty()) {
    cmds = io::read_commands(o.in);
  } else {
    throw UsageError("analyze coverage needs --in or --pairs");
  }
  fs::path universe = o.universe.empty() ? data_dir() / "windows_commands.v1.txt" : fs::path(o.universe);
  fs::path exts = o.extensions.empty() ? data_dir() / "common_extensions.v1.txt" : fs::path(o.extensions);
  auto command_report = command_coverage(cmds, CommandUniverse::load(universe));
  auto ext_report = extension_coverage(cmds, io::read_lines(exts));
  std::string text = "command_groups " + std::to_string(command_report.universe_size) + "\n" +
                     "command_covered " + std::to_string(command_report.covered) + "\n" + "command_coverage " +
                     fmt(command_report.rate) + "\n" + "extensions " + std::to_string(ext_report.universe_size) +
                     "\n" + "extension_covered " + std::to_string(ext_report.covered) + "\n" +
                     "extension_coverage " + fmt(ext_report.rate) + "\n";
  emit(ctx, o.out, "analyze coverage", text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Command-line similarity toolkit: data synthesis, embedding training and evaluation", "cmdsim"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI run configuration; sections per stage, e.g. [synth.run]");
  app.set_version_flag("--version",
                       std::string("cmdsim ") + CMDSIM_VERSION + " (prompt templates " +
                           std::string(prompt_template_version()) + ")");

  Globals g;
  app.add_option("--seed", g.seed, "Random seed for every randomized stage");
  app.add_option("--jobs", g.jobs, "Concurrent provider calls and worker threads")->check(CLI::PositiveNumber);
  app.add_option("--output-dir", g.output_dir, "Directory that receives every output file");

  Context ctx(g);
  std::function<void()> action;

  auto* synth = app.add_subcommand("synth", "LLM-driven data generation")->require_subcommand(1);
  SynthRunOpts run_o;
  auto* run = synth->add_subcommand("run", "Grow a command-line pool from initial seeds");
  run->add_option("--seeds", run_o.seeds, "Initial seed commands (JSON Lines)")->required()->check(CLI::ExistingFile);
  run->add_option("--providers", run_o.providers, "Provider configuration")->required()->check(CLI::ExistingFile);
  run->add_option("--target", run_o.target, "Number of command lines to synthesize")->check(CLI::PositiveNumber);
  run->add_option("--out", run_o.out, "Output file");
  run->add_option("--checkpoint-dir", run_o.checkpoint_dir, "Resumable checkpoint directory");
  run->add_option("--max-failures", run_o.max_failures, "Abort after this many unproductive calls in a row");
  run->callback([&] { action = [&] { synth_run(ctx, run_o); }; });

  SynthPairsOpts pairs_o;
  auto* pairs = synth->add_subcommand("pairs", "Generate one similar command line per input");
  pairs->add_option("--in", pairs_o.in, "Input command lines")->required()->check(CLI::ExistingFile);
  pairs->add_option("--providers", pairs_o.providers, "Provider configuration")->required()->check(CLI::ExistingFile);
  pairs->add_option("--provider", pairs_o.provider, "Provider name (default: drawn with --seed)");
  pairs->add_option("--out", pairs_o.out, "Output pairs file");
  pairs->add_option("--rejects", pairs_o.rejects, "Write rejected inputs here");
  pairs->callback([&] { action = [&] { synth_pairs(ctx, pairs_o); }; });

  SynthPairsOpts explain_o;
  explain_o.out = "explanations.jsonl";
  auto* explain = synth->add_subcommand("explain", "Describe each command line in natural language");
  explain->add_option("--in", explain_o.in, "Input command lines")->required()->check(CLI::ExistingFile);
  explain->add_option("--providers", explain_o.providers, "Provider configuration")->required()->check(CLI::ExistingFile);
  explain->add_option("--provider", explain_o.provider, "Provider name (default: drawn with --seed)");
  explain->add_option("--out", explain_o.out, "Output explanations file");
  explain->add_option("--rejects", explain_o.rejects, "Write rejected inputs here");
  explain->callback([&] { action = [&] { synth_explain(ctx, explain_o); }; });

  EmbedOpts embed_o;
  auto* emb = app.add_subcommand("embed", "Embed command lines or explanations");
  emb->add_option("--in", embed_o.in, "Input file")->required()->check(CLI::ExistingFile);
  emb->add_option("--out", embed_o.out, "Output embeddings file");
  emb->add_flag("--explanations", embed_o.explanations, "Input is an explanations file; embed the explanation text");
  add_backend_options(emb, embed_o.backend, true);
  emb->callback([&] { action = [&] { embed(ctx, embed_o); }; });

  auto* cluster = app.add_subcommand("cluster", "DBSCAN over explanation embeddings")->require_subcommand(1);
  ClusterOpts dedup_o, neg_o, cov_o;
  auto add_dbscan = [](CLI::App* c, ClusterOpts& o) {
    c->add_option("--eps", o.eps, "Cosine-distance radius")->check(CLI::PositiveNumber);
    c->add_option("--min-pts", o.min_pts, "Core-point threshold (counts the point itself)")->check(CLI::PositiveNumber);
  };
  auto* dedup = cluster->add_subcommand("dedup", "Keep the first members of each cluster plus all noise");
  dedup->add_option("--in", dedup_o.in, "Explanations file")->required()->check(CLI::ExistingFile);
  dedup->add_option("--keep", dedup_o.keep, "Members kept per cluster")->check(CLI::PositiveNumber);
  dedup->add_option("--out", dedup_o.out, "Output explanations file");
  add_dbscan(dedup, dedup_o);
  add_backend_options(dedup, dedup_o.backend, false);
  dedup->callback([&] { action = [&] { cluster_dedup(ctx, dedup_o); }; });

  auto* neg = cluster->add_subcommand("negatives", "Mine the least similar command lines per query");
  neg->add_option("--in", neg_o.in, "Explanations file; its command lines form the corpus")->required()->check(
      CLI::ExistingFile);
  neg->add_option("--n", neg_o.n, "Negatives per query")->check(CLI::PositiveNumber);
  neg->add_option("--out", neg_o.out, "Output negatives file");
  neg->add_option("--pairs", neg_o.pairs, "Pairs whose positives are excluded and joined into --testset")->check(
      CLI::ExistingFile);
  neg->add_option("--testset", neg_o.testset, "Write {query, positive, negative_ids} records here");
  neg->add_option("--corpus", neg_o.corpus, "Write the corpus the negative ids refer to");
  add_backend_options(neg, neg_o.backend, false);
  neg->callback([&] { action = [&] { cluster_negatives(ctx, neg_o); }; });

  auto* cov = cluster->add_subcommand("coverage", "Per-source coverage of explanation clusters");
  cov->add_option("--in", cov_o.in, "Explanations file")->required()->check(CLI::ExistingFile);
  cov->add_option("--out", cov_o.out, "Report file");
  add_dbscan(cov, cov_o);
  add_backend_options(cov, cov_o.backend, false);
  cov->callback([&] { action = [&] { cluster_cov(ctx, cov_o); }; });

  TrainOpts train_o;
  auto* tr = app.add_subcommand("train", "Fit a linear adapter with in-batch InfoNCE");
  tr->add_option("--pairs", train_o.pairs, "Training pairs")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", train_o.out, "Adapter checkpoint");
  tr->add_option("--history", train_o.history, "Write the evaluation history as CSV");
  tr->add_option("--batch", train_o.cfg.batch_pairs, "Pairs per batch")->check(CLI::PositiveNumber);
  tr->add_option("--lr", train_o.cfg.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
  tr->add_option("--epochs", train_o.cfg.epochs, "Epochs")->check(CLI::PositiveNumber);
  tr->add_option("--temperature", train_o.cfg.temperature, "InfoNCE temperature")->check(CLI::PositiveNumber);
  tr->add_option("--val-pairs", train_o.cfg.val_pairs, "Pairs held out for checkpoint selection");
  tr->add_option("--eval-every", train_o.cfg.eval_every_steps, "Steps between evaluations")->check(CLI::PositiveNumber);
  tr->add_option("--out-dim", train_o.cfg.out_dim, "Adapter output dimension (0: input dimension)");
  add_backend_options(tr, train_o.backend, false);
  tr->callback([&] { action = [&] { train_cmd(ctx, train_o); }; });

  auto* ev = app.add_subcommand("eval", "Downstream evaluations")->require_subcommand(1);
  EvalOpts ret_o, det_o, cls_o;
  auto* ret = ev->add_subcommand("retrieval", "MRR@K and Top@K over a testset");
  ret->add_option("--testset", ret_o.testset, "Testset file")->required()->check(CLI::ExistingFile);
  ret->add_option("--corpus", ret_o.corpus, "Corpus the negative ids refer to (default: testset queries)")->check(
      CLI::ExistingFile);
  ret->add_option("--k", ret_o.k, "Cutoffs, comma separated");
  ret->add_option("--out", ret_o.out, "Report file");
  ret->add_option("--ranks", ret_o.ranks, "Per-case ranks as CSV");
  add_backend_options(ret, ret_o.backend, true);
  ret->callback([&] { action = [&] { eval_retrieval(ctx, ret_o); }; });

  auto* det = ev->add_subcommand("detect", "Gene-pool malicious command detection AUC");
  det->add_option("--techniques", det_o.techniques, "Technique corpus {technique_id, command}")->required()->check(
      CLI::ExistingFile);
  det->add_option("--r", det_o.r, "Gene-pool sample rate in percent")->check(CLI::Range(1, 99));
  det->add_option("--mode", det_o.mode, "AUC aggregation")->check(CLI::IsMember({"concatenated", "averaged"}));
  det->add_option("--threshold", det_o.threshold, "Also report detection and false-positive rates at this score");
  det->add_option("--out", det_o.out, "Report file");
  add_backend_options(det, det_o.backend, true);
  det->callback([&] { action = [&] { eval_detect(ctx, det_o); }; });

  auto* cls = ev->add_subcommand("classify", "Logistic-regression probe on synthetic command classes");
  cls->add_option("--per-class", cls_o.per_class, "Records per class, half train and half test")->check(
      CLI::PositiveNumber);
  cls->add_option("--iterations", cls_o.iterations, "Gradient-descent iterations per fit")->check(CLI::PositiveNumber);
  cls->add_option("--out", cls_o.out, "Report file");
  add_backend_options(cls, cls_o.backend, true);
  cls->callback([&] { action = [&] { eval_classify(ctx, cls_o); }; });

  std::string stats_pairs, stats_out;
  auto* st = app.add_subcommand("stats", "Pair-dataset statistics");
  st->add_option("--pairs", stats_pairs, "Pairs file")->required()->check(CLI::ExistingFile);
  st->add_option("--out", stats_out, "Report file");
  st->callback([&] {
    action = [&] { emit(ctx, stats_out, "stats", stats_report(dataset_stats(io::read_pairs(stats_pairs)))); };
  });

  auto* an = app.add_subcommand("analyze", "Diversity and coverage analyses")->require_subcommand(1);
  AnalyzeOpts rouge_o, covr_o;
  auto* rouge = an->add_subcommand("rouge", "ROUGE-L overlap histograms");
  rouge->add_option("--in", rouge_o.in, "Generated command lines")->check(CLI::ExistingFile);
  rouge->add_option("--seeds", rouge_o.seeds, "Seed command lines")->check(CLI::ExistingFile);
  rouge->add_option("--pairs", rouge_o.pairs, "Pairs file: anchor/positive overlap instead")->check(CLI::ExistingFile);
  rouge->add_option("--variant", rouge_o.variant, "ROUGE-L variant")->check(CLI::IsMember({"f1", "precision", "recall"}));
  rouge->add_option("--out", rouge_o.out, "Histogram CSV");
  rouge->add_option("--per-command", rouge_o.per_command, "Per-command maximum overlap CSV");
  rouge->callback([&] { action = [&] { analyze_rouge(ctx, rouge_o); }; });

  auto* covr = an->add_subcommand("coverage", "Windows command-group and file-extension coverage");
  covr->add_option("--in", covr_o.in, "Command lines")->check(CLI::ExistingFile);
  covr->add_option("--pairs", covr_o.pairs, "Pairs file; both members count")->check(CLI::ExistingFile);
  covr->add_option("--universe", covr_o.universe, "Command universe, one command per line")->check(CLI::ExistingFile);
  covr->add_option("--extensions", covr_o.extensions, "Extension list, one per line")->check(CLI::ExistingFile);
  covr->add_option("--out", covr_o.out, "Report file");
  covr->callback([&] { action = [&] { analyze_coverage(ctx, covr_o); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (e.get_exit_code() != 0) {
      std::cerr << app.help();
      return 2;
    }
    return 0;
  }

  try {
    action();
  } catch (const UsageError& e) {
    std::cerr << "cmdsim: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "cmdsim: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
