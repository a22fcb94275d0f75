// Acceptance run: one PASS/FAIL/SKIP line per criterion.
//
//   acceptance                 every criterion
//   acceptance --criterion N   only N; exit 77 when N is skipped
//
// Criterion 1 needs the released pair dataset converted to JSON Lines pairs:
// $CMDSIM_PAIR_DATASET_DIR/train.jsonl and test.jsonl.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "cmdsim/analytics.hpp"
#include "cmdsim/clustering.hpp"
#include "cmdsim/contrastive.hpp"
#include "cmdsim/evaluation.hpp"
#include "cmdsim/io.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;
using namespace cmdsim;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::pass;
  std::string detail;
};

// Collects failed expectations; the first few are reported.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_.size() < 3) failures_.push_back(what);
    ++count_;
  }
  bool ok() const { return count_ == 0; }
  Outcome outcome(const std::string& summary) const {
    if (ok()) return {Status::pass, summary};
    std::string d = std::to_string(count_) + " failed check(s): ";
    for (std::size_t i = 0; i < failures_.size(); ++i) d += (i ? "; " : "") + failures_[i];
    return {Status::fail, d};
  }

 private:
  std::vector<std::string> failures_;
  std::size_t count_ = 0;
};

std::string num(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

using Vecs = std::vector<std::vector<double>>;

Vecs gaussian(std::mt19937_64& gen, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g;
  Vecs out(n, std::vector<double>(d));
  for (auto& v : out)
    for (auto& x : v) x = g(gen);
  return out;
}

// ---------------------------------------------------------------------------

struct Table1 {
  std::size_t pairs, unique, max_len, min_len;
  double avg, std;
};

int run_cli(const std::string& args, const fs::path& log) {
  std::string line = std::string("'") + CMDSIM_BIN + "' " + args + " > '" + log.string() + "' 2>&1";
  int status = std::system(line.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> read_report(const fs::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(io::read_file(path));
  for (std::string key, value; in >> key >> value;) out[key] = value;
  return out;
}

Outcome dataset_statistics() {
  const char* dir = std::getenv("CMDSIM_PAIR_DATASET_DIR");
  if (dir == nullptr || *dir == '\0') {
    return {Status::skip, "NOT VERIFIED: CMDSIM_PAIR_DATASET_DIR is unset; the released pair files are not available"};
  }
  const std::map<std::string, Table1> expected{{"train", {28520, 55909, 3464, 3, 91.635, 60.794}},
                                               {"test", {2807, 5576, 7502, 2, 96.301, 196.675}}};
  Checker c;
  TempDir tmp("cmdsim-accept");
  for (const auto& [split, want] : expected) {
    fs::path pairs = fs::path(dir) / (split + ".jsonl");
    if (!fs::exists(pairs)) {
      c.expect(false, pairs.string() + " missing");
      continue;
    }
    auto code = run_cli("--output-dir '" + tmp.path().string() + "' stats --pairs '" + pairs.string() +
                            "' --out " + split + ".txt",
                        tmp / "log.txt");
    c.expect(code == 0, split + ": stats exited with " + std::to_string(code));
    if (code != 0) continue;
    auto r = read_report(tmp / (split + ".txt"));
    auto count = [&](const char* key, std::size_t v) {
      c.expect(r[key] == std::to_string(v), split + " " + key + " " + r[key] + " != " + std::to_string(v));
    };
    auto real = [&](const char* key, double v) {
      c.expect(std::abs(std::stod(r[key]) - v) <= 0.001, split + " " + key + " " + r[key] + " vs " + num(v));
    };
    count("num_pairs", want.pairs);
    count("num_unique", want.unique);
    count("max_len", want.max_len);
    count("min_len", want.min_len);
    real("avg_len", want.avg);
    real("std_len", want.std);
  }
  return c.outcome("train and test statistics match the published table");
}

Outcome info_nce_correctness() {
  Checker c;
  std::mt19937_64 gen(20);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t d_in = 2 + gen() % 7, d_out = 1 + gen() % 4, k = 2 + gen() % 7;
    auto a = gaussian(gen, k, d_in), p = gaussian(gen, k, d_in);
    auto adapter = AdapterModel::identity(d_in, d_out);
    std::normal_distribution<double> g(0.0, 0.5);
    for (auto& w : adapter.weights) w += g(gen);
    double tau = std::vector<double>{0.05, 0.1, 0.5, 1.0}[trial % 4];
    auto got = info_nce_gradients(a, p, adapter, tau);
    auto fd = oracle::central_difference(a, p, adapter.weights, d_in, d_out, tau);
    double err = oracle::max_relative_error(got.gradient, fd);
    worst = std::max(worst, err);
    c.expect(err < 1e-4, "instance " + std::to_string(trial) + " relative error " + std::to_string(err));

    SimilarityMatrix m{k, std::vector<double>(k * k)};
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& s : m.sims) s = u(gen);
    double base = info_nce_loss(m, tau);
    for (std::size_t row = 0; row < k; ++row) {
      auto shifted = m;
      const double shift = 3.0 * u(gen);
      for (std::size_t j = 0; j < k; ++j) shifted.at(row, j) += shift;
      double l = info_nce_loss(shifted, tau);
      c.expect(std::abs(l - base) <= 1e-9, "row shift changed the loss by " + std::to_string(l - base));
    }
    SimilarityMatrix uniform{k, std::vector<double>(k * k, u(gen))};
    double lu = info_nce_loss(uniform, tau);
    c.expect(std::abs(lu - static_cast<double>(k) * std::log(static_cast<double>(k))) <= 1e-9,
             "uniform loss " + std::to_string(lu));
    SimilarityMatrix single{1, {u(gen)}};
    c.expect(info_nce_loss(single, tau) == 0.0, "k=1 loss is not exactly 0");
  }
  char worst_text[32];
  std::snprintf(worst_text, sizeof worst_text, "%.1e", worst);
  return c.outcome(std::string("20 instances, worst gradient relative error ") + worst_text);
}

Outcome retrieval_metrics() {
  Checker c;
  std::mt19937_64 gen(30);
  std::vector<std::size_t> ranks;
  const std::size_t sets = 10;
  std::vector<std::vector<std::size_t>> by_set(sets);
  for (int i = 0; i < 1000; ++i) {
    std::size_t n = gen() % 50;
    // Scores are cosines of random vectors, rounded so ties occur.
    auto q = gaussian(gen, 1, 4)[0];
    auto cand = gaussian(gen, n + 1, 4);
    auto score = [&](const std::vector<double>& v) {
      double s = oracle::dot(q, v) / std::sqrt(oracle::dot(q, q) * oracle::dot(v, v));
      return std::round(s * 20.0) / 20.0;
    };
    double pos = score(cand[0]);
    std::vector<double> neg;
    for (std::size_t j = 1; j <= n; ++j) neg.push_back(score(cand[j]));
    auto r = rank_of_positive(pos, neg);
    c.expect(r == oracle::full_sort_rank(pos, neg), "case " + std::to_string(i) + " rank mismatch");
    ranks.push_back(r);
    by_set[i % sets].push_back(r);
  }
  by_set.push_back(ranks);
  for (const auto& set : by_set) {
    double prev_m = 0.0, prev_t = 0.0;
    for (std::size_t k = 1; k <= 51; ++k) {
      double m = mrr_at_k(set, k), t = top_at_k(set, k);
      c.expect(m == oracle::mrr(set, k), "MRR@" + std::to_string(k) + " differs from the oracle");
      c.expect(t == oracle::top(set, k), "Top@" + std::to_string(k) + " differs from the oracle");
      c.expect(t >= m, "Top@K < MRR@K at K=" + std::to_string(k));
      c.expect(m >= prev_m && t >= prev_t, "not monotone in K at K=" + std::to_string(k));
      prev_m = m;
      prev_t = t;
    }
  }
  return c.outcome("1000 cases, MRR@3 " + num(mrr_at_k(ranks, 3), 2) + ", Top@10 " + num(top_at_k(ranks, 10), 2));
}

Outcome auc_oracle() {
  Checker c;
  std::mt19937_64 gen(40);
  for (int i = 0; i < 200; ++i) {
    std::size_t total = 2 + gen() % 39;
    std::size_t np = 1 + gen() % (total - 1);
    std::vector<double> pos(np), neg(total - np);
    for (auto& s : pos) s = static_cast<double>(gen() % 16) / 15.0;
    for (auto& s : neg) s = static_cast<double>(gen() % 16) / 15.0;
    double want = oracle::auc(pos, neg);
    c.expect(auc_mann_whitney(pos, neg) == want, "set " + std::to_string(i) + " differs from pair counting");
    std::vector<TechniqueScores> one{{"T", pos, neg}};
    c.expect(aggregate_auc(one, AucMode::concatenated) == want, "concatenated aggregate differs");
    auto affine = pos, affine_n = neg, cube = pos, cube_n = neg;
    for (auto* v : {&affine, &affine_n})
      for (auto& s : *v) s = 2.0 * s + 1.0;
    for (auto* v : {&cube, &cube_n})
      for (auto& s : *v) s = s * s * s;
    c.expect(auc_mann_whitney(affine, affine_n) == want, "2s+1 changed the AUC");
    c.expect(auc_mann_whitney(cube, cube_n) == want, "s^3 changed the AUC");
  }
  c.expect(auc_mann_whitney(std::vector<double>{0.9, 0.8}, std::vector<double>{0.1, 0.2}) == 1.0,
           "perfect separation is not 1");

  // detection_auc over a corpus whose techniques occupy distinct directions.
  std::vector<io::TechniqueRecord> recs;
  for (int t = 0; t < 4; ++t)
    for (int i = 0; i < 9 + 3 * t; ++i) recs.push_back({"T" + std::to_string(t), std::to_string(t) + " x" + std::to_string(i)});
  Encoder encoder = [](std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    for (const auto& s : texts) {
      double a = 1.5 * (s[0] - '0') + 1e-3 * static_cast<double>(s.size());
      out.emplace_back(std::vector<double>{std::cos(a), std::sin(a)});
    }
    return out;
  };
  auto corpus = TechniqueCorpus::from_records(recs);
  c.expect(detection_auc(corpus, 20, encoder, AucMode::concatenated) == 1.0, "separated techniques: AUC != 1");
  return c.outcome("200 score sets equal to pair counting");
}

Outcome gene_pool_algebra() {
  Checker c;
  std::vector<io::TechniqueRecord> recs;
  std::vector<std::size_t> sizes;
  for (std::size_t m = 1; m <= 30; ++m) sizes.push_back(m);
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    for (std::size_t i = 0; i < sizes[t]; ++i) {
      recs.push_back({"T" + std::to_string(sizes[t]), "tool" + std::to_string(t) + " /case:" + std::to_string(i)});
    }
  }
  auto corpus = TechniqueCorpus::from_records(recs);
  std::size_t splits = 0;
  for (int r = 1; r <= 99; ++r) {
    auto pools = build_gene_pools(corpus, r);
    c.expect(pools.all.size() == recs.size(), "A does not hold every command");
    c.expect(pools.splits.size() == 22, "expected 22 techniques with M >= 9 at r=" + std::to_string(r));
    for (const auto& s : pools.splits) {
      ++splits;
      std::size_t m = s.members.size();
      c.expect(m >= 9, "technique " + s.technique_id + " with M < 9 kept");
      std::size_t want = (static_cast<std::size_t>(r) * m + 99) / 100;
      c.expect(s.pool.size() == want, s.technique_id + " r=" + std::to_string(r) + " |P| wrong");
      std::set<std::size_t> L(s.members.begin(), s.members.end()), P(s.pool.begin(), s.pool.end()),
          O(s.queries.begin(), s.queries.end());
      std::set<std::size_t> U = P;
      U.insert(O.begin(), O.end());
      c.expect(U == L, s.technique_id + ": P u O != L");
      c.expect(P.size() + O.size() == L.size(), s.technique_id + ": P and O overlap");
      c.expect(std::equal(s.pool.begin(), s.pool.end(), s.members.begin()), s.technique_id + ": P is not a prefix");
    }
  }
  return c.outcome(std::to_string(splits) + " splits over r=1..99, M=9..30; M<9 excluded");
}

Outcome dbscan_reference() {
  Checker c;
  std::mt19937_64 gen(60);
  std::normal_distribution<double> g;
  std::size_t runs = 0, max_points = 0;
  for (int corpus = 0; corpus < 100; ++corpus) {
    std::size_t n = 10 + gen() % 291, d = 4 + gen() % 5, centers = 1 + gen() % 8;
    double spread = 0.05 + 0.1 * static_cast<double>(gen() % 4);
    auto means = gaussian(gen, centers, d);
    std::vector<EmbeddingVector> pts;
    std::vector<oracle::Vec> raw;
    for (std::size_t i = 0; i < n; ++i) {
      auto v = means[gen() % centers];
      for (auto& x : v) x += spread * g(gen);
      auto u = normalized(EmbeddingVector(v));
      raw.emplace_back(u.values().begin(), u.values().end());
      pts.push_back(std::move(u));
    }
    max_points = std::max(max_points, n);
    for (double eps : {0.05, 0.08, 0.2}) {
      for (std::size_t min_pts : {2u, 5u}) {
        ++runs;
        auto l = dbscan(pts, {eps, min_pts});
        auto want = oracle::dbscan(raw, eps, min_pts);
        c.expect(l.labels == want, "corpus " + std::to_string(corpus) + " eps " + num(eps, 2) + " min_pts " +
                                       std::to_string(min_pts) + " differs from the reference");
        std::map<int, std::size_t> sizes;
        for (int lab : want) ++sizes[lab];
        std::size_t keep = 0;
        for (auto [lab, count] : sizes) keep += lab < 0 ? count : std::min<std::size_t>(count, 2);
        c.expect(dedup_by_clusters(l, 2).size() == keep, "dedup size mismatch");
      }
    }
  }
  return c.outcome(std::to_string(runs) + " labelings equal to the reference (up to " + std::to_string(max_points) +
                   " points)");
}

Outcome rouge_oracle() {
  Checker c;
  std::mt19937_64 gen(70);
  for (int i = 0; i < 1000; ++i) {
    auto make = [&] {
      std::vector<std::string> t(gen() % 25);
      for (auto& s : t) s = std::string(1, static_cast<char>('a' + gen() % 6));
      return t;
    };
    auto a = make(), b = make();
    double f = rouge_l(a, b);
    double want = oracle::rouge_l_f1(a, b);
    c.expect(lcs_length(a, b) == oracle::lcs(a, b), "LCS mismatch on pair " + std::to_string(i));
    c.expect(std::abs(f - want) <= 1e-12, "F1 mismatch on pair " + std::to_string(i));
    c.expect(std::abs(f - rouge_l(b, a)) <= 1e-12, "asymmetric on pair " + std::to_string(i));
    if (!a.empty() && !b.empty()) {
      double bound = 2.0 * static_cast<double>(std::min(a.size(), b.size())) / static_cast<double>(a.size() + b.size());
      c.expect(f <= bound + 1e-12, "F1 above the length bound on pair " + std::to_string(i));
    }
  }
  return c.outcome("1000 pairs equal to the DP oracle");
}

// ---------------------------------------------------------------------------
// End-to-end pipeline through the command-line tool.

struct PipelineRun {
  bool ok = false;
  std::string error;
  double seconds = 0.0;
  double identity_mrr3 = 0.0;
  double trained_mrr3 = 0.0;
};

std::string fixture(const std::string& name) { return std::string(CMDSIM_FIXTURES) + "/" + name; }

// Held-out queries are pairs from an independent synthesis run whose lines do
// not occur in the training pairs. Every other held-out positive is a negative.
void write_heldout_testset(const fs::path& train_pairs, const fs::path& heldout_pairs, const fs::path& testset,
                           const fs::path& corpus_file) {
  std::unordered_set<std::string> seen;
  for (const auto& p : io::read_pairs(train_pairs)) {
    seen.insert(canonical_dedup_key(p.anchor));
    seen.insert(canonical_dedup_key(p.positive));
  }
  std::vector<CommandLinePair> kept;
  for (auto& p : io::read_pairs(heldout_pairs)) {
    auto ka = canonical_dedup_key(p.anchor), kp = canonical_dedup_key(p.positive);
    if (seen.count(ka) || seen.count(kp)) continue;
    seen.insert(ka);
    seen.insert(kp);
    kept.push_back(std::move(p));
  }
  std::vector<CommandLine> corpus;
  for (const auto& p : kept) corpus.push_back(p.positive);
  std::vector<io::TestsetRecord> records;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    io::TestsetRecord r{kept[i].anchor.text, kept[i].positive.text, {}};
    for (std::size_t j = 0; j < kept.size(); ++j) {
      if (j != i) r.negative_ids.push_back(j);
    }
    records.push_back(std::move(r));
  }
  io::write_testset(testset, records);
  io::write_commands(corpus_file, corpus);
}

PipelineRun run_pipeline(const fs::path& dir) {
  PipelineRun run;
  fs::create_directories(dir);
  auto start = std::chrono::steady_clock::now();
  const std::string providers = "--providers '" + fixture("mock_providers.conf") + "'";
  const fs::path log = dir / "log.txt";
  auto step = [&](const std::string& args) {
    if (!run.error.empty()) return;
    int code = run_cli("--output-dir '" + dir.string() + "' " + args, log);
    if (code != 0) run.error = "'" + args + "' exited with " + std::to_string(code) + ": " + io::read_file(log);
  };
  auto path = [&](const std::string& name) { return "'" + (dir / name).string() + "'"; };

  step("--seed 7 synth run --seeds '" + fixture("seeds.jsonl") + "' " + providers + " --target 200 --out pool.jsonl");
  step("--seed 7 synth pairs --in " + path("pool.jsonl") + " " + providers + " --out pairs.jsonl");
  step("--seed 7 train --pairs " + path("pairs.jsonl") +
       " --out adapter.json --history history.csv --batch 16 --val-pairs 40 --eval-every 5 --epochs 20 --lr 5e-3");

  step("--seed 8 synth run --seeds '" + fixture("seeds.jsonl") + "' " + providers +
       " --target 120 --out heldout_pool.jsonl");
  step("--seed 8 synth pairs --in " + path("heldout_pool.jsonl") + " " + providers +
       " --provider beta --out heldout_pairs.jsonl");
  if (!run.error.empty()) return run;
  write_heldout_testset(dir / "pairs.jsonl", dir / "heldout_pairs.jsonl", dir / "testset.jsonl",
                        dir / "corpus.jsonl");

  const std::string eval =
      "eval retrieval --testset " + path("testset.jsonl") + " --corpus " + path("corpus.jsonl") + " --k 1,3,10";
  step(eval + " --out identity.txt");
  step(eval + " --adapter " + path("adapter.json") + " --out trained.txt --ranks trained_ranks.csv");
  if (!run.error.empty()) return run;

  run.identity_mrr3 = std::stod(read_report(dir / "identity.txt").at("mrr@3"));
  run.trained_mrr3 = std::stod(read_report(dir / "trained.txt").at("mrr@3"));
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  run.ok = true;
  return run;
}

Outcome end_to_end() {
  TempDir tmp("cmdsim-e2e");
  auto a = run_pipeline(tmp / "a");
  if (!a.ok) return {Status::fail, a.error};
  auto b = run_pipeline(tmp / "b");
  if (!b.ok) return {Status::fail, b.error};

  Checker c;
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(tmp / "a")) {
    auto name = entry.path().filename().string();
    if (name == "log.txt") continue;
    ++compared;
    c.expect(fs::exists(tmp / "b" / name) && io::read_file(entry.path()) == io::read_file(tmp / "b" / name),
             name + " differs between runs");
  }
  auto cases = io::read_testset(tmp / "a" / "testset.jsonl").size();
  c.expect(cases >= 50, "held-out testset has only " + std::to_string(cases) + " cases");
  c.expect(a.trained_mrr3 > a.identity_mrr3,
           "trained MRR@3 " + num(a.trained_mrr3, 2) + " <= identity " + num(a.identity_mrr3, 2));
  double slowest = std::max(a.seconds, b.seconds);
  c.expect(slowest < 60.0, "pipeline took " + num(slowest, 1) + " s");
  return c.outcome(std::to_string(compared) + " artifacts byte-identical; held-out MRR@3 trained " +
                   num(a.trained_mrr3, 2) + " vs identity " + num(a.identity_mrr3, 2) + " on " +
                   std::to_string(cases) + " cases; " + num(slowest, 1) + " s per run");
}

// ---------------------------------------------------------------------------

void blobs(Rng& rng, std::size_t classes, std::size_t per_class, std::size_t dim, Vecs& x,
           std::vector<std::size_t>& y) {
  std::normal_distribution<double> g;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      std::vector<double> v(dim);
      for (auto& e : v) e = 0.6 * g(rng);
      v[c % dim] += 4.0;
      x.push_back(std::move(v));
      y.push_back(c);
    }
  }
}

Outcome classification() {
  Checker c;
  Rng rng(90);
  auto ds = synth_classification_dataset(rng);
  c.expect(ds.train.size() == 24500 && ds.test.size() == 24500, "split sizes differ from 24,500/24,500");
  std::vector<std::size_t> train_counts(7), test_counts(7);
  for (const auto& r : ds.train) ++train_counts.at(r.label);
  for (const auto& r : ds.test) ++test_counts.at(r.label);
  for (std::size_t k = 0; k < 7; ++k) {
    c.expect(train_counts[k] == 3500 && test_counts[k] == 3500, "class " + std::to_string(k) + " is unbalanced");
  }
  for (const auto& r : ds.train) {
    const auto& name = classification_commands()[r.label];
    if (!(r.text.starts_with(name + " '") && r.text.ends_with("'"))) {
      c.expect(false, "record does not match the pattern: " + r.text);
      break;
    }
  }

  auto grid = default_logreg_grid();
  Vecs x, tx;
  std::vector<std::size_t> y, ty;
  blobs(rng, 7, 500, 16, x, y);
  blobs(rng, 7, 500, 16, tx, ty);
  double separable = train_logreg(x, y, tx, ty, grid, rng).test_accuracy;
  c.expect(separable >= 99.0, "separable accuracy " + num(separable, 2));

  std::string shuffled_list;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng r2(900 + seed);
    Vecs sx, stx;
    std::vector<std::size_t> sy, sty;
    blobs(r2, 7, 1000, 16, sx, sy);
    blobs(r2, 7, 1000, 16, stx, sty);
    shuffle(sy, r2);
    shuffle(sty, r2);
    double acc = train_logreg(sx, sy, stx, sty, grid, r2).test_accuracy;
    c.expect(std::abs(acc - 100.0 / 7.0) <= 2.0, "shuffled accuracy " + num(acc, 2) + " with seed " +
                                                     std::to_string(seed));
    shuffled_list += (seed ? "/" : "") + num(acc, 1);
  }
  return c.outcome("7x7000 balanced; separable " + num(separable, 2) + "%; shuffled " + shuffled_list + "%");
}

Outcome negative_mining() {
  Checker c;
  std::mt19937_64 gen(100);
  std::normal_distribution<double> g;
  for (int corpus = 0; corpus < 100; ++corpus) {
    std::size_t n = 3 + gen() % 200, d = 3 + gen() % 6;
    std::vector<EmbeddingVector> embs;
    std::vector<oracle::Vec> raw;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(d);
      // Coarse coordinates produce tied similarities.
      for (auto& x : v) x = std::round(2.0 * g(gen)) / 2.0;
      if (oracle::dot(v, v) == 0.0) v[0] = 1.0;
      auto u = normalized(EmbeddingVector(v));
      raw.emplace_back(u.values().begin(), u.values().end());
      embs.push_back(std::move(u));
    }
    std::size_t q = gen() % n;
    std::optional<std::size_t> p;
    if (corpus % 4 != 0) p = (q + 1 + gen() % (n - 1)) % n;
    std::size_t available = n - 1 - (p ? 1 : 0);
    std::size_t want_n = 1 + gen() % available;
    auto got = mine_negatives(q, embs, want_n, p);
    c.expect(got == oracle::least_similar(q, raw, want_n, p), "corpus " + std::to_string(corpus) + " differs");
    c.expect(got.size() == want_n, "wrong number of negatives");
    for (auto i : got) c.expect(i != q && (!p || i != *p), "query or positive returned");
  }
  return c.outcome("100 corpora equal to the full-sort oracle");
}

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;  // 0: no limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--criterion N]\n";
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {1, "dataset statistics", 10, dataset_statistics},
      {2, "InfoNCE correctness", 5, info_nce_correctness},
      {3, "retrieval metric oracle", 5, retrieval_metrics},
      {4, "AUC oracle", 5, auc_oracle},
      {5, "gene-pool algebra", 2, gene_pool_algebra},
      {6, "DBSCAN reference", 30, dbscan_reference},
      {7, "ROUGE-L oracle", 5, rouge_oracle},
      {8, "end-to-end pipeline", 0, end_to_end},
      {9, "classification benchmark", 60, classification},
      {10, "negative mining", 0, negative_mining},
  };

  bool failed = false, skipped = false, ran = false;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    ran = true;
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.status == Status::pass && c.limit_seconds > 0 && secs >= c.limit_seconds) {
      o = {Status::fail, "took " + num(secs, 2) + " s, limit " + num(c.limit_seconds, 0) + " s; " + o.detail};
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    std::string timing = num(secs, 2) + " s";
    if (c.limit_seconds > 0) timing += ", limit " + num(c.limit_seconds, 0) + " s";
    std::cout << "criterion " << c.id << " [" << tag << "] " << c.name << " (" << timing << "): " << o.detail
              << std::endl;
    failed |= o.status == Status::fail;
    skipped |= o.status == Status::skip;
  }
  if (!ran) {
    std::cerr << "no criterion " << only << "\n";
    return 2;
  }
  if (failed) return 1;
  if (only != 0 && skipped) return 77;
  return 0;
}
