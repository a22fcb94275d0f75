#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <regex>
#include <set>

#include "cmdsim/error.hpp"
#include "cmdsim/evaluation.hpp"
#include "oracles.hpp"

using namespace cmdsim;

namespace {

std::vector<io::TechniqueRecord> technique_records(const std::vector<std::size_t>& sizes) {
  std::vector<io::TechniqueRecord> out;
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    for (std::size_t i = 0; i < sizes[t]; ++i) {
      out.push_back({"T" + std::to_string(1000 + t), "tool" + std::to_string(t) + " --case " + std::to_string(i)});
    }
  }
  return out;
}

CommandLine cmd(std::string text) { return {std::move(text), Source::real_world, {}}; }

}  // namespace

TEST_CASE("rank examples") {
  CHECK(rank_of_positive(0.9, std::vector<double>{0.1, 0.1, 0.1}) == 1);
  CHECK(rank_of_positive(0.5, std::vector<double>{0.7}) == 2);
  CHECK(rank_of_positive(0.5, std::vector<double>{0.5, 0.2, 0.5, 0.1, 0.5}) == 4);
  CHECK(rank_of_positive(0.5, std::vector<double>{}) == 1);
}

TEST_CASE("rank agrees with a full sort") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = gen() % 40;
    std::vector<double> neg(n);
    // Coarse grid so ties are common.
    for (auto& s : neg) s = static_cast<double>(gen() % 11) / 10.0;
    double pos = static_cast<double>(gen() % 11) / 10.0;
    REQUIRE(rank_of_positive(pos, neg) == oracle::full_sort_rank(pos, neg));
  }
}

TEST_CASE("mrr and top examples") {
  CHECK(mrr_at_k(std::vector<std::size_t>{1, 1, 1}, 3) == doctest::Approx(100.0));
  CHECK(mrr_at_k(std::vector<std::size_t>{1, 2}, 3) == doctest::Approx(75.0));
  CHECK(mrr_at_k(std::vector<std::size_t>{4}, 3) == 0.0);
  CHECK(top_at_k(std::vector<std::size_t>{1, 5, 11}, 10) == doctest::Approx(200.0 / 3.0));
  CHECK(top_at_k(std::vector<std::size_t>{1, 2, 1, 3}, 1) == doctest::Approx(50.0));
  CHECK_THROWS_AS(mrr_at_k(std::vector<std::size_t>{}, 3), InvalidArgument);
  CHECK_THROWS_AS(top_at_k(std::vector<std::size_t>{}, 3), InvalidArgument);
  CHECK_THROWS_AS(mrr_at_k(std::vector<std::size_t>{0}, 3), InvalidArgument);
}

TEST_CASE("top dominates mrr and both grow with k") {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> ranks(1 + gen() % 30);
    for (auto& r : ranks) r = 1 + gen() % 15;
    double prev_mrr = 0.0, prev_top = 0.0;
    for (std::size_t k = 1; k <= 16; ++k) {
      double m = mrr_at_k(ranks, k), t = top_at_k(ranks, k);
      CHECK(m == doctest::Approx(oracle::mrr(ranks, k)));
      CHECK(t == doctest::Approx(oracle::top(ranks, k)));
      CHECK(t >= m - 1e-12);
      CHECK(m >= prev_mrr);
      CHECK(t >= prev_top);
      prev_mrr = m;
      prev_top = t;
    }
  }
}

TEST_CASE("retrieval cases resolve corpus ids and reject leaks") {
  std::vector<std::string> corpus{"whoami", "ipconfig /all", "tasklist", "net user"};
  std::vector<io::TestsetRecord> ok{{"whoami /all", "whoami /priv", {1, 2}}};
  auto cases = make_retrieval_cases(ok, corpus);
  REQUIRE(cases.size() == 1);
  CHECK(cases[0].negatives.size() == 2);
  CHECK(cases[0].negatives[1].text == "tasklist");

  std::vector<io::TestsetRecord> out_of_range{{"whoami /all", "whoami /priv", {4}}};
  CHECK_THROWS_AS(make_retrieval_cases(out_of_range, corpus), IntegrityError);
  std::vector<io::TestsetRecord> leak{{"tasklist", "tasklist /svc", {2}}};
  CHECK_THROWS_AS(make_retrieval_cases(leak, corpus), IntegrityError);
  std::vector<io::TestsetRecord> leak_positive{{"ps", "TASKLIST ", {2}}};
  CHECK_THROWS_AS(make_retrieval_cases(leak_positive, corpus), IntegrityError);
}

TEST_CASE("retrieval report with a scripted encoder") {
  // Each text maps to a fixed angle; similarity decreases with angular distance.
  std::map<std::string, double> angle{{"q1", 0.0}, {"p1", 0.1}, {"n1", 0.5}, {"n2", 0.05},
                                      {"q2", 2.0}, {"p2", 2.0}, {"n3", 2.5}};
  std::size_t calls = 0;
  Encoder encoder = [&](std::span<const std::string> texts) {
    ++calls;
    std::set<std::string> unique(texts.begin(), texts.end());
    CHECK(unique.size() == texts.size());
    std::vector<EmbeddingVector> out;
    for (const auto& t : texts) out.emplace_back(std::vector<double>{std::cos(angle.at(t)), std::sin(angle.at(t))});
    return out;
  };
  std::vector<RetrievalCase> cases{{cmd("q1"), cmd("p1"), {cmd("n1"), cmd("n2")}},
                                   {cmd("q2"), cmd("p2"), {cmd("n3"), cmd("n1")}}};
  auto report = evaluate_retrieval(cases, encoder, std::vector<std::size_t>{1, 3});
  CHECK(calls == 1);
  CHECK(report.ranks == std::vector<std::size_t>{2, 1});
  CHECK(report.mrr.at(1) == doctest::Approx(50.0));
  CHECK(report.mrr.at(3) == doctest::Approx(75.0));
  CHECK(report.top.at(3) == doctest::Approx(100.0));
  CHECK(rank_of_positive(cases[0], encoder) == 2);
}

TEST_CASE("gene pool sizes") {
  CHECK(gene_pool_size(10, 20) == 2);
  CHECK(gene_pool_size(9, 20) == 2);
  CHECK(gene_pool_size(10, 1) == 1);
  CHECK(gene_pool_size(30, 50) == 15);
  CHECK(gene_pool_size(31, 50) == 16);
  CHECK_THROWS_AS(gene_pool_size(10, 0), InvalidArgument);
  CHECK_THROWS_AS(gene_pool_size(10, 100), InvalidArgument);
}

TEST_CASE("small techniques stay in A but get no split") {
  auto corpus = TechniqueCorpus::from_records(technique_records({10, 8, 9}));
  auto pools = build_gene_pools(corpus, 20);
  CHECK(pools.all.size() == 27);
  REQUIRE(pools.splits.size() == 2);
  CHECK(pools.splits[0].technique_id == "T1000");
  CHECK(pools.splits[0].pool.size() == 2);
  CHECK(pools.splits[0].queries.size() == 8);
  CHECK(pools.splits[1].technique_id == "T1002");
  CHECK(pools.splits[1].pool == std::vector<std::size_t>{18, 19});
  CHECK(pools.splits[1].negatives.size() == 18);
  CHECK_THROWS_AS(build_gene_pools(corpus, 0), InvalidArgument);
}

TEST_CASE("duplicate technique commands are dropped") {
  std::vector<io::TechniqueRecord> recs{{"T1", "whoami"}, {"T1", "WHOAMI "}, {"T2", "whoami"}, {"T1", "hostname"}};
  auto corpus = TechniqueCorpus::from_records(recs);
  REQUIRE(corpus.techniques.size() == 2);
  CHECK(corpus.techniques[0].commands.size() == 2);
  CHECK(corpus.techniques[1].commands.size() == 1);
}

TEST_CASE("gene pool partitions hold for every sample rate") {
  std::vector<std::size_t> sizes;
  for (std::size_t m = 9; m <= 30; ++m) sizes.push_back(m);
  sizes.push_back(4);
  auto corpus = TechniqueCorpus::from_records(technique_records(sizes));
  for (int r = 1; r <= 99; ++r) {
    auto pools = build_gene_pools(corpus, r);
    REQUIRE(pools.splits.size() == 22);
    for (const auto& s : pools.splits) {
      std::set<std::size_t> L(s.members.begin(), s.members.end()), P(s.pool.begin(), s.pool.end()),
          O(s.queries.begin(), s.queries.end()), C(s.candidates.begin(), s.candidates.end()),
          G(s.negatives.begin(), s.negatives.end());
      CHECK(P.size() == static_cast<std::size_t>(std::ceil(r * static_cast<double>(L.size()) / 100.0 - 1e-12)));
      std::set<std::size_t> u = P;
      u.insert(O.begin(), O.end());
      CHECK(u == L);
      CHECK(P.size() + O.size() == L.size());
      for (auto o : O) CHECK(C.count(o));
      for (auto p : P) CHECK_FALSE(C.count(p));
      for (auto l : L) CHECK_FALSE(G.count(l));
      CHECK(G.size() + L.size() == pools.all.size());
      CHECK(std::equal(s.pool.begin(), s.pool.end(), s.members.begin()));
    }
  }
}

TEST_CASE("malicious score is the best pool similarity") {
  EmbeddingVector x({1, 0});
  std::vector<EmbeddingVector> dup{EmbeddingVector({0, 1}), EmbeddingVector({1, 0})};
  CHECK(malicious_score(x, dup) == doctest::Approx(1.0));
  std::vector<EmbeddingVector> one{normalized(EmbeddingVector({1, 1}))};
  CHECK(malicious_score(x, one) == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(malicious_score(x, std::vector<EmbeddingVector>{}), InvalidArgument);

  std::mt19937_64 gen(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    auto rv = [&] {
      std::vector<double> v(6);
      for (auto& c : v) c = g(gen);
      return normalized(EmbeddingVector(v));
    };
    auto q = rv();
    std::vector<EmbeddingVector> pool;
    double best = -2.0;
    for (int i = 0; i < 5; ++i) {
      pool.push_back(rv());
      best = std::max(best, oracle::dot({q.values().begin(), q.values().end()},
                                        {pool.back().values().begin(), pool.back().values().end()}));
    }
    CHECK(malicious_score(q, pool) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("auc examples") {
  CHECK(auc_mann_whitney(std::vector<double>{0.9, 0.8}, std::vector<double>{0.1, 0.2}) == 1.0);
  CHECK(auc_mann_whitney(std::vector<double>{0.6}, std::vector<double>{0.4, 0.8}) == 0.5);
  CHECK(auc_mann_whitney(std::vector<double>{0.5}, std::vector<double>{0.5}) == 0.5);
  CHECK(auc_mann_whitney(std::vector<double>{0.1}, std::vector<double>{0.5, 0.9}) == 0.0);
  CHECK_THROWS_AS(auc_mann_whitney(std::vector<double>{}, std::vector<double>{0.5}), InvalidArgument);
  CHECK_THROWS_AS(auc_mann_whitney(std::vector<double>{0.5}, std::vector<double>{}), InvalidArgument);
}

TEST_CASE("auc agrees with pair counting and ignores monotone transforms") {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> pos(1 + gen() % 20), neg(1 + gen() % 20);
    for (auto& s : pos) s = static_cast<double>(gen() % 21) / 20.0;
    for (auto& s : neg) s = static_cast<double>(gen() % 21) / 20.0;
    double a = auc_mann_whitney(pos, neg);
    CHECK(a == doctest::Approx(oracle::auc(pos, neg)).epsilon(1e-12));
    auto affine = [](std::vector<double> v) {
      for (auto& s : v) s = 2.0 * s + 1.0;
      return v;
    };
    auto cube = [](std::vector<double> v) {
      for (auto& s : v) s = s * s * s;
      return v;
    };
    CHECK(auc_mann_whitney(affine(pos), affine(neg)) == a);
    CHECK(auc_mann_whitney(cube(pos), cube(neg)) == a);
  }
}

TEST_CASE("shuffled labels give chance-level auc") {
  Rng rng(5);
  double sum = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> scores(20);
    for (auto& s : scores) s = uniform_unit(rng);
    shuffle(scores, rng);
    sum += auc_mann_whitney(std::span(scores).first(10), std::span(scores).subspan(10));
  }
  CHECK(sum / trials == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("aggregate modes") {
  std::vector<TechniqueScores> s{{"A", {0.9}, {0.1}}, {"B", {0.2}, {0.3, 0.8}}};
  CHECK(aggregate_auc(s, AucMode::averaged) == doctest::Approx(0.5));
  // Pooled: positives {0.9, 0.2}, negatives {0.1, 0.3, 0.8} -> 3 + 1 wins out of 6.
  CHECK(aggregate_auc(s, AucMode::concatenated) == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("detection over a corpus") {
  auto corpus = TechniqueCorpus::from_records(technique_records({10, 12, 9}));
  // Commands of one technique share a direction.
  Encoder encoder = [](std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    for (const auto& t : texts) {
      double a = (t[4] - '0') * 1.0 + 0.001 * static_cast<double>(t.size());
      out.push_back(EmbeddingVector(std::vector<double>{std::cos(a), std::sin(a)}));
    }
    return out;
  };
  CHECK(detection_auc(corpus, 20, encoder, AucMode::concatenated) == doctest::Approx(1.0));
  CHECK(detection_auc(corpus, 20, encoder, AucMode::averaged) == doctest::Approx(1.0));

  auto pools = build_gene_pools(corpus, 50);
  std::vector<std::string> texts;
  for (const auto& c : pools.all) texts.push_back(c.text);
  auto emb = encoder(texts);
  auto scores = score_gene_pools(pools, emb);
  REQUIRE(scores.size() == 3);
  CHECK(scores[0].positive_scores.size() == 5);
  CHECK(scores[0].negative_scores.size() == 21);

  auto lonely = TechniqueCorpus::from_records(technique_records({9}));
  CHECK_THROWS_WITH_AS(detection_auc(lonely, 20, encoder, AucMode::concatenated),
                       doctest::Contains("T1000"), Error);
}

TEST_CASE("classification dataset shape") {
  const auto& cmds = classification_commands();
  CHECK(cmds == std::vector<std::string>{"find", "robocopy", "msiexec", "rundll32", "sc query", "certutil", "print"});
  Rng rng(6);
  auto ds = synth_classification_dataset(rng);
  CHECK(ds.train.size() == 24500);
  CHECK(ds.test.size() == 24500);
  std::vector<std::size_t> train_counts(7), test_counts(7);
  const std::regex token("[A-Za-z0-9]{1,20}");
  for (const auto& r : ds.train) ++train_counts.at(r.label);
  for (const auto& r : ds.test) ++test_counts.at(r.label);
  CHECK(train_counts == std::vector<std::size_t>(7, 3500));
  CHECK(test_counts == std::vector<std::size_t>(7, 3500));
  std::size_t with_decoy = 0;
  for (std::size_t i = 0; i < 2000; ++i) {
    const auto& r = ds.train[i];
    const auto& name = cmds[r.label];
    REQUIRE(std::regex_match(r.text, std::regex("^" + name + " '.*'$")));
    auto args = r.text.substr(name.size() + 2, r.text.size() - name.size() - 3);
    bool decoy = false;
    for (std::size_t j = 0; j < cmds.size(); ++j) {
      if (j != r.label && args.find(cmds[j]) != std::string::npos) decoy = true;
    }
    if (decoy) ++with_decoy;
  }
  CHECK(with_decoy > 1000);

  Rng a(9), b(9);
  ClassificationConfig small;
  small.per_class = 10;
  auto x = synth_classification_dataset(a, small), y = synth_classification_dataset(b, small);
  CHECK(x.train.size() == 35);
  REQUIRE(x.train.size() == y.train.size());
  for (std::size_t i = 0; i < x.train.size(); ++i) CHECK(x.train[i].text == y.train[i].text);
}

TEST_CASE("a certutil line with msiexec inside the quotes stays certutil") {
  Rng rng(7);
  ClassificationConfig cfg;
  cfg.per_class = 200;
  cfg.decoy_probability = 1.0;
  auto ds = synth_classification_dataset(rng, cfg);
  bool found = false;
  for (const auto& r : ds.train) {
    if (r.text.starts_with("certutil '") && r.text.find("msiexec") != std::string::npos) {
      CHECK(classification_commands()[r.label] == "certutil");
      found = true;
    }
  }
  CHECK(found);
}

namespace {

// Gaussian blobs around `classes` well separated means.
void blobs(Rng& rng, std::size_t classes, std::size_t per_class, std::size_t dim, double spread,
           std::vector<std::vector<double>>& x, std::vector<std::size_t>& y) {
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> means(classes, std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < classes; ++c) means[c][c % dim] = 4.0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      auto v = means[c];
      for (auto& e : v) e += spread * g(rng);
      x.push_back(v);
      y.push_back(c);
    }
  }
}

}  // namespace

TEST_CASE("logistic regression separates separable classes") {
  Rng rng(8);
  std::vector<std::vector<double>> x, tx;
  std::vector<std::size_t> y, ty;
  blobs(rng, 2, 300, 5, 0.5, x, y);
  blobs(rng, 2, 300, 5, 0.5, tx, ty);
  auto grid = default_logreg_grid();
  auto r = train_logreg(x, y, tx, ty, grid, rng);
  CHECK(r.test_accuracy >= 99.0);
  CHECK(r.model.num_classes() == 2);
  CHECK(r.model.dim() == 5);
  CHECK(r.model.weights().size() == 12);
}

TEST_CASE("shuffled labels give chance-level accuracy") {
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    std::vector<std::vector<double>> x, tx;
    std::vector<std::size_t> y, ty;
    blobs(rng, 7, 200, 8, 1.0, x, y);
    blobs(rng, 7, 200, 8, 1.0, tx, ty);
    shuffle(y, rng);
    shuffle(ty, rng);
    std::vector<LogRegHyper> grid{{1e-2, 1.0, 100}};
    sum += train_logreg(x, y, tx, ty, grid, rng).test_accuracy;
  }
  CHECK(sum / 5.0 == doctest::Approx(100.0 / 7.0).epsilon(2.0 / (100.0 / 7.0)));
}

TEST_CASE("zero iterations predict the first class") {
  Rng rng(9);
  std::vector<std::vector<double>> x;
  std::vector<std::size_t> y;
  blobs(rng, 3, 50, 4, 1.0, x, y);
  LogisticRegression m;
  m.fit(x, y, 3, {0.0, 1.0, 0});
  for (double w : m.weights()) CHECK(w == 0.0);
  CHECK(m.accuracy(x, y) == doctest::Approx(100.0 / 3.0));

  std::vector<std::size_t> single(y.size(), 1);
  auto grid = default_logreg_grid();
  CHECK_THROWS_AS(train_logreg(x, single, x, single, grid, rng), InvalidArgument);
}
