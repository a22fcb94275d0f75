#include "cmdsim/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <Eigen/Dense>

#include "cmdsim/error.hpp"

namespace cmdsim {

// ---------------------------------------------------------------------------
// Retrieval

std::size_t rank_of_positive(double positive_score, std::span<const double> negative_scores) {
  std::size_t ahead = 0;
  for (double s : negative_scores) {
    if (s >= positive_score) ++ahead;
  }
  return ahead + 1;
}

std::size_t rank_of_positive(const RetrievalCase& c, const Encoder& encoder) {
  std::vector<std::string> texts{c.query.text, c.positive.text};
  for (const auto& n : c.negatives) texts.push_back(n.text);
  auto vecs = encoder(texts);
  std::vector<double> neg;
  neg.reserve(c.negatives.size());
  for (std::size_t i = 2; i < vecs.size(); ++i) neg.push_back(cosine_similarity(vecs[0], vecs[i]));
  return rank_of_positive(cosine_similarity(vecs[0], vecs[1]), neg);
}

double mrr_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) throw InvalidArgument("no ranks to score");
  double sum = 0.0;
  for (auto r : ranks) {
    if (r == 0) throw InvalidArgument("ranks start at 1");
    if (r <= k) sum += 1.0 / static_cast<double>(r);
  }
  return 100.0 * sum / static_cast<double>(ranks.size());
}

double top_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) throw InvalidArgument("no ranks to score");
  std::size_t hits = 0;
  for (auto r : ranks) {
    if (r == 0) throw InvalidArgument("ranks start at 1");
    if (r <= k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::vector<RetrievalCase> make_retrieval_cases(std::span<const io::TestsetRecord> records,
                                                std::span<const std::string> corpus) {
  std::vector<RetrievalCase> cases;
  cases.reserve(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    RetrievalCase c;
    c.query = CommandLine{rec.query, Source::real_world, std::nullopt};
    c.positive = CommandLine{rec.positive, Source::pair_generated, std::nullopt};
    const auto qk = canonical_dedup_key(rec.query);
    const auto pk = canonical_dedup_key(rec.positive);
    for (auto id : rec.negative_ids) {
      if (id >= corpus.size()) {
        throw IntegrityError("testset case " + std::to_string(r) + " references corpus id " + std::to_string(id) +
                             " beyond " + std::to_string(corpus.size()) + " entries");
      }
      const auto nk = canonical_dedup_key(corpus[id]);
      if (nk == qk || nk == pk) {
        throw IntegrityError("testset case " + std::to_string(r) + " lists its query or positive as a negative");
      }
      c.negatives.push_back(CommandLine{corpus[id], Source::real_world, std::nullopt});
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

RetrievalReport evaluate_retrieval(std::span<const RetrievalCase> cases, const Encoder& encoder,
                                   std::span<const std::size_t> ks) {
  std::vector<std::string> texts;
  std::unordered_map<std::string, std::size_t> slot;
  auto intern = [&](const std::string& t) {
    auto [it, inserted] = slot.try_emplace(t, texts.size());
    if (inserted) texts.push_back(t);
    return it->second;
  };
  for (const auto& c : cases) {
    intern(c.query.text);
    intern(c.positive.text);
    for (const auto& n : c.negatives) intern(n.text);
  }
  auto vecs = encoder(texts);

  RetrievalReport report;
  report.ranks.reserve(cases.size());
  std::vector<double> neg;
  for (const auto& c : cases) {
    const auto& q = vecs[slot.at(c.query.text)];
    neg.clear();
    for (const auto& n : c.negatives) neg.push_back(cosine_similarity(q, vecs[slot.at(n.text)]));
    report.ranks.push_back(rank_of_positive(cosine_similarity(q, vecs[slot.at(c.positive.text)]), neg));
  }
  for (auto k : ks) {
    report.mrr[k] = mrr_at_k(report.ranks, k);
    report.top[k] = top_at_k(report.ranks, k);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Gene pools

TechniqueCorpus TechniqueCorpus::from_records(std::span<const io::TechniqueRecord> records) {
  TechniqueCorpus corpus;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::unordered_set<std::string>> keys;
  for (const auto& r : records) {
    auto [it, inserted] = index.try_emplace(r.technique_id, corpus.techniques.size());
    if (inserted) {
      corpus.techniques.push_back(Technique{r.technique_id, {}});
      keys.emplace_back();
    }
    if (!is_valid_command(r.command)) continue;
    if (keys[it->second].insert(canonical_dedup_key(r.command)).second) {
      corpus.techniques[it->second].commands.push_back(CommandLine{r.command, Source::real_world, r.technique_id});
    }
  }
  return corpus;
}

std::size_t gene_pool_size(std::size_t m, int r) {
  if (r <= 0 || r >= 100) throw InvalidArgument("sample rate must lie in (0, 100), got " + std::to_string(r));
  return (static_cast<std::size_t>(r) * m + 99) / 100;  // ceil(r * m / 100)
}

GenePools build_gene_pools(const TechniqueCorpus& corpus, int r) {
  gene_pool_size(0, r);
  GenePools out;
  out.sample_rate = r;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<std::size_t>> members(corpus.techniques.size());
  for (std::size_t t = 0; t < corpus.techniques.size(); ++t) {
    for (const auto& cmd : corpus.techniques[t].commands) {
      auto [it, inserted] = index.try_emplace(canonical_dedup_key(cmd), out.all.size());
      if (inserted) out.all.push_back(cmd);
      if (std::find(members[t].begin(), members[t].end(), it->second) == members[t].end()) {
        members[t].push_back(it->second);
      }
    }
  }

  for (std::size_t t = 0; t < corpus.techniques.size(); ++t) {
    const auto& m = members[t];
    if (m.size() < kMinTechniqueSize) continue;
    GenePoolSplit split;
    split.technique_id = corpus.techniques[t].id;
    split.members = m;
    const std::size_t pool_size = gene_pool_size(m.size(), r);
    split.pool.assign(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(pool_size));
    split.queries.assign(m.begin() + static_cast<std::ptrdiff_t>(pool_size), m.end());
    std::vector<char> in_pool(out.all.size(), 0), in_members(out.all.size(), 0);
    for (auto i : split.pool) in_pool[i] = 1;
    for (auto i : split.members) in_members[i] = 1;
    for (std::size_t i = 0; i < out.all.size(); ++i) {
      if (!in_pool[i]) split.candidates.push_back(i);
      if (!in_members[i]) split.negatives.push_back(i);
    }
    out.splits.push_back(std::move(split));
  }
  return out;
}

double malicious_score(const EmbeddingVector& cmd, std::span<const EmbeddingVector> pool) {
  if (pool.empty()) throw InvalidArgument("empty gene pool");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : pool) best = std::max(best, cosine_similarity(cmd, p));
  return best;
}

double auc_mann_whitney(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) throw InvalidArgument("AUC needs positive and negative scores");
  std::vector<std::pair<double, bool>> all;
  all.reserve(positives.size() + negatives.size());
  for (double s : positives) all.emplace_back(s, true);
  for (double s : negatives) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  // Twice the Mann-Whitney U, kept integral so ties contribute exactly 1/2.
  std::uint64_t twice_u = 0;
  std::uint64_t negatives_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? pos : neg) += 1;
      ++j;
    }
    twice_u += 2 * pos * negatives_below + pos * neg;
    negatives_below += neg;
    i = j;
  }
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

std::vector<TechniqueScores> score_gene_pools(const GenePools& pools, std::span<const EmbeddingVector> embeddings) {
  if (embeddings.size() != pools.all.size()) throw InvalidArgument("one embedding per command of A is required");
  std::vector<TechniqueScores> out;
  std::vector<EmbeddingVector> pool;
  for (const auto& split : pools.splits) {
    pool.clear();
    for (auto i : split.pool) pool.push_back(embeddings[i]);
    TechniqueScores s;
    s.technique_id = split.technique_id;
    for (auto i : split.queries) s.positive_scores.push_back(malicious_score(embeddings[i], pool));
    for (auto i : split.negatives) s.negative_scores.push_back(malicious_score(embeddings[i], pool));
    if (s.positive_scores.empty() || s.negative_scores.empty()) {
      throw InvalidArgument("technique '" + split.technique_id + "' has no " +
                            (s.positive_scores.empty() ? "positive" : "negative") + " command lines at r=" +
                            std::to_string(pools.sample_rate));
    }
    out.push_back(std::move(s));
  }
  return out;
}

double aggregate_auc(std::span<const TechniqueScores> scores, AucMode mode) {
  if (scores.empty()) throw InvalidArgument("no technique qualifies for a gene pool");
  if (mode == AucMode::averaged) {
    double sum = 0.0;
    for (const auto& s : scores) sum += auc_mann_whitney(s.positive_scores, s.negative_scores);
    return sum / static_cast<double>(scores.size());
  }
  std::vector<double> pos, neg;
  for (const auto& s : scores) {
    pos.insert(pos.end(), s.positive_scores.begin(), s.positive_scores.end());
    neg.insert(neg.end(), s.negative_scores.begin(), s.negative_scores.end());
  }
  return auc_mann_whitney(pos, neg);
}

double detection_auc(const TechniqueCorpus& corpus, int r, const Encoder& encoder, AucMode mode) {
  auto pools = build_gene_pools(corpus, r);
  std::vector<std::string> texts;
  texts.reserve(pools.all.size());
  for (const auto& c : pools.all) texts.push_back(c.text);
  auto embeddings = encoder(texts);
  auto scores = score_gene_pools(pools, embeddings);
  return aggregate_auc(scores, mode);
}

// ---------------------------------------------------------------------------
// Classification

const std::vector<std::string>& classification_commands() {
  static const std::vector<std::string> kCommands = {"find", "robocopy", "msiexec", "rundll32",
                                                     "sc query", "certutil", "print"};
  return kCommands;
}

ClassificationDataset synth_classification_dataset(Rng& rng, const ClassificationConfig& cfg) {
  static constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
  if (cfg.min_arg_len == 0 || cfg.min_arg_len > cfg.max_arg_len) throw InvalidArgument("bad argument length range");
  if (cfg.decoy_probability < 0.0 || cfg.decoy_probability > 1.0) throw InvalidArgument("decoy probability must be in [0, 1]");
  const auto& commands = classification_commands();
  const std::size_t train_per_class = cfg.per_class / 2;

  ClassificationDataset ds;
  for (std::size_t label = 0; label < commands.size(); ++label) {
    for (std::size_t n = 0; n < cfg.per_class; ++n) {
      std::string arg;
      for (std::size_t slot = 0; slot < cfg.arguments; ++slot) {
        if (slot) arg.push_back(' ');
        if (uniform_unit(rng) < cfg.decoy_probability) {
          std::size_t decoy = uniform_index(rng, commands.size() - 1);
          if (decoy >= label) ++decoy;
          arg += commands[decoy];
        } else {
          std::size_t len = cfg.min_arg_len + uniform_index(rng, cfg.max_arg_len - cfg.min_arg_len + 1);
          for (std::size_t c = 0; c < len; ++c) arg.push_back(kAlphabet[uniform_index(rng, kAlphabet.size())]);
        }
      }
      ClassificationRecord rec{label, commands[label] + " '" + arg + "'"};
      (n < train_per_class ? ds.train : ds.test).push_back(std::move(rec));
    }
  }
  shuffle(ds.train, rng);
  shuffle(ds.test, rng);
  return ds;
}

std::vector<LogRegHyper> default_logreg_grid() {
  std::vector<LogRegHyper> grid;
  for (double l2 : {0.0, 1e-4, 1e-2}) {
    for (double lr : {1.0, 4.0}) grid.push_back({l2, lr, 300});
  }
  return grid;
}

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Mat design_matrix(std::span<const std::vector<double>> x, std::size_t dim) {
  Mat m(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(dim + 1));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != dim) throw InvalidArgument("feature vectors differ in dimension");
    for (std::size_t j = 0; j < dim; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x[i][j];
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(dim)) = 1.0;
  }
  return m;
}

}  // namespace

void LogisticRegression::fit(std::span<const std::vector<double>> x, std::span<const std::size_t> y,
                             std::size_t num_classes, const LogRegHyper& hyper) {
  if (x.empty() || x.size() != y.size()) throw InvalidArgument("logistic regression needs matching, non-empty x and y");
  if (num_classes < 2) throw InvalidArgument("logistic regression needs at least two classes");
  classes_ = num_classes;
  dim_ = x.front().size();
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto c = static_cast<Eigen::Index>(classes_);
  const Mat X = design_matrix(x, dim_);
  Mat Y = Mat::Zero(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[static_cast<std::size_t>(i)] >= classes_) throw InvalidArgument("label out of range");
    Y(i, static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)])) = 1.0;
  }

  Mat W = Mat::Zero(c, static_cast<Eigen::Index>(dim_ + 1));
  Mat penalty_mask = Mat::Ones(c, static_cast<Eigen::Index>(dim_ + 1));
  penalty_mask.col(static_cast<Eigen::Index>(dim_)).setZero();
  for (std::size_t it = 0; it < hyper.iterations; ++it) {
    Mat logits = X * W.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      double m = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - m).exp();
      logits.row(i) /= logits.row(i).sum();
    }
    Mat grad = (logits - Y).transpose() * X / static_cast<double>(n);
    grad += hyper.l2 * W.cwiseProduct(penalty_mask);
    W -= hyper.learning_rate * grad;
  }
  weights_.assign(W.data(), W.data() + W.size());
}

std::size_t LogisticRegression::predict(std::span<const double> x) const {
  if (x.size() != dim_) throw InvalidArgument("feature dimension mismatch");
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < classes_; ++k) {
    const double* row = weights_.data() + k * (dim_ + 1);
    double s = row[dim_];
    for (std::size_t j = 0; j < dim_; ++j) s += row[j] * x[j];
    if (s > best_score) {
      best_score = s;
      best = k;
    }
  }
  return best;
}

double LogisticRegression::accuracy(std::span<const std::vector<double>> x, std::span<const std::size_t> y) const {
  if (x.empty() || x.size() != y.size()) throw InvalidArgument("accuracy needs matching, non-empty x and y");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (predict(x[i]) == y[i]) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(x.size());
}

LogRegResult train_logreg(std::span<const std::vector<double>> train_x, std::span<const std::size_t> train_y,
                          std::span<const std::vector<double>> test_x, std::span<const std::size_t> test_y,
                          std::span<const LogRegHyper> grid, Rng& rng) {
  if (train_x.size() != train_y.size() || train_x.empty()) throw InvalidArgument("empty or mismatched training data");
  if (grid.empty()) throw InvalidArgument("empty hyperparameter grid");
  const std::size_t num_classes = *std::max_element(train_y.begin(), train_y.end()) + 1;
  if (std::unordered_set<std::size_t>(train_y.begin(), train_y.end()).size() < 2) {
    throw InvalidArgument("training labels hold a single class");
  }

  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  const std::size_t n_val = std::max<std::size_t>(1, train_x.size() / 5);
  std::vector<std::vector<double>> fit_x, val_x;
  std::vector<std::size_t> fit_y, val_y;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& xs = i < n_val ? val_x : fit_x;
    auto& ys = i < n_val ? val_y : fit_y;
    xs.push_back(train_x[order[i]]);
    ys.push_back(train_y[order[i]]);
  }
  if (fit_x.empty()) throw InvalidArgument("training set too small for a validation split");

  LogRegResult result;
  result.val_accuracy = -1.0;
  for (const auto& hyper : grid) {
    LogisticRegression probe;
    probe.fit(fit_x, fit_y, num_classes, hyper);
    double acc = probe.accuracy(val_x, val_y);
    if (acc > result.val_accuracy) {
      result.val_accuracy = acc;
      result.chosen = hyper;
    }
  }
  result.model.fit(train_x, train_y, num_classes, result.chosen);
  result.test_accuracy = result.model.accuracy(test_x, test_y);
  return result;
}

}  // namespace cmdsim
