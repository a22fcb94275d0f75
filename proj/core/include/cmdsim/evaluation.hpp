#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cmdsim/command.hpp"
#include "cmdsim/embedding.hpp"
#include "cmdsim/io.hpp"
#include "cmdsim/rng.hpp"

namespace cmdsim {

// ---------------------------------------------------------------------------
// Similar-command retrieval

struct RetrievalCase {
  CommandLine query;
  CommandLine positive;
  std::vector<CommandLine> negatives;
};

// 1 + number of negatives scoring >= the positive. Ties rank the positive
// below every equal-scored negative.
std::size_t rank_of_positive(double positive_score, std::span<const double> negative_scores);

// Ranks by cosine similarity to the query under `encoder`.
std::size_t rank_of_positive(const RetrievalCase& c, const Encoder& encoder);

// Mean of 1/rank for ranks <= k, scaled to [0, 100]. Throws on empty input.
double mrr_at_k(std::span<const std::size_t> ranks, std::size_t k);
// Percentage of ranks <= k.
double top_at_k(std::span<const std::size_t> ranks, std::size_t k);

// Builds cases from a testset file whose negative ids index `corpus`.
std::vector<RetrievalCase> make_retrieval_cases(std::span<const io::TestsetRecord> records,
                                                std::span<const std::string> corpus);

struct RetrievalReport {
  std::vector<std::size_t> ranks;
  std::map<std::size_t, double> mrr;
  std::map<std::size_t, double> top;
};

// Embeds every distinct text once, then ranks each case.
RetrievalReport evaluate_retrieval(std::span<const RetrievalCase> cases, const Encoder& encoder,
                                   std::span<const std::size_t> ks);

// ---------------------------------------------------------------------------
// Gene-pool malicious command detection

struct Technique {
  std::string id;
  std::vector<CommandLine> commands;  // corpus order
};

struct TechniqueCorpus {
  std::vector<Technique> techniques;

  // Groups records by technique id in order of first appearance. Duplicate
  // commands within a technique (by canonical key) are dropped.
  static TechniqueCorpus from_records(std::span<const io::TechniqueRecord> records);
};

inline constexpr std::size_t kMinTechniqueSize = 9;

// Indices refer to GenePools::all.
struct GenePoolSplit {
  std::string technique_id;
  std::vector<std::size_t> members;     // L_i
  std::vector<std::size_t> pool;        // P_i: first ceil(r/100 * M_i) members
  std::vector<std::size_t> queries;     // O_i: remaining members
  std::vector<std::size_t> candidates;  // C_i = A \ P_i
  std::vector<std::size_t> negatives;   // G_i = A \ L_i
};

struct GenePools {
  std::vector<CommandLine> all;  // A, deduplicated by canonical key, corpus order
  std::vector<GenePoolSplit> splits;
  int sample_rate = 0;
};

// Pool size for a technique of m commands at sample rate r percent.
std::size_t gene_pool_size(std::size_t m, int r);

// Techniques with fewer than 9 commands contribute to A but get no split.
// Throws when r is outside (0, 100).
GenePools build_gene_pools(const TechniqueCorpus& corpus, int r);

// max over the pool of cosine similarity. Throws on an empty pool.
double malicious_score(const EmbeddingVector& cmd, std::span<const EmbeddingVector> pool);

// Mann-Whitney AUC, ties counted one half. Throws when either side is empty.
double auc_mann_whitney(std::span<const double> positives, std::span<const double> negatives);

enum class AucMode { concatenated, averaged };

struct TechniqueScores {
  std::string technique_id;
  std::vector<double> positive_scores;  // O_i
  std::vector<double> negative_scores;  // G_i
};

std::vector<TechniqueScores> score_gene_pools(const GenePools& pools, std::span<const EmbeddingVector> embeddings);

// Concatenated mode pools every (score, label) into one AUC; averaged mode
// takes the mean of per-technique AUCs.
double aggregate_auc(std::span<const TechniqueScores> scores, AucMode mode);

double detection_auc(const TechniqueCorpus& corpus, int r, const Encoder& encoder, AucMode mode);

// ---------------------------------------------------------------------------
// Command classification

const std::vector<std::string>& classification_commands();

struct ClassificationRecord {
  std::size_t label = 0;
  std::string text;
};

struct ClassificationDataset {
  std::vector<ClassificationRecord> train;
  std::vector<ClassificationRecord> test;
};

struct ClassificationConfig {
  std::size_t per_class = 7000;       // half train, half test
  std::size_t arguments = 7;
  std::size_t min_arg_len = 1;
  std::size_t max_arg_len = 20;
  double decoy_probability = 0.5;     // per argument slot
};

// "<command> '<argument value>'" lines, balanced per class and split.
ClassificationDataset synth_classification_dataset(Rng& rng, const ClassificationConfig& cfg = {});

struct LogRegHyper {
  double l2 = 0.0;
  double learning_rate = 0.5;
  std::size_t iterations = 200;
};

std::vector<LogRegHyper> default_logreg_grid();

// Multinomial logistic regression, full-batch gradient descent with an L2
// penalty on the weights (not the bias).
class LogisticRegression {
 public:
  LogisticRegression() = default;

  void fit(std::span<const std::vector<double>> x, std::span<const std::size_t> y, std::size_t num_classes,
           const LogRegHyper& hyper);
  std::size_t predict(std::span<const double> x) const;
  double accuracy(std::span<const std::vector<double>> x, std::span<const std::size_t> y) const;

  std::size_t num_classes() const noexcept { return classes_; }
  std::size_t dim() const noexcept { return dim_; }
  // classes x (dim + 1) row-major, bias last.
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  std::size_t classes_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> weights_;
};

struct LogRegResult {
  LogisticRegression model;
  LogRegHyper chosen;
  double val_accuracy = 0.0;   // percent
  double test_accuracy = 0.0;  // percent
};

// Picks the grid point with the best accuracy on a random 20% of the
// training set (ties to the earliest), refits on the full training set and
// reports test accuracy. Throws when the training labels hold one class.
LogRegResult train_logreg(std::span<const std::vector<double>> train_x, std::span<const std::size_t> train_y,
                          std::span<const std::vector<double>> test_x, std::span<const std::size_t> test_y,
                          std::span<const LogRegHyper> grid, Rng& rng);

}  // namespace cmdsim
