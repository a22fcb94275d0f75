#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cmdsim/command.hpp"
#include "cmdsim/embedding.hpp"

namespace cmdsim {

struct TrainConfig {
  std::size_t batch_pairs = 64;
  double learning_rate = 2e-5;
  std::size_t epochs = 2;
  double temperature = 0.05;
  std::size_t val_pairs = 1000;
  std::size_t eval_every_steps = 50;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t rng_seed = 0;
  std::size_t out_dim = 0;  // 0: same as the backend dimension

  void validate() const;
};

// sims[i * k + j] = E(x_i) . E(x_j+)
struct SimilarityMatrix {
  std::size_t k = 0;
  std::vector<double> sims;

  double at(std::size_t i, std::size_t j) const { return sims[i * k + j]; }
  double& at(std::size_t i, std::size_t j) { return sims[i * k + j]; }
};

// Sum over rows of -log softmax(sims[i] / tau)[i], evaluated with a max shift.
double info_nce_loss(const SimilarityMatrix& sims, double temperature);

// y = normalize(W^T x), W stored row-major with shape d_in x d_out.
struct AdapterModel {
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  std::vector<double> weights;
  std::string backend_identity;
  std::size_t step = 0;

  // Square identity, or the leading d_in x d_out block of it when d_out differs.
  static AdapterModel identity(std::size_t d_in, std::size_t d_out = 0, std::string backend_identity = {});

  double w(std::size_t row, std::size_t col) const { return weights[row * d_out + col]; }
  std::vector<double> project(std::span<const double> x) const;  // W^T x, unnormalized
  EmbeddingVector apply(const EmbeddingVector& x) const;

  void validate() const;
  void save(const std::filesystem::path& path) const;
  static AdapterModel load(const std::filesystem::path& path);
};

SimilarityMatrix similarity_matrix(const AdapterModel& adapter, std::span<const std::vector<double>> anchors,
                                   std::span<const std::vector<double>> positives);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // d_in x d_out row-major, matches AdapterModel::weights
};

// Exact gradient of the InfoNCE loss through linear map -> unit normalization
// -> in-batch similarity matrix.
LossAndGradient info_nce_gradients(std::span<const std::vector<double>> anchors,
                                   std::span<const std::vector<double>> positives, const AdapterModel& adapter,
                                   double temperature);

struct HistoryEntry {
  std::size_t step = 0;
  double train_loss = 0.0;  // mean batch loss since the previous evaluation
  double val_mrr3 = 0.0;
};

struct TrainResult {
  AdapterModel best;
  std::size_t best_step = 0;
  std::vector<HistoryEntry> history;
};

// Adam over in-batch InfoNCE. The validation split is drawn first; MRR@3 on it
// (in-split positives as candidates) is measured at step 0, every
// eval_every_steps and after the last step. The best checkpoint wins, ties to
// the earliest step. Incomplete final batches are dropped.
TrainResult train_on_vectors(std::span<const std::vector<double>> anchors, std::span<const std::vector<double>> positives,
                             const TrainConfig& cfg, std::string backend_identity = {});

TrainResult train(std::span<const CommandLinePair> pairs, EmbeddingBackend& backend, const TrainConfig& cfg,
                  EmbeddingCache* cache = nullptr);

// Validation MRR@3 of an adapter: query i against every positive.
double in_split_mrr3(const AdapterModel& adapter, std::span<const std::vector<double>> anchors,
                     std::span<const std::vector<double>> positives);

// Backend followed by the adapter.
Encoder make_adapted_encoder(EmbeddingBackend& backend, const AdapterModel& adapter, EmbeddingCache* cache = nullptr);

}  // namespace cmdsim
