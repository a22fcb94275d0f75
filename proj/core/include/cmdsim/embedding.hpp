#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmdsim/llm.hpp"

namespace cmdsim {

class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  // Throws InvalidArgument when empty or non-finite.
  explicit EmbeddingVector(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double norm() const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

double dot(std::span<const double> a, std::span<const double> b);

// Unit-length copy. Throws InvalidArgument for the zero vector.
EmbeddingVector normalized(const EmbeddingVector& v);

// dot(u, v) / (|u| |v|), clamped to [-1, 1].
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

enum class BackendKind { remote_api, local_deterministic };

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;

  virtual BackendKind kind() const = 0;
  virtual std::size_t dim() const = 0;
  // Model/version tag used in cache keys.
  virtual std::string identity() const = 0;

  // Unnormalized vectors, one per text.
  std::vector<std::vector<double>> embed_raw(std::span<const std::string> texts);
  std::size_t calls() const noexcept { return calls_.load(); }

 protected:
  virtual std::vector<std::vector<double>> do_embed(std::span<const std::string> texts) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

// Signed feature hashing of character n-grams over the canonical text.
EmbeddingVector local_deterministic_embed(std::string_view text, std::size_t dim = 256, std::size_t ngram = 3);

class LocalDeterministicBackend : public EmbeddingBackend {
 public:
  explicit LocalDeterministicBackend(std::size_t dim = 256, std::size_t ngram = 3);

  BackendKind kind() const override { return BackendKind::local_deterministic; }
  std::size_t dim() const override { return dim_; }
  std::string identity() const override;

 protected:
  std::vector<std::vector<double>> do_embed(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
  std::size_t ngram_;
};

// Embeddings endpoint: POST {"input": [texts], "model": id} -> {"data": [{"embedding": [...]}]}
class RemoteEmbeddingBackend : public EmbeddingBackend {
 public:
  RemoteEmbeddingBackend(ProviderSpec spec, std::size_t dim, std::size_t batch_size = 64);

  BackendKind kind() const override { return BackendKind::remote_api; }
  std::size_t dim() const override { return dim_; }
  std::string identity() const override { return "remote:" + spec_.name + ":" + spec_.model_id; }

 protected:
  std::vector<std::vector<double>> do_embed(std::span<const std::string> texts) override;

 private:
  ProviderSpec spec_;
  std::size_t dim_;
  std::size_t batch_size_;
};

// Append-only JSON Lines store of {identity, text, vector}, keyed by the exact
// raw text. Without a path it is memory-only.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::filesystem::path path);

  std::optional<EmbeddingVector> lookup(const std::string& identity, const std::string& text) const;
  void store(const std::string& identity, const std::string& text, const EmbeddingVector& v);
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> path_;
  std::map<std::pair<std::string, std::string>, EmbeddingVector> entries_;
  std::ofstream out_;
  mutable std::mutex mutex_;
};

// One unit-normalized vector per text, order preserved; misses go to the
// backend in a single call and are written through the cache.
std::vector<EmbeddingVector> embed_batch(EmbeddingBackend& backend, std::span<const std::string> texts,
                                         EmbeddingCache* cache = nullptr);

// Text -> unit vector mapping used by evaluation (backend, optionally
// followed by a trained adapter).
using Encoder = std::function<std::vector<EmbeddingVector>(std::span<const std::string>)>;

Encoder make_encoder(EmbeddingBackend& backend, EmbeddingCache* cache = nullptr);

}  // namespace cmdsim
