#include "cmdsim/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "cmdsim/command.hpp"
#include "cmdsim/error.hpp"
#include "http.hpp"

namespace cmdsim {
namespace {

using nlohmann::json;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

// splitmix64 finalizer; spreads FNV output before it is reduced mod dim.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<double> hashed_ngrams(std::string_view text, std::size_t dim, std::size_t ngram) {
  std::vector<double> v(dim, 0.0);
  auto canon = canonical_dedup_key(text);
  if (canon.empty()) return v;
  std::string padded = "\x02" + canon + "\x03";
  auto add = [&](std::string_view gram) {
    auto h = mix(fnv1a(gram));
    v[h % dim] += (h >> 63) ? -1.0 : 1.0;
  };
  if (padded.size() <= ngram) {
    add(padded);
  } else {
    for (std::size_t i = 0; i + ngram <= padded.size(); ++i) add(std::string_view(padded).substr(i, ngram));
  }
  return v;
}

}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidArgument("embedding vector must have dimension > 0");
  for (double x : values_) {
    if (!std::isfinite(x)) throw InvalidArgument("embedding vector has a non-finite entry");
  }
}

double EmbeddingVector::norm() const { return std::sqrt(dot(values_, values_)); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

EmbeddingVector normalized(const EmbeddingVector& v) {
  double n = v.norm();
  if (n == 0.0) throw InvalidArgument("cannot normalize the zero vector");
  std::vector<double> out(v.values().begin(), v.values().end());
  for (auto& x : out) x /= n;
  return EmbeddingVector(std::move(out));
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dim() != v.dim()) {
    throw InvalidArgument("dimension mismatch: " + std::to_string(u.dim()) + " vs " + std::to_string(v.dim()));
  }
  double nu = u.norm();
  double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw InvalidArgument("cosine similarity of a zero vector");
  return std::clamp(dot(u.values(), v.values()) / (nu * nv), -1.0, 1.0);
}

std::vector<std::vector<double>> EmbeddingBackend::embed_raw(std::span<const std::string> texts) {
  ++calls_;
  auto out = do_embed(texts);
  if (out.size() != texts.size()) {
    throw IntegrityError("backend " + identity() + " returned " + std::to_string(out.size()) + " vectors for " +
                         std::to_string(texts.size()) + " texts");
  }
  for (const auto& v : out) {
    if (v.size() != dim()) {
      throw IntegrityError("backend " + identity() + " returned dimension " + std::to_string(v.size()) +
                           ", expected " + std::to_string(dim()));
    }
  }
  return out;
}

EmbeddingVector local_deterministic_embed(std::string_view text, std::size_t dim, std::size_t ngram) {
  if (dim == 0 || ngram == 0) throw InvalidArgument("dim and ngram must be positive");
  auto raw = hashed_ngrams(text, dim, ngram);
  double n = std::sqrt(dot(raw, raw));
  if (n == 0.0) throw IntegrityError("text has no features: '" + std::string(text) + "'");
  for (auto& x : raw) x /= n;
  return EmbeddingVector(std::move(raw));
}

LocalDeterministicBackend::LocalDeterministicBackend(std::size_t dim, std::size_t ngram) : dim_(dim), ngram_(ngram) {
  if (dim == 0 || ngram == 0) throw InvalidArgument("dim and ngram must be positive");
}

std::string LocalDeterministicBackend::identity() const {
  return "local-ngram" + std::to_string(ngram_) + "-d" + std::to_string(dim_) + "-v1";
}

std::vector<std::vector<double>> LocalDeterministicBackend::do_embed(std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(hashed_ngrams(t, dim_, ngram_));
  return out;
}

RemoteEmbeddingBackend::RemoteEmbeddingBackend(ProviderSpec spec, std::size_t dim, std::size_t batch_size)
    : spec_(std::move(spec)), dim_(dim), batch_size_(batch_size) {
  spec_.validate();
  if (dim_ == 0 || batch_size_ == 0) throw InvalidArgument("dim and batch size must be positive");
}

std::vector<std::vector<double>> RemoteEmbeddingBackend::do_embed(std::span<const std::string> texts) {
  std::string key;
  if (!spec_.api_key_env.empty()) {
    const char* v = std::getenv(spec_.api_key_env.c_str());
    if (v == nullptr || *v == '\0') throw ConfigError("environment variable " + spec_.api_key_env + " is not set");
    key = v;
  }
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
    auto chunk = texts.subspan(start, std::min(batch_size_, texts.size() - start));
    json body = {{"input", json(std::vector<std::string>(chunk.begin(), chunk.end()))}, {"model", spec_.model_id}};
    auto response = detail::post_json_with_retries(spec_, key, body.dump());
    try {
      auto j = json::parse(response);
      const auto& data = j.at("data");
      if (data.size() != chunk.size()) throw IntegrityError("embedding response has the wrong number of items");
      for (const auto& item : data) out.push_back(item.at("embedding").get<std::vector<double>>());
    } catch (const json::exception& e) {
      throw IntegrityError("embedding provider '" + spec_.name + "' returned an unexpected body: " + e.what());
    }
  }
  return out;
}

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(*path_);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      entries_.insert_or_assign({j.at("identity").get<std::string>(), j.at("text").get<std::string>()},
                                EmbeddingVector(j.at("vector").get<std::vector<double>>()));
    } catch (const json::exception& e) {
      throw IntegrityError(path_->string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::optional<EmbeddingVector> EmbeddingCache::lookup(const std::string& identity, const std::string& text) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find({identity, text});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::store(const std::string& identity, const std::string& text, const EmbeddingVector& v) {
  std::lock_guard lock(mutex_);
  entries_.insert_or_assign({identity, text}, v);
  if (!path_) return;
  if (!out_.is_open()) {
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    out_.open(*path_, std::ios::app | std::ios::binary);
    if (!out_) throw IoError("cannot append to " + path_->string());
  }
  json j = {{"identity", identity}, {"text", text},
            {"vector", std::vector<double>(v.values().begin(), v.values().end())}};
  out_ << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  out_.flush();
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::vector<EmbeddingVector> embed_batch(EmbeddingBackend& backend, std::span<const std::string> texts,
                                         EmbeddingCache* cache) {
  for (const auto& t : texts) {
    if (t.empty()) throw InvalidArgument("cannot embed an empty string");
  }
  const auto identity = backend.identity();
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<std::string> misses;
  std::unordered_map<std::string, std::vector<std::size_t>> slots;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (cache != nullptr) {
      if (auto hit = cache->lookup(identity, texts[i])) {
        out[i] = std::move(*hit);
        continue;
      }
    }
    auto& where = slots[texts[i]];
    if (where.empty()) misses.push_back(texts[i]);
    where.push_back(i);
  }
  if (misses.empty()) return out;

  auto raw = backend.embed_raw(misses);
  for (std::size_t m = 0; m < misses.size(); ++m) {
    auto v = normalized(EmbeddingVector(std::move(raw[m])));
    if (cache != nullptr) cache->store(identity, misses[m], v);
    for (auto i : slots[misses[m]]) out[i] = v;
  }
  return out;
}

Encoder make_encoder(EmbeddingBackend& backend, EmbeddingCache* cache) {
  return [&backend, cache](std::span<const std::string> texts) { return embed_batch(backend, texts, cache); };
}

}  // namespace cmdsim
