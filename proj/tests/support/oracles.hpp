#pragma once

// Slow, obviously-correct reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Textbook DBSCAN: index-order outer loop, seed list grown in place,
// neighbourhoods recomputed by brute force each time.
inline std::vector<int> dbscan(const std::vector<Vec>& pts, double eps, std::size_t min_pts) {
  const int kUndefined = -2, kNoise = -1;
  std::vector<int> label(pts.size(), kUndefined);
  auto region = [&](std::size_t p) {
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < pts.size(); ++q) {
      if (1.0 - dot(pts[p], pts[q]) <= eps) out.push_back(q);
    }
    return out;
  };
  int c = 0;
  for (std::size_t p = 0; p < pts.size(); ++p) {
    if (label[p] != kUndefined) continue;
    auto n = region(p);
    if (n.size() < min_pts) {
      label[p] = kNoise;
      continue;
    }
    label[p] = c;
    std::vector<std::size_t> seeds = n;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      std::size_t q = seeds[i];
      if (label[q] == kNoise) label[q] = c;
      if (label[q] != kUndefined) continue;
      label[q] = c;
      auto nq = region(q);
      if (nq.size() >= min_pts) seeds.insert(seeds.end(), nq.begin(), nq.end());
    }
    ++c;
  }
  return label;
}

// Rank of the positive after sorting every candidate by descending score;
// equal scores put negatives first.
inline std::size_t full_sort_rank(double positive, const std::vector<double>& negatives) {
  std::vector<std::pair<double, int>> all;
  all.emplace_back(positive, 1);
  for (double s : negatives) all.emplace_back(s, 0);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].second == 1) return i + 1;
  }
  return 0;
}

inline double mrr(const std::vector<std::size_t>& ranks, std::size_t k) {
  double s = 0.0;
  for (auto r : ranks) s += r <= k ? 1.0 / static_cast<double>(r) : 0.0;
  return 100.0 * s / static_cast<double>(ranks.size());
}

inline double top(const std::vector<std::size_t>& ranks, std::size_t k) {
  std::size_t hits = 0;
  for (auto r : ranks) hits += r <= k ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

// Exhaustive pair counting, ties worth one half.
inline double auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) {
      if (p > n) wins += 1.0;
      else if (p == n) wins += 0.5;
    }
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = a.size(); i-- > 0;) {
    for (std::size_t j = b.size(); j-- > 0;) {
      t[i][j] = a[i] == b[j] ? t[i + 1][j + 1] + 1 : std::max(t[i + 1][j], t[i][j + 1]);
    }
  }
  return t[0][0];
}

inline double rouge_l_f1(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0.0;
  double l = static_cast<double>(lcs(a, b));
  if (l == 0.0) return 0.0;
  double p = l / static_cast<double>(b.size()), r = l / static_cast<double>(a.size());
  return 2.0 * p * r / (p + r);
}

inline std::vector<std::size_t> least_similar(std::size_t query, const std::vector<Vec>& embs, std::size_t n,
                                              std::optional<std::size_t> positive) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < embs.size(); ++i) {
    if (i == query || (positive && i == *positive)) continue;
    all.emplace_back(dot(embs[query], embs[i]), i);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(all[i].second);
  return out;
}

// InfoNCE loss of the adapter W (d_in x d_out row-major) evaluated directly
// from the definition, without any shift.
inline double info_nce(const std::vector<Vec>& anchors, const std::vector<Vec>& positives, const Vec& w,
                       std::size_t d_in, std::size_t d_out, double tau) {
  auto project = [&](const Vec& x) {
    Vec y(d_out, 0.0);
    for (std::size_t c = 0; c < d_out; ++c) {
      for (std::size_t r = 0; r < d_in; ++r) y[c] += w[r * d_out + c] * x[r];
    }
    double norm = std::sqrt(dot(y, y));
    for (auto& v : y) v /= norm;
    return y;
  };
  std::vector<Vec> u, v;
  for (const auto& a : anchors) u.push_back(project(a));
  for (const auto& p : positives) v.push_back(project(p));
  double loss = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) denom += std::exp(dot(u[i], v[j]) / tau);
    loss -= std::log(std::exp(dot(u[i], v[i]) / tau) / denom);
  }
  return loss;
}

inline Vec central_difference(const std::vector<Vec>& anchors, const std::vector<Vec>& positives, Vec w,
                              std::size_t d_in, std::size_t d_out, double tau, double h = 1e-5) {
  Vec g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double keep = w[i];
    w[i] = keep + h;
    double up = info_nce(anchors, positives, w, d_in, d_out, tau);
    w[i] = keep - h;
    double down = info_nce(anchors, positives, w, d_in, d_out, tau);
    w[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max_i |b_i|
inline double max_relative_error(const Vec& a, const Vec& b) {
  double scale = 1e-12, err = 0.0;
  for (double x : b) scale = std::max(scale, std::abs(x));
  for (std::size_t i = 0; i < a.size(); ++i) err = std::max(err, std::abs(a[i] - b[i]));
  return err / scale;
}

}  // namespace oracle
