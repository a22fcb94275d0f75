#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cmdsim {

using Rng = std::mt19937_64;

// Uniform integer in [0, n). Rejection sampling keeps the result identical
// across standard libraries, unlike std::uniform_int_distribution.
std::size_t uniform_index(Rng& rng, std::size_t n);

// Uniform real in [0, 1) built from the top 53 bits of one draw.
double uniform_unit(Rng& rng);

// k distinct indices from [0, n) via Floyd's algorithm, in selection order.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k);

// In-place Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& state);

}  // namespace cmdsim
