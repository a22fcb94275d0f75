#include "cmdsim/rng.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "cmdsim/error.hpp"

namespace cmdsim {

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw InvalidArgument("uniform_index: empty range");
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % range);
}

double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k) {
  if (k > n) throw InvalidArgument("cannot sample " + std::to_string(k) + " of " + std::to_string(n));
  std::vector<std::size_t> out;
  out.reserve(k);
  std::unordered_set<std::size_t> seen;
  for (std::size_t j = n - k; j < n; ++j) {
    std::size_t t = uniform_index(rng, j + 1);
    if (seen.contains(t)) t = j;
    seen.insert(t);
    out.push_back(t);
  }
  return out;
}

std::string serialize_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng deserialize_rng(const std::string& state) {
  Rng rng;
  std::istringstream is(state);
  is >> rng;
  if (!is) throw IntegrityError("corrupt rng state");
  return rng;
}

}  // namespace cmdsim
