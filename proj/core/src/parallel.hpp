#pragma once

// Order-preserving parallel map over [0, n). Results land in input order, so
// output is independent of the worker count.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <future>
#include <vector>

namespace cmdsim::detail {

template <typename Fn>
auto parallel_map(std::size_t n, std::size_t jobs, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using Result = decltype(fn(std::size_t{}));
  std::vector<Result> out(n);
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::future<void>> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < n; i += jobs) out[i] = fn(i);
    }));
  }
  for (auto& f : workers) f.get();
  return out;
}

}  // namespace cmdsim::detail
