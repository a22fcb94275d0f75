#include "cmdsim/analytics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <unordered_set>

#include "cmdsim/error.hpp"
#include "cmdsim/io.hpp"
#include "parallel.hpp"

namespace cmdsim {

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const std::string> a, std::span<const std::string> b, RougeVariant variant) {
  const std::size_t l = lcs_length(a, b);
  if (l == 0) return 0.0;
  const double p = static_cast<double>(l) / static_cast<double>(b.size());
  const double r = static_cast<double>(l) / static_cast<double>(a.size());
  switch (variant) {
    case RougeVariant::precision: return p;
    case RougeVariant::recall: return r;
    case RougeVariant::f1: break;
  }
  return 2.0 * p * r / (p + r);
}

OverlapHistogram OverlapHistogram::build(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw InvalidArgument("histogram needs at least one bin");
  OverlapHistogram h;
  h.counts.assign(bins, 0);
  for (std::size_t i = 0; i <= bins; ++i) h.bin_edges.push_back(static_cast<double>(i) / static_cast<double>(bins));
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("overlap values must lie in [0, 1]");
    auto bin = static_cast<std::size_t>(v * static_cast<double>(bins));
    h.counts[std::min(bin, bins - 1)] += 1;
  }
  h.n = values.size();
  return h;
}

std::string OverlapHistogram::to_csv() const {
  std::string out = "bin_start,bin_end,count\n";
  char buf[96];
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.2f,%.2f,%zu\n", bin_edges[i], bin_edges[i + 1], counts[i]);
    out += buf;
  }
  return out;
}

MaxOverlap max_overlap_vs_seeds(std::span<const CommandLine> generated, std::span<const CommandLine> seeds,
                                RougeVariant variant, std::size_t jobs) {
  if (seeds.empty()) throw InvalidArgument("no seed commands to compare against");
  std::vector<std::vector<std::string>> seed_tokens;
  seed_tokens.reserve(seeds.size());
  for (const auto& s : seeds) seed_tokens.push_back(tokenize(s.text));

  MaxOverlap out;
  out.per_command = detail::parallel_map(generated.size(), jobs, [&](std::size_t i) {
    auto tokens = tokenize(generated[i].text);
    double best = 0.0;
    for (const auto& st : seed_tokens) {
      best = std::max(best, rouge_l(tokens, st, variant));
      if (best >= 1.0) break;
    }
    return best;
  });
  out.histogram = OverlapHistogram::build(out.per_command);
  return out;
}

OverlapHistogram pair_overlap_distribution(std::span<const CommandLinePair> pairs, RougeVariant variant) {
  std::vector<double> values;
  values.reserve(pairs.size());
  for (const auto& p : pairs) values.push_back(rouge_l(tokenize(p.anchor.text), tokenize(p.positive.text), variant));
  return OverlapHistogram::build(values);
}

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool ends_with_exe(const std::string& s) { return s.size() > 4 && s.compare(s.size() - 4, 4, ".exe") == 0; }

CoverageReport finish_report(const std::vector<std::string>& universe, const std::vector<char>& hit) {
  CoverageReport r;
  r.universe_size = universe.size();
  for (std::size_t i = 0; i < universe.size(); ++i) {
    if (hit[i]) {
      ++r.covered;
    } else {
      r.uncovered.push_back(universe[i]);
    }
  }
  if (r.universe_size == 0) throw InvalidArgument("empty coverage universe");
  r.rate = 100.0 * static_cast<double>(r.covered) / static_cast<double>(r.universe_size);
  return r;
}

}  // namespace

std::string executable_name(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  std::string_view word;
  if (i < text.size() && (text[i] == '"' || text[i] == '\'')) {
    const char quote = text[i++];
    auto close = text.find(quote, i);
    word = text.substr(i, close == std::string_view::npos ? std::string_view::npos : close - i);
  } else {
    std::size_t end = i;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
    word = text.substr(i, end - i);
  }
  if (auto slash = word.find_last_of("\\/"); slash != std::string_view::npos) word.remove_prefix(slash + 1);
  std::string name = ascii_lower(trim(word));
  if (ends_with_exe(name)) name.resize(name.size() - 4);
  return name;
}

CommandUniverse CommandUniverse::from_commands(std::span<const std::string> commands) {
  CommandUniverse u;
  std::unordered_set<std::string> seen;
  for (const auto& c : commands) {
    auto name = executable_name(c);
    if (name.empty()) continue;
    if (seen.insert(name).second) u.groups.push_back(std::move(name));
  }
  return u;
}

CommandUniverse CommandUniverse::load(const std::filesystem::path& path) {
  auto lines = io::read_lines(path);
  return from_commands(lines);
}

CoverageReport command_coverage(std::span<const CommandLine> cmds, const CommandUniverse& universe) {
  std::unordered_set<std::string> present;
  for (const auto& c : cmds) present.insert(executable_name(c.text));
  std::vector<char> hit(universe.groups.size(), 0);
  for (std::size_t i = 0; i < universe.groups.size(); ++i) hit[i] = present.count(universe.groups[i]) ? 1 : 0;
  return finish_report(universe.groups, hit);
}

bool mentions_extension(std::string_view text, std::string_view extension) {
  std::string ext = ascii_lower(extension);
  if (!ext.empty() && ext.front() != '.') ext.insert(ext.begin(), '.');
  if (ext.size() < 2) return false;
  const std::string hay = ascii_lower(text);
  for (std::size_t pos = hay.find(ext); pos != std::string::npos; pos = hay.find(ext, pos + 1)) {
    const std::size_t after = pos + ext.size();
    if (after == hay.size() || !std::isalnum(static_cast<unsigned char>(hay[after]))) return true;
  }
  return false;
}

CoverageReport extension_coverage(std::span<const CommandLine> cmds, std::span<const std::string> extensions) {
  std::vector<std::string> universe;
  std::set<std::string> seen;
  for (const auto& e : extensions) {
    if (seen.insert(ascii_lower(e)).second) universe.push_back(e);
  }
  std::vector<char> hit(universe.size(), 0);
  for (std::size_t i = 0; i < universe.size(); ++i) {
    for (const auto& c : cmds) {
      if (mentions_extension(c.text, universe[i])) {
        hit[i] = 1;
        break;
      }
    }
  }
  return finish_report(universe, hit);
}

}  // namespace cmdsim
