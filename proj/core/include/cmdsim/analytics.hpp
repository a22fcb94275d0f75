#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmdsim/command.hpp"

namespace cmdsim {

enum class RougeVariant { f1, precision, recall };

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

// ROUGE-L from the LCS length L: P = L/|b|, R = L/|a|. Zero when either side
// is empty or L = 0.
double rouge_l(std::span<const std::string> a, std::span<const std::string> b,
               RougeVariant variant = RougeVariant::f1);

struct OverlapHistogram {
  std::vector<double> bin_edges;  // bins + 1 edges over [0, 1]
  std::vector<std::size_t> counts;
  std::size_t n = 0;

  // Equal-width bins; 1.0 falls into the last bin.
  static OverlapHistogram build(std::span<const double> values, std::size_t bins = 20);
  // bin_start,bin_end,count
  std::string to_csv() const;
};

struct MaxOverlap {
  std::vector<double> per_command;
  OverlapHistogram histogram;
};

// Highest ROUGE-L of each generated command against any seed. Throws on empty seeds.
MaxOverlap max_overlap_vs_seeds(std::span<const CommandLine> generated, std::span<const CommandLine> seeds,
                                RougeVariant variant = RougeVariant::f1, std::size_t jobs = 1);

OverlapHistogram pair_overlap_distribution(std::span<const CommandLinePair> pairs,
                                           RougeVariant variant = RougeVariant::f1);

struct CoverageReport {
  std::size_t universe_size = 0;
  std::size_t covered = 0;
  double rate = 0.0;  // percent
  std::vector<std::string> uncovered;
};

// Executable name of a command line: the first word or leading quoted span,
// directory stripped, case-folded, ".exe" suffix removed.
std::string executable_name(std::string_view text);

// Command groups keyed by shared executable ("reg add" and "reg copy" are one group).
struct CommandUniverse {
  std::vector<std::string> groups;

  static CommandUniverse from_commands(std::span<const std::string> commands);
  static CommandUniverse load(const std::filesystem::path& path);
};

CoverageReport command_coverage(std::span<const CommandLine> cmds, const CommandUniverse& universe);

// ".ext" occurs case-insensitively and is followed by a non-alphanumeric
// character or the end of the line.
bool mentions_extension(std::string_view text, std::string_view extension);

CoverageReport extension_coverage(std::span<const CommandLine> cmds, std::span<const std::string> extensions);

}  // namespace cmdsim
