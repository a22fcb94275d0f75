#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace cmdsim {

enum class Source { initial_seed, llm_synthesized, pair_generated, real_world };

std::string_view to_string(Source source);
// Throws InvalidArgument on an unknown name.
Source source_from_string(std::string_view name);

struct CommandLine {
  std::string text;
  Source source = Source::real_world;
  std::optional<std::string> provenance;

  friend bool operator==(const CommandLine&, const CommandLine&) = default;
};

struct CommandLinePair {
  CommandLine anchor;
  CommandLine positive;
  std::int64_t pair_id = 0;
};

// Minimum length in characters for an accepted command line.
inline constexpr std::size_t kMinCommandLength = 2;

// Number of Unicode code points in UTF-8 text. Invalid sequences count one per byte.
std::size_t char_length(std::string_view text);

std::string_view trim(std::string_view text);

// Non-empty after trimming and at least kMinCommandLength characters long.
bool is_valid_command(std::string_view text);

// Lowercase, whitespace runs collapsed to a single space, ends trimmed.
std::string canonical_dedup_key(std::string_view text);
inline std::string canonical_dedup_key(const CommandLine& cmd) { return canonical_dedup_key(cmd.text); }

// Extracts every line that starts with "<CMD>", in order. Leading whitespace
// before the marker is tolerated; empty extractions are dropped.
std::vector<CommandLine> parse_llm_response(std::string_view response,
                                            Source source = Source::llm_synthesized);

// Whitespace split, then each of / \ : ; , " ' | = ( ) < > becomes its own
// token. Tokens are case-folded.
std::vector<std::string> tokenize(std::string_view text);
inline std::vector<std::string> tokenize(const CommandLine& cmd) { return tokenize(cmd.text); }

bool is_split_punctuation(char c);

// Builds a pair after checking anchor and positive differ by canonical key.
CommandLinePair make_pair(CommandLine anchor, CommandLine positive, std::int64_t pair_id);

struct DatasetStats {
  std::size_t num_pairs = 0;
  std::size_t num_unique = 0;
  std::size_t max_len = 0;
  std::size_t min_len = 0;
  double avg_len = 0.0;
  double std_len = 0.0;  // population standard deviation
};

// Unique command lines are counted by canonical key over both pair members;
// among duplicates the lexicographically smallest raw text supplies the
// length, so input order never matters. Throws on empty input.
DatasetStats dataset_stats(std::span<const CommandLinePair> pairs);

// Growing duplicate-free set of command lines. Entries are never removed.
class SeedPool {
 public:
  SeedPool() = default;

  // Adds cmd when it is valid and its canonical key is new.
  bool try_add(CommandLine cmd);
  bool contains(std::string_view text) const;

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<CommandLine>& entries() const noexcept { return entries_; }
  const CommandLine& operator[](std::size_t i) const { return entries_[i]; }

 private:
  std::vector<CommandLine> entries_;
  std::unordered_set<std::string> keys_;
};

}  // namespace cmdsim
