#include "cmdsim/command.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "cmdsim/error.hpp"

namespace cmdsim {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

constexpr std::string_view kMarker = "<CMD>";

}  // namespace

std::string_view to_string(Source source) {
  switch (source) {
    case Source::initial_seed: return "initial_seed";
    case Source::llm_synthesized: return "llm_synthesized";
    case Source::pair_generated: return "pair_generated";
    case Source::real_world: return "real_world";
  }
  return "real_world";
}

Source source_from_string(std::string_view name) {
  if (name == "initial_seed") return Source::initial_seed;
  if (name == "llm_synthesized") return Source::llm_synthesized;
  if (name == "pair_generated") return Source::pair_generated;
  if (name == "real_world") return Source::real_world;
  throw InvalidArgument("unknown command source '" + std::string(name) + "'");
}

std::size_t char_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string_view trim(std::string_view text) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  return text.substr(b, e - b);
}

bool is_valid_command(std::string_view text) {
  auto t = trim(text);
  return !t.empty() && char_length(t) >= kMinCommandLength;
}

std::string canonical_dedup_key(std::string_view text) {
  std::string key;
  key.reserve(text.size());
  bool pending_space = false;
  for (char c : trim(text)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) {
      key.push_back(' ');
      pending_space = false;
    }
    key.push_back(ascii_lower(c));
  }
  return key;
}

std::vector<CommandLine> parse_llm_response(std::string_view response, Source source) {
  std::vector<CommandLine> out;
  std::size_t pos = 0;
  while (pos <= response.size()) {
    std::size_t eol = response.find('\n', pos);
    if (eol == std::string_view::npos) eol = response.size();
    std::string_view line = response.substr(pos, eol - pos);
    std::string_view lead = line;
    while (!lead.empty() && is_space(lead.front())) lead.remove_prefix(1);
    if (lead.starts_with(kMarker)) {
      auto content = trim(lead.substr(kMarker.size()));
      if (!content.empty()) out.push_back(CommandLine{std::string(content), source, std::nullopt});
    }
    pos = eol + 1;
  }
  return out;
}

bool is_split_punctuation(char c) {
  switch (c) {
    case '/': case '\\': case ':': case ';': case ',': case '"': case '\'':
    case '|': case '=': case '(': case ')': case '<': case '>':
      return true;
    default:
      return false;
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_split_punctuation(c)) {
      flush();
      tokens.emplace_back(1, c);
    } else {
      current.push_back(ascii_lower(c));
    }
  }
  flush();
  return tokens;
}

CommandLinePair make_pair(CommandLine anchor, CommandLine positive, std::int64_t pair_id) {
  if (canonical_dedup_key(anchor) == canonical_dedup_key(positive)) {
    throw InvalidArgument("pair members are identical: '" + anchor.text + "'");
  }
  return CommandLinePair{std::move(anchor), std::move(positive), pair_id};
}

DatasetStats dataset_stats(std::span<const CommandLinePair> pairs) {
  if (pairs.empty()) throw InvalidArgument("empty dataset");

  // One representative per canonical key: the lexicographically smallest raw
  // text, so the result does not depend on input order.
  std::unordered_map<std::string, std::string_view> unique;
  auto visit = [&](const CommandLine& c) {
    auto [it, inserted] = unique.try_emplace(canonical_dedup_key(c), c.text);
    if (!inserted && std::string_view(c.text) < it->second) it->second = c.text;
  };
  for (const auto& p : pairs) {
    visit(p.anchor);
    visit(p.positive);
  }
  std::vector<std::size_t> lengths;
  lengths.reserve(unique.size());
  for (const auto& [key, text] : unique) lengths.push_back(char_length(text));
  std::sort(lengths.begin(), lengths.end());

  DatasetStats s;
  s.num_pairs = pairs.size();
  s.num_unique = lengths.size();
  s.min_len = lengths.front();
  s.max_len = lengths.back();
  double total = 0.0;
  for (auto n : lengths) total += static_cast<double>(n);
  s.avg_len = total / static_cast<double>(lengths.size());
  double sq = 0.0;
  for (auto n : lengths) {
    double d = static_cast<double>(n) - s.avg_len;
    sq += d * d;
  }
  s.std_len = std::sqrt(sq / static_cast<double>(lengths.size()));
  return s;
}

bool SeedPool::try_add(CommandLine cmd) {
  if (!is_valid_command(cmd.text)) return false;
  auto key = canonical_dedup_key(cmd);
  if (!keys_.insert(std::move(key)).second) return false;
  entries_.push_back(std::move(cmd));
  return true;
}

bool SeedPool::contains(std::string_view text) const {
  return keys_.contains(canonical_dedup_key(text));
}

}  // namespace cmdsim
