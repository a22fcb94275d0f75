#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmdsim/command.hpp"
#include "cmdsim/error.hpp"
#include "cmdsim/llm.hpp"
#include "cmdsim/rng.hpp"

namespace cmdsim {

struct SynthesisConfig {
  std::size_t target_count = 28520;
  std::size_t seeds_per_prompt = kSeedsPerPrompt;
  std::size_t requested_per_call = kRequestedPerCall;
  std::uint64_t rng_seed = 0;
  // Consecutive steps that fail or accept nothing before the run aborts.
  std::size_t max_consecutive_failures = 50;
  // Concurrent provider calls per round. Output is reproducible only at 1.
  std::size_t in_flight = 1;
  std::optional<std::filesystem::path> checkpoint_dir;
  std::size_t checkpoint_every = 100;

  void validate() const;
};

struct StepResult {
  std::vector<CommandLine> accepted;
  bool failed = false;
  std::string error;
  std::string provider;
};

// One Self-Instruct iteration: sample 12 distinct seeds, prompt one randomly
// picked provider, and append the valid novel `<CMD>` lines to the pool.
StepResult synthesize_step(ClientPool& clients, SeedPool& seeds, const SynthesisConfig& cfg, Rng& rng);

class SynthesisAborted : public Error {
 public:
  SynthesisAborted(std::string message, std::vector<CommandLine> partial)
      : Error(std::move(message)), partial_(std::move(partial)) {}
  const std::vector<CommandLine>& partial() const noexcept { return partial_; }

 private:
  std::vector<CommandLine> partial_;
};

// Repeats synthesize_step until target_count command lines beyond the
// initial seeds are accepted; returns exactly target_count in generation
// order. With a checkpoint directory, state is flushed every
// checkpoint_every accepted lines and an existing checkpoint is resumed.
std::vector<CommandLine> run_synthesis(ClientPool& clients, std::span<const CommandLine> initial_seeds,
                                       const SynthesisConfig& cfg);

struct Reject {
  std::size_t index = 0;
  std::string text;
  std::string reason;
};

struct PairResult {
  std::vector<CommandLinePair> pairs;  // pair_id = input index
  std::vector<Reject> rejects;
};

// Keeps the first extracted command of each response as the positive.
PairResult generate_pairs(std::span<const CommandLine> cmds, ChatClient& client, std::size_t jobs = 1);

struct Explanation {
  CommandLine command;
  std::string text;
};

struct ExplanationResult {
  std::vector<Explanation> explanations;
  std::vector<Reject> rejects;
};

ExplanationResult generate_explanations(std::span<const CommandLine> cmds, ChatClient& client,
                                        std::size_t jobs = 1);

}  // namespace cmdsim
