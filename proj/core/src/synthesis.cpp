#include "cmdsim/synthesis.hpp"

#include <fstream>
#include <future>

#include <nlohmann/json.hpp>

#include "cmdsim/io.hpp"
#include "parallel.hpp"

namespace cmdsim {
namespace {

using nlohmann::json;

struct Checkpoint {
  std::filesystem::path dir;

  std::filesystem::path pool_file() const { return dir / "pool.jsonl"; }
  std::filesystem::path synthesized_file() const { return dir / "synthesized.jsonl"; }
  std::filesystem::path state_file() const { return dir / "state.json"; }

  bool exists() const { return std::filesystem::exists(state_file()); }

  void save(const SeedPool& pool, const std::vector<CommandLine>& synthesized, const Rng& rng,
            std::size_t steps) const {
    std::filesystem::create_directories(dir);
    io::write_commands(pool_file(), pool.entries());
    io::write_commands(synthesized_file(), synthesized);
    json state = {{"rng", serialize_rng(rng)}, {"steps", steps}, {"synthesized", synthesized.size()}};
    io::write_file(state_file(), state.dump(2) + "\n");
  }

  void load(SeedPool& pool, std::vector<CommandLine>& synthesized, Rng& rng, std::size_t& steps) const {
    auto state = json::parse(io::read_file(state_file()));
    rng = deserialize_rng(state.at("rng").get<std::string>());
    steps = state.at("steps").get<std::size_t>();
    for (auto& c : io::read_commands(pool_file())) pool.try_add(std::move(c));
    synthesized = io::read_commands(synthesized_file(), Source::llm_synthesized);
    if (synthesized.size() != state.at("synthesized").get<std::size_t>()) {
      throw IntegrityError("checkpoint in " + dir.string() + " is inconsistent");
    }
  }
};

struct PreparedStep {
  std::string prompt;
  ChatClient* client = nullptr;
};

PreparedStep prepare_step(ClientPool& clients, const SeedPool& seeds, const SynthesisConfig& cfg, Rng& rng) {
  if (seeds.size() < cfg.seeds_per_prompt) {
    throw InvalidArgument("seed pool holds " + std::to_string(seeds.size()) + " entries; need at least " +
                          std::to_string(cfg.seeds_per_prompt));
  }
  auto picks = sample_without_replacement(rng, seeds.size(), cfg.seeds_per_prompt);
  std::vector<CommandLine> chosen;
  chosen.reserve(picks.size());
  for (auto i : picks) chosen.push_back(seeds[i]);
  PreparedStep step;
  step.prompt = build_synthesis_prompt(chosen);
  step.client = &clients.pick(rng);
  return step;
}

StepResult finish_step(const PreparedStep& step, SeedPool& seeds, std::string response, bool failed,
                       std::string error, std::size_t cap) {
  StepResult result;
  result.provider = step.client->spec().name;
  result.failed = failed;
  result.error = std::move(error);
  if (failed) return result;
  for (auto& cmd : parse_llm_response(response, Source::llm_synthesized)) {
    if (result.accepted.size() >= cap) break;
    cmd.provenance = result.provider;
    if (seeds.try_add(cmd)) result.accepted.push_back(std::move(cmd));
  }
  return result;
}

}  // namespace

void SynthesisConfig::validate() const {
  if (seeds_per_prompt != kSeedsPerPrompt) throw InvalidArgument("seeds_per_prompt must be 12");
  if (requested_per_call != kRequestedPerCall) throw InvalidArgument("requested_per_call must be 4");
  if (max_consecutive_failures == 0) throw InvalidArgument("max_consecutive_failures must be positive");
  if (in_flight == 0) throw InvalidArgument("in_flight must be positive");
  if (checkpoint_every == 0) throw InvalidArgument("checkpoint_every must be positive");
}

StepResult synthesize_step(ClientPool& clients, SeedPool& seeds, const SynthesisConfig& cfg, Rng& rng) {
  auto step = prepare_step(clients, seeds, cfg, rng);
  try {
    auto response = step.client->complete(step.prompt);
    return finish_step(step, seeds, std::move(response), false, {}, cfg.requested_per_call);
  } catch (const TransportError& e) {
    return finish_step(step, seeds, {}, true, e.what(), 0);
  } catch (const ProviderError& e) {
    return finish_step(step, seeds, {}, true, e.what(), 0);
  }
}

std::vector<CommandLine> run_synthesis(ClientPool& clients, std::span<const CommandLine> initial_seeds,
                                       const SynthesisConfig& cfg) {
  cfg.validate();
  if (cfg.target_count == 0) return {};

  SeedPool seeds;
  std::vector<CommandLine> synthesized;
  Rng rng(cfg.rng_seed);
  std::size_t steps = 0;

  std::optional<Checkpoint> checkpoint;
  if (cfg.checkpoint_dir) checkpoint = Checkpoint{*cfg.checkpoint_dir};
  if (checkpoint && checkpoint->exists()) {
    checkpoint->load(seeds, synthesized, rng, steps);
  } else {
    for (const auto& c : initial_seeds) {
      CommandLine seed = c;
      seed.source = Source::initial_seed;
      seeds.try_add(std::move(seed));
    }
  }
  if (seeds.size() < cfg.seeds_per_prompt) {
    throw InvalidArgument("need at least 12 distinct valid initial seeds, got " + std::to_string(seeds.size()));
  }

  std::size_t failures = 0;
  std::size_t last_flush = synthesized.size();
  std::string last_error;
  while (synthesized.size() < cfg.target_count) {
    // Prompts are prepared sequentially from the current pool; provider calls
    // of one round run concurrently; acceptance is applied in launch order.
    std::vector<PreparedStep> round;
    for (std::size_t i = 0; i < cfg.in_flight; ++i) round.push_back(prepare_step(clients, seeds, cfg, rng));

    std::vector<std::future<std::string>> calls;
    for (auto& step : round) {
      calls.push_back(std::async(cfg.in_flight == 1 ? std::launch::deferred : std::launch::async,
                                 [&step] { return step.client->complete(step.prompt); }));
    }
    for (std::size_t i = 0; i < round.size(); ++i) {
      StepResult result;
      try {
        result = finish_step(round[i], seeds, calls[i].get(), false, {}, cfg.requested_per_call);
      } catch (const TransportError& e) {
        result = finish_step(round[i], seeds, {}, true, e.what(), 0);
      } catch (const ProviderError& e) {
        result = finish_step(round[i], seeds, {}, true, e.what(), 0);
      }
      ++steps;
      if (result.accepted.empty()) {
        ++failures;
        if (result.failed) last_error = result.error;
      } else {
        failures = 0;
      }
      for (auto& c : result.accepted) synthesized.push_back(std::move(c));
    }

    if (checkpoint && synthesized.size() - last_flush >= cfg.checkpoint_every) {
      checkpoint->save(seeds, synthesized, rng, steps);
      last_flush = synthesized.size();
    }
    if (failures >= cfg.max_consecutive_failures && synthesized.size() < cfg.target_count) {
      if (checkpoint) checkpoint->save(seeds, synthesized, rng, steps);
      throw SynthesisAborted("synthesis aborted after " + std::to_string(failures) +
                                 " consecutive unproductive steps" +
                                 (last_error.empty() ? std::string() : " (last error: " + last_error + ")"),
                             synthesized);
    }
  }
  if (checkpoint) checkpoint->save(seeds, synthesized, rng, steps);
  synthesized.resize(cfg.target_count);
  return synthesized;
}

PairResult generate_pairs(std::span<const CommandLine> cmds, ChatClient& client, std::size_t jobs) {
  struct Outcome {
    std::optional<CommandLinePair> pair;
    std::string reason;
  };
  auto outcomes = detail::parallel_map(cmds.size(), jobs, [&](std::size_t i) -> Outcome {
    const auto& anchor = cmds[i];
    std::string response;
    try {
      response = client.complete(build_pair_prompt(anchor));
    } catch (const Error& e) {
      return {std::nullopt, e.what()};
    }
    auto candidates = parse_llm_response(response, Source::pair_generated);
    if (candidates.empty()) return {std::nullopt, "no <CMD> line in response"};
    auto& positive = candidates.front();
    positive.provenance = client.spec().name;
    if (!is_valid_command(positive.text)) return {std::nullopt, "positive too short"};
    if (canonical_dedup_key(positive) == canonical_dedup_key(anchor)) {
      return {std::nullopt, "positive identical to anchor"};
    }
    return {CommandLinePair{anchor, std::move(positive), static_cast<std::int64_t>(i)}, {}};
  });

  PairResult result;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].pair) result.pairs.push_back(std::move(*outcomes[i].pair));
    else result.rejects.push_back({i, cmds[i].text, std::move(outcomes[i].reason)});
  }
  return result;
}

ExplanationResult generate_explanations(std::span<const CommandLine> cmds, ChatClient& client, std::size_t jobs) {
  struct Outcome {
    std::optional<std::string> text;
    std::string reason;
  };
  auto outcomes = detail::parallel_map(cmds.size(), jobs, [&](std::size_t i) -> Outcome {
    try {
      auto response = client.complete(build_explanation_prompt(cmds[i]));
      auto text = trim(response);
      if (text.empty()) return {std::nullopt, "empty explanation"};
      return {std::string(text), {}};
    } catch (const Error& e) {
      return {std::nullopt, e.what()};
    }
  });

  ExplanationResult result;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].text) result.explanations.push_back({cmds[i], std::move(*outcomes[i].text)});
    else result.rejects.push_back({i, cmds[i].text, std::move(outcomes[i].reason)});
  }
  return result;
}

}  // namespace cmdsim
