#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmdsim/command.hpp"
#include "cmdsim/rng.hpp"

namespace cmdsim {

// Version tag of the prompt templates shipped in core/templates.
std::string_view prompt_template_version();

struct ProviderSpec {
  std::string name;
  std::string endpoint;     // http(s)://host[:port]/path, or mock://<label>
  std::string model_id;
  std::string api_key_env;  // empty: send no Authorization header
  double temperature = 1.0;
  std::size_t max_retries = 3;
  double timeout_seconds = 60.0;
  double backoff_initial_seconds = 0.5;
  // Token bucket; capacity 0 disables rate limiting.
  double rate_capacity = 0.0;
  double rate_refill_per_second = 0.0;

  void validate() const;
  bool is_mock() const { return endpoint.starts_with("mock://"); }
};

struct ProviderPool {
  std::vector<ProviderSpec> providers;
  std::uint64_t rng_seed = 0;

  void validate() const;
  const ProviderSpec& find(std::string_view name) const;
};

// Parses the plain-text provider configuration:
//
//   seed = 7                # optional, top level
//   [provider gpt35]
//   endpoint = https://api.example.com/v1/chat/completions
//   model = gpt-3.5-turbo
//   temperature = 1.0
//   api_key_env = OPENAI_API_KEY
//   max_retries = 3
//   timeout = 60
ProviderPool parse_provider_config(std::string_view text);
ProviderPool load_provider_config(const std::filesystem::path& path);

// Uniform choice from the pool.
const ProviderSpec& pick_provider(const ProviderPool& pool, Rng& rng);

// Self-Instruct synthesis prompt. Requires exactly 12 seeds.
std::string build_synthesis_prompt(std::span<const CommandLine> seeds);
// Similar-command prompt for one query. Throws on an empty query.
std::string build_pair_prompt(const CommandLine& query);
// Purpose/intention explanation prompt. Throws on an empty command.
std::string build_explanation_prompt(const CommandLine& cmd);

inline constexpr std::size_t kSeedsPerPrompt = 12;
inline constexpr std::size_t kRequestedPerCall = 4;

enum class PromptKind { synthesis, pair, explanation, unknown };

struct DecodedPrompt {
  PromptKind kind = PromptKind::unknown;
  std::vector<std::string> slots;  // 12 seeds, or the single query/command
};

// Inverse of the builders, used by the mock provider.
DecodedPrompt decode_prompt(std::string_view prompt);

class TokenBucket {
 public:
  using Clock = std::chrono::steady_clock;

  TokenBucket(double capacity, double refill_per_second);

  // Blocks until one token is available. No-op when capacity is 0.
  void acquire();
  bool try_acquire();

 private:
  void refill_locked(Clock::time_point now);

  double capacity_;
  double refill_per_second_;
  double tokens_;
  Clock::time_point last_;
  std::mutex mutex_;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(std::string_view prompt) = 0;
  virtual const ProviderSpec& spec() const = 0;
};

// Chat-completion over HTTP:
//   POST {"model", "messages": [{"role": "user", "content"}], "temperature"}
//   <- {"choices": [{"message": {"content"}}]}
// Retries transport failures, 429 and 5xx with exponential backoff.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(ProviderSpec spec);

  std::string complete(std::string_view prompt) override;
  const ProviderSpec& spec() const override { return spec_; }

 private:
  ProviderSpec spec_;
  TokenBucket bucket_;
};

// Deterministic offline provider. Responses depend only on the prompt and
// the mock label. Table entries, keyed by the decoded slot (the query or
// command), take precedence over the built-in generators.
class MockChatClient : public ChatClient {
 public:
  explicit MockChatClient(ProviderSpec spec, std::map<std::string, std::string> table = {});

  std::string complete(std::string_view prompt) override;
  const ProviderSpec& spec() const override { return spec_; }
  std::size_t calls() const;

 private:
  ProviderSpec spec_;
  std::map<std::string, std::string> table_;
  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
};

// One request with the retry policy of `spec`; throws ConfigError,
// TransportError or ProviderError.
std::string complete(const ProviderSpec& spec, std::string_view prompt);

std::unique_ptr<ChatClient> make_client(const ProviderSpec& spec);

// Live clients for every provider in a pool.
class ClientPool {
 public:
  using Factory = std::function<std::unique_ptr<ChatClient>(const ProviderSpec&)>;

  explicit ClientPool(ProviderPool pool, Factory factory = make_client);

  ChatClient& pick(Rng& rng);
  ChatClient& get(std::string_view name);
  const ProviderPool& specs() const noexcept { return pool_; }
  std::size_t size() const noexcept { return clients_.size(); }

 private:
  ProviderPool pool_;
  std::vector<std::unique_ptr<ChatClient>> clients_;
};

}  // namespace cmdsim
