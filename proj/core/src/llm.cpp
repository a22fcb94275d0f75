#include "cmdsim/llm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "cmdsim/error.hpp"
#include "cmdsim/io.hpp"
#include "cmdsim/templates_generated.hpp"
#include "http.hpp"

namespace cmdsim {
namespace {

using nlohmann::json;

constexpr std::string_view kSeedsSlot = "{{seeds}}";
constexpr std::string_view kQuerySlot = "{{query}}";
constexpr std::string_view kCommandSlot = "{{command}}";

// Single-pass substitution of the first occurrence of `slot`.
std::string fill_slot(std::string_view tpl, std::string_view slot, std::string_view value) {
  auto pos = tpl.find(slot);
  std::string out;
  out.reserve(tpl.size() + value.size());
  out.append(tpl.substr(0, pos));
  out.append(value);
  out.append(tpl.substr(pos + slot.size()));
  return out;
}

// Splits a template into the text before and after its slot.
std::pair<std::string_view, std::string_view> around(std::string_view tpl, std::string_view slot) {
  auto pos = tpl.find(slot);
  return {tpl.substr(0, pos), tpl.substr(pos + slot.size())};
}

std::optional<std::string> extract_slot(std::string_view prompt, std::string_view tpl, std::string_view slot) {
  auto [head, tail] = around(tpl, slot);
  if (!prompt.starts_with(head) || !prompt.ends_with(tail) || prompt.size() < head.size() + tail.size()) {
    return std::nullopt;
  }
  return std::string(prompt.substr(head.size(), prompt.size() - head.size() - tail.size()));
}

double parse_double(std::string_view key, std::string_view value) {
  try {
    std::size_t used = 0;
    double d = std::stod(std::string(value), &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("provider config: '" + std::string(key) + "' expects a number, got '" + std::string(value) + "'");
  }
}

std::size_t parse_count(std::string_view key, std::string_view value) {
  std::size_t n = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("provider config: '" + std::string(key) + "' expects a count, got '" + std::string(value) + "'");
  }
  return n;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

std::string_view prompt_template_version() { return templates::kVersion; }

void ProviderSpec::validate() const {
  if (name.empty()) throw ConfigError("provider without a name");
  if (endpoint.empty()) throw ConfigError("provider '" + name + "' has no endpoint");
  if (!(temperature >= 0.0)) throw ConfigError("provider '" + name + "': temperature must be >= 0");
  if (!(timeout_seconds > 0.0)) throw ConfigError("provider '" + name + "': timeout must be > 0");
  if (backoff_initial_seconds < 0.0) throw ConfigError("provider '" + name + "': backoff must be >= 0");
  if (rate_capacity < 0.0 || rate_refill_per_second < 0.0) {
    throw ConfigError("provider '" + name + "': rate limits must be >= 0");
  }
}

void ProviderPool::validate() const {
  if (providers.empty()) throw ConfigError("provider pool is empty");
  for (const auto& p : providers) p.validate();
  for (std::size_t i = 0; i < providers.size(); ++i) {
    for (std::size_t j = i + 1; j < providers.size(); ++j) {
      if (providers[i].name == providers[j].name) throw ConfigError("duplicate provider '" + providers[i].name + "'");
    }
  }
}

const ProviderSpec& ProviderPool::find(std::string_view name) const {
  for (const auto& p : providers) {
    if (p.name == name) return p;
  }
  throw ConfigError("no provider named '" + std::string(name) + "'");
}

ProviderPool parse_provider_config(std::string_view text) {
  ProviderPool pool;
  ProviderSpec* current = nullptr;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto hash = raw.find('#');
    std::string_view line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("provider config line " + std::to_string(lineno) + ": unterminated section");
      auto inner = trim(line.substr(1, line.size() - 2));
      if (!inner.starts_with("provider")) {
        throw ConfigError("provider config line " + std::to_string(lineno) + ": unknown section '" + std::string(inner) + "'");
      }
      auto name = trim(inner.substr(8));
      if (name.empty()) throw ConfigError("provider config line " + std::to_string(lineno) + ": provider needs a name");
      pool.providers.push_back(ProviderSpec{});
      current = &pool.providers.back();
      current->name = std::string(name);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("provider config line " + std::to_string(lineno) + ": expected key = value");
    }
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (current == nullptr) {
      if (key == "seed") {
        pool.rng_seed = parse_count(key, value);
        continue;
      }
      throw ConfigError("provider config line " + std::to_string(lineno) + ": '" + std::string(key) + "' outside a [provider] section");
    }
    if (key == "endpoint") current->endpoint = value;
    else if (key == "model") current->model_id = value;
    else if (key == "api_key_env") current->api_key_env = value;
    else if (key == "temperature") current->temperature = parse_double(key, value);
    else if (key == "max_retries") current->max_retries = parse_count(key, value);
    else if (key == "timeout") current->timeout_seconds = parse_double(key, value);
    else if (key == "backoff") current->backoff_initial_seconds = parse_double(key, value);
    else if (key == "rate_capacity") current->rate_capacity = parse_double(key, value);
    else if (key == "rate_refill") current->rate_refill_per_second = parse_double(key, value);
    else throw ConfigError("provider config line " + std::to_string(lineno) + ": unknown key '" + std::string(key) + "'");
  }
  pool.validate();
  return pool;
}

ProviderPool load_provider_config(const std::filesystem::path& path) {
  return parse_provider_config(io::read_file(path));
}

const ProviderSpec& pick_provider(const ProviderPool& pool, Rng& rng) {
  if (pool.providers.empty()) throw InvalidArgument("provider pool is empty");
  return pool.providers[uniform_index(rng, pool.providers.size())];
}

std::string build_synthesis_prompt(std::span<const CommandLine> seeds) {
  if (seeds.size() != kSeedsPerPrompt) throw InvalidArgument("requires exactly 12 seeds");
  std::string list;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) list.push_back('\n');
    list += std::to_string(i + 1) + ". " + seeds[i].text;
  }
  return fill_slot(templates::kSynthesis, kSeedsSlot, list);
}

std::string build_pair_prompt(const CommandLine& query) {
  if (trim(query.text).empty()) throw InvalidArgument("empty query");
  return fill_slot(templates::kPair, kQuerySlot, query.text);
}

std::string build_explanation_prompt(const CommandLine& cmd) {
  if (trim(cmd.text).empty()) throw InvalidArgument("empty command");
  return fill_slot(templates::kExplanation, kCommandSlot, cmd.text);
}

DecodedPrompt decode_prompt(std::string_view prompt) {
  if (auto list = extract_slot(prompt, templates::kSynthesis, kSeedsSlot)) {
    DecodedPrompt d{PromptKind::synthesis, {}};
    std::istringstream in(*list);
    std::string line;
    std::size_t expected = 1;
    while (std::getline(in, line)) {
      auto prefix = std::to_string(expected) + ". ";
      if (!line.starts_with(prefix)) return {};
      d.slots.push_back(line.substr(prefix.size()));
      ++expected;
    }
    return d;
  }
  if (auto q = extract_slot(prompt, templates::kPair, kQuerySlot)) return {PromptKind::pair, {*q}};
  if (auto c = extract_slot(prompt, templates::kExplanation, kCommandSlot)) return {PromptKind::explanation, {*c}};
  return {};
}

TokenBucket::TokenBucket(double capacity, double refill_per_second)
    : capacity_(capacity), refill_per_second_(refill_per_second), tokens_(capacity), last_(Clock::now()) {}

void TokenBucket::refill_locked(Clock::time_point now) {
  std::chrono::duration<double> dt = now - last_;
  tokens_ = std::min(capacity_, tokens_ + dt.count() * refill_per_second_);
  last_ = now;
}

bool TokenBucket::try_acquire() {
  if (capacity_ <= 0.0) return true;
  std::lock_guard lock(mutex_);
  refill_locked(Clock::now());
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return true;
  }
  return false;
}

void TokenBucket::acquire() {
  if (capacity_ <= 0.0) return;
  if (refill_per_second_ <= 0.0 && capacity_ < 1.0) throw ConfigError("token bucket can never hold a token");
  for (;;) {
    double wait = 0.0;
    {
      std::lock_guard lock(mutex_);
      refill_locked(Clock::now());
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      if (refill_per_second_ <= 0.0) throw ConfigError("token bucket exhausted and never refills");
      wait = (1.0 - tokens_) / refill_per_second_;
    }
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
  }
}

HttpChatClient::HttpChatClient(ProviderSpec spec)
    : spec_(std::move(spec)), bucket_(spec_.rate_capacity, spec_.rate_refill_per_second) {
  spec_.validate();
}

std::string HttpChatClient::complete(std::string_view prompt) {
  bucket_.acquire();
  return cmdsim::complete(spec_, prompt);
}

std::string complete(const ProviderSpec& spec, std::string_view prompt) {
  std::string key;
  if (!spec.api_key_env.empty()) {
    const char* v = std::getenv(spec.api_key_env.c_str());
    if (v == nullptr || *v == '\0') {
      throw ConfigError("environment variable " + spec.api_key_env + " is not set (API key for provider '" + spec.name + "')");
    }
    key = v;
  }
  json body = {
      {"model", spec.model_id},
      {"messages", json::array({json{{"role", "user"}, {"content", std::string(prompt)}}})},
      {"temperature", spec.temperature},
  };
  auto response = detail::post_json_with_retries(spec, key, body.dump());
  try {
    auto j = json::parse(response);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw IntegrityError("provider '" + spec.name + "' returned an unexpected body: " + e.what());
  }
}

MockChatClient::MockChatClient(ProviderSpec spec, std::map<std::string, std::string> table)
    : spec_(std::move(spec)), table_(std::move(table)) {}

std::size_t MockChatClient::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::unique_ptr<ChatClient> make_client(const ProviderSpec& spec) {
  if (spec.is_mock()) return std::make_unique<MockChatClient>(spec);
  return std::make_unique<HttpChatClient>(spec);
}

ClientPool::ClientPool(ProviderPool pool, Factory factory) : pool_(std::move(pool)) {
  pool_.validate();
  for (const auto& spec : pool_.providers) clients_.push_back(factory(spec));
}

ChatClient& ClientPool::pick(Rng& rng) {
  const auto& spec = pick_provider(pool_, rng);
  return get(spec.name);
}

ChatClient& ClientPool::get(std::string_view name) {
  for (std::size_t i = 0; i < pool_.providers.size(); ++i) {
    if (pool_.providers[i].name == name) return *clients_[i];
  }
  throw ConfigError("no provider named '" + std::string(name) + "'");
}

namespace detail {

std::string post_json_with_retries(const ProviderSpec& spec, const std::string& api_key, const std::string& body) {
  auto target = parse_endpoint(spec.endpoint);
  std::string last_error;
  for (std::size_t attempt = 0;; ++attempt) {
    auto result = http_post(target, api_key, body, spec.timeout_seconds);
    if (result.ok() && result.status >= 200 && result.status < 300) return result.body;
    bool retry = !result.ok() || retryable_status(result.status);
    if (!retry) throw ProviderError(result.status, result.body);
    if (attempt >= spec.max_retries) {
      if (!result.ok()) {
        throw TransportError("provider '" + spec.name + "' unreachable after " + std::to_string(attempt + 1) +
                             " attempts: " + result.error);
      }
      throw ProviderError(result.status, result.body);
    }
    double delay = spec.backoff_initial_seconds * std::ldexp(1.0, static_cast<int>(attempt));
    std::this_thread::sleep_for(std::chrono::duration<double>(delay));
  }
}

}  // namespace detail
}  // namespace cmdsim
