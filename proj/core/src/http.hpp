#pragma once

// Internal HTTP helpers shared by the chat and embedding clients.

#include <string>
#include <string_view>

#include "cmdsim/llm.hpp"

namespace cmdsim::detail {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint parse_endpoint(std::string_view url);

struct HttpResult {
  int status = 0;  // 0 when no response arrived
  std::string body;
  std::string error;

  bool ok() const { return status != 0; }
};

HttpResult http_post(const Endpoint& endpoint, const std::string& api_key, const std::string& body,
                     double timeout_seconds);

// POSTs a JSON body, retrying transport failures, 429 and 5xx with
// exponential backoff; returns the body of the first 2xx response.
std::string post_json_with_retries(const ProviderSpec& spec, const std::string& api_key, const std::string& body);

}  // namespace cmdsim::detail
