#include "http.hpp"

#include <chrono>

#include <httplib.h>

#include "cmdsim/error.hpp"

namespace cmdsim::detail {

Endpoint parse_endpoint(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw ConfigError("endpoint '" + std::string(url) + "' lacks a scheme");
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("endpoint '" + std::string(url) + "' must use http or https");
  }
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  if (path_start == std::string_view::npos) {
    e.base = std::string(url);
    e.path = "/";
  } else {
    e.base = std::string(url.substr(0, path_start));
    e.path = std::string(url.substr(path_start));
  }
  return e;
}

HttpResult http_post(const Endpoint& endpoint, const std::string& api_key, const std::string& body,
                     double timeout_seconds) {
  httplib::Client client(endpoint.base);
  auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  auto res = client.Post(endpoint.path, headers, body, "application/json");
  HttpResult out;
  if (!res) {
    out.error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

}  // namespace cmdsim::detail
