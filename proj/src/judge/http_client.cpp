#include <httplib.h>

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "jpo/error.hpp"
#include "jpo/judge.hpp"

namespace jpo::judge {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(Errc::ConfigInvalid, "endpoint_url lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string HttpChatClient::complete(const std::string& prompt, const JudgeConfig& config) {
  const Endpoint ep = split_url(config.endpoint_url);
  httplib::Client cli(ep.origin);
  cli.set_connection_timeout(config.timeout_seconds, 0);
  cli.set_read_timeout(config.timeout_seconds, 0);

  httplib::Headers headers;
  if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  nlohmann::json body{{"model", config.model_name},
                      {"temperature", config.request_temperature},
                      {"messages", {{{"role", "user"}, {"content", prompt}}}}};

  auto res = cli.Post(ep.path, headers, body.dump(), "application/json");
  if (!res) {
    throw Error(Errc::JudgeUnavailable, "request to " + ep.origin + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(Errc::JudgeUnavailable, "judge endpoint returned HTTP " + std::to_string(res->status));
  }
  try {
    auto j = nlohmann::json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::JudgeUnavailable, std::string("malformed judge response: ") + e.what());
  }
}

}  // namespace jpo::judge
