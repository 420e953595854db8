#include <cstdlib>
#include <regex>

#include <httplib.h>

#include "cofacil/backend.hpp"
#include "cofacil/error.hpp"
#include "cofacil/logging.hpp"

namespace cofacil {
namespace {

std::string env_or_empty(const char* name) {
  const char* value = std::getenv(name);
  return value ? std::string(value) : std::string();
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

ParsedUrl split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error(ErrorCode::InvalidArgument, "backend URL must be http(s)://host[/path]");
  std::string path = m[2].matched ? m[2].str() : std::string();
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {m[1].str(), path};
}

}  // namespace

RemoteBackendConfig RemoteBackendConfig::from_env() {
  RemoteBackendConfig config;
  config.base_url = env_or_empty("COFACIL_BACKEND_URL");
  if (config.base_url.empty()) config.base_url = "https://api.openai.com/v1";
  config.model = env_or_empty("COFACIL_BACKEND_MODEL");
  if (config.model.empty()) config.model = "gpt-4";
  config.api_key = env_or_empty("COFACIL_BACKEND_KEY");
  return config;
}

RemoteChatBackend::RemoteChatBackend(RemoteBackendConfig config) : config_(std::move(config)) {
  if (config_.api_key.empty()) {
    throw Error(ErrorCode::InvalidArgument, "remote backend needs an API key (set COFACIL_BACKEND_KEY)");
  }
  split_url(config_.base_url);
}

nlohmann::json RemoteChatBackend::request_body(const RemoteBackendConfig& config, const Prompt& prompt) {
  return {
      {"model", config.model},
      {"temperature", 0},
      {"seed", prompt.seed},
      {"response_format", {{"type", "json_object"}}},
      {"messages",
       nlohmann::json::array({{{"role", "system"}, {"content", prompt.system}},
                              {{"role", "user"}, {"content", prompt.user}}})},
  };
}

std::string RemoteChatBackend::reply_content(const nlohmann::json& response) {
  try {
    return response.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnparseableResponse, std::string("unexpected completion payload: ") + e.what());
  }
}

std::string RemoteChatBackend::complete(const Prompt& prompt) {
  const auto url = split_url(config_.base_url);
  httplib::Client client(url.origin);
  const auto timeout = static_cast<time_t>(config_.timeout.count());
  client.set_connection_timeout(timeout, 0);
  client.set_read_timeout(timeout, 0);
  client.set_write_timeout(timeout, 0);
  client.set_bearer_token_auth(config_.api_key);

  const std::string digest = text_digest(prompt.user);
  auto result = client.Post(url.path + "/chat/completions", request_body(config_, prompt).dump(), "application/json");
  if (!result) {
    logger()->warn("remote backend transport error ({}) prompt={}", httplib::to_string(result.error()), digest);
    throw Error(ErrorCode::BackendUnavailable, "transport error: " + httplib::to_string(result.error()));
  }
  if (result->status == 429 || result->status >= 500) {
    logger()->warn("remote backend status {} prompt={}", result->status, digest);
    throw Error(ErrorCode::BackendUnavailable, "HTTP " + std::to_string(result->status));
  }
  if (result->status != 200) {
    logger()->error("remote backend rejected request: status {} prompt={}", result->status, digest);
    throw Error(ErrorCode::BackendUnavailable, "HTTP " + std::to_string(result->status));
  }
  auto body = nlohmann::json::parse(result->body, nullptr, false);
  if (body.is_discarded()) throw Error(ErrorCode::UnparseableResponse, "completion body is not JSON");
  std::string content = reply_content(body);
  logger()->debug("remote backend ok prompt={} reply={}", digest, text_digest(content));
  return content;
}

}  // namespace cofacil
