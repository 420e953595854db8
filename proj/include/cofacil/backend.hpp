#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cofacil {

struct BackendInfo {
  std::string name;
  bool supports_structured_output = false;
};

struct Prompt {
  std::string system;
  std::string user;
  std::uint64_t seed = 0;
};

/// A text-completion service (chat model, scripted double, ...).
/// complete() throws Error(BackendUnavailable) on transport failure.
class LanguageBackend {
 public:
  virtual ~LanguageBackend() = default;
  virtual BackendInfo info() const = 0;
  virtual std::string complete(const Prompt& prompt) = 0;
};

using BackendPtr = std::shared_ptr<LanguageBackend>;

// Prompts are assembled from tagged blocks so deterministic doubles can read
// the parts they react to without parsing prose.
std::string tagged_section(std::string_view tag, std::string_view body);
std::optional<std::string> find_section(std::string_view text, std::string_view tag);

/// Finds the first balanced {...} in text that parses as a JSON object.
std::optional<nlohmann::json> first_json_object(std::string_view text);

struct RetryPolicy {
  int retries = 2;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds budget{20000};
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for

  static RetryPolicy immediate() { return {2, std::chrono::milliseconds{0}, std::chrono::milliseconds{20000}, {}}; }
};

std::string complete_with_retry(LanguageBackend& backend, const Prompt& prompt, const RetryPolicy& policy);

// ---------------------------------------------------------------------------
// Deterministic doubles.

struct MockRule {
  std::string pattern;  // ECMAScript regex, case-insensitive
  std::string concept_name;
  int value = 0;
};

std::vector<MockRule> parse_rule_table(const nlohmann::json& doc);
std::vector<MockRule> load_rule_table(const std::string& path);

/// Concept-extraction double: matches rules against the <transcript> block
/// of the prompt and replies with one JSON object; the largest value wins
/// when several rules hit the same concept.
class RuleTableBackend final : public LanguageBackend {
 public:
  explicit RuleTableBackend(std::vector<MockRule> rules);
  BackendInfo info() const override { return {"mock-rules", true}; }
  std::string complete(const Prompt& prompt) override;

 private:
  struct Compiled;
  std::shared_ptr<const std::vector<Compiled>> rules_;
};

BackendPtr mock_backend(std::vector<MockRule> rules);

struct ScriptRule {
  std::string pattern;
  std::string section = "transcript";
  std::string reply;
};

/// Replies with the first rule whose pattern matches the named prompt
/// section, else with the fallback. Replies may reference prompt sections
/// as {tag}, e.g. "{previous_summary} | {transcript}".
class ScriptedBackend final : public LanguageBackend {
 public:
  ScriptedBackend(std::vector<ScriptRule> rules, std::string fallback);
  BackendInfo info() const override { return {"mock-script", true}; }
  std::string complete(const Prompt& prompt) override;

  static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::json& doc);
  static std::shared_ptr<ScriptedBackend> load(const std::string& path);

 private:
  std::vector<ScriptRule> rules_;
  std::string fallback_;
};

std::string render_template(std::string_view reply, std::string_view prompt_text);

// ---------------------------------------------------------------------------
// Remote chat-completion endpoint (OpenAI-style /chat/completions).

struct RemoteBackendConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key;
  std::chrono::seconds timeout{20};

  /// Reads COFACIL_BACKEND_URL, COFACIL_BACKEND_MODEL and COFACIL_BACKEND_KEY.
  static RemoteBackendConfig from_env();
};

class RemoteChatBackend final : public LanguageBackend {
 public:
  explicit RemoteChatBackend(RemoteBackendConfig config);
  BackendInfo info() const override { return {"remote:" + config_.model, true}; }
  std::string complete(const Prompt& prompt) override;

  static nlohmann::json request_body(const RemoteBackendConfig& config, const Prompt& prompt);
  static std::string reply_content(const nlohmann::json& response);

 private:
  RemoteBackendConfig config_;
};

}  // namespace cofacil
