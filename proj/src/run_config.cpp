#include "cofacil/run_config.hpp"

#include <cstdlib>
#include <fstream>

#include "cofacil/error.hpp"
#include "cofacil/intervention_advisor.hpp"
#include "cofacil/mock_defaults.hpp"

namespace cofacil {

namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& path, const fs::path& base) {
  if (path.empty() || base.empty() || fs::path(path).is_absolute()) return path;
  return (base / path).lexically_normal().string();
}

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

bool truthy(std::string_view v) { return v == "1" || v == "true" || v == "yes" || v == "on"; }

BackendPtr remote_backend(const RunConfig* config) {
  auto remote = RemoteBackendConfig::from_env();
  if (config) {
    if (!config->backend.base_url.empty() && !env("COFACIL_BACKEND_URL")) remote.base_url = config->backend.base_url;
    if (!config->backend.model.empty() && !env("COFACIL_BACKEND_MODEL")) remote.model = config->backend.model;
  }
  return std::make_shared<RemoteChatBackend>(remote);
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  RunConfig c;
  try {
    auto path = [&](const char* key, const std::string& fallback) {
      return resolve(doc.value(key, fallback), base_dir);
    };
    c.schema = path("schema", c.schema);
    c.data_dir = path("data_dir", c.data_dir);
    c.models_dir = path("models_dir", c.models_dir);
    c.fewshot = path("fewshot", c.fewshot);
    c.mock_rules = path("mock_rules", c.mock_rules);
    c.advisor_script = path("advisor_script", c.advisor_script);
    c.summary_script = path("summary_script", c.summary_script);
    if (auto it = doc.find("backend"); it != doc.end()) {
      c.backend.mode = it->value("mode", c.backend.mode);
      c.backend.base_url = it->value("base_url", c.backend.base_url);
      c.backend.model = it->value("model", c.backend.model);
    }
    if (auto it = doc.find("server"); it != doc.end()) {
      c.server.host = it->value("host", c.server.host);
      c.server.port = it->value("port", c.server.port);
      c.server.base_path = it->value("base_path", c.server.base_path);
      c.server.api_key = it->value("api_key", c.server.api_key);
    }
    if (auto it = doc.find("speech_hook"); it != doc.end()) {
      c.speech_command = it->value("command", std::string{});
      c.speech_webhook = it->value("webhook", std::string{});
    }
    c.summary_budget = doc.value("summary_budget", c.summary_budget);
    c.seed = doc.value("seed", c.seed);
    if (auto it = doc.find("hyperparams"); it != doc.end()) c.hyperparams = Hyperparams::from_json(*it);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad config: ") + e.what());
  }
  if (c.backend.mode != "mock" && c.backend.mode != "remote") {
    throw Error(ErrorCode::InvalidArgument, "backend.mode must be 'mock' or 'remote'");
  }
  if (c.server.port < 0 || c.server.port > 65535) throw Error(ErrorCode::InvalidArgument, "server.port out of range");
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open config " + path);
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::InvalidArgument, path + " is not valid JSON");
  return from_json(doc, fs::absolute(path).parent_path());
}

nlohmann::json RunConfig::to_json() const {
  return {{"schema", schema},
          {"data_dir", data_dir},
          {"models_dir", models_dir},
          {"fewshot", fewshot},
          {"mock_rules", mock_rules},
          {"advisor_script", advisor_script},
          {"summary_script", summary_script},
          {"backend", {{"mode", backend.mode}, {"base_url", backend.base_url}, {"model", backend.model}}},
          {"server",
           {{"host", server.host}, {"port", server.port}, {"base_path", server.base_path}, {"api_key", server.api_key}}},
          {"speech_hook", {{"command", speech_command}, {"webhook", speech_webhook}}},
          {"summary_budget", summary_budget},
          {"seed", seed},
          {"hyperparams", hyperparams.to_json()}};
}

void RunConfig::apply_env() {
  if (auto v = env("COFACIL_DATA_DIR")) data_dir = v;
  if (auto v = env("COFACIL_MODELS_DIR")) models_dir = v;
  if (auto v = env("COFACIL_MOCK")) backend.mode = truthy(v) ? "mock" : "remote";
  if (auto v = env("COFACIL_PORT")) {
    char* end = nullptr;
    long port = std::strtol(v, &end, 10);
    if (*end != '\0' || port < 0 || port > 65535) throw Error(ErrorCode::InvalidArgument, "COFACIL_PORT is not a port");
    server.port = static_cast<int>(port);
  }
  if (auto v = env("COFACIL_API_KEY")) server.api_key = v;
  if (auto v = env("COFACIL_BACKEND_URL")) backend.base_url = v;
  if (auto v = env("COFACIL_BACKEND_MODEL")) backend.model = v;
}

void RunConfig::validate() const {
  for (const auto* p : {&schema, &fewshot, &mock_rules, &advisor_script, &summary_script}) {
    if (!p->empty() && !fs::exists(*p)) throw Error(ErrorCode::InvalidArgument, "no such file: " + *p);
  }
  if (!fs::is_directory(models_dir)) throw Error(ErrorCode::InvalidArgument, "no such models directory: " + models_dir);
}

ConceptSchema RunConfig::load_schema() const { return schema.empty() ? default_schema() : ConceptSchema::load(schema); }

BackendPtr make_extraction_backend(const std::string& mode, const std::string& rules_path) {
  if (mode == "remote") return remote_backend(nullptr);
  if (mode != "mock") throw Error(ErrorCode::InvalidArgument, "backend must be 'mock' or 'remote'");
  return mock_backend(rules_path.empty() ? parse_rule_table(default_extraction_rules()) : load_rule_table(rules_path));
}

BackendPtr RunConfig::extraction_backend() const {
  if (backend.mode == "remote") return remote_backend(this);
  return make_extraction_backend("mock", mock_rules);
}

ServiceConfig RunConfig::service_config() const {
  ServiceConfig sc;
  sc.data_dir = data_dir;
  sc.models_dir = models_dir;
  sc.schema = load_schema();
  sc.extractor = extraction_backend();
  if (backend.mode == "remote") {
    sc.integrator = sc.advisor = sc.extractor;
  } else {
    sc.advisor = advisor_script.empty() ? ScriptedBackend::from_json(default_advisor_script())
                                        : ScriptedBackend::load(advisor_script);
    sc.integrator = summary_script.empty() ? ScriptedBackend::from_json(default_summary_script())
                                           : ScriptedBackend::load(summary_script);
  }
  if (!fewshot.empty()) sc.fewshot = load_fewshot(fewshot).examples;
  sc.summary_budget = summary_budget;
  if (!speech_command.empty()) {
    sc.speech_hook = std::make_shared<CommandSpeechHook>(speech_command);
  } else if (!speech_webhook.empty()) {
    sc.speech_hook = std::make_shared<WebhookSpeechHook>(speech_webhook);
  }
  return sc;
}

HttpOptions RunConfig::http_options() const {
  HttpOptions o;
  o.base_path = server.base_path;
  o.api_key = server.api_key;
  return o;
}

}  // namespace cofacil
