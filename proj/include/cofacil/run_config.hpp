#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "cofacil/backend.hpp"
#include "cofacil/cbm_classifier.hpp"
#include "cofacil/http_server.hpp"
#include "cofacil/session_manager.hpp"

namespace cofacil {

/// Shared configuration for the CLI and the server. Empty paths mean "use
/// the built-in default"; relative paths resolve against the config file.
struct RunConfig {
  std::string schema;
  std::string data_dir = "cofacil-data";
  std::string models_dir = "models";
  std::string fewshot;
  std::string mock_rules;
  std::string advisor_script;
  std::string summary_script;

  struct Backend {
    std::string mode = "mock";  // mock | remote
    std::string base_url;
    std::string model;
  } backend;

  struct Server {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string base_path;
    std::string api_key;
  } server;

  std::string speech_command;
  std::string speech_webhook;
  std::size_t summary_budget = kDefaultSummaryBudget;
  std::uint64_t seed = 0;
  Hyperparams hyperparams;

  static RunConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;

  /// COFACIL_DATA_DIR, COFACIL_MODELS_DIR, COFACIL_MOCK, COFACIL_PORT,
  /// COFACIL_API_KEY, COFACIL_BACKEND_URL and COFACIL_BACKEND_MODEL.
  void apply_env();
  /// Throws InvalidArgument naming the first referenced file that is missing.
  void validate() const;

  ConceptSchema load_schema() const;
  BackendPtr extraction_backend() const;
  ServiceConfig service_config() const;
  HttpOptions http_options() const;
};

/// Mock or remote backend for concept extraction; remote needs COFACIL_BACKEND_KEY.
BackendPtr make_extraction_backend(const std::string& mode, const std::string& rules_path = {});

}  // namespace cofacil
