#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cofacil/cbm_classifier.hpp"
#include "cofacil/concept_schema.hpp"
#include "cofacil/dataset_builder.hpp"
#include "cofacil/session_manager.hpp"

namespace fixtures {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "cofacil") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
             std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

 private:
  std::filesystem::path path_;
};

// Hand-built model on the default schema with an identity scaler, so a
// concept's contribution to the logit is coefficient * raw value.
//   logit = -2 + 3 PrivacyIssue + 0.8 DenyChanges - 0.8 Passive
//              + 0.6 GoalBarrier + 0.3 Sad
inline cofacil::CbmModel fixture_model() {
  const auto schema = cofacil::default_schema();
  cofacil::CbmModel m;
  m.schema_version = schema.version();
  m.concept_names = schema.names();
  m.coefficients.assign(schema.size(), 0.0);
  const std::map<std::string, double> weights{{"Privacy Issue", 3.0},
                                              {"Deny Changes", 0.8},
                                              {"Passive", -0.8},
                                              {"Goal Barrier Discussion Scale", 0.6},
                                              {"Sad", 0.3}};
  for (const auto& [name, w] : weights) m.coefficients[*schema.index_of(name)] = w;
  m.intercept = -2.0;
  m.scaler.means.assign(schema.size(), 0.0);
  m.scaler.stds.assign(schema.size(), 1.0);
  m.trained_at = "2000-01-01T00:00:00Z";
  return m;
}

inline cofacil::ConceptVector vector_of(const std::map<std::string, long long>& raw) {
  return cofacil::validate_vector(cofacil::default_schema(), raw);
}

inline cofacil::Utterance say(double t0, std::string speaker, std::string text) {
  return {t0, t0 + 5.0, std::move(speaker), std::move(text)};
}

// Five contiguous 60 s windows. With the default mock rules and the fixture
// model, windows 1, 2 and 4 fire and 0 and 3 do not.
inline std::vector<cofacil::Segment> scripted_session() {
  using cofacil::Segment;
  std::vector<Segment> s(5);
  for (int i = 0; i < 5; ++i) {
    s[i].t0_s = 60.0 * i;
    s[i].t1_s = 60.0 * (i + 1);
  }
  s[0].utterances = {say(2, "Facilitator", "Welcome back everyone, let's start with a check-in."),
                     say(20, "Ana", "Glad to be here.")};
  s[1].utterances = {say(62, "Ben", "Sorry, my husband just walked in."),
                     say(75, "Ben", "I can't talk freely right now.")};
  s[2].utterances = {say(125, "Cara", "Honestly I don't need to change anything."),
                     say(140, "Cara", "I'm fine the way I am.")};
  s[3].utterances = {say(185, "Dev", "I guess."), say(200, "Ana", "I don't know, pass.")};
  s[4].utterances = {say(245, "Ana", "It's hard to find time, work gets in the way."),
                     say(260, "Ana", "I've been feeling sad about it.")};
  return s;
}

inline std::vector<int> scripted_decisions() { return {0, 1, 1, 0, 1}; }

}  // namespace fixtures
