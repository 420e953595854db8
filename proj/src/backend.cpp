#include "cofacil/backend.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <thread>

#include "cofacil/error.hpp"
#include "cofacil/logging.hpp"

namespace cofacil {

std::string tagged_section(std::string_view tag, std::string_view body) {
  std::string out;
  out.reserve(body.size() + 2 * tag.size() + 8);
  out.append("<").append(tag).append(">\n");
  out.append(body);
  out.append("\n</").append(tag).append(">\n");
  return out;
}

std::optional<std::string> find_section(std::string_view text, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">\n";
  const std::string close = "\n</" + std::string(tag) + ">";
  auto begin = text.find(open);
  if (begin == std::string_view::npos) return std::nullopt;
  begin += open.size();
  auto end = text.find(close, begin);
  if (end == std::string_view::npos) return std::nullopt;
  return std::string(text.substr(begin, end - begin));
}

std::optional<nlohmann::json> first_json_object(std::string_view text) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t end = std::string_view::npos;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        end = i;
        break;
      }
    }
    if (end == std::string_view::npos) continue;
    auto parsed = nlohmann::json::parse(text.substr(start, end - start + 1), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
  }
  return std::nullopt;
}

std::string complete_with_retry(LanguageBackend& backend, const Prompt& prompt, const RetryPolicy& policy) {
  using namespace std::chrono;
  const auto started = steady_clock::now();
  auto backoff = policy.initial_backoff;
  milliseconds waited{0};  // counted separately because an injected sleep may not block
  for (int attempt = 0;; ++attempt) {
    try {
      return backend.complete(prompt);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BackendUnavailable) throw;
      auto elapsed = duration_cast<milliseconds>(steady_clock::now() - started);
      if (policy.sleep) elapsed += waited;
      if (attempt >= policy.retries || elapsed + backoff > policy.budget) {
        throw Error(ErrorCode::BackendUnavailable,
                    "giving up after " + std::to_string(attempt + 1) + " attempt(s): " + e.what());
      }
      logger()->warn("backend {} attempt {} failed, retrying in {} ms", backend.info().name, attempt + 1,
                     backoff.count());
      if (backoff.count() > 0) {
        if (policy.sleep) {
          policy.sleep(backoff);
          waited += backoff;
        } else {
          std::this_thread::sleep_for(backoff);
        }
      }
      backoff *= 2;
    }
  }
}

std::vector<MockRule> parse_rule_table(const nlohmann::json& doc) {
  if (!doc.is_array()) throw Error(ErrorCode::InvalidArgument, "rule table must be a JSON array");
  std::vector<MockRule> rules;
  for (const auto& item : doc) {
    try {
      rules.push_back({item.at("pattern").get<std::string>(), item.at("concept").get<std::string>(),
                       item.at("value").get<int>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, std::string("bad rule: ") + e.what());
    }
  }
  return rules;
}

std::vector<MockRule> load_rule_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open rule table " + path);
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::InvalidArgument, path + " is not valid JSON");
  return parse_rule_table(doc);
}

struct RuleTableBackend::Compiled {
  std::regex pattern;
  std::string concept_name;
  int value;
};

RuleTableBackend::RuleTableBackend(std::vector<MockRule> rules) {
  auto compiled = std::make_shared<std::vector<Compiled>>();
  for (auto& rule : rules) {
    try {
      compiled->push_back({std::regex(rule.pattern, std::regex::ECMAScript | std::regex::icase),
                           std::move(rule.concept_name), rule.value});
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::InvalidArgument, "bad pattern '" + rule.pattern + "': " + e.what());
    }
  }
  rules_ = std::move(compiled);
}

std::string RuleTableBackend::complete(const Prompt& prompt) {
  const std::string text = find_section(prompt.user, "transcript").value_or(prompt.user);
  std::map<std::string, int> hits;
  for (const auto& rule : *rules_) {
    if (!std::regex_search(text, rule.pattern)) continue;
    auto [it, inserted] = hits.emplace(rule.concept_name, rule.value);
    if (!inserted) it->second = std::max(it->second, rule.value);
  }
  nlohmann::json reply = nlohmann::json::object();
  for (const auto& [name, value] : hits) reply[name] = value;
  return reply.dump();
}

BackendPtr mock_backend(std::vector<MockRule> rules) { return std::make_shared<RuleTableBackend>(std::move(rules)); }

std::string render_template(std::string_view reply, std::string_view prompt_text) {
  static const std::regex placeholder(R"(\{([a-z_]+)\})");
  std::string out;
  std::string source(reply);
  auto begin = std::sregex_iterator(source.begin(), source.end(), placeholder);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.append(source, last, static_cast<std::size_t>(m.position()) - last);
    out += find_section(prompt_text, m[1].str()).value_or("");
    last = static_cast<std::size_t>(m.position() + m.length());
  }
  out.append(source, last);
  return out;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules, std::string fallback)
    : rules_(std::move(rules)), fallback_(std::move(fallback)) {}

std::string ScriptedBackend::complete(const Prompt& prompt) {
  for (const auto& rule : rules_) {
    const std::string haystack = find_section(prompt.user, rule.section).value_or("");
    if (std::regex_search(haystack, std::regex(rule.pattern, std::regex::ECMAScript | std::regex::icase))) {
      return render_template(rule.reply, prompt.user);
    }
  }
  return render_template(fallback_, prompt.user);
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& doc) {
  auto as_text = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  try {
    std::vector<ScriptRule> rules;
    for (const auto& item : doc.value("rules", nlohmann::json::array())) {
      rules.push_back({item.at("pattern").get<std::string>(), item.value("section", std::string("transcript")),
                       as_text(item.at("reply"))});
    }
    std::string fallback = doc.contains("default") ? as_text(doc.at("default")) : std::string("{}");
    return std::make_shared<ScriptedBackend>(std::move(rules), std::move(fallback));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad script: ") + e.what());
  }
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open script " + path);
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::InvalidArgument, path + " is not valid JSON");
  return from_json(doc);
}

}  // namespace cofacil
