#include "cofacil/intervention_advisor.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "cofacil/error.hpp"
#include "cofacil/logging.hpp"

namespace cofacil {
namespace {

std::string lower_trim(std::string_view text) {
  std::string s;
  for (char c : text) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string utf8_prefix(const std::string& text, std::size_t max_code_points) {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
      if (seen == max_code_points) return text.substr(0, i);
      ++seen;
    }
  }
  return text;
}

}  // namespace

void StageGoals::validate() const {
  if (session_number < 1 || session_number > 3) throw Error(ErrorCode::InvalidGoals, "session_number must be 1, 2 or 3");
  if (goals.empty()) throw Error(ErrorCode::InvalidGoals, "at least one goal is required");
  for (const auto& g : goals) {
    if (g.empty()) throw Error(ErrorCode::InvalidGoals, "goals must be non-empty strings");
  }
}

nlohmann::json StageGoals::to_json() const {
  return {{"session_number", session_number}, {"goals", goals}, {"agenda", agenda}};
}

StageGoals StageGoals::from_json(const nlohmann::json& doc) {
  try {
    StageGoals g;
    g.session_number = doc.at("session_number").get<int>();
    g.goals = doc.at("goals").get<std::vector<std::string>>();
    g.agenda = doc.value("agenda", std::vector<std::string>{});
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidGoals, e.what());
  }
}

StageGoals default_stage_goals(int session_number) {
  switch (session_number) {
    case 1:
      return {1,
              {"Each participant sets a goal to reconnect with a lost family member or friend, or to build a new "
               "social connection"},
              {"introductions", "group norms", "goal setting", "peer support", "homework"}};
    case 2:
      return {2,
              {"Each participant sets a physical or mental health goal"},
              {"check-in", "review progress", "goal setting", "peer support", "homework"}};
    case 3:
      return {3,
              {"Each participant sets goals for the next 3 to 6 months"},
              {"check-in", "review progress", "goal setting", "peer support", "closing"}};
    default:
      throw Error(ErrorCode::InvalidGoals, "session_number must be 1, 2 or 3");
  }
}

FewShotSet parse_fewshot(const nlohmann::json& doc) {
  if (!doc.is_array()) throw Error(ErrorCode::MalformedExample, "few-shot file must hold a JSON array");
  FewShotSet set;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    auto field = [&](const char* name) {
      if (!item.is_object() || !item.contains(name) || !item[name].is_string() || item[name].get<std::string>().empty()) {
        throw Error(ErrorCode::MalformedExample, "example " + std::to_string(i) + " lacks a non-empty '" + name + "'");
      }
      return item[name].get<std::string>();
    };
    set.examples.push_back({field("transcript_excerpt"), field("recommended_action"), field("rationale")});
  }
  if (set.examples.empty()) set.warnings.push_back("no few-shot examples; the advisor will run zero-shot");
  return set;
}

FewShotSet load_fewshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open few-shot file " + path);
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::MalformedExample, path + " is not valid JSON");
  auto set = parse_fewshot(doc);
  for (const auto& w : set.warnings) logger()->warn("{}: {}", path, w);
  return set;
}

std::string_view to_string(SuggestionCategory category) noexcept {
  switch (category) {
    case SuggestionCategory::Goal: return "goal";
    case SuggestionCategory::Redirect: return "redirect";
    case SuggestionCategory::Support: return "support";
    case SuggestionCategory::Other: return "other";
  }
  return "other";
}

std::optional<SuggestionCategory> map_category(std::string_view label) {
  std::string s = lower_trim(label);
  for (auto& c : s) {
    if (c == '-' || c == '_') c = ' ';
  }
  for (std::string_view suffix : {" intervention", " interventions"}) {
    if (s.size() > suffix.size() && s.ends_with(suffix)) s.erase(s.size() - suffix.size());
  }
  if (s == "goal" || s == "goals" || s == "goal setting" || s == "goal intervention") return SuggestionCategory::Goal;
  if (s == "redirect" || s == "redirection" || s == "refocus") return SuggestionCategory::Redirect;
  if (s == "support" || s == "peer support" || s == "emotional support") return SuggestionCategory::Support;
  if (s == "other") return SuggestionCategory::Other;
  return std::nullopt;
}

nlohmann::json Suggestion::to_json() const {
  return {{"category", to_string(category)},
          {"action", action},
          {"rationale", rationale},
          {"segment_ref", {{"session_id", segment_ref.session_id}, {"index", segment_ref.index}}},
          {"created_at", created_at},
          {"warnings", warnings}};
}

Suggestion Suggestion::from_json(const nlohmann::json& doc) {
  Suggestion s;
  s.category = map_category(doc.at("category").get<std::string>()).value_or(SuggestionCategory::Other);
  s.action = doc.at("action").get<std::string>();
  s.rationale = doc.value("rationale", std::string{});
  s.segment_ref = {doc.at("segment_ref").at("session_id").get<std::string>(),
                   doc.at("segment_ref").at("index").get<long long>()};
  s.created_at = doc.value("created_at", std::string{});
  s.warnings = doc.value("warnings", std::vector<std::string>{});
  return s;
}

Prompt advisor_prompt(const AdvisorInput& in) {
  std::ostringstream goals;
  goals << "Session " << in.goals.session_number << " goals:\n";
  for (const auto& g : in.goals.goals) goals << "- " << g << '\n';
  if (!in.goals.agenda.empty()) {
    goals << "Agenda:\n";
    for (std::size_t i = 0; i < in.goals.agenda.size(); ++i) goals << i + 1 << ". " << in.goals.agenda[i] << '\n';
  }
  std::ostringstream concepts;
  for (std::size_t i = 0; i < in.schema.size() && i < in.concepts.values.size(); ++i) {
    if (in.concepts.values[i] != 0) concepts << in.schema.concepts()[i].name << ": " << in.concepts.values[i] << '\n';
  }
  std::ostringstream examples;
  for (const auto& ex : in.fewshot) {
    examples << "Transcript: " << ex.transcript_excerpt << "\nAction: " << ex.recommended_action
             << "\nRationale: " << ex.rationale << "\n\n";
  }

  Prompt prompt;
  prompt.system =
      "You advise the human facilitator of a supportive group meeting. The classifier has flagged the current "
      "moment as needing an intervention. Choose one category from [goal, redirect, support, other], give a short "
      "imperative action (at most 140 characters) and a rationale explaining why it is needed now. Reply with a "
      "single JSON object {\"category\": ..., \"action\": ..., \"rationale\": ...}.";
  prompt.user = tagged_section("meeting_summary", in.summary.text) + tagged_section("stage_goals", goals.str()) +
                tagged_section("concepts", concepts.str()) + tagged_section("examples", examples.str()) +
                tagged_section("transcript", in.segment.text());
  return prompt;
}

Suggestion parse_suggestion(std::string_view reply, const SegmentRef& ref) {
  auto object = first_json_object(reply);
  if (!object) throw Error(ErrorCode::UnparseableResponse, "advisor reply contains no JSON object");
  auto text_field = [&](const char* name) -> std::string {
    auto it = object->find(name);
    if (it == object->end() || !it->is_string()) return {};
    return lower_trim(it->get<std::string>()).empty() ? std::string{} : it->get<std::string>();
  };

  Suggestion s;
  s.segment_ref = ref;
  s.action = text_field("action");
  s.rationale = text_field("rationale");
  if (s.action.empty()) throw Error(ErrorCode::UnparseableResponse, "advisor reply has no action");
  if (s.rationale.empty()) throw Error(ErrorCode::UnparseableResponse, "advisor reply has no rationale");

  const std::string label = text_field("category");
  if (auto category = map_category(label)) {
    s.category = *category;
  } else {
    s.category = SuggestionCategory::Other;
    s.warnings.push_back("category '" + label + "' coerced to other");
  }
  if (utf8_length(s.action) > kMaxActionLength) {
    s.action = utf8_prefix(s.action, kMaxActionLength);
    s.warnings.push_back("action truncated to 140 characters");
  }
  return s;
}

Suggestion suggest(const AdvisorInput& input, LanguageBackend& backend, const AdvisorOptions& options) {
  const Prompt prompt = advisor_prompt(input);
  std::string reply = complete_with_retry(backend, prompt, options.retry);
  Suggestion s;
  try {
    s = parse_suggestion(reply, input.segment_ref);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnparseableResponse) throw;
    Prompt repair = prompt;
    repair.user += tagged_section("previous_reply", reply);
    repair.user += "The previous reply was not usable. Reply with exactly one JSON object as specified.";
    reply = complete_with_retry(backend, repair, options.retry);
    s = parse_suggestion(reply, input.segment_ref);
  }
  s.created_at = options.clock ? options.clock() : utc_now_iso8601();
  return s;
}

}  // namespace cofacil
