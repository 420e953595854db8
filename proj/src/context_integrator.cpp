#include "cofacil/context_integrator.hpp"

#include <sstream>

#include "cofacil/error.hpp"
#include "cofacil/logging.hpp"

namespace cofacil {

nlohmann::json MeetingSummary::to_json() const {
  return {{"session_id", session_id},   {"as_of_segment", as_of_segment},
          {"text", text},               {"salient_flags", salient_flags},
          {"stale", stale},             {"stale_since_segment", stale_since_segment}};
}

MeetingSummary MeetingSummary::from_json(const nlohmann::json& doc) {
  MeetingSummary s;
  s.session_id = doc.value("session_id", std::string{});
  s.as_of_segment = doc.value("as_of_segment", -1LL);
  s.text = doc.value("text", std::string{});
  s.salient_flags = doc.value("salient_flags", std::vector<std::string>{});
  s.stale = doc.value("stale", false);
  s.stale_since_segment = doc.value("stale_since_segment", -1LL);
  return s;
}

std::size_t utf8_length(std::string_view text) noexcept {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

namespace {

// Byte offset where the code point with index `count` starts.
std::size_t utf8_offset(std::string_view text, std::size_t count) noexcept {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
      if (seen == count) return i;
      ++seen;
    }
  }
  return text.size();
}

}  // namespace

std::string truncate_to_budget(const std::string& text, std::size_t budget) {
  if (utf8_length(text) <= budget) return text;
  const std::size_t marker = utf8_length(kTruncationMarker);
  if (budget <= marker) return text.substr(0, utf8_offset(text, budget));
  return text.substr(0, utf8_offset(text, budget - marker)) + std::string(kTruncationMarker);
}

Prompt summary_prompt(const MeetingSummary& prev, const Segment& segment, const ConceptSchema& schema,
                      const ConceptVector& concepts) {
  std::ostringstream nonzero;
  for (std::size_t i = 0; i < schema.size() && i < concepts.values.size(); ++i) {
    if (concepts.values[i] != 0) nonzero << schema.concepts()[i].name << ": " << concepts.values[i] << '\n';
  }
  std::ostringstream flags;
  for (const auto& f : prev.salient_flags) flags << "- " << f << '\n';

  Prompt prompt;
  prompt.system =
      "You maintain a running summary of a facilitated group meeting. Merge the new transcript window and its "
      "observed concepts into the previous summary. Keep the summary concise, keep unresolved issues, and reply "
      "with a JSON object {\"summary\": string, \"open_issues\": [string]}.";
  prompt.user = tagged_section("previous_summary", prev.text) + tagged_section("open_issues", flags.str()) +
                tagged_section("concepts", nonzero.str()) + tagged_section("transcript", segment.text());
  return prompt;
}

MeetingSummary update_summary(const MeetingSummary& prev, long long segment_index, const Segment& segment,
                              const ConceptSchema& schema, const ConceptVector& concepts, LanguageBackend& backend,
                              const IntegratorOptions& options) {
  if (segment_index != prev.as_of_segment + 1) {
    throw Error(ErrorCode::InvalidArgument, "summary is at segment " + std::to_string(prev.as_of_segment) +
                                                ", cannot fold in segment " + std::to_string(segment_index));
  }
  MeetingSummary next = prev;
  next.as_of_segment = segment_index;
  if (segment.utterances.empty()) return next;

  std::string reply;
  try {
    reply = complete_with_retry(backend, summary_prompt(prev, segment, schema, concepts), options.retry);
  } catch (const Error& e) {
    logger()->warn("session {} segment {}: summary update failed ({}), keeping previous summary", prev.session_id,
                   segment_index, to_string(e.code()));
    next.stale = true;
    if (next.stale_since_segment < 0) next.stale_since_segment = segment_index;
    return next;
  }

  std::string text = reply;
  if (auto object = first_json_object(reply); object && object->contains("summary") && (*object)["summary"].is_string()) {
    text = (*object)["summary"].get<std::string>();
    if (object->contains("open_issues") && (*object)["open_issues"].is_array()) {
      next.salient_flags.clear();
      for (const auto& issue : (*object)["open_issues"]) {
        if (issue.is_string()) next.salient_flags.push_back(issue.get<std::string>());
      }
    }
  }
  const auto first = text.find_first_not_of(" \t\r\n");
  const auto last = text.find_last_not_of(" \t\r\n");
  text = first == std::string::npos ? std::string{} : text.substr(first, last - first + 1);
  next.text = truncate_to_budget(text, options.budget);
  next.stale = false;
  next.stale_since_segment = -1;
  return next;
}

}  // namespace cofacil
