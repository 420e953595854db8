#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cofacil {

inline constexpr double kWindowSeconds = 60.0;
inline constexpr double kQuietGapSeconds = 300.0;

struct Annotation {
  std::string session_id;
  double timestamp_s = 0.0;
  std::string code;
  std::string rationale;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Utterance {
  double t0_s = 0.0;
  double t1_s = 0.0;
  std::string speaker;
  std::string text;

  double midpoint() const noexcept { return 0.5 * (t0_s + t1_s); }
  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct WindowBounds {
  double t0_s = 0.0;
  double t1_s = 0.0;

  friend auto operator<=>(const WindowBounds&, const WindowBounds&) = default;
};

struct Segment {
  std::string session_id;
  double t0_s = 0.0;
  double t1_s = 0.0;
  std::vector<Utterance> utterances;  // sorted by t0_s

  /// Speaker-prefixed transcript lines joined by newlines.
  std::string text() const;
  std::string id() const;
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct LabeledSample {
  Segment segment;
  int label = 0;  // 1 = intervention needed
  std::optional<Annotation> source_annotation;
};

struct WindowSet {
  std::vector<WindowBounds> windows;
  std::size_t skipped_annotations = 0;  // annotations past the session end
};

std::vector<Annotation> parse_coding_sheet(const std::string& path);
std::vector<Annotation> parse_coding_sheet_text(const std::string& csv);

std::vector<Utterance> parse_transcript(const std::string& path);
std::vector<Utterance> parse_transcript_text(const std::string& jsonl);

/// One window ending at each annotation; early annotations clamp to [0, 60].
WindowSet positive_windows(const std::vector<Annotation>& annotations, double session_duration_s);

/// Non-overlapping 60 s chunks inside every gap of at least five minutes
/// between consecutive codes. Session start and end count as codes.
WindowSet negative_windows(const std::vector<Annotation>& annotations, double session_duration_s);

/// Utterances whose midpoint lies in [t0, t1), sorted by start time.
Segment make_segment(const std::string& session_id, WindowBounds bounds, const std::vector<Utterance>& utterances);

struct SessionInput {
  std::string session_id;
  std::vector<Utterance> utterances;
  std::vector<Annotation> annotations;
  double duration_s = 0.0;
};

struct SessionCounts {
  std::string session_id;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::size_t skipped_annotations = 0;
};

struct DatasetManifest {
  std::vector<SessionCounts> sessions;
  std::size_t total_pos = 0;
  std::size_t total_neg = 0;

  nlohmann::json to_json() const;
};

struct Dataset {
  std::vector<LabeledSample> samples;
  DatasetManifest manifest;
};

Dataset build_dataset(const std::vector<SessionInput>& sessions);

nlohmann::json to_json(const Utterance& utterance);
Utterance utterance_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Segment& segment);
Segment segment_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Annotation& annotation);
Annotation annotation_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const LabeledSample& sample);
LabeledSample sample_from_json(const nlohmann::json& doc);

}  // namespace cofacil
