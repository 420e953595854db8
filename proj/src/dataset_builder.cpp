#include "cofacil/dataset_builder.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cofacil/error.hpp"

namespace cofacil {
namespace {

constexpr double kEps = 1e-9;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// RFC 4180 records: quoted fields may contain commas, doubled quotes and newlines.
std::vector<std::vector<std::string>> split_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  std::size_t i = 0;
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) i = 3;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          record.push_back(std::move(field));
          records.push_back(std::move(record));
        }
        record.clear();
        field.clear();
        any = false;
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::MalformedRow, "unterminated quoted field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::optional<double> parse_double(const std::string& text) {
  std::string t = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string format_seconds(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", t);
  return buf;
}

}  // namespace

std::string Segment::text() const {
  std::string out;
  for (const auto& u : utterances) {
    if (!out.empty()) out.push_back('\n');
    if (!u.speaker.empty()) out += u.speaker + ": ";
    out += u.text;
  }
  return out;
}

std::string Segment::id() const { return session_id + "@" + format_seconds(t0_s) + "-" + format_seconds(t1_s); }

std::vector<Annotation> parse_coding_sheet_text(const std::string& csv) {
  auto records = split_csv(csv);
  if (records.empty()) throw Error(ErrorCode::EmptySheet, "coding sheet has no header");
  const std::vector<std::string> expected{"session_id", "timestamp_s", "code", "rationale"};
  std::vector<std::string> header;
  for (const auto& h : records.front()) header.push_back(trim(h));
  if (header != expected) {
    throw Error(ErrorCode::MalformedRow, "header must be session_id,timestamp_s,code,rationale");
  }
  std::vector<Annotation> out;
  for (std::size_t row = 1; row < records.size(); ++row) {
    const auto& fields = records[row];
    const std::string where = "row " + std::to_string(row + 1);
    if (fields.size() != 4) throw Error(ErrorCode::MalformedRow, where + ": expected 4 fields");
    auto t = parse_double(fields[1]);
    if (!t) throw Error(ErrorCode::MalformedRow, where + ": timestamp is not a number");
    if (*t < 0.0) throw Error(ErrorCode::MalformedRow, where + ": negative timestamp");
    Annotation a{trim(fields[0]), *t, trim(fields[2]), trim(fields[3])};
    if (a.session_id.empty()) throw Error(ErrorCode::MalformedRow, where + ": empty session_id");
    if (a.rationale.empty()) throw Error(ErrorCode::MalformedRow, where + ": empty rationale");
    out.push_back(std::move(a));
  }
  if (out.empty()) throw Error(ErrorCode::EmptySheet, "coding sheet has no rows");
  return out;
}

std::vector<Annotation> parse_coding_sheet(const std::string& path) { return parse_coding_sheet_text(read_file(path)); }

std::vector<Utterance> parse_transcript_text(const std::string& jsonl) {
  std::vector<Utterance> out;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(utterance_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedTranscript, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedTranscript, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.t0_s < b.t0_s; });
  return out;
}

std::vector<Utterance> parse_transcript(const std::string& path) { return parse_transcript_text(read_file(path)); }

WindowSet positive_windows(const std::vector<Annotation>& annotations, double session_duration_s) {
  if (!(session_duration_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "session duration must be positive");
  WindowSet out;
  for (const auto& a : annotations) {
    if (a.timestamp_s > session_duration_s + kEps) {
      ++out.skipped_annotations;
      continue;
    }
    out.windows.push_back({std::max(0.0, a.timestamp_s - kWindowSeconds), std::max(kWindowSeconds, a.timestamp_s)});
  }
  return out;
}

WindowSet negative_windows(const std::vector<Annotation>& annotations, double session_duration_s) {
  if (!(session_duration_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "session duration must be positive");
  WindowSet out;
  std::vector<double> codes{0.0};
  for (const auto& a : annotations) {
    if (a.timestamp_s > session_duration_s + kEps) {
      ++out.skipped_annotations;
      continue;
    }
    codes.push_back(a.timestamp_s);
  }
  codes.push_back(session_duration_s);
  std::sort(codes.begin(), codes.end());

  for (std::size_t i = 0; i + 1 < codes.size(); ++i) {
    const double a = codes[i];
    const double gap = codes[i + 1] - a;
    if (gap + kEps < kQuietGapSeconds) continue;
    const auto chunks = static_cast<std::size_t>(std::floor(gap / kWindowSeconds + kEps));
    for (std::size_t j = 0; j < chunks; ++j) {
      out.windows.push_back({a + kWindowSeconds * static_cast<double>(j), a + kWindowSeconds * static_cast<double>(j + 1)});
    }
  }
  return out;
}

Segment make_segment(const std::string& session_id, WindowBounds bounds, const std::vector<Utterance>& utterances) {
  Segment segment{session_id, bounds.t0_s, bounds.t1_s, {}};
  for (const auto& u : utterances) {
    const double mid = u.midpoint();
    if (mid >= bounds.t0_s && mid < bounds.t1_s) segment.utterances.push_back(u);
  }
  std::stable_sort(segment.utterances.begin(), segment.utterances.end(),
                   [](const auto& a, const auto& b) { return a.t0_s < b.t0_s; });
  return segment;
}

Dataset build_dataset(const std::vector<SessionInput>& sessions) {
  Dataset dataset;
  for (const auto& session : sessions) {
    std::vector<Annotation> annotations = session.annotations;
    std::stable_sort(annotations.begin(), annotations.end(),
                     [](const auto& a, const auto& b) { return a.timestamp_s < b.timestamp_s; });

    SessionCounts counts{session.session_id, 0, 0, 0};
    std::set<WindowBounds> positive_keys;
    for (const auto& a : annotations) {
      auto windows = positive_windows({a}, session.duration_s);
      counts.skipped_annotations += windows.skipped_annotations;
      if (windows.windows.empty()) continue;
      const auto bounds = windows.windows.front();
      if (!positive_keys.insert(bounds).second) continue;  // same moment coded twice
      dataset.samples.push_back({make_segment(session.session_id, bounds, session.utterances), 1, a});
      ++counts.n_pos;
    }

    // A chunk that coincides with a positive window keeps the positive label.
    for (const auto& bounds : negative_windows(annotations, session.duration_s).windows) {
      if (positive_keys.contains(bounds)) continue;
      dataset.samples.push_back({make_segment(session.session_id, bounds, session.utterances), 0, std::nullopt});
      ++counts.n_neg;
    }

    dataset.manifest.total_pos += counts.n_pos;
    dataset.manifest.total_neg += counts.n_neg;
    dataset.manifest.sessions.push_back(std::move(counts));
  }
  return dataset;
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : sessions) {
    list.push_back({{"id", s.session_id},
                    {"n_pos", s.n_pos},
                    {"n_neg", s.n_neg},
                    {"skipped_annotations", s.skipped_annotations}});
  }
  return {{"sessions", std::move(list)}, {"total_pos", total_pos}, {"total_neg", total_neg}};
}

nlohmann::json to_json(const Utterance& u) {
  return {{"t0", u.t0_s}, {"t1", u.t1_s}, {"speaker", u.speaker}, {"text", u.text}};
}

Utterance utterance_from_json(const nlohmann::json& doc) {
  Utterance u{doc.at("t0").get<double>(), doc.at("t1").get<double>(), doc.value("speaker", std::string{}),
              doc.at("text").get<std::string>()};
  if (!(u.t0_s >= 0.0 && u.t0_s < u.t1_s)) {
    throw Error(ErrorCode::MalformedTranscript, "utterance needs 0 <= t0 < t1");
  }
  return u;
}

nlohmann::json to_json(const Segment& segment) {
  nlohmann::json utterances = nlohmann::json::array();
  for (const auto& u : segment.utterances) utterances.push_back(to_json(u));
  return {{"session_id", segment.session_id},
          {"t0", segment.t0_s},
          {"t1", segment.t1_s},
          {"utterances", std::move(utterances)}};
}

Segment segment_from_json(const nlohmann::json& doc) {
  Segment segment{doc.value("session_id", std::string{}), doc.at("t0").get<double>(), doc.at("t1").get<double>(), {}};
  for (const auto& u : doc.value("utterances", nlohmann::json::array())) {
    segment.utterances.push_back(utterance_from_json(u));
  }
  std::stable_sort(segment.utterances.begin(), segment.utterances.end(),
                   [](const auto& a, const auto& b) { return a.t0_s < b.t0_s; });
  return segment;
}

nlohmann::json to_json(const Annotation& a) {
  return {{"session_id", a.session_id}, {"timestamp_s", a.timestamp_s}, {"code", a.code}, {"rationale", a.rationale}};
}

Annotation annotation_from_json(const nlohmann::json& doc) {
  return {doc.at("session_id").get<std::string>(), doc.at("timestamp_s").get<double>(),
          doc.value("code", std::string{}), doc.at("rationale").get<std::string>()};
}

nlohmann::json to_json(const LabeledSample& sample) {
  nlohmann::json doc = to_json(sample.segment);
  doc["id"] = sample.segment.id();
  doc["label"] = sample.label;
  doc["annotation"] = sample.source_annotation ? to_json(*sample.source_annotation) : nlohmann::json(nullptr);
  return doc;
}

LabeledSample sample_from_json(const nlohmann::json& doc) {
  LabeledSample sample{segment_from_json(doc), doc.at("label").get<int>(), std::nullopt};
  if (doc.contains("annotation") && !doc.at("annotation").is_null()) {
    sample.source_annotation = annotation_from_json(doc.at("annotation"));
  }
  return sample;
}

}  // namespace cofacil
