// Operator entry points: offline pipeline (build-dataset, extract, train,
// evaluate, replay) and the live service (serve).
//
// Exit codes: 0 success, 1 user or data error, 2 internal error.

#include <csignal>
#include <ctime>
#include <fstream>
#include <future>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "cofacil/cbm_classifier.hpp"
#include "cofacil/concept_editing.hpp"
#include "cofacil/concept_extractor.hpp"
#include "cofacil/cross_validation.hpp"
#include "cofacil/dataset_builder.hpp"
#include "cofacil/error.hpp"
#include "cofacil/http_server.hpp"
#include "cofacil/jsonl_store.hpp"
#include "cofacil/logging.hpp"
#include "cofacil/run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cofacil;

namespace {

// Thrown for problems with the operator's input that the library does not
// classify itself (missing files, bad flags).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  auto doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw UsageError(path + " is not valid JSON");
  return doc;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
}

// SOURCE_DATE_EPOCH pins the artifact timestamp so reruns are byte-identical.
std::string artifact_timestamp() {
  const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
  if (!epoch || !*epoch) return utc_now_iso8601();
  std::time_t t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ConceptSchema schema_from(const std::string& path) { return path.empty() ? default_schema() : ConceptSchema::load(path); }

// ---------------------------------------------------------------------------

struct BuildArgs {
  std::string transcripts, codes, out;
};

double session_duration(const fs::path& transcript, const std::vector<Utterance>& utterances) {
  fs::path meta = transcript;
  meta.replace_extension(".meta.json");
  if (fs::exists(meta)) return read_json_file(meta.string()).at("duration_s").get<double>();
  double end = 0.0;
  for (const auto& u : utterances) end = std::max(end, u.t1_s);
  return end;
}

int build_dataset_cmd(const BuildArgs& a) {
  if (!fs::is_directory(a.transcripts)) throw UsageError("no such transcript directory: " + a.transcripts);
  if (!fs::exists(a.codes)) throw UsageError("no such coding sheet: " + a.codes);

  std::vector<Annotation> annotations;
  try {
    annotations = parse_coding_sheet(a.codes);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptySheet) throw;
    std::cerr << "warning: " << a.codes << " has no annotations; every window will be negative\n";
  }

  std::map<std::string, SessionInput> sessions;
  for (const auto& entry : fs::directory_iterator(a.transcripts)) {
    const auto& p = entry.path();
    if (p.extension() != ".jsonl") continue;
    SessionInput s;
    s.session_id = p.stem().string();
    s.utterances = parse_transcript(p.string());
    s.duration_s = session_duration(p, s.utterances);
    sessions.emplace(s.session_id, std::move(s));
  }
  for (const auto& ann : annotations) {
    auto it = sessions.find(ann.session_id);
    if (it == sessions.end()) throw UsageError("missing transcript file for session '" + ann.session_id + "'");
    it->second.annotations.push_back(ann);
  }

  std::vector<SessionInput> inputs;
  for (auto& [_, s] : sessions) inputs.push_back(std::move(s));
  const Dataset ds = build_dataset(inputs);

  std::string lines;
  for (const auto& sample : ds.samples) lines += to_json(sample).dump() + "\n";
  write_text(fs::path(a.out) / "segments.jsonl", lines);
  write_text(fs::path(a.out) / "manifest.json", ds.manifest.to_json().dump(2) + "\n");
  for (const auto& s : ds.manifest.sessions) {
    if (s.skipped_annotations) {
      std::cerr << "warning: " << s.session_id << ": " << s.skipped_annotations << " annotation(s) past the session end\n";
    }
  }
  std::cout << "positive: " << ds.manifest.total_pos << "\nnegative: " << ds.manifest.total_neg << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
  std::string dataset, backend = "mock", out, rules, schema;
  std::size_t jobs = 1;
  std::uint64_t seed = 0;
};

json feature_row(const LabeledSample& sample, const ConceptSchema& schema, const ConceptVector& vector) {
  return {{"id", sample.segment.id()},
          {"session_id", sample.segment.session_id},
          {"label", sample.label},
          {"schema_version", schema.version()},
          {"concepts", vector_to_json(schema, vector)}};
}

int extract_cmd(const ExtractArgs& a) {
  const auto segments_path = fs::path(a.dataset) / "segments.jsonl";
  if (!fs::exists(segments_path)) throw UsageError("no segments.jsonl in " + a.dataset);
  if (a.jobs == 0) throw UsageError("--jobs must be at least 1");
  const ConceptSchema schema = schema_from(a.schema);
  auto backend = make_extraction_backend(a.backend, a.rules);

  std::set<std::string> done;
  if (fs::exists(a.out)) {
    for (const auto& row : read_jsonl(a.out)) done.insert(row.at("id").get<std::string>());
  }
  std::vector<LabeledSample> todo;
  for (const auto& record : read_jsonl(segments_path)) {
    auto sample = sample_from_json(record);
    if (!done.contains(sample.segment.id())) todo.push_back(std::move(sample));
  }
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  JsonlAppender out(a.out);

  const ExtractionOptions options{RetryPolicy{}, a.seed};
  // Batches of --jobs concurrent calls; rows are appended in dataset order so
  // an interrupted run leaves a clean prefix to resume from.
  for (std::size_t start = 0; start < todo.size(); start += a.jobs) {
    const std::size_t end = std::min(todo.size(), start + a.jobs);
    std::vector<std::future<ExtractionResult>> pending;
    for (std::size_t i = start; i < end; ++i) {
      pending.push_back(std::async(std::launch::async, [&, i] {
        return extract_concepts(todo[i].segment, schema, *backend, options);
      }));
    }
    for (std::size_t i = start; i < end; ++i) {
      auto result = pending[i - start].get();
      for (const auto& w : result.warnings) logger()->debug("{}: {}: {}", todo[i].segment.id(), w.concept_name, w.issue);
      out.append(feature_row(todo[i], schema, result.vector));
    }
  }
  std::cout << "extracted: " << todo.size() << "\nskipped (already present): " << done.size() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

TrainingSet load_features(const std::string& path, const ConceptSchema& schema) {
  if (!fs::exists(path)) throw UsageError("no such features file: " + path);
  TrainingSet data;
  data.schema_version = schema.version();
  data.concept_names = schema.names();
  for (const auto& row : read_jsonl(path)) {
    const auto version = row.value("schema_version", schema.version());
    if (version != schema.version()) {
      throw Error(ErrorCode::SchemaMismatch, "features row " + row.value("id", std::string("?")) + " uses schema " +
                                                 version + ", expected " + schema.version());
    }
    const auto vector = vector_from_json(schema, row.at("concepts"));
    data.rows.push_back(to_feature_row(vector));
    data.labels.push_back(row.at("label").get<int>());
  }
  if (data.rows.empty()) throw Error(ErrorCode::EmptyDataset, path + " has no rows");
  return data;
}

struct TrainArgs {
  std::string features, out, report, schema, class_weight = "balanced";
  double C = 1.0, l1_ratio = 0.5, threshold = 0.5;
  std::uint64_t seed = 0;
};

int train_cmd(const TrainArgs& a) {
  const ConceptSchema schema = schema_from(a.schema);
  const TrainingSet data = load_features(a.features, schema);
  Hyperparams hp;
  hp.inverse_reg_strength = a.C;
  hp.l1_ratio = a.l1_ratio;
  hp.class_weighting = parse_class_weighting(a.class_weight);
  hp.decision_threshold = a.threshold;
  hp.seed = a.seed;

  CbmModel model = train(data, hp);
  model.trained_at = artifact_timestamp();
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  save_model(model, a.out);

  const auto rows = feature_report(model);
  const std::string report = a.report.empty() ? a.out + ".features.json" : a.report;
  write_text(report, feature_report_json(rows).dump(2) + "\n");
  std::cout << render_feature_table(rows);
  if (!model.manifest.converged) std::cerr << "warning: solver stopped at max_iters without converging\n";
  return 0;
}

struct EvaluateArgs {
  std::string features, model, schema, folds_out;
  std::size_t cv = 5;
  std::optional<std::uint64_t> seed;
};

int evaluate_cmd(const EvaluateArgs& a) {
  const ConceptSchema schema = schema_from(a.schema);
  const CbmModel model = load_model(a.model, schema.version());
  check_compatible(model, schema);
  const TrainingSet data = load_features(a.features, schema);
  Hyperparams hp = model.hyperparams;
  if (a.seed) hp.seed = *a.seed;

  const CvReport report = cross_validate(data, hp, a.cv);
  std::cout << report.render_table() << "\n" << report.to_json().dump(2) << "\n";
  if (!a.folds_out.empty()) write_text(a.folds_out, report.to_json().dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct ReplayArgs {
  std::string session_log, model, edits, schema;
};

std::string yes_no(int decision) { return decision ? "YES" : "NO"; }

int replay_cmd(const ReplayArgs& a) {
  const auto timeline_path = fs::path(a.session_log) / "timeline.jsonl";
  if (!fs::exists(timeline_path)) throw UsageError("no timeline.jsonl in " + a.session_log);
  const ConceptSchema schema = schema_from(a.schema);
  const CbmModel model = load_model(a.model, schema.version());
  check_compatible(model, schema);

  std::vector<ConceptVector> vectors;
  std::size_t changed = 0;
  for (const auto& record : read_jsonl(timeline_path)) {
    const auto extraction = extraction_from_json(record.at("extraction"), schema);
    if (extraction.vector.schema_version != schema.version()) {
      throw Error(ErrorCode::SchemaVersionMismatch, "session log uses schema " + extraction.vector.schema_version);
    }
    const double p = predict_proba(model, extraction.vector);
    const int replayed = decide(model, p);
    const int stored = record.at("decision").get<int>();
    changed += stored != replayed;
    std::printf("segment %zu: stored=%s replayed=%s p=%.4f%s\n", vectors.size(), yes_no(stored).c_str(),
                yes_no(replayed).c_str(), p, stored != replayed ? " (changed)" : "");
    vectors.push_back(extraction.vector);
  }

  if (!a.edits.empty()) {
    if (!fs::exists(a.edits)) throw UsageError("no such edits file: " + a.edits);
    std::size_t flips = 0;
    for (const auto& row : read_jsonl(a.edits)) {
      const json& edit = row.contains("edit") ? row.at("edit") : row;  // accepts edits.jsonl records too
      const long long index =
          edit.contains("segment_ref") ? edit.at("segment_ref").at("index").get<long long>() : edit.at("segment").get<long long>();
      if (index < 0 || index >= static_cast<long long>(vectors.size())) {
        throw Error(ErrorCode::UnknownSegment, "segment " + std::to_string(index));
      }
      ConceptEdit e{{fs::path(a.session_log).filename().string(), index},
                    edit.at("concept").get<std::string>(),
                    edit.at("old_value").get<int>(),
                    edit.at("new_value").get<int>(),
                    edit.value("editor", std::string("replay")),
                    edit.value("edited_at", std::string{})};
      const auto outcome = apply_edit(model, schema, vectors[static_cast<std::size_t>(index)], e);
      flips += outcome.flipped;
      std::printf("edit segment %lld: %s %d->%d p %.4f->%.4f %s->%s%s\n", index, e.concept_name.c_str(), e.old_value,
                  e.new_value, outcome.prob_before, outcome.prob_after, yes_no(outcome.decision_before).c_str(),
                  yes_no(outcome.decision_after).c_str(), outcome.flipped ? " FLIPPED" : "");
    }
    std::printf("edits flipped %zu decision(s)\n", flips);
  }
  std::printf("segments: %zu, decisions changed vs stored: %zu\n", vectors.size(), changed);
  return 0;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string config;
  std::optional<int> port;
};

int serve_cmd(const ServeArgs& a) {
  RunConfig config = a.config.empty() ? RunConfig{} : RunConfig::load(a.config);
  config.apply_env();
  if (a.port) config.server.port = *a.port;
  config.validate();

  // Block termination signals before any thread starts; one thread waits for them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  SessionManager manager(config.service_config());
  HttpServer server(manager, config.http_options());
  const int port = server.bind(config.server.host, config.server.port);
  std::cout << "listening on http://" << config.server.host << ":" << port << config.server.base_path << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.run();
  // run() also returns if the listener fails; wake the waiter in that case.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  manager.flush_deliveries();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cofacil: concept-bottleneck facilitation assistant"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  BuildArgs build;
  auto* build_cmd = app.add_subcommand("build-dataset", "Cut annotated transcripts into labeled 60 s windows");
  build_cmd->add_option("--transcripts", build.transcripts, "Directory of <session>.jsonl transcripts")->required();
  build_cmd->add_option("--codes", build.codes, "Coding sheet CSV")->required();
  build_cmd->add_option("--out", build.out, "Output directory")->required();

  ExtractArgs extract;
  auto* extract_sub = app.add_subcommand("extract", "Encode every segment as a concept vector");
  extract_sub->add_option("--dataset", extract.dataset, "Directory written by build-dataset")->required();
  extract_sub->add_option("--backend", extract.backend, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
  extract_sub->add_option("--out", extract.out, "features.jsonl to create or resume")->required();
  extract_sub->add_option("--rules", extract.rules, "Mock rule table (JSON)");
  extract_sub->add_option("--schema", extract.schema, "Concept schema (JSON)");
  extract_sub->add_option("--jobs", extract.jobs, "Concurrent backend calls");
  extract_sub->add_option("--seed", extract.seed, "Sampling seed passed to the backend");

  TrainArgs tr;
  auto* train_sub = app.add_subcommand("train", "Fit the elastic-net concept classifier");
  train_sub->add_option("--features", tr.features, "features.jsonl")->required();
  train_sub->add_option("--out", tr.out, "Model artifact path")->required();
  train_sub->add_option("--C", tr.C, "Inverse regularization strength");
  train_sub->add_option("--l1-ratio", tr.l1_ratio, "Elastic-net mixing, 0 = ridge, 1 = lasso");
  train_sub->add_option("--class-weight", tr.class_weight, "balanced or none");
  train_sub->add_option("--threshold", tr.threshold, "Decision threshold on the probability");
  train_sub->add_option("--report", tr.report, "Feature report path (default <out>.features.json)");
  train_sub->add_option("--schema", tr.schema, "Concept schema (JSON)");
  train_sub->add_option("--seed", tr.seed, "Recorded in the artifact");

  EvaluateArgs ev;
  auto* eval_sub = app.add_subcommand("evaluate", "Stratified k-fold cross-validation");
  eval_sub->add_option("--features", ev.features, "features.jsonl")->required();
  eval_sub->add_option("--model", ev.model, "Artifact whose hyperparameters are evaluated")->required();
  eval_sub->add_option("--cv", ev.cv, "Number of folds");
  eval_sub->add_option("--seed", ev.seed, "Fold seed (default: the artifact's)");
  eval_sub->add_option("--folds-out", ev.folds_out, "Also write the report JSON here");
  eval_sub->add_option("--schema", ev.schema, "Concept schema (JSON)");

  ReplayArgs rp;
  auto* replay_sub = app.add_subcommand("replay", "Re-run prediction over a stored session");
  replay_sub->add_option("--session-log", rp.session_log, "Session directory")->required();
  replay_sub->add_option("--model", rp.model, "Model artifact")->required();
  replay_sub->add_option("--edits", rp.edits, "JSONL of {segment, concept, old_value, new_value}");
  replay_sub->add_option("--schema", rp.schema, "Concept schema (JSON)");

  ServeArgs sv;
  auto* serve_sub = app.add_subcommand("serve", "Run the live session service");
  serve_sub->add_option("--config", sv.config, "RunConfig JSON");
  serve_sub->add_option("--port", sv.port, "Overrides server.port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    logger()->set_level(spdlog::level::from_str(log_level));
    if (*build_cmd) return build_dataset_cmd(build);
    if (*extract_sub) return extract_cmd(extract);
    if (*train_sub) return train_cmd(tr);
    if (*eval_sub) return evaluate_cmd(ev);
    if (*replay_sub) return replay_cmd(rp);
    if (*serve_sub) return serve_cmd(sv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
