#include "cofacil/http_server.hpp"

#include <charconv>

#include <httplib.h>

#include "cofacil/logging.hpp"

namespace cofacil {

namespace {

using Json = nlohmann::json;

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                Json extra = Json::object()) {
  extra["error"] = code;
  extra["message"] = message;
  send_json(res, status, extra);
}

Json parse_body(const httplib::Request& req) {
  auto body = Json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) throw std::invalid_argument("request body is not a JSON object");
  return body;
}

long long parse_index(const std::string& text) {
  long long value = -1;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) throw Error(ErrorCode::UnknownSegment, text);
  return value;
}

// Wraps a handler with the error-to-status mapping shared by every route.
template <typename F>
httplib::Server::Handler guarded(F handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const std::invalid_argument& e) {
      send_error(res, 400, "BadRequest", e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 422, "InvalidArgument", e.what());
    }
  };
}

Segment segment_from_body(const Json& body) {
  Segment s;
  s.t0_s = body.at("t0").get<double>();
  s.t1_s = body.at("t1").get<double>();
  for (const auto& u : body.value("utterances", Json::array())) s.utterances.push_back(utterance_from_json(u));
  return s;
}

StageGoals goals_from_body(const Json& body) {
  const auto& goals = body.at("stage_goals");
  if (goals.is_number_integer()) return default_stage_goals(goals.get<int>());
  return StageGoals::from_json(goals);
}

}  // namespace

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownModel:
    case ErrorCode::UnknownSegment:
      return 404;
    case ErrorCode::StaleEdit:
    case ErrorCode::OutOfOrderSegment:
      return 409;
    case ErrorCode::SessionClosed:
      return 410;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::UnparseableResponse:
      return 502;
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidGoals:
    case ErrorCode::OutOfRange:
    case ErrorCode::UnknownConcept:
    case ErrorCode::MalformedTranscript:
    case ErrorCode::SchemaMismatch:
    case ErrorCode::InvalidSchema:
      return 422;
    default:
      return 500;
  }
}

HttpServer::HttpServer(SessionManager& manager, HttpOptions options)
    : manager_(manager), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  while (!options_.base_path.empty() && options_.base_path.back() == '/') options_.base_path.pop_back();
  if (!options_.base_path.empty() && options_.base_path.front() != '/') options_.base_path.insert(0, "/");
  const auto threads = options_.threads;
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  // httplib's defaults add SO_REUSEPORT, which lets a second server bind a busy port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  install_routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
  auto& svr = *server_;
  const std::string& base = options_.base_path;
  SessionManager& m = manager_;

  if (!options_.api_key.empty()) {
    svr.set_pre_routing_handler([key = options_.api_key, health = base + "/healthz"](const httplib::Request& req,
                                                                                     httplib::Response& res) {
      if (req.path == health || req.get_header_value("X-API-Key") == key) return httplib::Server::HandlerResponse::Unhandled;
      send_error(res, 401, "Unauthorized", "missing or wrong X-API-Key");
      return httplib::Server::HandlerResponse::Handled;
    });
  }

  svr.Get(base + "/healthz", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"ok", true}}); });

  svr.Post(base + "/sessions", guarded([&m](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             const auto goals = goals_from_body(body);
             const auto id = m.create_session(goals, body.at("model_ref").get<std::string>());
             send_json(res, 201, {{"session_id", id}});
           }));

  svr.Get(base + R"(/sessions/([^/]+))", guarded([&m](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, m.session_info(req.matches[1]));
          }));

  svr.Post(base + R"(/sessions/([^/]+)/segments)", guarded([&m](const httplib::Request& req, httplib::Response& res) {
             const auto segment = segment_from_body(parse_body(req));
             auto result = m.ingest(req.matches[1], segment);
             auto analysis = result.analysis.to_json(m.schema());
             if (result.backend_error) {
               send_error(res, 502, "BackendUnavailable", *result.backend_error, {{"analysis", std::move(analysis)}});
             } else {
               send_json(res, 200, analysis);
             }
           }));

  svr.Post(base + R"(/sessions/([^/]+)/segments/([^/]+)/edits)",
           guarded([&m](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             EditRequest edit;
             edit.concept_name = body.at("concept").get<std::string>();
             edit.old_value = body.at("old_value").get<int>();
             edit.new_value = body.at("new_value").get<int>();
             edit.editor = body.value("editor", std::string("facilitator"));
             edit.request_advice = body.value("request_advice", false);
             auto result = m.edit(req.matches[1], parse_index(req.matches[2]), edit);
             auto out = result.outcome.to_json();
             if (result.suggestion) out["suggestion"] = result.suggestion->to_json();
             send_json(res, 200, out);
           }));

  svr.Get(base + R"(/sessions/([^/]+)/segments/([^/]+)/edits)",
          guarded([&m](const httplib::Request& req, httplib::Response& res) {
            Json out = Json::array();
            for (const auto& e : m.edit_history(req.matches[1], parse_index(req.matches[2]))) out.push_back(e.to_json());
            send_json(res, 200, out);
          }));

  svr.Get(base + R"(/sessions/([^/]+)/segments/([^/]+)/what-if)",
          guarded([&m](const httplib::Request& req, httplib::Response& res) {
            if (!req.has_param("concept")) throw Error(ErrorCode::InvalidArgument, "concept query parameter is required");
            Json out = Json::array();
            for (const auto& row : m.what_if(req.matches[1], parse_index(req.matches[2]), req.get_param_value("concept"))) {
              out.push_back({{"value", row.value}, {"probability", row.probability}, {"decision", row.decision}});
            }
            send_json(res, 200, out);
          }));

  svr.Get(base + R"(/sessions/([^/]+)/timeline)", guarded([&m](const httplib::Request& req, httplib::Response& res) {
            Json out = Json::array();
            for (const auto& a : m.timeline(req.matches[1])) out.push_back(a.to_json(m.schema()));
            send_json(res, 200, out);
          }));

  svr.Get(base + R"(/sessions/([^/]+)/summary)", guarded([&m](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, m.summary(req.matches[1]).to_json());
          }));

  svr.Post(base + R"(/sessions/([^/]+)/close)", guarded([&m](const httplib::Request& req, httplib::Response& res) {
             m.close_session(req.matches[1]);
             send_json(res, 200, m.session_info(req.matches[1]));
           }));

  svr.Get(base + R"(/models/([^/]+)/features)", guarded([&m](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, feature_report_json(m.features(req.matches[1])));
          }));

  svr.Get(base + R"(/sessions/([^/]+)/events)",
          guarded([&m, keepalive = options_.keepalive](const httplib::Request& req, httplib::Response& res) {
            auto stream = m.events(req.matches[1]);
            std::string last = req.get_header_value("Last-Event-ID");
            if (last.empty() && req.has_param("last_event_id")) last = req.get_param_value("last_event_id");
            long long cursor = 0;
            if (!last.empty()) {
              auto [end, ec] = std::from_chars(last.data(), last.data() + last.size(), cursor);
              if (ec != std::errc{} || end != last.data() + last.size() || cursor < 0) {
                throw std::invalid_argument("Last-Event-ID must be a non-negative integer");
              }
            }
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider(
                "text/event-stream",
                [stream, cursor, keepalive](std::size_t, httplib::DataSink& sink) mutable {
                  auto batch = stream->wait_after(cursor, keepalive);
                  if (!sink.is_writable()) return false;
                  if (batch.events.empty()) {
                    if (batch.finished) {
                      sink.done();
                      return true;
                    }
                    static const std::string ping = ": keepalive\n\n";
                    return sink.write(ping.data(), ping.size());
                  }
                  std::string frames;
                  for (const auto& e : batch.events) {
                    frames += e.to_sse();
                    cursor = e.seq;
                  }
                  return sink.write(frames.data(), frames.size());
                });
          }));
}

int HttpServer::bind(const std::string& host, int port) {
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

void HttpServer::run() {
  logger()->info("listening on port {}{}", port_, options_.base_path);
  server_->listen_after_bind();
}

void HttpServer::start() {
  thread_ = std::thread([this] { run(); });
  server_->wait_until_ready();
}

void HttpServer::stop() {
  manager_.shutdown();
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace cofacil
