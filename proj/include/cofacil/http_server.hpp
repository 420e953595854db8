#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <thread>

#include "cofacil/error.hpp"
#include "cofacil/session_manager.hpp"

namespace httplib {
class Server;
}

namespace cofacil {

/// HTTP status for a library error code.
int http_status(ErrorCode code) noexcept;

struct HttpOptions {
  std::string base_path;  // "" or e.g. "/api"
  std::string api_key;    // X-API-Key required on every route but /healthz when set
  std::chrono::milliseconds keepalive{15000};
  std::size_t threads = 32;  // event streams each hold one worker
};

class HttpServer {
 public:
  HttpServer(SessionManager& manager, HttpOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds without serving. Port 0 picks a free port. Returns the bound
  /// port; throws Io when the address is taken.
  int bind(const std::string& host, int port);
  /// Serves on the bound socket until stop().
  void run();
  /// run() on a background thread.
  void start();
  void stop();
  int port() const noexcept { return port_; }

 private:
  void install_routes();

  SessionManager& manager_;
  HttpOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace cofacil
