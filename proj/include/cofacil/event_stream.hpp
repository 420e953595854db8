#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "cofacil/jsonl_store.hpp"

namespace cofacil {

struct SessionEvent {
  long long seq = 0;  // 1-based, gapless per session
  std::string type;
  nlohmann::json data;

  nlohmann::json to_json() const { return {{"seq", seq}, {"type", type}, {"data", data}}; }
  /// "id: <seq>\nevent: <type>\ndata: <json>\n\n"
  std::string to_sse() const;
};

/// Persistent, replayable per-session event log with blocking readers.
class EventStream {
 public:
  explicit EventStream(std::filesystem::path path);

  long long publish(std::string type, nlohmann::json data);
  /// Publishes a terminal event and wakes every reader for good.
  void close(std::string type, nlohmann::json data);
  /// Wakes readers without publishing (server shutdown).
  void interrupt();

  struct Batch {
    std::vector<SessionEvent> events;
    bool finished = false;  // closed or interrupted, and nothing newer than the cursor
  };

  /// Events with seq > after; blocks up to timeout while none exist.
  Batch wait_after(long long after, std::chrono::milliseconds timeout) const;
  std::vector<SessionEvent> snapshot() const;
  long long last_seq() const;
  bool closed() const;

 private:
  JsonlAppender appender_;
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::vector<SessionEvent> events_;
  bool closed_ = false;
  bool interrupted_ = false;
};

}  // namespace cofacil
