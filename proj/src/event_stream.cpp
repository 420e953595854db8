#include "cofacil/event_stream.hpp"

#include "cofacil/error.hpp"

namespace cofacil {

std::string SessionEvent::to_sse() const {
  return "id: " + std::to_string(seq) + "\nevent: " + type + "\ndata: " + data.dump() + "\n\n";
}

EventStream::EventStream(std::filesystem::path path) : appender_(path) {
  for (const auto& record : read_jsonl(path)) {
    SessionEvent e{record.at("seq").get<long long>(), record.at("type").get<std::string>(), record.at("data")};
    if (e.seq != static_cast<long long>(events_.size()) + 1) {
      throw Error(ErrorCode::CorruptArtifact, path.string() + ": event sequence has a gap");
    }
    events_.push_back(std::move(e));
  }
  if (!events_.empty() && events_.back().type == "session_closed") closed_ = true;
}

long long EventStream::publish(std::string type, nlohmann::json data) {
  std::lock_guard lock(mutex_);
  SessionEvent e{static_cast<long long>(events_.size()) + 1, std::move(type), std::move(data)};
  appender_.append(e.to_json());
  events_.push_back(std::move(e));
  cv_.notify_all();
  return events_.back().seq;
}

void EventStream::close(std::string type, nlohmann::json data) {
  std::lock_guard lock(mutex_);
  if (closed_) return;
  SessionEvent e{static_cast<long long>(events_.size()) + 1, std::move(type), std::move(data)};
  appender_.append(e.to_json());
  events_.push_back(std::move(e));
  closed_ = true;
  cv_.notify_all();
}

void EventStream::interrupt() {
  std::lock_guard lock(mutex_);
  interrupted_ = true;
  cv_.notify_all();
}

EventStream::Batch EventStream::wait_after(long long after, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  const auto have_news = [&] { return static_cast<long long>(events_.size()) > after || closed_ || interrupted_; };
  cv_.wait_for(lock, timeout, have_news);
  Batch batch;
  for (auto i = static_cast<std::size_t>(std::max(after, 0LL)); i < events_.size(); ++i) batch.events.push_back(events_[i]);
  batch.finished = batch.events.empty() && (closed_ || interrupted_);
  return batch;
}

std::vector<SessionEvent> EventStream::snapshot() const {
  std::lock_guard lock(mutex_);
  return events_;
}

long long EventStream::last_seq() const {
  std::lock_guard lock(mutex_);
  return static_cast<long long>(events_.size());
}

bool EventStream::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

}  // namespace cofacil
