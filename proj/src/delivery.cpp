#include "cofacil/delivery.hpp"

#include <cstdio>
#include <regex>

#include <httplib.h>

#include "cofacil/logging.hpp"

namespace cofacil {

nlohmann::json Notification::to_json() const {
  return {{"suggestion_ref", {{"session_id", suggestion_ref.session_id}, {"index", suggestion_ref.index}}},
          {"text_payload", text_payload},
          {"speech_payload", speech_payload},
          {"delivered_via", delivered_via}};
}

Notification render_notification(const Suggestion& suggestion, bool speech_enabled) {
  Notification n;
  n.suggestion_ref = suggestion.segment_ref;
  n.text_payload = "[" + std::string(to_string(suggestion.category)) + "] " + suggestion.action;

  std::string spoken = suggestion.action;
  // Keep only characters a synthesizer reads naturally.
  spoken = std::regex_replace(spoken, std::regex(R"([\[\]\(\)\{\}<>*_#`|~^])"), " ");
  spoken = std::regex_replace(spoken, std::regex(R"(\s+)"), " ");
  if (!spoken.empty() && spoken.back() == ' ') spoken.pop_back();
  if (!spoken.empty() && spoken.front() == ' ') spoken.erase(0, 1);
  if (!spoken.empty() && spoken.back() != '.' && spoken.back() != '?' && spoken.back() != '!') spoken.push_back('.');
  n.speech_payload = "Suggested " + std::string(to_string(suggestion.category)) + " intervention. " + spoken;

  n.delivered_via.insert("text");
  if (speech_enabled) n.delivered_via.insert("speech");
  return n;
}

void CommandSpeechHook::speak(const Notification& notification) {
  FILE* pipe = ::popen(command_.c_str(), "w");
  if (!pipe) {
    logger()->warn("speech command could not be started");
    return;
  }
  std::fwrite(notification.speech_payload.data(), 1, notification.speech_payload.size(), pipe);
  std::fputc('\n', pipe);
  const int status = ::pclose(pipe);
  if (status != 0) logger()->warn("speech command exited with status {}", status);
}

void WebhookSpeechHook::speak(const Notification& notification) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url_, m, re)) {
    logger()->warn("speech webhook URL is not http(s)");
    return;
  }
  httplib::Client client(m[1].str());
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(10, 0);
  auto res = client.Post(m[2].matched ? m[2].str() : "/", notification.to_json().dump(), "application/json");
  if (!res || res->status >= 300) logger()->warn("speech webhook delivery failed");
}

DeliveryWorker::DeliveryWorker(std::shared_ptr<SpeechHook> hook) : hook_(std::move(hook)), thread_([this] { run(); }) {}

DeliveryWorker::~DeliveryWorker() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  thread_.join();
}

void DeliveryWorker::enqueue(Notification notification) {
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(std::move(notification));
  }
  cv_.notify_all();
}

void DeliveryWorker::drain() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

void DeliveryWorker::run() {
  for (;;) {
    Notification next;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      next = std::move(queue_.front());
      queue_.pop_front();
      busy_ = true;
    }
    try {
      if (hook_) hook_->speak(next);
    } catch (const std::exception& e) {
      logger()->warn("speech hook failed: {}", e.what());
    }
    {
      std::lock_guard lock(mutex_);
      busy_ = false;
    }
    cv_.notify_all();
  }
}

}  // namespace cofacil
