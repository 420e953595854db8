#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>

#include <json.hpp>

#include "cofacil/intervention_advisor.hpp"

namespace cofacil {

struct Notification {
  SegmentRef suggestion_ref;
  std::string text_payload;
  std::string speech_payload;
  std::set<std::string> delivered_via;  // "text", "speech"

  nlohmann::json to_json() const;
};

/// Text shown on the facilitator's screen and the sentence handed to the
/// speech synthesizer.
Notification render_notification(const Suggestion& suggestion, bool speech_enabled);

/// External text-to-speech. Implementations may block; they run on the
/// delivery worker, never on the ingestion path.
class SpeechHook {
 public:
  virtual ~SpeechHook() = default;
  virtual void speak(const Notification& notification) = 0;
};

/// Pipes the speech payload to a shell command's stdin.
class CommandSpeechHook final : public SpeechHook {
 public:
  explicit CommandSpeechHook(std::string command) : command_(std::move(command)) {}
  void speak(const Notification& notification) override;

 private:
  std::string command_;
};

/// POSTs the notification JSON to a URL.
class WebhookSpeechHook final : public SpeechHook {
 public:
  explicit WebhookSpeechHook(std::string url) : url_(std::move(url)) {}
  void speak(const Notification& notification) override;

 private:
  std::string url_;
};

/// Single background thread draining notifications into a speech hook.
class DeliveryWorker {
 public:
  explicit DeliveryWorker(std::shared_ptr<SpeechHook> hook);
  ~DeliveryWorker();
  DeliveryWorker(const DeliveryWorker&) = delete;
  DeliveryWorker& operator=(const DeliveryWorker&) = delete;

  void enqueue(Notification notification);
  void drain();  // blocks until the queue is empty

 private:
  void run();

  std::shared_ptr<SpeechHook> hook_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Notification> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  std::thread thread_;
};

}  // namespace cofacil
