#pragma once

#include <atomic>
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "cofacil/backend.hpp"
#include "cofacil/error.hpp"

namespace fixtures {

// Plays back canned replies in order; an empty optional means "transport
// failure". Records every prompt it receives.
class QueueBackend final : public cofacil::LanguageBackend {
 public:
  explicit QueueBackend(std::vector<std::optional<std::string>> replies, std::string fallback = "{}")
      : replies_(replies.begin(), replies.end()), fallback_(std::move(fallback)) {}

  cofacil::BackendInfo info() const override { return {"queue", true}; }
  std::string complete(const cofacil::Prompt& prompt) override {
    std::lock_guard lock(mutex_);
    prompts_.push_back(prompt);
    if (replies_.empty()) return fallback_;
    auto next = replies_.front();
    replies_.pop_front();
    if (!next) throw cofacil::Error(cofacil::ErrorCode::BackendUnavailable, "scripted outage");
    return *next;
  }

  std::size_t calls() const {
    std::lock_guard lock(mutex_);
    return prompts_.size();
  }
  std::vector<cofacil::Prompt> prompts() const {
    std::lock_guard lock(mutex_);
    return prompts_;
  }

 private:
  mutable std::mutex mutex_;
  std::deque<std::optional<std::string>> replies_;
  std::string fallback_;
  std::vector<cofacil::Prompt> prompts_;
};

// Always fails with BackendUnavailable.
class DownBackend final : public cofacil::LanguageBackend {
 public:
  cofacil::BackendInfo info() const override { return {"down", false}; }
  std::string complete(const cofacil::Prompt&) override {
    ++calls;
    throw cofacil::Error(cofacil::ErrorCode::BackendUnavailable, "down");
  }
  std::atomic<int> calls{0};
};

// Wraps another backend and counts calls.
class CountingBackend final : public cofacil::LanguageBackend {
 public:
  explicit CountingBackend(cofacil::BackendPtr inner) : inner_(std::move(inner)) {}
  cofacil::BackendInfo info() const override { return inner_->info(); }
  std::string complete(const cofacil::Prompt& prompt) override {
    ++calls;
    return inner_->complete(prompt);
  }
  std::atomic<int> calls{0};

 private:
  cofacil::BackendPtr inner_;
};

}  // namespace fixtures
