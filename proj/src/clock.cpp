#include "cofacil/clock.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <memory>

namespace cofacil {
namespace {

std::string format_utc(std::time_t t) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string utc_now_iso8601() { return format_utc(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())); }

Clock system_clock() { return [] { return utc_now_iso8601(); }; }

Clock counting_clock() {
  auto tick = std::make_shared<std::atomic<long long>>(0);
  return [tick] { return format_utc(static_cast<std::time_t>(946684800 + tick->fetch_add(1))); };
}

}  // namespace cofacil
