#pragma once

#include <functional>
#include <string>

namespace cofacil {

/// Returns an ISO-8601 UTC timestamp. Injected so tests can pin time.
using Clock = std::function<std::string()>;

std::string utc_now_iso8601();
Clock system_clock();

/// Deterministic clock: 2000-01-01T00:00:00Z plus one second per call.
Clock counting_clock();

}  // namespace cofacil
