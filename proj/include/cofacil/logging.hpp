#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <spdlog/logger.h>

namespace cofacil {

/// Process-wide logger. Transcript text must never be passed to it; log
/// text_digest() of the text instead.
std::shared_ptr<spdlog::logger> logger();
void set_logger(std::shared_ptr<spdlog::logger> replacement);

/// First 16 hex chars of SHA-256; stable across runs and platforms.
std::string text_digest(std::string_view text);

}  // namespace cofacil
