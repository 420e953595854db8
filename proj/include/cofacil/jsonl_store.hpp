#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace cofacil {

/// Append-only JSON Lines file. Each append is written with a single
/// write(2) and fsync'd before returning. Opening drops a torn final line.
class JsonlAppender {
 public:
  explicit JsonlAppender(std::filesystem::path path);
  ~JsonlAppender();
  JsonlAppender(const JsonlAppender&) = delete;
  JsonlAppender& operator=(const JsonlAppender&) = delete;

  void append(const nlohmann::json& record);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  std::mutex mutex_;
};

/// Reads every complete record. A torn final line (crash mid-append) is
/// ignored; a corrupt line elsewhere throws CorruptArtifact.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

/// Write-to-temp then rename, so readers see either the old or new file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace cofacil
