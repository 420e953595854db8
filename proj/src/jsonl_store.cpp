#include "cofacil/jsonl_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cofacil/error.hpp"

namespace cofacil {
namespace {

void write_all(int fd, const std::string& data, const std::filesystem::path& path) {
  std::size_t written = 0;
  while (written < data.size()) {
    const ssize_t n = ::write(fd, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Io, "write " + path.string() + ": " + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
}

}  // namespace

JsonlAppender::JsonlAppender(std::filesystem::path path) : path_(std::move(path)) {
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(ErrorCode::Io, "open " + path_.string() + ": " + std::strerror(errno));
  // A crash mid-append leaves an unterminated last line; cut it off so the
  // next record does not get glued onto it.
  const off_t size = ::lseek(fd_, 0, SEEK_END);
  off_t keep = size;
  char c = '\n';
  while (keep > 0 && ::pread(fd_, &c, 1, keep - 1) == 1 && c != '\n') --keep;
  if (keep != size && ::ftruncate(fd_, keep) != 0) {
    const int err = errno;
    ::close(fd_);
    throw Error(ErrorCode::Io, "truncate " + path_.string() + ": " + std::strerror(err));
  }
}

JsonlAppender::~JsonlAppender() {
  if (fd_ >= 0) ::close(fd_);
}

void JsonlAppender::append(const nlohmann::json& record) {
  std::string line = record.dump();
  line.push_back('\n');
  std::lock_guard lock(mutex_);
  write_all(fd_, line, path_);
  ::fsync(fd_);
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::vector<nlohmann::json> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();

  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < content.size()) {
    const auto end = content.find('\n', start);
    const bool complete = end != std::string::npos;
    const std::string line = content.substr(start, complete ? end - start : std::string::npos);
    ++line_no;
    start = complete ? end + 1 : content.size();
    if (line.empty()) continue;
    auto record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded()) {
      if (!complete) break;  // torn tail
      throw Error(ErrorCode::CorruptArtifact, path.string() + ": bad record on line " + std::to_string(line_no));
    }
    out.push_back(std::move(record));
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::Io, "open " + tmp + ": " + std::strerror(errno));
  try {
    write_all(fd, content, tmp);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::fsync(fd);
  ::close(fd);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "rename " + tmp + ": " + ec.message());
}

}  // namespace cofacil
