#include "seqstory/jsonl.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "seqstory/error.hpp"

namespace seqstory::io {

namespace fs = std::filesystem;

void for_each_jsonl(const fs::path& path,
                    const std::function<void(const json&, std::size_t)>& visit) {
  std::ifstream in(path);
  if (!in) throw NotFoundError(fmt::format("cannot open {}", path.string()));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(
          fmt::format("{}:{}: malformed JSON ({})", path.string(), line_no, e.what()));
    }
    try {
      visit(row, line_no);
    } catch (const Error& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    } catch (const json::exception& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> rows;
  for_each_jsonl(path, [&](const json& row, std::size_t) { rows.push_back(row); });
  return rows;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += fmt::format(".tmp.{}.{}", ::getpid(), counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write {}", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(fmt::format("short write to {}", tmp.string()));
  }
  fs::rename(tmp, path);
}

std::string dump_line(const json& row) { return row.dump(); }

void write_jsonl_atomic(const fs::path& path, const std::vector<json>& rows) {
  std::string content;
  for (const auto& row : rows) {
    content += dump_line(row);
    content += '\n';
  }
  write_file_atomic(path, content);
}

void append_line_locked(const fs::path& path, std::string_view line) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) {
    throw Error(fmt::format("cannot open {}: {}", path.string(), std::strerror(errno)));
  }
  std::string buf(line);
  buf += '\n';
  if (::flock(fd, LOCK_EX) != 0) {
    ::close(fd);
    throw Error(fmt::format("cannot lock {}", path.string()));
  }
  std::size_t written = 0;
  bool ok = true;
  while (written < buf.size()) {
    ssize_t n = ::write(fd, buf.data() + written, buf.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      ok = false;
      break;
    }
    written += static_cast<std::size_t>(n);
  }
  if (ok) ok = ::fsync(fd) == 0;
  ::flock(fd, LOCK_UN);
  ::close(fd);
  if (!ok) throw Error(fmt::format("append to {} failed", path.string()));
}

}  // namespace seqstory::io
