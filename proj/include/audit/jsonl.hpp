#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace audit {

// Append-only JSONL writer. Each record goes to the file in a single write()
// so a crash can damage at most the final line.
class JsonlWriter {
 public:
  JsonlWriter() = default;
  explicit JsonlWriter(const std::filesystem::path& path) { open(path); }
  ~JsonlWriter() { close(); }

  JsonlWriter(const JsonlWriter&) = delete;
  JsonlWriter& operator=(const JsonlWriter&) = delete;

  void open(const std::filesystem::path& path) {
    close();
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd_ < 0) throw std::runtime_error("cannot open log for append: " + path.string());
  }

  bool is_open() const { return fd_ >= 0; }

  void append(const nlohmann::json& record) {
    std::string line = record.dump();
    line.push_back('\n');
    if (fd_ < 0) throw std::runtime_error("jsonl writer not open");
    ssize_t n = ::write(fd_, line.data(), line.size());
    if (n != static_cast<ssize_t>(line.size()))
      throw std::runtime_error("short write to jsonl log");
  }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
};

struct JsonlReadResult {
  std::vector<nlohmann::json> records;
  bool truncated_tail = false;  // final line was damaged and dropped
};

// Reads a JSONL file. A malformed final line is treated as a torn append and
// dropped with a flag; malformed interior lines are real corruption.
inline JsonlReadResult read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open jsonl file: " + path.string());
  JsonlReadResult out;
  std::string line;
  std::size_t lineno = 0;
  bool pending_bad = false;
  std::size_t bad_lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (pending_bad)
      throw std::runtime_error(path.string() + ": corrupt record at line " +
                               std::to_string(bad_lineno));
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded()) {
      pending_bad = true;  // tolerated only if nothing follows
      bad_lineno = lineno;
      continue;
    }
    out.records.push_back(std::move(rec));
  }
  out.truncated_tail = pending_bad;
  return out;
}

}  // namespace audit
