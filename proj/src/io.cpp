#include "minescape/io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>

#include "minescape/error.hpp"

namespace minescape {

namespace {

std::mutex& hook_mutex() {
  static std::mutex m;
  return m;
}

WriteHook& hook_slot() {
  static WriteHook hook;
  return hook;
}

void fire(const fs::path& path, WritePhase phase) {
  WriteHook hook;
  {
    std::lock_guard lock(hook_mutex());
    hook = hook_slot();
  }
  if (hook) hook(path, phase);
}

std::atomic<std::uint64_t> tmp_counter{0};

void write_all(int fd, const char* data, std::size_t size, const fs::path& path) {
  while (size > 0) {
    const ssize_t n = ::write(fd, data, size);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::IoError, "write failed for " + path.string() + ": " + std::strerror(errno));
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
}

}  // namespace

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string(), path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::uint8_t> read_binary_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string(), path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += "." + std::to_string(::getpid()) + "." + std::to_string(tmp_counter++) + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) {
    throw Error(ErrorCode::IoError, "cannot create " + tmp.string() + ": " + std::strerror(errno));
  }
  try {
    write_all(fd, bytes.data(), bytes.size(), tmp);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::fsync(fd);
  ::close(fd);
  fire(path, WritePhase::TempWritten);
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    throw Error(ErrorCode::IoError, "rename failed for " + path.string() + ": " + std::strerror(errno));
  }
  fire(path, WritePhase::Committed);
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void append_line(const fs::path& path, std::string_view line) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string() + ": " + std::strerror(errno));
  }
  std::string buf(line);
  buf += '\n';
  try {
    write_all(fd, buf.data(), buf.size(), path);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::fsync(fd);
  ::close(fd);
  fire(path, WritePhase::Committed);
}

void set_write_hook(WriteHook hook) {
  std::lock_guard lock(hook_mutex());
  hook_slot() = std::move(hook);
}

}  // namespace minescape
