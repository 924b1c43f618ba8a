#include "tractshape/util.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tractshape/error.hpp"

namespace tractshape {

namespace {
std::atomic<bool> g_quiet{false};
std::mutex g_log_mutex;
}  // namespace

int default_thread_count() noexcept {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read error on '" + path + "'");
  return std::move(ss).str();
}

void write_file_bytes(const std::string& path, std::string_view bytes) {
  if (path.empty()) throw Error(ErrorCode::IoFailure, "empty output path");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write error on '" + path + "'");
}

std::string format_g(double value, int significant_digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant_digits, value);
  return buf;
}

void log_warning(std::string_view message) {
  std::lock_guard lock(g_log_mutex);
  std::cerr << "[warn] " << message << '\n';
}

void log_info(std::string_view message) {
  if (g_quiet.load()) return;
  std::lock_guard lock(g_log_mutex);
  std::cerr << "[info] " << message << '\n';
}

void set_quiet(bool quiet) noexcept { g_quiet.store(quiet); }

}  // namespace tractshape
