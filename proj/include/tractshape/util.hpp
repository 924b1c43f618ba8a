#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdint>
#include <cstring>
#include <exception>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <vector>

namespace tractshape {

inline constexpr std::string_view kToolName = "tractshape";
inline constexpr std::string_view kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Seeding
//
// Every random stream is derived from the user seed plus a tuple of counters
// (subject index, cluster index, epoch, ...) through SplitMix64 mixing, so a
// single stream can be reproduced without replaying any other.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

template <typename... Counters>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Counters... counters) noexcept {
  std::uint64_t h = splitmix64(seed);
  ((h = splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(counters) + 0x632BE59BD9B4E019ULL))), ...);
  return h;
}

// Domain tags keep streams for different purposes apart.
enum class SeedDomain : std::uint64_t {
  Cluster = 1,
  Score = 2,
  Split = 3,
  Pairing = 4,
  TrainSample = 5,
  EvalSample = 6,
  Init = 7,
  Folds = 8,
};

// ---------------------------------------------------------------------------
// Parallelism

int default_thread_count() noexcept;

/// Runs body(i) for i in [0, n) on up to `threads` workers. The first
/// exception thrown by any iteration is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Little-endian binary helpers (host-independent)

template <typename T>
void append_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  static_assert(sizeof(T) == sizeof(U));
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename T>
T load_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(p[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

// ---------------------------------------------------------------------------
// Files

std::string read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::string_view bytes);

/// printf-style "%.<digits>g" formatting.
std::string format_g(double value, int significant_digits = 6);

void log_warning(std::string_view message);
void log_info(std::string_view message);
/// Silences log_info (warnings still print).
void set_quiet(bool quiet) noexcept;

}  // namespace tractshape
