#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace retscreen::backends::net {

/// Owning POSIX file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& other) noexcept : fd_(other.release()) {}
  Fd& operator=(Fd&& other) noexcept;
  ~Fd() { reset(); }

  int get() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  int release() noexcept;
  void reset() noexcept;

 private:
  int fd_ = -1;
};

/// "unix:/path/to.sock", "tcp:host:port" or "host:port".
struct Endpoint {
  enum class Kind { kUnix, kTcp } kind = Kind::kTcp;
  std::string path;  // unix
  std::string host;  // tcp
  std::uint16_t port = 0;

  static Endpoint parse(const std::string& text);
  std::string to_string() const;
};

using Clock = std::chrono::steady_clock;

/// Throws kBackendUnavailable on refusal/unreachable, kBackendTimeout past the deadline.
Fd connect_to(const Endpoint& endpoint, Clock::time_point deadline);

/// Throws kBindError. For TCP port 0, the chosen port is written back.
Fd listen_on(Endpoint& endpoint, int backlog = 16);

enum class IoStatus { kOk, kClosed, kTimeout, kError };

IoStatus send_all(int fd, std::span<const std::uint8_t> bytes, std::optional<Clock::time_point> deadline);
IoStatus recv_exact(int fd, std::span<std::uint8_t> out, std::optional<Clock::time_point> deadline);

/// Reads and discards whatever is immediately available.
void drain_available(int fd);

}  // namespace retscreen::backends::net
