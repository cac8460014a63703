#include "retscreen/backends/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <memory>

#include "retscreen/error.hpp"

namespace retscreen::backends::net {

Fd& Fd::operator=(Fd&& other) noexcept {
  if (this != &other) {
    reset();
    fd_ = other.release();
  }
  return *this;
}

int Fd::release() noexcept {
  const int fd = fd_;
  fd_ = -1;
  return fd;
}

void Fd::reset() noexcept {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

Endpoint Endpoint::parse(const std::string& text) {
  Endpoint ep;
  if (text.rfind("unix:", 0) == 0) {
    ep.kind = Kind::kUnix;
    ep.path = text.substr(5);
    if (ep.path.empty() || ep.path.size() >= sizeof(sockaddr_un::sun_path)) {
      throw Error(Errc::kConfigInvalid, "invalid unix socket path in endpoint '" + text + "'");
    }
    return ep;
  }
  std::string rest = text.rfind("tcp:", 0) == 0 ? text.substr(4) : text;
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::kConfigInvalid, "endpoint '" + text + "' lacks a port");
  ep.kind = Kind::kTcp;
  ep.host = colon == 0 ? "127.0.0.1" : rest.substr(0, colon);
  try {
    const int port = std::stoi(rest.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw Error(Errc::kConfigInvalid, "endpoint '" + text + "' has an invalid port");
  }
  return ep;
}

std::string Endpoint::to_string() const {
  if (kind == Kind::kUnix) return "unix:" + path;
  return "tcp:" + host + ":" + std::to_string(port);
}

namespace {

int remaining_ms(std::optional<Clock::time_point> deadline) {
  if (!deadline) return -1;
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - Clock::now()).count();
  return left <= 0 ? 0 : static_cast<int>(left);
}

// Waits for the requested readiness; false on timeout.
bool wait_for(int fd, short events, std::optional<Clock::time_point> deadline) {
  for (;;) {
    pollfd p{fd, events, 0};
    const int rc = ::poll(&p, 1, remaining_ms(deadline));
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) return true;  // let the following syscall report the error
  }
}

void set_nonblocking(int fd, bool on) {
  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, on ? (flags | O_NONBLOCK) : (flags & ~O_NONBLOCK));
}

Fd connect_addr(int family, const sockaddr* addr, socklen_t len, const std::string& what,
                Clock::time_point deadline) {
  Fd fd(::socket(family, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!fd.valid()) throw Error(Errc::kBackendUnavailable, "socket(): " + std::string(std::strerror(errno)));
  set_nonblocking(fd.get(), true);
  if (::connect(fd.get(), addr, len) != 0) {
    if (errno != EINPROGRESS && errno != EAGAIN) {
      throw Error(Errc::kBackendUnavailable, "connect " + what + ": " + std::strerror(errno));
    }
    if (!wait_for(fd.get(), POLLOUT, deadline)) {
      throw Error(Errc::kBackendTimeout, "connect " + what + ": timed out");
    }
    int err = 0;
    socklen_t err_len = sizeof(err);
    ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &err_len);
    if (err != 0) throw Error(Errc::kBackendUnavailable, "connect " + what + ": " + std::strerror(err));
  }
  set_nonblocking(fd.get(), false);
  if (family != AF_UNIX) {
    int one = 1;
    ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  return fd;
}

}  // namespace

Fd connect_to(const Endpoint& ep, Clock::time_point deadline) {
  if (ep.kind == Endpoint::Kind::kUnix) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    std::strncpy(addr.sun_path, ep.path.c_str(), sizeof(addr.sun_path) - 1);
    return connect_addr(AF_UNIX, reinterpret_cast<sockaddr*>(&addr), sizeof(addr), ep.to_string(), deadline);
  }
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  if (::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw Error(Errc::kBackendUnavailable, "cannot resolve " + ep.to_string());
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);
  return connect_addr(res->ai_family, res->ai_addr, res->ai_addrlen, ep.to_string(), deadline);
}

Fd listen_on(Endpoint& ep, int backlog) {
  if (ep.kind == Endpoint::Kind::kUnix) {
    Fd fd(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    std::strncpy(addr.sun_path, ep.path.c_str(), sizeof(addr.sun_path) - 1);
    ::unlink(ep.path.c_str());
    if (!fd.valid() || ::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(fd.get(), backlog) != 0) {
      throw Error(Errc::kBindError, "cannot listen on " + ep.to_string() + ": " + std::strerror(errno));
    }
    return fd;
  }
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
    throw Error(Errc::kBindError, "listen host must be an IPv4 address: " + ep.host);
  }
  if (!fd.valid() || ::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(fd.get(), backlog) != 0) {
    throw Error(Errc::kBindError, "cannot listen on " + ep.to_string() + ": " + std::strerror(errno));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len);
  ep.port = ntohs(addr.sin_port);
  return fd;
}

IoStatus send_all(int fd, std::span<const std::uint8_t> bytes, std::optional<Clock::time_point> deadline) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    if (!wait_for(fd, POLLOUT, deadline)) return IoStatus::kTimeout;
    const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL | MSG_DONTWAIT);
    if (n > 0) {
      sent += static_cast<std::size_t>(n);
    } else if (n < 0 && (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK)) {
      continue;
    } else {
      return (errno == EPIPE || errno == ECONNRESET) ? IoStatus::kClosed : IoStatus::kError;
    }
  }
  return IoStatus::kOk;
}

IoStatus recv_exact(int fd, std::span<std::uint8_t> out, std::optional<Clock::time_point> deadline) {
  std::size_t got = 0;
  while (got < out.size()) {
    if (!wait_for(fd, POLLIN, deadline)) return IoStatus::kTimeout;
    const ssize_t n = ::recv(fd, out.data() + got, out.size() - got, MSG_DONTWAIT);
    if (n > 0) {
      got += static_cast<std::size_t>(n);
    } else if (n == 0) {
      return IoStatus::kClosed;
    } else if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) {
      continue;
    } else {
      return errno == ECONNRESET ? IoStatus::kClosed : IoStatus::kError;
    }
  }
  return IoStatus::kOk;
}

void drain_available(int fd) {
  std::uint8_t buf[4096];
  while (::recv(fd, buf, sizeof(buf), MSG_DONTWAIT) > 0) {
  }
}

}  // namespace retscreen::backends::net
