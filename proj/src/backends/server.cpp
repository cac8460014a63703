#include "retscreen/backends/server.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>

#include "retscreen/backends/protocol.hpp"
#include "retscreen/error.hpp"

namespace retscreen::backends {

BackendServer::BackendServer(std::map<std::string, std::shared_ptr<Backend>> registry)
    : registry_(std::move(registry)) {}

BackendServer::~BackendServer() { stop(); }

net::Endpoint BackendServer::start(const std::string& endpoint) {
  endpoint_ = net::Endpoint::parse(endpoint);
  listener_ = net::listen_on(endpoint_);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  return endpoint_;
}

void BackendServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listener_.get(), SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  listener_.reset();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mutex_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
  if (endpoint_.kind == net::Endpoint::Kind::kUnix) ::unlink(endpoint_.path.c_str());
}

void BackendServer::accept_loop() {
  while (running_) {
    pollfd p{listener_.get(), POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    const int fd = ::accept4(listener_.get(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    std::lock_guard lock(mutex_);
    if (!running_) {
      ::close(fd);
      break;
    }
    open_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void BackendServer::serve_connection(int fd) {
  auto reply = [fd](const std::string& payload) {
    const std::string framed = protocol::frame(payload);
    return net::send_all(fd, {reinterpret_cast<const std::uint8_t*>(framed.data()), framed.size()}, std::nullopt) ==
           net::IoStatus::kOk;
  };
  for (;;) {
    std::array<std::uint8_t, 4> prefix{};
    if (net::recv_exact(fd, prefix, std::nullopt) != net::IoStatus::kOk) break;
    const auto length = protocol::decode_length(prefix);
    if (length == 0 || length > protocol::kMaxFrameBytes) {
      // The stream position is unknowable after a bogus length; discard what
      // has arrived and keep listening.
      net::drain_available(fd);
      protocol::Response r;
      r.error = protocol::ErrorBody{"bad-frame", "invalid frame length " + std::to_string(length)};
      if (!reply(protocol::serialize_response(r))) break;
      continue;
    }
    std::string payload(length, '\0');
    if (net::recv_exact(fd, {reinterpret_cast<std::uint8_t*>(payload.data()), payload.size()}, std::nullopt) !=
        net::IoStatus::kOk) {
      break;
    }
    if (!reply(handle(payload))) break;
  }
  std::lock_guard lock(mutex_);
  open_fds_.erase(std::remove(open_fds_.begin(), open_fds_.end(), fd), open_fds_.end());
  ::close(fd);
}

std::string BackendServer::handle(const std::string& payload) const {
  protocol::Response response;
  try {
    const auto request = protocol::parse_request(payload);
    response.id = request.id;
    const auto it = registry_.find(request.model);
    if (it == registry_.end()) {
      throw protocol::ProtocolError{"unknown-model", "no model '" + request.model + "'", request.id};
    }
    PixelGrid image;
    try {
      image = protocol::decode_image(request.image);
    } catch (const Error& e) {
      throw protocol::ProtocolError{"bad-image", e.what(), request.id};
    }
    response.model = request.model;
    if (request.op == "classify") {
      response.scores = it->second->classify(image, *request.task).entries;
    } else {
      response.mask = it->second->segment(image);
    }
  } catch (const protocol::ProtocolError& e) {
    response.id = e.id;
    response.error = protocol::ErrorBody{e.code, e.message};
  } catch (const Error& e) {
    response.error = protocol::ErrorBody{std::string(errc_name(e.code())), e.what()};
  } catch (const std::exception& e) {
    response.error = protocol::ErrorBody{"internal", e.what()};
  }
  return protocol::serialize_response(response);
}

}  // namespace retscreen::backends
