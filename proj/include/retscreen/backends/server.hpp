#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "retscreen/backends/backend.hpp"
#include "retscreen/backends/socket.hpp"

namespace retscreen::backends {

/// Hosts in-process backends behind the wire protocol (one thread per
/// connection, one request in flight per connection). Protocol violations are
/// answered with error envelopes; the connection stays open.
class BackendServer {
 public:
  /// Registry is fixed at construction: model_id -> backend.
  explicit BackendServer(std::map<std::string, std::shared_ptr<Backend>> registry);
  ~BackendServer();

  BackendServer(const BackendServer&) = delete;
  BackendServer& operator=(const BackendServer&) = delete;

  /// Binds and starts accepting. Returns the bound endpoint (TCP port 0 is
  /// resolved). Throws kBindError.
  net::Endpoint start(const std::string& endpoint);
  void stop();

  /// Handles one request payload and returns the reply payload.
  std::string handle(const std::string& payload) const;

 private:
  void accept_loop();
  void serve_connection(int fd);

  std::map<std::string, std::shared_ptr<Backend>> registry_;
  net::Fd listener_;
  net::Endpoint endpoint_;
  std::thread acceptor_;
  std::atomic<bool> running_{false};
  std::mutex mutex_;
  std::vector<std::thread> workers_;
  std::vector<int> open_fds_;
};

}  // namespace retscreen::backends
