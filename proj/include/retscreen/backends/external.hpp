#pragma once

#include <cstdint>
#include <mutex>
#include <string>

#include "retscreen/backends/backend.hpp"
#include "retscreen/backends/protocol.hpp"
#include "retscreen/backends/socket.hpp"

namespace retscreen::backends {

/// Protocol client for an out-of-process backend. Requests on one client are
/// serialized over a single connection; ids are "<model>-<n>".
///
/// A failed connect or a connection dropped mid-request is retried once on a
/// fresh connection. Timeouts are not retried; the connection is discarded so
/// a late reply cannot be mistaken for the next one.
class ExternalBackend final : public Backend {
 public:
  ExternalBackend(BackendDescriptor descriptor, ClientOptions options);

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  ScoreMap classify(const PixelGrid& image, Task task) override;
  ProbabilityMask segment(const PixelGrid& image) override;

  /// Sends one already-serialized request payload and returns the raw reply
  /// payload (no length prefix). Used by conformance tooling.
  std::string round_trip(const std::string& payload, const std::string& what);

 private:
  protocol::Response call(protocol::Request request, const std::string& what);
  std::string next_id();

  BackendDescriptor descriptor_;
  ClientOptions options_;
  net::Endpoint endpoint_;
  std::mutex mutex_;
  net::Fd connection_;
  std::uint64_t counter_ = 0;
};

}  // namespace retscreen::backends
