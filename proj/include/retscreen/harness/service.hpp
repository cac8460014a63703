#pragma once

#include <memory>
#include <string>
#include <thread>

#include "retscreen/error.hpp"
#include "retscreen/pipeline/screener.hpp"

namespace retscreen::harness {

/// HTTP status for an error code (404 unknown session, 409 wrong state, ...).
int http_status(Errc code);

/// JSON over HTTP in front of a Screener. Routes:
///   POST /sessions                              {"patient_ref", "session_id"?} -> 201
///   POST /sessions/{id}/captures?eye=left|right (PNG body) -> {action, verdict, state}
///   POST /sessions/{id}/screen                  -> report.json
///   GET  /sessions/{id}/report                  -> report.json, 409 before completion
///   GET  /sessions/{id}/assets/{name}
///   POST /sessions/{id}/referral                {"destination"?} -> 201 referral record
///   GET  /healthz
/// Errors are {"error": {"code", "message"}}.
class HttpService {
 public:
  explicit HttpService(std::shared_ptr<pipeline::Screener> screener);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Returns the bound port. Throws kBindError.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop(). Throws kBindError.
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

}  // namespace retscreen::harness
