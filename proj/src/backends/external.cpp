#include "retscreen/backends/external.hpp"

#include <chrono>

#include "retscreen/error.hpp"

namespace retscreen::backends {

namespace {

enum class Attempt { kOk, kRetryable };

}  // namespace

ExternalBackend::ExternalBackend(BackendDescriptor descriptor, ClientOptions options)
    : descriptor_(std::move(descriptor)), options_(options) {
  descriptor_.validate();
  endpoint_ = net::Endpoint::parse(*descriptor_.endpoint);
}

std::string ExternalBackend::next_id() { return descriptor_.model_id + "-" + std::to_string(++counter_); }

std::string ExternalBackend::round_trip(const std::string& payload, const std::string& what) {
  std::lock_guard lock(mutex_);
  const auto deadline = net::Clock::now() + options_.timeout;
  const std::string framed = protocol::frame(payload);
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(framed.data());

  auto timeout = [&] {
    connection_.reset();
    return Error(Errc::kBackendTimeout, "backend '" + descriptor_.model_id + "' timed out on " + what + " after " +
                                            std::to_string(options_.timeout.count()) + " ms");
  };

  for (int attempt = 0; attempt < 2; ++attempt) {
    if (!connection_.valid()) {
      try {
        connection_ = net::connect_to(endpoint_, deadline);
      } catch (const Error& e) {
        if (e.code() == Errc::kBackendTimeout) throw timeout();
        if (attempt == 0) continue;
        throw Error(Errc::kBackendUnavailable,
                    "backend '" + descriptor_.model_id + "' unavailable for " + what + ": " + e.what());
      }
    }
    auto status = net::send_all(connection_.get(), {bytes, framed.size()}, deadline);
    std::array<std::uint8_t, 4> prefix{};
    if (status == net::IoStatus::kOk) status = net::recv_exact(connection_.get(), prefix, deadline);
    std::string reply;
    if (status == net::IoStatus::kOk) {
      const auto length = protocol::decode_length(prefix);
      if (length > protocol::kMaxFrameBytes) {
        connection_.reset();
        throw Error(Errc::kMalformedResponse, "backend '" + descriptor_.model_id + "' sent an oversized frame");
      }
      reply.resize(length);
      status = net::recv_exact(connection_.get(),
                               {reinterpret_cast<std::uint8_t*>(reply.data()), reply.size()}, deadline);
    }
    if (status == net::IoStatus::kOk) return reply;
    if (status == net::IoStatus::kTimeout) throw timeout();
    connection_.reset();
    if (attempt == 1) {
      throw Error(Errc::kBackendUnavailable, "backend '" + descriptor_.model_id + "' dropped the connection during " + what);
    }
  }
  throw Error(Errc::kBackendUnavailable, "backend '" + descriptor_.model_id + "' unavailable for " + what);
}

protocol::Response ExternalBackend::call(protocol::Request request, const std::string& what) {
  {
    std::lock_guard lock(mutex_);
    request.id = next_id();
  }
  const std::string reply = round_trip(protocol::serialize_request(request), what);
  auto response = protocol::parse_response(reply);
  if (response.id != request.id) {
    std::lock_guard lock(mutex_);
    connection_.reset();
    throw Error(Errc::kMalformedResponse, "backend '" + descriptor_.model_id + "' answered id '" + response.id +
                                              "' to request '" + request.id + "'");
  }
  if (response.error) {
    const auto& code = response.error->code;
    const Errc errc = (code == "unknown-model" || code == "unsupported-op" || code == "unsupported-task" ||
                       code == "unsupported")
                          ? Errc::kUnsupported
                          : Errc::kBackendUnavailable;
    throw Error(errc, "backend '" + descriptor_.model_id + "' rejected " + what + ": " + code + ": " +
                          response.error->message);
  }
  return response;
}

ScoreMap ExternalBackend::classify(const PixelGrid& image, Task task) {
  if (!descriptor_.supports(capability_for(task))) {
    throw Error(Errc::kUnsupported, "backend '" + descriptor_.model_id + "' does not support " +
                                        std::string(capability_name(capability_for(task))));
  }
  const auto start = std::chrono::steady_clock::now();
  protocol::Request req;
  req.op = "classify";
  req.task = task;
  req.model = descriptor_.model_id;
  req.image = protocol::encode_image(image, options_.encoding == ClientOptions::Encoding::kPng
                                                ? protocol::ImageEncoding::kPngB64
                                                : protocol::ImageEncoding::kF32LeB64);
  auto response = call(std::move(req), "classify/" + std::string(task_name(task)));
  if (!response.scores) throw Error(Errc::kMalformedResponse, "classify reply lacks scores");
  ScoreMap out;
  out.entries = std::move(*response.scores);
  out.model_id = response.model.empty() ? descriptor_.model_id : response.model;
  validate_score_map(out, task);
  out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ProbabilityMask ExternalBackend::segment(const PixelGrid& image) {
  if (!descriptor_.supports(Capability::kSegment)) {
    throw Error(Errc::kUnsupported, "backend '" + descriptor_.model_id + "' does not support segment");
  }
  protocol::Request req;
  req.op = "segment";
  req.model = descriptor_.model_id;
  req.image = protocol::encode_image(image, options_.encoding == ClientOptions::Encoding::kPng
                                                ? protocol::ImageEncoding::kPngB64
                                                : protocol::ImageEncoding::kF32LeB64);
  auto response = call(std::move(req), "segment");
  if (!response.mask) throw Error(Errc::kMalformedResponse, "segment reply lacks a mask");
  validate_probability_mask(*response.mask, image.width(), image.height());
  return std::move(*response.mask);
}

}  // namespace retscreen::backends
