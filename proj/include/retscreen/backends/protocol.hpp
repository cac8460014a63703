#pragma once

// Backend wire protocol: every message is a 4-byte big-endian length followed
// by one UTF-8 JSON object.
//
//   request  {"id","op":"classify"|"segment","task":"quality"|"pvi"|"edd"|null,
//             "model","image":{"w","h","c","encoding":"png-b64"|"f32le-b64","data"}}
//   response {"id","model","scores":{label:number}}
//          | {"id","model","mask":{"w","h","encoding":"f32le-b64","data"}}
//          | {"id","error":{"code","message"}}
//
// Unknown fields are ignored; the id is always echoed. Serialization is
// canonical (sorted keys, shortest round-trip numbers) so identical replies
// are byte-identical.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retscreen/backends/backend.hpp"

namespace retscreen::backends::protocol {

inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

std::array<std::uint8_t, 4> encode_length(std::uint32_t length);
std::uint32_t decode_length(std::span<const std::uint8_t, 4> prefix);
/// Length prefix + payload.
std::string frame(std::string_view payload);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws kMalformedResponse on invalid input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

enum class ImageEncoding { kPngB64, kF32LeB64 };

struct ImagePayload {
  int width = 0;
  int height = 0;
  int channels = 0;
  ImageEncoding encoding = ImageEncoding::kF32LeB64;
  std::string data;
};

ImagePayload encode_image(const PixelGrid& grid, ImageEncoding encoding);
/// Throws kMalformedResponse when the payload does not match its header.
PixelGrid decode_image(const ImagePayload& payload);

std::string encode_f32le(std::span<const float> values);
std::vector<float> decode_f32le(std::string_view b64, std::size_t expected_count);

struct Request {
  std::string id;
  std::string op;  // "classify" | "segment"
  std::optional<Task> task;
  std::string model;
  ImagePayload image;
};

struct ErrorBody {
  std::string code;
  std::string message;
};

struct Response {
  std::string id;
  std::string model;
  std::optional<std::map<std::string, double>> scores;
  std::optional<ProbabilityMask> mask;
  std::optional<ErrorBody> error;
};

std::string serialize_request(const Request& request);
/// Server side parse; throws ProtocolError with a wire error code.
Request parse_request(std::string_view json_text);

std::string serialize_response(const Response& response);
/// Client side parse; throws kMalformedResponse.
Response parse_response(std::string_view json_text);

/// A protocol violation answered with an error envelope (code e.g. "bad-frame").
struct ProtocolError {
  std::string code;
  std::string message;
  std::string id;
};

}  // namespace retscreen::backends::protocol
