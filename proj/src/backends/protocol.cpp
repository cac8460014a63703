#include "retscreen/backends/protocol.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <json.hpp>

#include "retscreen/error.hpp"
#include "retscreen/imaging/codec.hpp"

namespace retscreen::backends::protocol {

using nlohmann::json;

std::array<std::uint8_t, 4> encode_length(std::uint32_t length) {
  return {static_cast<std::uint8_t>(length >> 24), static_cast<std::uint8_t>(length >> 16),
          static_cast<std::uint8_t>(length >> 8), static_cast<std::uint8_t>(length)};
}

std::uint32_t decode_length(std::span<const std::uint8_t, 4> p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

std::string frame(std::string_view payload) {
  const auto prefix = encode_length(static_cast<std::uint32_t>(payload.size()));
  std::string out(prefix.begin(), prefix.end());
  out.append(payload);
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  if (bytes.empty()) return out;
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(Errc::kMalformedResponse, "base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  if (text.empty()) return out;
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(Errc::kMalformedResponse, "invalid base64 payload");
  std::size_t padding = 0;
  if (text.back() == '=') ++padding;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

std::string encode_f32le(std::span<const float> values) {
  std::vector<std::uint8_t> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return base64_encode(bytes);
}

std::vector<float> decode_f32le(std::string_view b64, std::size_t expected_count) {
  const auto bytes = base64_decode(b64);
  if (bytes.size() != expected_count * 4) {
    throw Error(Errc::kMalformedResponse, "f32le payload holds " + std::to_string(bytes.size() / 4) +
                                              " values, expected " + std::to_string(expected_count));
  }
  std::vector<float> values(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * i + static_cast<std::size_t>(b)]) << (8 * b);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

ImagePayload encode_image(const PixelGrid& grid, ImageEncoding encoding) {
  ImagePayload p;
  p.width = grid.width();
  p.height = grid.height();
  p.channels = grid.channels();
  p.encoding = encoding;
  if (encoding == ImageEncoding::kF32LeB64) {
    p.data = encode_f32le(grid.values());
  } else {
    p.data = base64_encode(imaging::encode_png(grid));
  }
  return p;
}

PixelGrid decode_image(const ImagePayload& p) {
  if (p.width < 1 || p.height < 1 || (p.channels != 1 && p.channels != 3)) {
    throw Error(Errc::kMalformedResponse, "image header has invalid geometry");
  }
  if (p.encoding == ImageEncoding::kF32LeB64) {
    auto values = decode_f32le(p.data, static_cast<std::size_t>(p.width) * static_cast<std::size_t>(p.height) *
                                           static_cast<std::size_t>(p.channels));
    try {
      return PixelGrid(p.width, p.height, p.channels, std::move(values));
    } catch (const Error& e) {
      throw Error(Errc::kMalformedResponse, e.what());
    }
  }
  const auto bytes = base64_decode(p.data);
  PixelGrid grid;
  try {
    grid = imaging::decode(bytes, imaging::ImageFormat::kPng);
  } catch (const Error& e) {
    throw Error(Errc::kMalformedResponse, e.what());
  }
  if (grid.width() != p.width || grid.height() != p.height || grid.channels() != p.channels) {
    throw Error(Errc::kMalformedResponse, "png payload does not match the image header");
  }
  return grid;
}

namespace {

std::string_view encoding_name(ImageEncoding e) {
  return e == ImageEncoding::kPngB64 ? "png-b64" : "f32le-b64";
}

json image_json(const ImagePayload& p) {
  return json{{"w", p.width}, {"h", p.height}, {"c", p.channels}, {"encoding", encoding_name(p.encoding)},
              {"data", p.data}};
}

}  // namespace

std::string serialize_request(const Request& r) {
  json j{{"id", r.id}, {"op", r.op}, {"model", r.model}, {"image", image_json(r.image)}};
  j["task"] = r.task ? json(task_name(*r.task)) : json(nullptr);
  return j.dump();
}

Request parse_request(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError{"bad-frame", "payload is not a JSON object", ""};
  Request r;
  if (j.contains("id") && j["id"].is_string()) r.id = j["id"].get<std::string>();
  if (!j.contains("id") || !j["id"].is_string()) throw ProtocolError{"bad-request", "missing string id", r.id};
  if (!j.contains("op") || !j["op"].is_string()) throw ProtocolError{"bad-request", "missing op", r.id};
  r.op = j["op"].get<std::string>();
  if (r.op != "classify" && r.op != "segment") {
    throw ProtocolError{"unsupported-op", "unsupported op '" + r.op + "'", r.id};
  }
  if (j.contains("task") && !j["task"].is_null()) {
    if (!j["task"].is_string()) throw ProtocolError{"bad-request", "task must be a string or null", r.id};
    try {
      r.task = parse_task(j["task"].get<std::string>());
    } catch (const Error&) {
      throw ProtocolError{"unsupported-task", "unknown task '" + j["task"].get<std::string>() + "'", r.id};
    }
  }
  if (r.op == "classify" && !r.task) throw ProtocolError{"bad-request", "classify requires a task", r.id};
  if (!j.contains("model") || !j["model"].is_string()) throw ProtocolError{"bad-request", "missing model", r.id};
  r.model = j["model"].get<std::string>();
  if (!j.contains("image") || !j["image"].is_object()) throw ProtocolError{"bad-request", "missing image", r.id};
  const json& img = j["image"];
  try {
    r.image.width = img.at("w").get<int>();
    r.image.height = img.at("h").get<int>();
    r.image.channels = img.at("c").get<int>();
    const auto enc = img.at("encoding").get<std::string>();
    if (enc == "png-b64") {
      r.image.encoding = ImageEncoding::kPngB64;
    } else if (enc == "f32le-b64") {
      r.image.encoding = ImageEncoding::kF32LeB64;
    } else {
      throw ProtocolError{"bad-request", "unknown image encoding '" + enc + "'", r.id};
    }
    r.image.data = img.at("data").get<std::string>();
  } catch (const json::exception& e) {
    throw ProtocolError{"bad-request", std::string("image: ") + e.what(), r.id};
  }
  return r;
}

std::string serialize_response(const Response& r) {
  json j{{"id", r.id}};
  if (r.error) {
    j["error"] = json{{"code", r.error->code}, {"message", r.error->message}};
    return j.dump();
  }
  j["model"] = r.model;
  if (r.scores) {
    json scores = json::object();
    for (const auto& [label, v] : *r.scores) scores[label] = v;
    j["scores"] = std::move(scores);
  }
  if (r.mask) {
    j["mask"] = json{{"w", r.mask->width}, {"h", r.mask->height}, {"encoding", "f32le-b64"},
                     {"data", encode_f32le(r.mask->probs)}};
  }
  return j.dump();
}

Response parse_response(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::kMalformedResponse, "response is not a JSON object");
  if (!j.contains("id") || !j["id"].is_string()) throw Error(Errc::kMalformedResponse, "response lacks an id");
  Response r;
  r.id = j["id"].get<std::string>();
  try {
    if (j.contains("model") && j["model"].is_string()) r.model = j["model"].get<std::string>();
    if (j.contains("error")) {
      r.error = ErrorBody{j["error"].at("code").get<std::string>(), j["error"].value("message", "")};
      return r;
    }
    if (j.contains("scores")) {
      std::map<std::string, double> scores;
      for (const auto& [label, v] : j["scores"].items()) {
        if (!v.is_number()) throw Error(Errc::kMalformedResponse, "score for '" + label + "' is not a number");
        scores[label] = v.get<double>();
      }
      r.scores = std::move(scores);
    }
    if (j.contains("mask")) {
      const json& m = j["mask"];
      if (m.at("encoding").get<std::string>() != "f32le-b64") {
        throw Error(Errc::kMalformedResponse, "mask encoding must be f32le-b64");
      }
      ProbabilityMask mask;
      mask.width = m.at("w").get<int>();
      mask.height = m.at("h").get<int>();
      if (mask.width < 1 || mask.height < 1) throw Error(Errc::kMalformedResponse, "mask geometry must be positive");
      mask.probs = decode_f32le(m.at("data").get<std::string>(),
                                static_cast<std::size_t>(mask.width) * static_cast<std::size_t>(mask.height));
      r.mask = std::move(mask);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::kMalformedResponse, std::string("response: ") + e.what());
  }
  if (!r.scores && !r.mask) throw Error(Errc::kMalformedResponse, "response carries neither scores, mask nor error");
  return r;
}

}  // namespace retscreen::backends::protocol
