// Writes the shared backend-protocol fixture set: NNN.request.bin and
// NNN.response.bin (both framed) plus index.json. Responses come from the
// in-process reference backend, so any conforming server must reproduce them
// byte for byte.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <json.hpp>

#include "retscreen/backends/protocol.hpp"
#include "retscreen/backends/reference.hpp"
#include "retscreen/backends/server.hpp"
#include "retscreen/harness/synth.hpp"
#include "retscreen/imaging/codec.hpp"
#include "retscreen/imaging/transform.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace retscreen;
namespace proto = backends::protocol;

namespace {

struct Fixture {
  std::string description;
  std::string transport;  // "payload": framed JSON request; "raw": arbitrary bytes
  std::string request;    // payload (for "payload") or raw bytes
  std::string response;   // payload
};

PixelGrid mini_fundus(std::uint64_t seed, std::vector<harness::PlantedLesion> lesions,
                      harness::Degradation degradation = harness::Degradation::kNone) {
  harness::FundusRecipe r;
  r.size = 32;
  r.center_x = 16.0;
  r.center_y = 16.0;
  r.radius = 14.0;
  r.vessel_count = 2;
  r.blur_radius = 1;
  r.lesions = std::move(lesions);
  r.degradation = degradation;
  r.seed = seed;
  return harness::render_fundus(r).image;
}

PixelGrid gray_ramp() {
  std::vector<float> v(32 * 24);
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 32; ++x) v[static_cast<std::size_t>(y * 32 + x)] = static_cast<float>((x + y) / 54.0);
  }
  return PixelGrid(32, 24, 1, std::move(v));
}

PixelGrid noise() {
  std::mt19937_64 rng(7);
  std::vector<float> v(16 * 16 * 3);
  for (auto& x : v) x = static_cast<float>(rng() >> 40) / static_cast<float>(1 << 24);
  return PixelGrid(16, 16, 3, std::move(v));
}

std::string request_json(const std::string& id, const std::string& op, std::optional<backends::Task> task,
                         const std::string& model, const PixelGrid& image, proto::ImageEncoding enc) {
  return proto::serialize_request({id, op, task, model, proto::encode_image(image, enc)});
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: gen_protocol_fixtures OUT_DIR\n";
    return 2;
  }
  const fs::path out = argv[1];
  fs::create_directories(out);

  backends::BackendServer server({{"reference-v1", std::make_shared<backends::ReferenceBackend>()}});
  std::vector<Fixture> fixtures;
  auto add = [&](const std::string& desc, const std::string& payload) {
    fixtures.push_back({desc, "payload", payload, server.handle(payload)});
  };

  const std::vector<std::pair<std::string, PixelGrid>> images = {
      {"clean fundus", mini_fundus(1, {})},
      {"fundus with bright lesion", mini_fundus(2, {{12.0, 14.0, 2.0, 0.5, true}})},
      {"fundus with dark lesion", mini_fundus(3, {{19.0, 17.0, 2.0, 0.5, false}})},
      {"blurred fundus", mini_fundus(4, {}, harness::Degradation::kBlur)},
      {"dark frame", PixelGrid(32, 32, 3, std::vector<float>(32 * 32 * 3, 0.02f))},
      {"grayscale ramp 32x24", gray_ramp()},
      {"uniform noise 16x16", noise()},
  };
  const std::vector<std::pair<std::string, std::optional<backends::Task>>> ops = {
      {"classify", backends::Task::kQuality},
      {"classify", backends::Task::kPvi},
      {"classify", backends::Task::kEdd},
      {"segment", std::nullopt},
  };
  int n = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t k = 0; k < ops.size(); ++k) {
      const auto enc = (i + k) % 2 == 0 ? proto::ImageEncoding::kF32LeB64 : proto::ImageEncoding::kPngB64;
      const auto& [op, task] = ops[k];
      const std::string what = task ? op + " " + std::string(backends::task_name(*task)) : op;
      const std::string id = "reference-v1-" + std::to_string(++n);
      add(what + ", " + images[i].first + (enc == proto::ImageEncoding::kPngB64 ? ", png-b64" : ", f32le-b64"),
          request_json(id, op, task, "reference-v1", images[i].second, enc));
    }
  }
  // The two lesion images again with the other encoding.
  for (std::size_t i = 1; i <= 2; ++i) {
    for (std::size_t k = 0; k < ops.size(); ++k) {
      const auto enc = (i + k) % 2 == 0 ? proto::ImageEncoding::kPngB64 : proto::ImageEncoding::kF32LeB64;
      const auto& [op, task] = ops[k];
      const std::string what = task ? op + " " + std::string(backends::task_name(*task)) : op;
      const std::string id = "reference-v1-" + std::to_string(++n);
      add(what + ", " + images[i].first + (enc == proto::ImageEncoding::kPngB64 ? ", png-b64" : ", f32le-b64"),
          request_json(id, op, task, "reference-v1", images[i].second, enc));
    }
  }

  const auto& img = images[0].second;
  auto base = json::parse(request_json("err-1", "classify", backends::Task::kPvi, "reference-v1", img,
                                       proto::ImageEncoding::kF32LeB64));
  auto variant = [&](const std::string& id, auto&& edit) {
    auto j = base;
    j["id"] = id;
    edit(j);
    return j.dump();
  };
  add("unknown model", variant("err-1", [](json& j) { j["model"] = "no-such-model"; }));
  add("unsupported op", variant("err-2", [](json& j) { j["op"] = "train"; }));
  add("unsupported task", variant("err-3", [](json& j) { j["task"] = "visual-acuity"; }));
  add("classify without task", variant("err-4", [](json& j) { j["task"] = nullptr; }));
  add("missing id", variant("err-5", [](json& j) { j.erase("id"); }));
  add("missing image", variant("err-6", [](json& j) { j.erase("image"); }));
  add("unknown image encoding", variant("err-7", [](json& j) { j["image"]["encoding"] = "raw-b64"; }));
  add("invalid base64", variant("err-8", [](json& j) { j["image"]["data"] = "@@not base64@@"; }));
  add("pixel count mismatch", variant("err-9", [](json& j) { j["image"]["w"] = 31; }));
  add("png data that is not png",
      variant("err-10", [](json& j) {
        j["image"]["encoding"] = "png-b64";
        j["image"]["data"] = proto::base64_encode(std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6, 7, 8});
      }));
  {
    std::vector<float> bad(4 * 4 * 3, 0.5f);
    bad[5] = 1.5f;
    add("pixel value outside [0,1]",
        variant("err-11", [&](json& j) {
          j["image"] = {{"w", 4}, {"h", 4}, {"c", 3}, {"encoding", "f32le-b64"}, {"data", proto::encode_f32le(bad)}};
        }));
  }
  add("payload is not JSON", "this is not json");
  fixtures.push_back({"zero-length frame", "raw", std::string(4, '\0'), {}});
  {
    const auto prefix = proto::encode_length(proto::kMaxFrameBytes + 1);
    fixtures.push_back({"frame length above limit", "raw", std::string(prefix.begin(), prefix.end()), {}});
  }

  // Frame-level fixtures are answered by a live server.
  const auto ep = server.start("tcp:127.0.0.1:0");
  for (auto& f : fixtures) {
    if (f.transport != "raw") continue;
    auto fd = backends::net::connect_to(ep, std::chrono::steady_clock::now() + std::chrono::seconds(5));
    backends::net::send_all(fd.get(), {reinterpret_cast<const std::uint8_t*>(f.request.data()), f.request.size()},
                            std::nullopt);
    std::array<std::uint8_t, 4> prefix{};
    backends::net::recv_exact(fd.get(), prefix, std::chrono::steady_clock::now() + std::chrono::seconds(5));
    std::string payload(proto::decode_length(prefix), '\0');
    backends::net::recv_exact(fd.get(), {reinterpret_cast<std::uint8_t*>(payload.data()), payload.size()},
                              std::chrono::steady_clock::now() + std::chrono::seconds(5));
    f.response = payload;
  }
  server.stop();

  json index = json::array();
  for (std::size_t i = 0; i < fixtures.size(); ++i) {
    char name[8];
    std::snprintf(name, sizeof(name), "%03zu", i + 1);
    const auto& f = fixtures[i];
    const std::string req = f.transport == "raw" ? f.request : proto::frame(f.request);
    std::ofstream(out / (std::string(name) + ".request.bin"), std::ios::binary) << req;
    std::ofstream(out / (std::string(name) + ".response.bin"), std::ios::binary) << proto::frame(f.response);
    index.push_back({{"name", name}, {"description", f.description}, {"transport", f.transport}});
  }
  std::ofstream(out / "index.json") << index.dump(2) << "\n";
  std::cout << fixtures.size() << " fixtures written to " << out.string() << "\n";
  return 0;
}
