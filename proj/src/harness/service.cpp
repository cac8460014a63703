#include "retscreen/harness/service.hpp"

#include <httplib.h>

#include <json.hpp>

namespace retscreen::harness {

using nlohmann::json;

int http_status(Errc code) {
  switch (code) {
    case Errc::kNotFound: return 404;
    case Errc::kInvalidArgument:
    case Errc::kDecodeError:
    case Errc::kBadGamma:
    case Errc::kGeometryMismatch:
    case Errc::kNoFov: return 400;
    case Errc::kInvalidState:
    case Errc::kNotEligible:
    case Errc::kAlreadyReferred:
    case Errc::kIdCollision:
    case Errc::kNotGated: return 409;
    case Errc::kBackendUnavailable:
    case Errc::kUnsupported: return 503;
    case Errc::kBackendTimeout: return 504;
    default: return 500;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

std::string content_type_for(const std::string& name) {
  auto ends = [&](std::string_view suffix) {
    return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends(".png")) return "image/png";
  if (ends(".jpg")) return "image/jpeg";
  if (ends(".json")) return "application/json";
  if (ends(".txt")) return "text/plain; charset=utf-8";
  return "application/octet-stream";
}

json optional_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::kInvalidArgument, "request body must be a JSON object");
  return j;
}

}  // namespace

struct HttpService::Impl {
  std::shared_ptr<pipeline::Screener> screener;
  httplib::Server server;

  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), errc_name(e.code()), e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, errc_name(Errc::kInvalidArgument), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal-error", e.what());
      }
    };
  }

  void mount() {
    server.set_payload_max_length(64u << 20);
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });
    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = optional_body(req);
      std::optional<std::string> id;
      if (body.contains("session_id")) id = body["session_id"].get<std::string>();
      const auto s = screener->create_session(body.value("patient_ref", std::string()), id);
      json eyes = json::array();
      for (auto e : s.header().eyes) eyes.push_back(pipeline::eye_name(e));
      send_json(res, 201,
                {{"session_id", s.id()}, {"state", pipeline::state_name(s.state())}, {"eyes", eyes},
                 {"max_attempts", s.header().max_attempts}});
    }));
    server.Post(R"(/sessions/([A-Za-z0-9._-]+)/captures)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  if (!req.has_param("eye")) throw Error(Errc::kInvalidArgument, "query parameter eye is required");
                  const auto eye = pipeline::parse_eye(req.get_param_value("eye"));
                  const std::string id = req.matches[1];
                  const auto out =
                      screener->submit_capture(id, eye, imaging::Bytes(req.body.begin(), req.body.end()));
                  const auto s = screener->session(id);
                  send_json(res, 200,
                            {{"action", pipeline::next_action_name(out.action)},
                             {"verdict", pipeline::to_json(out.verdict)},
                             {"state", pipeline::state_name(s.state())}});
                }));
    server.Post(R"(/sessions/([A-Za-z0-9._-]+)/screen)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, 200, screener->run_screening(req.matches[1]));
                }));
    server.Get(R"(/sessions/([A-Za-z0-9._-]+)/report)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto s = screener->session(req.matches[1]);
                 if (!s.report()) {
                   send_error(res, 409, errc_name(Errc::kInvalidState),
                              "no report yet (state " + std::string(pipeline::state_name(s.state())) + ")");
                   return;
                 }
                 send_json(res, 200, *s.report());
               }));
    server.Get(R"(/sessions/([A-Za-z0-9._-]+)/assets/([A-Za-z0-9._-]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string name = req.matches[2];
                 const auto bytes = screener->asset(req.matches[1], name);
                 res.status = 200;
                 res.set_content(std::string(bytes.begin(), bytes.end()), content_type_for(name));
               }));
    server.Post(R"(/sessions/([A-Za-z0-9._-]+)/referral)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = optional_body(req);
                  std::optional<std::string> dest;
                  if (body.contains("destination")) dest = body["destination"].get<std::string>();
                  send_json(res, 201, pipeline::to_json(screener->issue_referral(req.matches[1], dest)));
                }));
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        send_error(res, res.status, res.status == 404 ? "not-found" : "http-error", "no such route");
      }
    });
  }
};

HttpService::HttpService(std::shared_ptr<pipeline::Screener> screener) : impl_(std::make_unique<Impl>()) {
  impl_->screener = std::move(screener);
  impl_->mount();
}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::kBindError, "cannot bind " + host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    throw Error(Errc::kBindError, "cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpService::run(const std::string& host, int port) {
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(Errc::kBindError, "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->server.listen_after_bind();
}

void HttpService::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace retscreen::harness
