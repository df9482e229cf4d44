#include "ptseg/service.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "ptseg/base64.hpp"
#include "ptseg/image_io.hpp"

namespace ptseg {

using nlohmann::json;

namespace {

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input:
    case ErrorKind::invalid_dataset:
    case ErrorKind::empty_mask: return 400;
    case ErrorKind::not_found: return 404;
    case ErrorKind::precondition: return 409;
    case ErrorKind::unsupported_capability: return 422;
    case ErrorKind::transport:
    case ErrorKind::protocol: return 502;
  }
  return 500;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message, const json& extra = json::object()) {
  json e{{"code", code}, {"message", message}};
  e.update(extra);
  send_json(res, status, {{"error", e}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  auto j = json::parse(req.body, nullptr, false);
  require(!j.is_discarded() && j.is_object(), ErrorKind::invalid_input,
          "request body must be a JSON object");
  return j;
}

int parse_int(const std::string& text, const char* what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == text.size() && !text.empty(), ErrorKind::invalid_input,
          std::string("bad ") + what + " '" + text + "'");
  return v;
}

PointLabel parse_label(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "positive") return PointLabel::positive;
    if (s == "negative") return PointLabel::negative;
  } else if (j.is_number_integer()) {
    const auto v = j.get<int>();
    if (v == 1) return PointLabel::positive;
    if (v == 0) return PointLabel::negative;
  }
  fail(ErrorKind::invalid_input, "label must be \"positive\", \"negative\", 1 or 0");
}

json edit_json(const EditResult& r) {
  const auto png = encode_indexed_png(r.preview);
  return {{"point_id", r.point_id}, {"frame", r.frame}, {"mask_png", base64_encode(png)}};
}

}  // namespace

struct AnnotationService::Impl {
  ServiceOptions options;
  SessionStore store;
  httplib::Server server;

  explicit Impl(ServiceOptions o) : options(std::move(o)), store(options.store) { routes(); }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  // Wraps a handler so engine errors become JSON error replies.
  static httplib::Server::Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const LimitExceeded& e) {
        send_error(res, 413, "limit_exceeded", e.what(), {{"limit", e.limit()}});
      } catch (const Error& e) {
        send_error(res, status_for(e.kind()), std::string(to_string(e.kind())), e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, "invalid_input", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  std::shared_ptr<Session> session(const httplib::Request& req) {
    return store.get(req.matches[1].str());
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    CreateRequest r;
    r.name = body.value("name", "");
    if (body.contains("config")) r.config = body.at("config").get<PipelineConfig>();
    if (body.contains("backend")) r.backend = body.at("backend").get<std::string>();
    if (body.contains("scene")) r.scene = body.at("scene").get<SceneSpec>();
    if (body.contains("dataset")) {
      r.dataset_root = body.at("dataset").at("root").get<std::string>();
      r.sequence = body.at("dataset").at("sequence").get<std::string>();
    }
    if (body.contains("frames")) {
      const auto& frames = body.at("frames");
      require(frames.is_array(), ErrorKind::invalid_input, "frames must be an array");
      const auto limit = static_cast<std::size_t>(store.options().max_frames);
      if (frames.size() > limit) throw LimitExceeded("upload exceeds the frame limit", limit);
      int index = 0;
      for (const auto& f : frames) r.frames.push_back(decode_image(base64_decode(f.get<std::string>()), index++));
      require(!r.frames.empty(), ErrorKind::invalid_input, "a session needs at least one frame");
    }
    const auto s = store.create(std::move(r));
    send_json(res, 201, s->summary());
  }

  void routes() {
    server.set_payload_max_length(options.max_body_bytes);
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 413) {
        send_error(res, 413, "limit_exceeded", "request body too large");
      } else if (res.status == 404) {
        send_error(res, 404, "not_found", "no such endpoint");
      }
    });

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) { create(req, res); }));
    server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      json list = json::array();
      for (const auto& id : store.ids()) list.push_back(store.get(id)->summary());
      send_json(res, 200, {{"sessions", list}});
    }));
    server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, session(req)->summary());
    }));
    server.Get(R"(/sessions/([^/]+)/frames/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto s = session(req);
      const auto png = encode_png(s->frame(parse_int(req.matches[2].str(), "frame")));
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    }));
    server.Get(R"(/sessions/([^/]+)/points)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, session(req)->points_json());
    }));
    server.Post(R"(/sessions/([^/]+)/points)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto s = session(req);
      const auto body = parse_body(req);
      const auto r = s->add_point(body.at("frame").get<int>(),
                                  {body.at("x").get<double>(), body.at("y").get<double>()},
                                  parse_label(body.at("label")),
                                  {body.value("object", std::uint32_t{1})});
      send_json(res, 201, edit_json(r));
    }));
    server.Delete(R"(/sessions/([^/]+)/points/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto s = session(req);
      const auto pid = static_cast<std::uint64_t>(parse_int(req.matches[2].str(), "point id"));
      std::optional<int> frame;
      if (req.has_param("frame")) frame = parse_int(req.get_param_value("frame"), "frame");
      send_json(res, 200, edit_json(s->remove_point(pid, frame)));
    }));
    server.Post(R"(/sessions/([^/]+)/propagate)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto s = session(req);
      const auto body = parse_body(req);
      s->start_propagation(body.value("from", 0));
      send_json(res, 202, s->summary().at("propagation"));
    }));
    server.Get(R"(/sessions/([^/]+)/propagate)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, session(req)->summary().at("propagation"));
    }));
    server.Get(R"(/sessions/([^/]+)/masks/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto s = session(req);
      const int frame = parse_int(req.matches[2].str(), "frame");
      const auto m = s->mask(frame);
      require(m.has_value(), ErrorKind::not_found, "frame " + std::to_string(frame) + " has no mask yet");
      const auto png = encode_indexed_png(*m);
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    }));
    server.Get(R"(/sessions/([^/]+)/export)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto s = session(req);
      const auto tar = s->export_archive();
      res.set_header("Content-Disposition", "attachment; filename=\"" + s->name() + ".tar\"");
      res.set_content(std::string(tar.begin(), tar.end()), "application/x-tar");
    }));
    server.Post(R"(/sessions/([^/]+)/undo)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto s = session(req);
      require(s->undo(), ErrorKind::precondition, "nothing to undo");
      send_json(res, 200, s->summary());
    }));
    server.Post(R"(/sessions/([^/]+)/redo)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto s = session(req);
      require(s->redo(), ErrorKind::precondition, "nothing to redo");
      send_json(res, 200, s->summary());
    }));
  }
};

AnnotationService::AnnotationService(ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}

AnnotationService::~AnnotationService() { stop(); }

int AnnotationService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    require(p > 0, ErrorKind::transport, "cannot bind " + host);
    return p;
  }
  require(impl_->server.bind_to_port(host, port), ErrorKind::transport,
          "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void AnnotationService::listen() { impl_->server.listen_after_bind(); }

void AnnotationService::stop() { impl_->server.stop(); }

SessionStore& AnnotationService::store() { return impl_->store; }

}  // namespace ptseg
