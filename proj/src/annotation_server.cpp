#include <httplib.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "seqstory/annotation.hpp"
#include "seqstory/error.hpp"

namespace seqstory::annotation {

namespace {

int status_for(const Error& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return 400;
  if (dynamic_cast<const AuthError*>(&e)) return 401;
  if (dynamic_cast<const NotFoundError*>(&e)) return 404;
  if (dynamic_cast<const ConflictError*>(&e)) return 409;
  if (dynamic_cast<const CapacityError*>(&e)) return 503;
  return 500;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind,
                std::string_view message) {
  send_json(res, status, json{{"error", {{"kind", kind}, {"message", message}}}});
}

json progress_json(const Progress& p) {
  json j{{"rated", p.rated}, {"total", p.total}, {"complete", p.complete()}};
  if (p.complete()) j["completion_code"] = p.completion_code;
  return j;
}

// Runs `fn`, mapping toolkit errors to JSON error responses.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, status_for(e), e.kind(), e.what());
  } catch (const std::exception& e) {
    spdlog::error("annotation server: {}", e.what());
    send_error(res, 500, "internal", "internal error");
  }
}

}  // namespace

struct Server::Impl {
  Service& service;
  ServerOptions options;
  httplib::Server http;
  int port = 0;

  Impl(Service& s, ServerOptions o) : service(s), options(std::move(o)) { routes(); }

  void routes() {
    http.Get("/api/session", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string annotator = req.get_param_value("annotator");
        if (annotator.empty()) throw ValidationError("query parameter 'annotator' is required");
        const Session s = service.create_session(annotator);
        json body = service.session_view(s);
        body["progress"] = progress_json(service.progress(s.token));
        send_json(res, 200, body);
      });
    });

    http.Post("/api/rating", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        json body;
        try {
          body = json::parse(req.body);
        } catch (const json::exception&) {
          throw ValidationError("request body is not JSON");
        }
        if (!body.is_object() || !body.contains("session_token") ||
            !body.contains("example_id") || !body.contains("likert") ||
            !body["session_token"].is_string() || !body["example_id"].is_string() ||
            !body["likert"].is_number_integer()) {
          throw ValidationError("expected {session_token, example_id, likert}");
        }
        const Progress p = service.submit_rating(body["session_token"].get<std::string>(),
                                                 body["example_id"].get<std::string>(),
                                                 body["likert"].get<int>());
        send_json(res, 200, json{{"status", "stored"}, {"progress", progress_json(p)}});
      });
    });

    http.Get("/api/progress", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        send_json(res, 200, progress_json(service.progress(req.get_param_value("session"))));
      });
    });

    http.Get("/api/export", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string auth = req.get_header_value("Authorization");
        if (options.admin_token.empty() || auth != "Bearer " + options.admin_token) {
          throw AuthError("admin token required");
        }
        ExportFilter filter;
        if (req.has_param("annotator")) filter.annotator_id = req.get_param_value("annotator");
        if (req.has_param("is_gold")) {
          const std::string v = req.get_param_value("is_gold");
          if (v != "true" && v != "false") throw ValidationError("is_gold must be true or false");
          filter.is_gold = v == "true";
        }
        res.status = 200;
        res.set_content(export_jsonl(service.export_rows(filter)), "application/x-ndjson");
      });
    });

    if (!options.static_dir.empty()) {
      if (!http.set_mount_point("/", options.static_dir.string())) {
        throw NotFoundError(
            fmt::format("static directory {} does not exist", options.static_dir.string()));
      }
    }
  }
};

Server::Server(Service& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {}

Server::~Server() { stop(); }

int Server::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(o.host);
  } else if (impl_->http.bind_to_port(o.host, o.port)) {
    impl_->port = o.port;
  } else {
    impl_->port = -1;
  }
  if (impl_->port <= 0) throw Error(fmt::format("cannot bind {}:{}", o.host, o.port));
  return impl_->port;
}

void Server::run() {
  spdlog::info("annotation service listening on {}:{}", impl_->options.host, impl_->port);
  impl_->http.listen_after_bind();
}

void Server::stop() {
  if (impl_) impl_->http.stop();
}

}  // namespace seqstory::annotation
