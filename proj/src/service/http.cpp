#include <httplib.h>

#include <atomic>

#include "ranagent/service/core.hpp"

namespace ranagent::service {

namespace {

void send(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

Params params_of(const httplib::Request& req) {
  Params out;
  for (const auto& [k, v] : req.params) out[k] = v;  // multimap: first value wins below
  return out;
}

std::uint64_t resume_point(const httplib::Request& req) {
  // Last-Event-ID names the last event the client saw; ?from is inclusive.
  auto parse = [](const std::string& text) -> std::optional<std::uint64_t> {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(text, &used);
      if (used != text.size()) return std::nullopt;
      return v;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };
  if (req.has_header("Last-Event-ID")) {
    if (auto v = parse(req.get_header_value("Last-Event-ID"))) return *v + 1;
  }
  if (req.has_param("from")) {
    auto v = parse(req.get_param_value("from"));
    if (!v) throw Error(Errc::invalid_argument, "from must be a non-negative integer", "from");
    return std::max<std::uint64_t>(*v, 1);
  }
  return 1;
}

}  // namespace

struct HttpServer::Impl {
  ServiceCore& core;
  httplib::Server server;
  std::atomic<bool> stopping{false};

  explicit Impl(ServiceCore& c) : core(c) { routes(); }

  void routes() {
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"status\":\"ok\"}\n", "application/json");
    });
    server.Post("/runs", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, core.create_run(req.body));
    });
    server.Get("/runs", [this](const httplib::Request&, httplib::Response& res) {
      Json list = Json::array();
      for (const auto& r : core.orchestrator().runs()) {
        list.push_back(Json{{"run_id", r->id()},
                            {"mode", std::string(to_string(r->mode()))},
                            {"status", std::string(orchestrator::to_string(r->status()))}});
      }
      res.set_content(canonical_dump(Json{{"runs", list}}) + "\n", "application/json");
    });
    server.Get(R"(/runs/([A-Za-z0-9._-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, core.get_run(req.matches[1]));
    });
    server.Get(R"(/runs/([A-Za-z0-9._-]+)/trace)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, core.get_trace(req.matches[1]));
    });
    server.Get(R"(/runs/([A-Za-z0-9._-]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      stream_events(req, res);
    });
    server.Get("/approvals", [this](const httplib::Request&, httplib::Response& res) {
      send(res, core.list_approvals());
    });
    server.Post(R"(/approvals/([A-Za-z0-9._-]+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, core.decide_approval(req.matches[1], req.body));
    });
    server.Get("/kpi", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, core.query_kpi(params_of(req)));
    });
    server.Get("/deviations", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, core.query_deviations(params_of(req)));
    });
    server.Get("/topology", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, core.topology(params_of(req)));
    });
    server.Get("/scenarios", [this](const httplib::Request&, httplib::Response& res) {
      send(res, core.list_scenarios());
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send(res, error_response(e));
      } catch (const std::exception& e) {
        send(res, error_response(Error(Errc::internal, e.what(), "")));
      }
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 404) send(res, error_response(Error(Errc::not_found, "no such route", "")));
    });
  }

  void stream_events(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto run = core.run(id);
    if (!run) return send(res, error_response(Error(Errc::not_found, "unknown run " + id, "run_id")));
    std::uint64_t next = 0;
    try {
      next = resume_point(req);
    } catch (const Error& e) {
      return send(res, error_response(e));
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [this, run, next](std::size_t, httplib::DataSink& sink) mutable {
          while (!stopping) {
            // Read terminal before the events so the last batch is complete.
            const bool done = run->terminal();
            for (const auto& e : run->events_from(next)) {
              const auto frame = format_sse(e);
              if (!sink.write(frame.data(), frame.size())) return false;
              next = e.seq + 1;
            }
            if (done) {
              const std::string end = "event: end\ndata: {}\n\n";
              sink.write(end.data(), end.size());
              sink.done();
              return true;
            }
            run->wait_for_event(next, std::chrono::seconds(1));
          }
          return false;
        });
  }
};

HttpServer::HttpServer(ServiceCore& core) : impl_(std::make_unique<Impl>(core)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  impl_->stopping = true;
  impl_->server.stop();
}

}  // namespace ranagent::service
