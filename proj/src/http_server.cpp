#include <httplib.h>

#include "fitodx/service.hpp"

namespace fitodx {

struct HttpServer::Impl {
    explicit Impl(SessionService& s) : service(s) {}
    SessionService& service;
    httplib::Server server;
};

namespace {

void send(httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
}

}  // namespace

HttpServer::HttpServer(SessionService& service) : impl_(std::make_unique<Impl>(service)) {
    auto& srv = impl_->server;
    auto& svc = impl_->service;

    srv.Get("/v1/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });
    srv.Post("/v1/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.create_session(req.body));
    });
    srv.Post(R"(/v1/sessions/([^/]+)/answers)", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.answer(req.matches[1], req.body));
    });
    srv.Get(R"(/v1/sessions/([^/]+)/explanation)", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.explanation(req.matches[1]));
    });
    srv.Get(R"(/v1/sessions/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.get_session(req.matches[1]));
    });
    srv.Get("/v1/kb", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.kb_summary()); });
    srv.Get(R"(/v1/images/(.+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.image(req.matches[1]));
    });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace fitodx
