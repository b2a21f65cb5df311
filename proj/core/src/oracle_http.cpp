#include <spdlog/spdlog.h>

#include <thread>

#include "http_util.hpp"
#include "predictchain/oracle.hpp"

namespace predictchain::oracle {

using nlohmann::json;

struct OracleHttpServer::Impl {
  Impl(Oracle& o, std::string h, int p) : oracle(o), host(std::move(h)), port(p) {}
  Oracle& oracle;
  std::string host;
  int port;
  httplib::Server server;
  std::thread thread;
};

OracleHttpServer::OracleHttpServer(Oracle& oracle, std::string host, int port)
    : impl_(std::make_unique<Impl>(oracle, std::move(host), port)) {
  auto& srv = impl_->server;
  Oracle& o = impl_->oracle;

  srv.Get("/health", [&o](const httplib::Request&, httplib::Response& res) {
    detail::reply_json(res, {{"status", "ok"}, {"oracle_address", o.address()}});
  });
  srv.Get("/price", [&o](const httplib::Request& req, httplib::Response& res) {
    try {
      detail::reply_json(res, o.quote(PriceQuery::from_params(detail::query_params(req))).to_json());
    } catch (const std::exception& e) {
      detail::reply_error(res, e);
    }
  });
  srv.Get("/datasets", [&o](const httplib::Request&, httplib::Response& res) {
    json list = json::array();
    for (const auto& d : o.datasets()) list.push_back(d.to_json());
    detail::reply_json(res, list);
  });
  srv.Get("/models", [&o](const httplib::Request&, httplib::Response& res) {
    json list = json::array();
    for (const auto& m : o.models()) list.push_back(m.to_json());
    detail::reply_json(res, list);
  });
  srv.Get("/schedule", [&o](const httplib::Request&, httplib::Response& res) {
    detail::reply_json(res, o.schedule().to_json());
  });
  srv.Post("/schedule", [&o](const httplib::Request& req, httplib::Response& res) {
    try {
      const json body = json::parse(req.body);
      const auto field = tokenomics::parse_field(body.at("field").get<std::string>());
      const auto value = Decimal::parse(body.at("value").get<std::string>());
      const std::string id = o.update_schedule(field, value);
      detail::reply_json(res, {{"txn_id", id}, {"schedule", o.schedule().to_json()}});
    } catch (const std::exception& e) {
      detail::reply_error(res, e);
    }
  });
}

OracleHttpServer::~OracleHttpServer() { stop(); }

int OracleHttpServer::start() {
  auto& impl = *impl_;
  if (impl.port == 0) {
    impl.port = impl.server.bind_to_any_port(impl.host);
  } else if (!impl.server.bind_to_port(impl.host, impl.port)) {
    impl.port = -1;
  }
  if (impl.port < 0) throw Error(Errc::io, "oracle HTTP server cannot bind " + impl.host);
  impl.thread = std::thread([&impl] { impl.server.listen_after_bind(); });
  impl.server.wait_until_ready();
  spdlog::info("oracle HTTP on {}:{}", impl.host, impl.port);
  return impl.port;
}

void OracleHttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace predictchain::oracle
