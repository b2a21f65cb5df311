#include <spdlog/spdlog.h>

#include <thread>

#include "http_util.hpp"
#include "predictchain/client.hpp"

namespace predictchain::client {

using nlohmann::json;

namespace {

std::string required_param(const httplib::Request& req, const std::string& key) {
  if (!req.has_param(key) || req.get_param_value(key).empty()) {
    throw Error(Errc::invalid_argument, "missing query parameter '" + key + "'");
  }
  return req.get_param_value(key);
}

// Wraps a handler so every failure becomes a JSON error body.
template <typename F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const std::exception& e) {
      detail::reply_error(res, e);
    }
  };
}

}  // namespace

struct ClientHttpServer::Impl {
  Impl(Client& o, std::string h, int p) : client(o), host(std::move(h)), port(p) {}
  Client& client;
  std::string host;
  int port;
  httplib::Server server;
  std::thread thread;
};

ClientHttpServer::ClientHttpServer(Client& client, std::string host, int port)
    : impl_(std::make_unique<Impl>(client, std::move(host), port)) {
  auto& srv = impl_->server;
  Client& c = impl_->client;

  srv.Get("/api/price", guarded([&c](const httplib::Request& req, httplib::Response& res) {
            detail::reply_json(res, c.get_price(detail::query_params(req)).to_json());
          }));
  srv.Get("/api/names", guarded([&c](const httplib::Request& req, httplib::Response& res) {
            const std::string kind = required_param(req, "kind");
            const NameList list = c.list_names(parse_name_kind(kind));
            detail::reply_json(res, {{"kind", kind},
                                     {"names", list.names},
                                     {"stale", list.stale},
                                     {"last_refresh", list.last_refresh}});
          }));
  srv.Post("/api/submit", guarded([&c](const httplib::Request& req, httplib::Response& res) {
             const json body = json::parse(req.body);
             protocol::Args args;
             for (const auto& [k, v] : body.at("args").items()) args.emplace(k, v);
             std::optional<MicroAlgos> max_price;
             if (body.contains("max_price") && !body["max_price"].is_null()) {
               max_price = body["max_price"].get<MicroAlgos>();
             }
             const auto r = c.submit(body.at("user").get<std::string>(), body.at("op").get<std::string>(), args,
                                     max_price);
             detail::reply_json(res, {{"txn_id", r.txn_id}, {"price_microalgo", r.price}, {"oracle", r.oracle}});
           }));
  srv.Get("/api/updates", guarded([&c](const httplib::Request& req, httplib::Response& res) {
            const std::string user = required_param(req, "user");
            json list = json::array();
            for (const auto& u : c.fetch_updates(user)) list.push_back(u.to_json());
            detail::reply_json(res, {{"user", user}, {"updates", list}});
          }));
  srv.Get("/api/history", guarded([&c](const httplib::Request& req, httplib::Response& res) {
            std::string address;
            if (req.has_param("user")) {
              const auto a = c.address_of(req.get_param_value("user"));
              if (!a) throw Error(Errc::not_found, "unknown user '" + req.get_param_value("user") + "'");
              address = *a;
            } else {
              address = required_param(req, "address");
            }
            json list = json::array();
            for (const auto& h : c.history(address)) list.push_back(h.to_json());
            detail::reply_json(res, {{"address", address}, {"transactions", list}});
          }));
  srv.Get("/api/account", guarded([&c](const httplib::Request& req, httplib::Response& res) {
            const std::string user = required_param(req, "user");
            const Address address = c.register_user(user);
            detail::reply_json(res, {{"user", user}, {"address", address}, {"balance", c.balance(address)}});
          }));
  srv.Post("/api/faucet", guarded([&c](const httplib::Request& req, httplib::Response& res) {
             const json body = json::parse(req.body);
             const std::string user = body.at("user").get<std::string>();
             const std::string id = c.faucet(user, body.at("amount").get<MicroAlgos>());
             const Address address = *c.address_of(user);
             detail::reply_json(res, {{"txn_id", id}, {"user", user}, {"address", address},
                                      {"balance", c.balance(address)}});
           }));
}

ClientHttpServer::~ClientHttpServer() { stop(); }

int ClientHttpServer::start() {
  auto& impl = *impl_;
  if (impl.port == 0) {
    impl.port = impl.server.bind_to_any_port(impl.host);
  } else if (!impl.server.bind_to_port(impl.host, impl.port)) {
    impl.port = -1;
  }
  if (impl.port < 0) throw Error(Errc::io, "client HTTP server cannot bind " + impl.host);
  impl.thread = std::thread([&impl] { impl.server.listen_after_bind(); });
  impl.server.wait_until_ready();
  spdlog::info("client HTTP on {}:{}", impl.host, impl.port);
  return impl.port;
}

void ClientHttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace predictchain::client
