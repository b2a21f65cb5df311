#pragma once

#include <exception>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "predictchain/error.hpp"

namespace predictchain::detail {

inline int http_status_for(Errc code) {
  switch (code) {
    case Errc::not_found:
    case Errc::unknown_account: return 404;
    case Errc::duplicate:
    case Errc::quote_changed: return 409;
    case Errc::insufficient_funds: return 402;
    case Errc::transport: return 502;
    case Errc::io:
    case Errc::integrity: return 500;
    default: return 400;
  }
}

inline void reply_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Error bodies are {"error": <code name>, "message": ...} so the far side
// can rebuild the Error.
inline void reply_error(httplib::Response& res, const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    reply_json(res, {{"error", std::string(to_string(err->code()))}, {"message", err->what()}},
               http_status_for(err->code()));
  } else if (dynamic_cast<const nlohmann::json::exception*>(&e)) {
    reply_json(res, {{"error", "invalid_argument"}, {"message", e.what()}}, 400);
  } else {
    reply_json(res, {{"error", "io"}, {"message", e.what()}}, 500);
  }
}

inline std::map<std::string, std::string> query_params(const httplib::Request& req) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : req.params) out[k] = v;
  return out;
}

/// Throws Error for transport failures and error bodies; returns the parsed body otherwise.
inline nlohmann::json expect_json(const httplib::Result& result, const std::string& what) {
  if (!result) {
    throw Error(Errc::transport, what + ": " + httplib::to_string(result.error()));
  }
  nlohmann::json body = nlohmann::json::parse(result->body, nullptr, false);
  if (body.is_discarded()) {
    throw Error(Errc::transport, what + ": HTTP " + std::to_string(result->status) + " with a non-JSON body");
  }
  if (result->status >= 400 || (body.is_object() && body.contains("error"))) {
    const auto code = errc_from_string(body.value("error", "io"));
    throw Error(code.value_or(Errc::io), body.value("message", what + " failed"));
  }
  return body;
}

}  // namespace predictchain::detail
