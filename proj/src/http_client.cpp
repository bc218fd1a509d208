#include "pentarag/http_client.hpp"

#include "httplib.h"

namespace pentarag {

HttpEndpoint parse_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.compare(0, scheme_end, "http") != 0) {
    throw Error(ErrorCode::kConfigError, "endpoint must be http://host:port/path, got '" + url + "'");
  }
  auto path_start = url.find('/', scheme_end + 3);
  HttpEndpoint ep;
  if (path_start == std::string::npos) {
    ep.base = url;
    ep.path = "/";
  } else {
    ep.base = url.substr(0, path_start);
    ep.path = url.substr(path_start);
  }
  if (ep.base.size() <= scheme_end + 3) {
    throw Error(ErrorCode::kConfigError, "endpoint has no host: '" + url + "'");
  }
  return ep;
}

HttpJsonClient::HttpJsonClient(const std::string& url, std::size_t max_in_flight, int timeout_seconds)
    : endpoint_(parse_endpoint(url)),
      max_in_flight_(max_in_flight == 0 ? 1 : max_in_flight),
      timeout_seconds_(timeout_seconds) {}

HttpJsonClient::~HttpJsonClient() = default;

std::unique_ptr<httplib::Client> HttpJsonClient::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
  ++in_flight_;
  if (!idle_.empty()) {
    auto c = std::move(idle_.back());
    idle_.pop_back();
    return c;
  }
  lock.unlock();
  auto c = std::make_unique<httplib::Client>(endpoint_.base);
  c->set_keep_alive(true);
  c->set_connection_timeout(timeout_seconds_, 0);
  c->set_read_timeout(timeout_seconds_, 0);
  c->set_write_timeout(timeout_seconds_, 0);
  return c;
}

void HttpJsonClient::release(std::unique_ptr<httplib::Client> client) {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
    if (client) idle_.push_back(std::move(client));
  }
  cv_.notify_one();
}

Json HttpJsonClient::post(const Json& body) {
  auto client = acquire();
  auto res = client->Post(endpoint_.path, body.dump(), "application/json");
  if (!res) {
    std::string why = httplib::to_string(res.error());
    release(nullptr);  // drop a connection that failed
    throw Error(ErrorCode::kBackendUnavailable, endpoint_.base + endpoint_.path + ": " + why);
  }
  int status = res->status;
  std::string payload = std::move(res->body);
  release(std::move(client));
  if (status < 200 || status >= 300) {
    throw Error(ErrorCode::kBackendUnavailable,
                endpoint_.base + endpoint_.path + " returned HTTP " + std::to_string(status));
  }
  try {
    return Json::parse(payload);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kBackendUnavailable, std::string("response is not JSON: ") + e.what());
  }
}

}  // namespace pentarag
