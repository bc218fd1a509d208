#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "pentarag/core.hpp"

namespace httplib {
class Client;
}

namespace pentarag {

struct HttpEndpoint {
  std::string base;  // scheme://host:port
  std::string path;  // starts with '/'
};

/// Splits "http://host:port/path". Throws kConfigError on anything else.
HttpEndpoint parse_endpoint(const std::string& url);

/// Posts JSON to one endpoint with a bounded number of requests in flight.
/// Idle connections are pooled and reused.
class HttpJsonClient {
 public:
  HttpJsonClient(const std::string& url, std::size_t max_in_flight, int timeout_seconds = 30);
  ~HttpJsonClient();

  HttpJsonClient(const HttpJsonClient&) = delete;
  HttpJsonClient& operator=(const HttpJsonClient&) = delete;

  /// Throws kBackendUnavailable on transport errors, non-2xx statuses or a
  /// body that is not JSON.
  Json post(const Json& body);

 private:
  std::unique_ptr<httplib::Client> acquire();
  void release(std::unique_ptr<httplib::Client> client);

  HttpEndpoint endpoint_;
  std::size_t max_in_flight_;
  int timeout_seconds_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
  std::vector<std::unique_ptr<httplib::Client>> idle_;
};

}  // namespace pentarag
