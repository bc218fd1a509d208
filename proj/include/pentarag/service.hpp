#pragma once

#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <string>
#include <thread>

#include "pentarag/config.hpp"
#include "pentarag/knowledge.hpp"
#include "pentarag/metrics.hpp"
#include "pentarag/router.hpp"

namespace httplib {
class Server;
}

namespace pentarag {

/// HTTP status for an error code.
int http_status(ErrorCode code);

/// Holds the knowledge base, router and stats behind the HTTP API. The
/// handle_* methods are what the endpoints call and can be used directly.
class Service {
 public:
  /// Restores the snapshot directory when it holds one, otherwise ingests
  /// the configured corpus (if any).
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the configured address; port 0 picks a free one. Returns the
  /// bound port. Throws kPortBindError.
  int bind();
  /// Serves until stop(). bind() first.
  void run();
  /// bind() + run() on a background thread; returns the port.
  int start();
  void stop();

  Json handle_query(const Json& body);
  /// JSONL passages; returns {"ingested": n, "kb_size": m}.
  Json handle_ingest(const std::string& body, bool lenient = false);
  Json stats() const;
  void reset_session();
  /// Writes KB, caches and adaptive memory under the snapshot directory.
  /// Throws kConfigError when none is configured.
  void save_snapshot();

  const ServiceConfig& config() const { return config_; }
  Router& router() { return *router_; }
  const MainKnowledgeBase& kb() const { return *kb_; }

 private:
  void install_routes();
  void restore_snapshot(const std::filesystem::path& dir);

  ServiceConfig config_;
  std::unique_ptr<Embedder> embedder_;
  std::unique_ptr<GenerationBackend> backend_;
  std::unique_ptr<MainKnowledgeBase> kb_;
  std::unique_ptr<Router> router_;
  StatsCollector stats_;
  // Queries share; ingest, reset and snapshot are exclusive.
  mutable std::shared_mutex state_mu_;
  std::unique_ptr<httplib::Server> server_;
  std::jthread server_thread_;
  int port_ = -1;
};

}  // namespace pentarag
