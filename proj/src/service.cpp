#include "pentarag/service.hpp"

#include <httplib.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "pentarag/jsonl.hpp"

namespace pentarag {

namespace fs = std::filesystem;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyQuery:
    case ErrorCode::kEmptyInput:
    case ErrorCode::kMalformedInput:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kInvalidVector:
      return 400;
    case ErrorCode::kEmptyKnowledgeBase:
    case ErrorCode::kEmptyTrace:
    case ErrorCode::kAllLayersMissed:
      return 409;
    case ErrorCode::kBackendUnavailable:
      return 503;
    default:
      return 500;
  }
}

namespace {

Json error_body(ErrorCode code, const std::string& detail) {
  return Json{{"error", std::string(error_code_name(code))}, {"detail", detail}};
}

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Runs a handler and turns exceptions into the error payload.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    reply(res, 200, f());
  } catch (const Error& e) {
    reply(res, http_status(e.code()), error_body(e.code(), e.detail()));
  } catch (const Json::exception& e) {
    reply(res, 400, error_body(ErrorCode::kMalformedInput, e.what()));
  } catch (const std::exception& e) {
    reply(res, 500, error_body(ErrorCode::kIoError, e.what()));
  }
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + p.string());
  return out;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + p.string());
  return in;
}

}  // namespace

Service::Service(ServiceConfig config) : config_(std::move(config)) {
  config_.validate();
  embedder_ = make_embedder(config_.embedder);
  backend_ = make_backend(config_.backend);
  const fs::path snap = config_.snapshot_dir;
  if (!snap.empty() && MainKnowledgeBase::snapshot_exists(snap / "kb")) {
    kb_ = std::make_unique<MainKnowledgeBase>(MainKnowledgeBase::load(snap / "kb"));
    if (kb_->dimension() != embedder_->dimension()) {
      throw Error(ErrorCode::kConfigError, "snapshot dimension differs from the embedder's");
    }
  } else {
    kb_ = std::make_unique<MainKnowledgeBase>(embedder_->dimension());
    if (!config_.corpus.empty()) kb_->ingest_file(config_.corpus, *embedder_);
  }
  router_ = std::make_unique<Router>(config_.router, *embedder_, *backend_, *kb_);
  if (!snap.empty()) restore_snapshot(snap);
}

Service::~Service() { stop(); }

void Service::restore_snapshot(const fs::path& dir) {
  if (fs::exists(dir / "kv.jsonl")) {
    auto in = open_in(dir / "kv.jsonl");
    router_->kv().import_jsonl(in, (dir / "kv.jsonl").string());
  }
  if (fs::exists(dir / "semantic.bin") && fs::exists(dir / "semantic.jsonl")) {
    auto records = open_in(dir / "semantic.bin");
    auto sidecar = open_in(dir / "semantic.jsonl");
    router_->semantic().restore(records, sidecar);
  }
  if (fs::exists(dir / "akm.bin") && fs::exists(dir / "akm.jsonl")) {
    auto records = open_in(dir / "akm.bin");
    auto sidecar = open_in(dir / "akm.jsonl");
    router_->akm().restore(records, sidecar);
  }
}

void Service::save_snapshot() {
  if (config_.snapshot_dir.empty()) throw Error(ErrorCode::kConfigError, "no snapshot_dir configured");
  std::unique_lock lock(state_mu_);
  const fs::path dir = config_.snapshot_dir;
  fs::create_directories(dir);
  router_->akm().settle();
  kb_->save(dir / "kb");
  {
    auto out = open_out(dir / "kv.jsonl");
    router_->kv().export_jsonl(out);
  }
  {
    auto records = open_out(dir / "semantic.bin");
    auto sidecar = open_out(dir / "semantic.jsonl");
    router_->semantic().write_snapshot(records, sidecar);
  }
  {
    auto records = open_out(dir / "akm.bin");
    auto sidecar = open_out(dir / "akm.jsonl");
    router_->akm().write_snapshot(records, sidecar);
  }
}

Json Service::handle_query(const Json& body) {
  if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) {
    throw Error(ErrorCode::kMalformedInput, "body must be {\"text\": string, \"session_id\": string}");
  }
  std::string session = "default";
  if (body.contains("session_id")) {
    if (!body["session_id"].is_string()) throw Error(ErrorCode::kMalformedInput, "session_id must be a string");
    session = body["session_id"].get<std::string>();
  }
  Query q = validate_query(body["text"].get<std::string>(), session);
  RouteResult result;
  {
    std::shared_lock lock(state_mu_);
    result = router_->route(q);
  }
  stats_.record(result.trace);
  if (!result.answer) {
    throw Error(ErrorCode::kAllLayersMissed, "no layer could answer query " + q.id);
  }
  return Json{{"query_id", q.id},
              {"answer", *result.answer},
              {"layer", result.answer->layer},
              {"latency_seconds", result.trace.latency_seconds},
              {"layers_probed", result.trace.layers_probed}};
}

Json Service::handle_ingest(const std::string& body, bool lenient) {
  std::unique_lock lock(state_mu_);
  std::istringstream in(body);
  auto stats = kb_->ingest_jsonl(in, "request body", *embedder_, lenient);
  return Json{{"ingested", stats.parsed}, {"skipped", stats.skipped}, {"kb_size", kb_->size()}};
}

Json Service::stats() const {
  auto counts = stats_.layer_counts();
  Json layers = Json::object();
  std::uint64_t served = 0;
  for (auto layer : kAllLayers) {
    layers[std::string(layer_name(layer))] = counts[layer_index(layer)];
    served += counts[layer_index(layer)];
  }
  Json out{{"queries", stats_.total()},
           {"unanswered", stats_.unanswered()},
           {"layer_counts", layers}};
  if (served > 0) {
    UsageRatios ratios;
    Json usage = Json::object();
    for (auto layer : kAllLayers) {
      ratios.ratio[layer_index(layer)] = static_cast<double>(counts[layer_index(layer)]) / static_cast<double>(served);
      usage[std::string(layer_name(layer))] = ratios.ratio[layer_index(layer)];
    }
    out["usage_ratios"] = usage;
    out["weighted_gpu_s_per_query"] = weighted_cost(config_.cost_model, ratios);
    out["weighted_qps"] = weighted_qps(config_.cost_model, ratios);
  } else {
    out["usage_ratios"] = nullptr;
    out["weighted_gpu_s_per_query"] = nullptr;
    out["weighted_qps"] = nullptr;
  }
  std::shared_lock lock(state_mu_);
  auto kv = router_->kv().counters();
  auto sc = router_->semantic().counters();
  const auto& akm = router_->akm();
  out["fixed_kv"] = {{"hits", kv.hits}, {"misses", kv.misses}, {"size", kv.size}};
  out["semantic_cache"] = {{"hits", sc.hits}, {"misses", sc.misses}, {"size", sc.size}};
  out["adaptive_memory"] = {{"hits", akm.hits()}, {"misses", akm.misses()}, {"size", akm.size()},
                            {"pending", akm.pending()}};
  out["kb_size"] = kb_->size();
  return out;
}

void Service::reset_session() {
  std::unique_lock lock(state_mu_);
  router_->reset_session();
  stats_.reset();
}

void Service::install_routes() {
  auto& s = *server_;
  s.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return handle_query(Json::parse(req.body)); });
  });
  s.Post("/ingest", [this](const httplib::Request& req, httplib::Response& res) {
    const bool lenient = req.has_param("lenient") && req.get_param_value("lenient") != "0";
    guarded(res, [&] { return handle_ingest(req.body, lenient); });
  });
  s.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { return stats(); });
  });
  s.Post("/session/reset", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      reset_session();
      return Json{{"reset", true}};
    });
  });
  s.Post("/snapshot", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      save_snapshot();
      return Json{{"snapshot_dir", config_.snapshot_dir}};
    });
  });
  s.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { return Json{{"status", "ok"}, {"kb_size", kb_->size()}}; });
  });
  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const auto code = res.status == 404 ? ErrorCode::kMalformedInput : ErrorCode::kIoError;
    res.set_content(error_body(code, "HTTP " + std::to_string(res.status)).dump(), "application/json");
  });
}

int Service::bind() {
  if (server_) return port_;
  auto [host, port] = parse_listen(config_.listen);
  server_ = std::make_unique<httplib::Server>();
  const std::size_t threads = config_.threads;
  const std::size_t queued = config_.max_queued;
  server_->new_task_queue = [threads, queued] { return new httplib::ThreadPool(threads, queued); };
  // httplib's default sets SO_REUSEPORT, which would let two services share a port.
  server_->set_socket_options([](auto sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  install_routes();
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
    if (port_ < 0) throw Error(ErrorCode::kPortBindError, "cannot bind " + host);
  } else {
    if (!server_->bind_to_port(host, port)) {
      server_.reset();
      throw Error(ErrorCode::kPortBindError, "cannot bind " + config_.listen);
    }
    port_ = port;
  }
  return port_;
}

void Service::run() {
  if (!server_) bind();
  server_->listen_after_bind();
}

int Service::start() {
  int port = bind();
  server_thread_ = std::jthread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void Service::stop() {
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
}

}  // namespace pentarag
