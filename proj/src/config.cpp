#include "pentarag/config.hpp"

#include <cstdlib>
#include <set>

#include "pentarag/jsonl.hpp"

namespace pentarag {

namespace {

void reject_unknown(const Json& j, std::string_view where, std::initializer_list<std::string_view> known) {
  if (!j.is_object()) throw Error(ErrorCode::kConfigError, std::string(where) + " must be an object");
  std::set<std::string_view> allowed(known);
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) {
      throw Error(ErrorCode::kConfigError, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string(where) + "." + key + ": " + e.what());
  }
}

RouterConfig parse_router(const Json& j) {
  reject_unknown(j, "router",
                 {"semantic_threshold", "akm_threshold", "recall_threshold", "retrieval_k", "akm_seed_k",
                  "deterministic_settle", "akm_settle_interval_ms", "enabled", "recall_before_akm", "persist_akm",
                  "kv_max_entries", "semantic_max_entries"});
  RouterConfig r;
  read_opt(j, "semantic_threshold", r.semantic_threshold, "router");
  read_opt(j, "akm_threshold", r.akm_threshold, "router");
  read_opt(j, "recall_threshold", r.recall_threshold, "router");
  read_opt(j, "retrieval_k", r.retrieval_k, "router");
  read_opt(j, "akm_seed_k", r.akm_seed_k, "router");
  read_opt(j, "deterministic_settle", r.deterministic_settle, "router");
  if (j.contains("akm_settle_interval_ms")) {
    std::int64_t ms = 0;
    read_opt(j, "akm_settle_interval_ms", ms, "router");
    if (ms <= 0) throw Error(ErrorCode::kConfigError, "router.akm_settle_interval_ms must be > 0");
    r.akm_settle_interval = std::chrono::milliseconds(ms);
  }
  if (j.contains("enabled")) {
    const auto& e = j.at("enabled");
    if (!e.is_object()) throw Error(ErrorCode::kConfigError, "router.enabled must be an object");
    for (const auto& [key, value] : e.items()) {
      LayerTag layer;
      try {
        layer = parse_layer(key);
      } catch (const Error&) {
        throw Error(ErrorCode::kConfigError, "unknown layer '" + key + "' in router.enabled");
      }
      if (!value.is_boolean()) throw Error(ErrorCode::kConfigError, "router.enabled." + key + " must be boolean");
      r.enabled[layer_index(layer)] = value.get<bool>();
    }
  }
  read_opt(j, "recall_before_akm", r.recall_before_akm, "router");
  read_opt(j, "persist_akm", r.persist_akm, "router");
  read_opt(j, "kv_max_entries", r.kv_max_entries, "router");
  read_opt(j, "semantic_max_entries", r.semantic_max_entries, "router");
  try {
    r.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, e.detail());
  }
  return r;
}

Json router_to_json(const RouterConfig& r) {
  Json enabled = Json::object();
  for (auto layer : kAllLayers) enabled[std::string(layer_name(layer))] = r.enabled[layer_index(layer)];
  return Json{{"semantic_threshold", r.semantic_threshold},
              {"akm_threshold", r.akm_threshold},
              {"recall_threshold", r.recall_threshold},
              {"retrieval_k", r.retrieval_k},
              {"akm_seed_k", r.akm_seed_k},
              {"deterministic_settle", r.deterministic_settle},
              {"akm_settle_interval_ms", r.akm_settle_interval.count()},
              {"enabled", enabled},
              {"recall_before_akm", r.recall_before_akm},
              {"persist_akm", r.persist_akm},
              {"kv_max_entries", r.kv_max_entries},
              {"semantic_max_entries", r.semantic_max_entries}};
}

RampKind parse_ramp(const std::string& name) {
  if (name == "linear") return RampKind::kLinear;
  if (name == "step") return RampKind::kStep;
  if (name == "sigmoid") return RampKind::kSigmoid;
  throw Error(ErrorCode::kConfigError, "simulation.ramp must be linear, step or sigmoid");
}

std::string ramp_name(RampKind kind) {
  switch (kind) {
    case RampKind::kLinear: return "linear";
    case RampKind::kStep: return "step";
    case RampKind::kSigmoid: return "sigmoid";
  }
  return "linear";
}

SimulationConfig parse_simulation(const Json& j) {
  reject_unknown(j, "simulation",
                 {"n_sessions", "queries_per_session", "replay_split", "ramp", "perturber", "seed", "latency_sigma"});
  SimulationConfig s;
  read_opt(j, "n_sessions", s.n_sessions, "simulation");
  read_opt(j, "queries_per_session", s.queries_per_session, "simulation");
  read_opt(j, "replay_split", s.replay_split, "simulation");
  if (j.contains("ramp")) {
    std::string name;
    read_opt(j, "ramp", name, "simulation");
    s.ramp = parse_ramp(name);
  }
  if (j.contains("perturber")) {
    std::string name;
    read_opt(j, "perturber", name, "simulation");
    if (name != "composite") throw Error(ErrorCode::kConfigError, "simulation.perturber must be composite");
  }
  read_opt(j, "seed", s.seed, "simulation");
  read_opt(j, "latency_sigma", s.latency_sigma, "simulation");
  s.validate();
  return s;
}

DatasetSource parse_dataset(const Json& j) {
  reject_unknown(j, "dataset", {"path", "format", "size", "seed", "max_items"});
  DatasetSource d;
  read_opt(j, "path", d.path, "dataset");
  read_opt(j, "format", d.format, "dataset");
  read_opt(j, "size", d.size, "dataset");
  read_opt(j, "seed", d.seed, "dataset");
  read_opt(j, "max_items", d.max_items, "dataset");
  return d;
}

}  // namespace

void ServiceConfig::validate() const {
  parse_listen(listen);
  if (threads == 0) throw Error(ErrorCode::kConfigError, "threads must be >= 1");
  if (embedder.kind != "hash" && embedder.kind != "remote") {
    throw Error(ErrorCode::kConfigError, "embedder.kind must be \"hash\" or \"remote\"");
  }
  if (embedder.kind == "remote" && embedder.endpoint.empty()) {
    throw Error(ErrorCode::kConfigError, "embedder.endpoint is required for a remote embedder");
  }
  if (embedder.dimension == 0) throw Error(ErrorCode::kConfigError, "embedder.dimension must be >= 1");
  if (dataset.format != "jsonl" && dataset.format != "triviaqa") {
    throw Error(ErrorCode::kConfigError, "dataset.format must be \"jsonl\" or \"triviaqa\"");
  }
  if (dataset.path.empty() && dataset.size == 0) throw Error(ErrorCode::kConfigError, "dataset.size must be >= 1");
  if (backend.kind != "stub" && backend.kind != "remote") {
    throw Error(ErrorCode::kConfigError, "backend.kind must be \"stub\" or \"remote\"");
  }
  if (backend.kind == "remote" && backend.endpoint.empty()) {
    throw Error(ErrorCode::kConfigError, "backend.endpoint is required for a remote backend");
  }
  try {
    router.validate();
    cost_model.validate();
    simulation.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, e.detail());
  }
}

ServiceConfig parse_service_config(const Json& j) {
  reject_unknown(j, "config",
                 {"listen", "snapshot_dir", "corpus", "threads", "max_queued", "embedder", "backend", "router",
                  "cost_model", "simulation", "dataset"});
  ServiceConfig c;
  read_opt(j, "listen", c.listen, "config");
  read_opt(j, "snapshot_dir", c.snapshot_dir, "config");
  read_opt(j, "corpus", c.corpus, "config");
  read_opt(j, "threads", c.threads, "config");
  read_opt(j, "max_queued", c.max_queued, "config");
  if (j.contains("embedder")) {
    const auto& e = j.at("embedder");
    reject_unknown(e, "embedder", {"kind", "endpoint", "dimension", "max_in_flight"});
    read_opt(e, "kind", c.embedder.kind, "embedder");
    read_opt(e, "endpoint", c.embedder.endpoint, "embedder");
    read_opt(e, "dimension", c.embedder.dimension, "embedder");
    read_opt(e, "max_in_flight", c.embedder.max_in_flight, "embedder");
  }
  if (j.contains("backend")) {
    const auto& b = j.at("backend");
    reject_unknown(b, "backend", {"kind", "endpoint", "knowledge_table", "max_in_flight"});
    read_opt(b, "kind", c.backend.kind, "backend");
    read_opt(b, "endpoint", c.backend.endpoint, "backend");
    read_opt(b, "knowledge_table", c.backend.knowledge_table, "backend");
    read_opt(b, "max_in_flight", c.backend.max_in_flight, "backend");
  }
  if (j.contains("router")) c.router = parse_router(j.at("router"));
  if (j.contains("cost_model")) {
    try {
      c.cost_model = j.at("cost_model").get<LayerCostModel>();
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kConfigError, std::string("cost_model: ") + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError, "cost_model: " + e.detail());
    }
  }
  if (j.contains("simulation")) c.simulation = parse_simulation(j.at("simulation"));
  if (j.contains("dataset")) c.dataset = parse_dataset(j.at("dataset"));
  c.validate();
  return c;
}

Json service_config_to_json(const ServiceConfig& c) {
  return Json{{"listen", c.listen},
              {"snapshot_dir", c.snapshot_dir},
              {"corpus", c.corpus},
              {"threads", c.threads},
              {"max_queued", c.max_queued},
              {"embedder",
               {{"kind", c.embedder.kind},
                {"endpoint", c.embedder.endpoint},
                {"dimension", c.embedder.dimension},
                {"max_in_flight", c.embedder.max_in_flight}}},
              {"backend",
               {{"kind", c.backend.kind},
                {"endpoint", c.backend.endpoint},
                {"knowledge_table", c.backend.knowledge_table},
                {"max_in_flight", c.backend.max_in_flight}}},
              {"router", router_to_json(c.router)},
              {"cost_model", c.cost_model},
              {"simulation",
               {{"n_sessions", c.simulation.n_sessions},
                {"queries_per_session", c.simulation.queries_per_session},
                {"replay_split", c.simulation.replay_split},
                {"ramp", ramp_name(c.simulation.ramp)},
                {"perturber", "composite"},
                {"seed", c.simulation.seed},
                {"latency_sigma", c.simulation.latency_sigma}}},
              {"dataset",
               {{"path", c.dataset.path},
                {"format", c.dataset.format},
                {"size", c.dataset.size},
                {"seed", c.dataset.seed},
                {"max_items", c.dataset.max_items}}}};
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  Json j = Json::object();
  if (!path.empty()) {
    try {
      j = Json::parse(read_text_file(path));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
    }
  }
  if (const char* listen = std::getenv("PENTARAG_LISTEN"); listen && *listen) j["listen"] = listen;
  if (const char* dir = std::getenv("PENTARAG_SNAPSHOT_DIR"); dir && *dir) j["snapshot_dir"] = dir;
  return parse_service_config(j);
}

std::pair<std::string, int> parse_listen(const std::string& listen) {
  auto colon = listen.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == listen.size()) {
    throw Error(ErrorCode::kConfigError, "listen must be host:port, got '" + listen + "'");
  }
  const std::string port_text = listen.substr(colon + 1);
  int port = 0;
  for (char ch : port_text) {
    if (ch < '0' || ch > '9' || port > 65535) {
      throw Error(ErrorCode::kConfigError, "bad port in '" + listen + "'");
    }
    port = port * 10 + (ch - '0');
  }
  if (port > 65535) throw Error(ErrorCode::kConfigError, "bad port in '" + listen + "'");
  return {listen.substr(0, colon), port};
}

SyntheticDataset load_dataset_source(const DatasetSource& source) {
  if (source.path.empty()) return synthetic_dataset(source.size, source.seed);
  SyntheticDataset ds;
  ds.items = source.format == "triviaqa" ? load_triviaqa(source.path, source.max_items) : load_dataset(source.path);
  if (ds.items.empty()) throw Error(ErrorCode::kEmptyInput, source.path + ": no usable dataset items");
  return ds;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& c) {
  if (c.kind == "remote") return std::make_unique<RemoteEmbedder>(c.endpoint, c.dimension, c.max_in_flight);
  return std::make_unique<HashEmbedder>(c.dimension);
}

std::unique_ptr<GenerationBackend> make_backend(const BackendConfig& c) {
  if (c.kind == "remote") return std::make_unique<RemoteBackend>(c.endpoint, c.max_in_flight);
  if (c.knowledge_table.empty()) return std::make_unique<StubBackend>();
  return std::make_unique<StubBackend>(StubKnowledgeTable::load_any(c.knowledge_table));
}

}  // namespace pentarag
