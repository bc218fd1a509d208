#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "pentarag/core.hpp"
#include "pentarag/embedding.hpp"
#include "pentarag/llm_engine.hpp"
#include "pentarag/metrics.hpp"
#include "pentarag/router.hpp"
#include "pentarag/simulator.hpp"

namespace pentarag {

struct EmbedderConfig {
  std::string kind = "hash";  // "hash" | "remote"
  std::string endpoint;
  std::size_t dimension = kEmbeddingDim;
  std::size_t max_in_flight = 4;
};

struct BackendConfig {
  std::string kind = "stub";  // "stub" | "remote"
  std::string endpoint;
  std::string knowledge_table;  // stub only; table or triples JSONL
  std::size_t max_in_flight = 4;
};

/// Where simulate gets its questions. An empty dataset path means a
/// generated synthetic dataset of dataset_size items.
struct DatasetSource {
  std::string path;
  std::string format = "jsonl";  // "jsonl" | "triviaqa"
  std::size_t size = 2000;
  std::uint64_t seed = 7;
  std::size_t max_items = 0;  // triviaqa only; 0 reads all
};

struct ServiceConfig {
  std::string listen = "127.0.0.1:8080";
  std::string snapshot_dir;  // empty: no persistence
  std::string corpus;        // optional passages JSONL ingested at startup
  std::size_t threads = 4;
  std::size_t max_queued = 64;  // requests beyond this are refused
  EmbedderConfig embedder;
  BackendConfig backend;
  RouterConfig router;
  LayerCostModel cost_model;
  SimulationConfig simulation;
  DatasetSource dataset;

  void validate() const;
};

/// Unknown keys anywhere throw kConfigError.
ServiceConfig parse_service_config(const Json& j);
Json service_config_to_json(const ServiceConfig& c);

/// Reads a JSON file (or defaults when `path` is empty), then applies the
/// PENTARAG_LISTEN and PENTARAG_SNAPSHOT_DIR environment overrides.
ServiceConfig load_service_config(const std::filesystem::path& path);

/// "host:port" with a numeric port. Throws kConfigError.
std::pair<std::string, int> parse_listen(const std::string& listen);

/// Loads the file dataset, or generates the synthetic one (whose pretrained
/// table is only non-empty in that case).
SyntheticDataset load_dataset_source(const DatasetSource& source);

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& c);
std::unique_ptr<GenerationBackend> make_backend(const BackendConfig& c);

}  // namespace pentarag
