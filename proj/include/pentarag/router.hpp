#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pentarag/cache_layers.hpp"
#include "pentarag/core.hpp"
#include "pentarag/embedding.hpp"
#include "pentarag/knowledge.hpp"
#include "pentarag/llm_engine.hpp"

namespace pentarag {

enum class ProbeOutcome { kHit, kMiss, kRejected };

std::string_view probe_outcome_name(ProbeOutcome outcome);

struct LayerProbe {
  LayerTag layer = LayerTag::kFixedKV;
  ProbeOutcome outcome = ProbeOutcome::kMiss;
  double seconds = 0.0;

  bool operator==(const LayerProbe&) const = default;
};

/// One routed query. When every layer misses, serving_layer is empty and the
/// probe list covers the whole cascade.
struct RouteTraceEvent {
  std::string query_id;
  std::vector<LayerProbe> layers_probed;
  std::optional<LayerTag> serving_layer;
  double latency_seconds = 0.0;
  std::int64_t timestamp = 0;

  bool operator==(const RouteTraceEvent&) const = default;
};

void to_json(Json& j, const LayerProbe& p);
void from_json(const Json& j, LayerProbe& p);
void to_json(Json& j, const RouteTraceEvent& e);
void from_json(const Json& j, RouteTraceEvent& e);

struct RouterConfig {
  double semantic_threshold = kDefaultSemanticThreshold;
  double akm_threshold = kDefaultAkmThreshold;
  double recall_threshold = kDefaultRecallThreshold;
  std::size_t retrieval_k = kDefaultRetrievalK;
  std::size_t akm_seed_k = kDefaultAkmSeedK;
  bool deterministic_settle = true;
  std::chrono::milliseconds akm_settle_interval{50};
  /// Indexed by LayerTag; a disabled layer is skipped without a probe.
  LayerArray<bool> enabled{true, true, true, true, true};
  /// Probe MemoryRecall before AdaptiveMemory (the default precedence).
  bool recall_before_akm = true;
  /// Keep adaptive memory across reset_session(). The simulator always clears it.
  bool persist_akm = false;
  /// 0 = unbounded.
  std::size_t kv_max_entries = 0;
  std::size_t semantic_max_entries = 0;

  /// Throws kConfigError.
  void validate() const;
  /// Layers probed for each query, in order.
  std::vector<LayerTag> cascade() const;
};

struct RouteResult {
  std::optional<AnswerRecord> answer;  // empty when all layers missed
  RouteTraceEvent trace;
  std::vector<Passage> context;  // passages behind a context-generated answer

  bool answered() const { return answer.has_value(); }
};

enum class QueryOrigin { kLive, kFresh, kExactReplay, kPerturbedReplay };

std::string_view origin_name(QueryOrigin origin);
QueryOrigin parse_origin(std::string_view name);

/// A routed query as persisted in session logs.
struct LogEntry {
  Query query;
  QueryOrigin origin = QueryOrigin::kLive;
  RouteTraceEvent trace;
  std::optional<AnswerRecord> answer;
  std::vector<std::string> context;  // supporting passage texts, rank order

  bool operator==(const LogEntry&) const = default;
};

void to_json(Json& j, const LogEntry& e);
void from_json(const Json& j, LogEntry& e);

LogEntry make_log_entry(const Query& query, QueryOrigin origin, const RouteResult& result);

/// Append-only trace sink shared by concurrent route() calls.
class TraceLog {
 public:
  void append(RouteTraceEvent event);
  std::vector<RouteTraceEvent> events() const;
  std::size_t size() const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<RouteTraceEvent> events_;
};

/// The five-layer cascade. Owns both caches and the adaptive memory; borrows
/// the embedder, the generation backend and the main knowledge base.
class Router {
 public:
  Router(RouterConfig config, const Embedder& embedder, GenerationBackend& backend,
         const MainKnowledgeBase& kb);

  /// Probes layers in cascade order and returns the first accepted answer.
  /// The answer is written through to both caches before this returns; a
  /// main-KB search queues its top akm_seed_k passages for the adaptive
  /// memory without waiting for them to be indexed.
  RouteResult route(const Query& query);

  /// Clears both caches and the adaptive memory, and zeroes the counters.
  void reset_session();

  void attach_trace_log(TraceLog* log) { trace_log_ = log; }

  const RouterConfig& config() const { return config_; }
  FixedKVCache& kv() { return kv_; }
  SemanticCache& semantic() { return semantic_; }
  AdaptiveKnowledgeMemory& akm() { return *akm_; }
  const FixedKVCache& kv() const { return kv_; }
  const SemanticCache& semantic() const { return semantic_; }
  const AdaptiveKnowledgeMemory& akm() const { return *akm_; }
  const MainKnowledgeBase& kb() const { return kb_; }

  LayerArray<std::uint64_t> serving_counts() const;
  std::uint64_t unanswered() const { return unanswered_.load(); }
  std::uint64_t routed() const;

 private:
  RouterConfig config_;
  std::vector<LayerTag> cascade_;
  const Embedder& embedder_;
  GenerationBackend& backend_;
  const MainKnowledgeBase& kb_;
  FixedKVCache kv_;
  SemanticCache semantic_;
  std::unique_ptr<AdaptiveKnowledgeMemory> akm_;
  TraceLog* trace_log_ = nullptr;
  LayerArray<std::atomic<std::uint64_t>> serving_counts_{};
  std::atomic<std::uint64_t> unanswered_{0};
};

/// One triple per AdaptiveMemory/NaiveRAG-served entry; context is the
/// supporting passage texts joined by a blank line, in rank order.
std::vector<TrainingTriple> export_triples(std::span<const LogEntry> log);

inline constexpr std::string_view kContextSeparator = "\n\n";

}  // namespace pentarag
