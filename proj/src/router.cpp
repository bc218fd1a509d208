#include "pentarag/router.hpp"

#include <iostream>

namespace pentarag {

std::string_view probe_outcome_name(ProbeOutcome outcome) {
  switch (outcome) {
    case ProbeOutcome::kHit: return "hit";
    case ProbeOutcome::kMiss: return "miss";
    case ProbeOutcome::kRejected: return "rejected";
  }
  return "miss";
}

namespace {

ProbeOutcome parse_outcome(std::string_view s) {
  for (auto o : {ProbeOutcome::kHit, ProbeOutcome::kMiss, ProbeOutcome::kRejected}) {
    if (probe_outcome_name(o) == s) return o;
  }
  throw Error(ErrorCode::kMalformedInput, "unknown probe outcome '" + std::string(s) + "'");
}

double seconds_between(std::int64_t start_ns, std::int64_t end_ns) {
  return static_cast<double>(end_ns - start_ns) * 1e-9;
}

}  // namespace

void to_json(Json& j, const LayerProbe& p) {
  j = Json{{"layer", p.layer}, {"outcome", std::string(probe_outcome_name(p.outcome))}, {"seconds", p.seconds}};
}

void from_json(const Json& j, LayerProbe& p) {
  j.at("layer").get_to(p.layer);
  p.outcome = parse_outcome(j.at("outcome").get<std::string>());
  j.at("seconds").get_to(p.seconds);
}

void to_json(Json& j, const RouteTraceEvent& e) {
  j = Json{{"query_id", e.query_id},
           {"layers_probed", e.layers_probed},
           {"serving_layer", e.serving_layer ? Json(*e.serving_layer) : Json(nullptr)},
           {"latency_seconds", e.latency_seconds},
           {"timestamp", e.timestamp}};
}

void from_json(const Json& j, RouteTraceEvent& e) {
  j.at("query_id").get_to(e.query_id);
  j.at("layers_probed").get_to(e.layers_probed);
  const auto& s = j.at("serving_layer");
  e.serving_layer = s.is_null() ? std::nullopt : std::optional(s.get<LayerTag>());
  j.at("latency_seconds").get_to(e.latency_seconds);
  j.at("timestamp").get_to(e.timestamp);
}

std::string_view origin_name(QueryOrigin origin) {
  switch (origin) {
    case QueryOrigin::kLive: return "live";
    case QueryOrigin::kFresh: return "fresh";
    case QueryOrigin::kExactReplay: return "exact_replay";
    case QueryOrigin::kPerturbedReplay: return "perturbed_replay";
  }
  return "live";
}

QueryOrigin parse_origin(std::string_view name) {
  for (auto o : {QueryOrigin::kLive, QueryOrigin::kFresh, QueryOrigin::kExactReplay, QueryOrigin::kPerturbedReplay}) {
    if (origin_name(o) == name) return o;
  }
  throw Error(ErrorCode::kMalformedInput, "unknown query origin '" + std::string(name) + "'");
}

void to_json(Json& j, const LogEntry& e) {
  j = Json{{"query", e.query},
           {"origin", std::string(origin_name(e.origin))},
           {"trace", e.trace},
           {"answer", e.answer ? Json(*e.answer) : Json(nullptr)},
           {"context", e.context}};
}

void from_json(const Json& j, LogEntry& e) {
  j.at("query").get_to(e.query);
  e.origin = parse_origin(j.at("origin").get<std::string>());
  j.at("trace").get_to(e.trace);
  const auto& a = j.at("answer");
  e.answer = a.is_null() ? std::nullopt : std::optional(a.get<AnswerRecord>());
  j.at("context").get_to(e.context);
}

LogEntry make_log_entry(const Query& query, QueryOrigin origin, const RouteResult& result) {
  LogEntry e{query, origin, result.trace, result.answer, {}};
  for (const auto& p : result.context) e.context.push_back(p.text);
  return e;
}

// ---------------------------------------------------------------------------
// TraceLog
// ---------------------------------------------------------------------------

void TraceLog::append(RouteTraceEvent event) {
  std::lock_guard lock(mu_);
  events_.push_back(std::move(event));
}

std::vector<RouteTraceEvent> TraceLog::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::size_t TraceLog::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

void TraceLog::clear() {
  std::lock_guard lock(mu_);
  events_.clear();
}

// ---------------------------------------------------------------------------
// RouterConfig
// ---------------------------------------------------------------------------

void RouterConfig::validate() const {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(semantic_threshold) || semantic_threshold == 0.0) {
    throw Error(ErrorCode::kConfigError, "semantic_threshold must be in (0, 1]");
  }
  if (!in_unit(akm_threshold) || akm_threshold == 0.0) {
    throw Error(ErrorCode::kConfigError, "akm_threshold must be in (0, 1]");
  }
  if (!in_unit(recall_threshold)) throw Error(ErrorCode::kConfigError, "recall_threshold must be in [0, 1]");
  if (retrieval_k == 0) throw Error(ErrorCode::kConfigError, "retrieval_k must be >= 1");
  if (retrieval_k > akm_seed_k) throw Error(ErrorCode::kConfigError, "retrieval_k must not exceed akm_seed_k");
}

std::vector<LayerTag> RouterConfig::cascade() const {
  std::vector<LayerTag> order{LayerTag::kFixedKV, LayerTag::kSemanticCache};
  if (recall_before_akm) {
    order.insert(order.end(), {LayerTag::kMemoryRecall, LayerTag::kAdaptiveMemory});
  } else {
    order.insert(order.end(), {LayerTag::kAdaptiveMemory, LayerTag::kMemoryRecall});
  }
  order.push_back(LayerTag::kNaiveRAG);
  std::erase_if(order, [&](LayerTag t) { return !enabled[layer_index(t)]; });
  return order;
}

// ---------------------------------------------------------------------------
// Router
// ---------------------------------------------------------------------------

Router::Router(RouterConfig config, const Embedder& embedder, GenerationBackend& backend,
               const MainKnowledgeBase& kb)
    : config_(std::move(config)),
      embedder_(embedder),
      backend_(backend),
      kb_(kb),
      kv_(config_.kv_max_entries),
      semantic_(config_.semantic_threshold, kb.dimension(), config_.semantic_max_entries) {
  config_.validate();
  if (embedder_.dimension() != kb_.dimension()) {
    throw Error(ErrorCode::kDimensionMismatch, "embedder and knowledge base dimensions differ");
  }
  cascade_ = config_.cascade();
  akm_ = std::make_unique<AdaptiveKnowledgeMemory>(
      kb_, config_.akm_threshold,
      config_.deterministic_settle ? SettleMode::kDeterministic : SettleMode::kBackground,
      config_.akm_settle_interval);
}

RouteResult Router::route(const Query& query) {
  if (config_.deterministic_settle) akm_->settle();

  const std::int64_t start = monotonic_now_ns();
  RouteResult result;
  result.trace.query_id = query.id;
  result.trace.timestamp = start;

  std::optional<EmbeddingVector> embedding;
  auto query_embedding = [&]() -> const EmbeddingVector& {
    if (!embedding) embedding = embedder_.embed(query.text);
    return *embedding;
  };

  std::optional<AnswerRecord> served;  // what the caller gets
  std::optional<AnswerRecord> stored;  // what is written back to the caches

  for (LayerTag layer : cascade_) {
    const std::int64_t probe_start = monotonic_now_ns();
    ProbeOutcome outcome = ProbeOutcome::kMiss;
    switch (layer) {
      case LayerTag::kFixedKV:
        if (auto hit = kv_.get(query.text)) {
          stored = *hit;
          served = std::move(*hit);
          outcome = ProbeOutcome::kHit;
        }
        break;
      case LayerTag::kSemanticCache:
        if (auto hit = semantic_.lookup(query_embedding())) {
          stored = hit->answer;
          served = std::move(hit->answer);
          outcome = ProbeOutcome::kHit;
        }
        break;
      case LayerTag::kMemoryRecall:
        try {
          if (auto answer = memory_recall(backend_, query.text, config_.recall_threshold)) {
            stored = *answer;
            served = std::move(*answer);
            outcome = ProbeOutcome::kHit;
          } else {
            outcome = ProbeOutcome::kRejected;
          }
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kBackendUnavailable) throw;
          std::cerr << "pentarag: recall unavailable, falling through: " << e.what() << '\n';
          outcome = ProbeOutcome::kRejected;
        }
        break;
      case LayerTag::kAdaptiveMemory:
        if (auto passages = akm_->retrieve(query_embedding(), config_.retrieval_k)) {
          served = generate_with_context(backend_, query.text, *passages, LayerTag::kAdaptiveMemory);
          stored = served;
          result.context = std::move(*passages);
          outcome = ProbeOutcome::kHit;
        }
        break;
      case LayerTag::kNaiveRAG:
        if (kb_.size() > 0) {
          auto retrieval = kb_.retrieve(query_embedding(), config_.retrieval_k, config_.akm_seed_k);
          if (config_.enabled[layer_index(LayerTag::kAdaptiveMemory)]) akm_->enqueue(std::move(retrieval.seeds));
          served = generate_with_context(backend_, query.text, retrieval.passages, LayerTag::kNaiveRAG);
          stored = served;
          result.context = std::move(retrieval.passages);
          outcome = ProbeOutcome::kHit;
        }
        break;
    }
    result.trace.layers_probed.push_back(LayerProbe{layer, outcome, seconds_between(probe_start, monotonic_now_ns())});
    if (outcome == ProbeOutcome::kHit) {
      result.trace.serving_layer = layer;
      break;
    }
  }

  if (served) {
    // Cache hits are reported under the serving layer; their stored record
    // keeps the original provenance.
    served->layer = *result.trace.serving_layer;
    if (!layer_uses_context(served->layer)) served->supporting_passage_ids.clear();
    if (stored && !is_cache_layer(*result.trace.serving_layer)) stored->latency_seconds = seconds_between(start, monotonic_now_ns());
    writeback(kv_, semantic_, query.text, query_embedding(), *stored);
    serving_counts_[layer_index(*result.trace.serving_layer)].fetch_add(1);
  } else {
    unanswered_.fetch_add(1);
  }

  const double latency = seconds_between(start, monotonic_now_ns());
  result.trace.latency_seconds = latency;
  if (served) {
    served->latency_seconds = latency;
    result.answer = std::move(served);
  }
  if (trace_log_) trace_log_->append(result.trace);
  return result;
}

void Router::reset_session() {
  kv_.clear();
  semantic_.clear();
  if (!config_.persist_akm) akm_->clear();
  for (auto& c : serving_counts_) c.store(0);
  unanswered_.store(0);
}

LayerArray<std::uint64_t> Router::serving_counts() const {
  LayerArray<std::uint64_t> out{};
  for (std::size_t i = 0; i < kLayerCount; ++i) out[i] = serving_counts_[i].load();
  return out;
}

std::uint64_t Router::routed() const {
  std::uint64_t n = unanswered_.load();
  for (const auto& c : serving_counts_) n += c.load();
  return n;
}

std::vector<TrainingTriple> export_triples(std::span<const LogEntry> log) {
  std::vector<TrainingTriple> out;
  for (const auto& e : log) {
    if (!e.answer || !e.trace.serving_layer || !layer_uses_context(*e.trace.serving_layer)) continue;
    TrainingTriple t;
    t.question = e.query.text;
    for (std::size_t i = 0; i < e.context.size(); ++i) {
      if (i > 0) t.context += kContextSeparator;
      t.context += e.context[i];
    }
    t.answer = e.answer->text;
    if (t.question.empty() || t.context.empty() || t.answer.empty()) continue;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace pentarag
