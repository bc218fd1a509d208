#include "pentarag/core.hpp"

#include <atomic>
#include <chrono>
#include <cmath>

namespace pentarag {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyQuery: return "empty_query";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kInvalidVector: return "invalid_vector";
    case ErrorCode::kCorruptSnapshot: return "corrupt_snapshot";
    case ErrorCode::kEmptyKnowledgeBase: return "empty_knowledge_base";
    case ErrorCode::kEmptyContext: return "empty_context";
    case ErrorCode::kBackendUnavailable: return "backend_unavailable";
    case ErrorCode::kAllLayersMissed: return "all_layers_missed";
    case ErrorCode::kRatioMismatch: return "ratio_mismatch";
    case ErrorCode::kZeroElapsed: return "zero_elapsed";
    case ErrorCode::kEmptyTrace: return "empty_trace";
    case ErrorCode::kNoClaims: return "no_claims";
    case ErrorCode::kInsufficientData: return "insufficient_data";
    case ErrorCode::kPoolExhausted: return "pool_exhausted";
    case ErrorCode::kConfigError: return "config_error";
    case ErrorCode::kPortBindError: return "port_bind_error";
    case ErrorCode::kIoError: return "io_error";
    case ErrorCode::kMalformedInput: return "malformed_input";
  }
  return "unknown";
}

std::string_view layer_name(LayerTag tag) {
  switch (tag) {
    case LayerTag::kFixedKV: return "fixed_kv";
    case LayerTag::kSemanticCache: return "semantic_cache";
    case LayerTag::kMemoryRecall: return "memory_recall";
    case LayerTag::kAdaptiveMemory: return "adaptive_memory";
    case LayerTag::kNaiveRAG: return "naive_rag";
  }
  return "unknown";
}

LayerTag parse_layer(std::string_view name) {
  for (LayerTag tag : kAllLayers) {
    if (layer_name(tag) == name) return tag;
  }
  throw Error(ErrorCode::kMalformedInput, "unknown layer '" + std::string(name) + "'");
}

std::int64_t monotonic_now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

bool is_blank(std::string_view text) {
  for (char c : text) {
    switch (c) {
      case ' ': case '\t': case '\n': case '\r': case '\v': case '\f':
        continue;
      default:
        return false;
    }
  }
  return true;
}

Query validate_query(std::string raw_text, std::string session_id) {
  if (is_blank(raw_text)) {
    throw Error(ErrorCode::kEmptyQuery, "query text is empty or whitespace-only");
  }
  static std::atomic<std::uint64_t> next_id{1};
  Query q;
  q.id = "q" + std::to_string(next_id.fetch_add(1, std::memory_order_relaxed));
  q.text = std::move(raw_text);
  q.session_id = std::move(session_id);
  q.issued_at = monotonic_now_ns();
  return q;
}

void check_answer_record(const AnswerRecord& record) {
  if (!(record.confidence >= 0.0 && record.confidence <= 1.0)) {
    throw Error(ErrorCode::kMalformedInput, "answer confidence outside [0,1]");
  }
  if (!(record.latency_seconds >= 0.0)) {
    throw Error(ErrorCode::kMalformedInput, "answer latency is negative");
  }
  if (layer_uses_context(record.layer) == record.supporting_passage_ids.empty()) {
    throw Error(ErrorCode::kMalformedInput,
                "supporting passages inconsistent with layer " +
                    std::string(layer_name(record.layer)));
  }
}

void to_json(Json& j, LayerTag tag) { j = std::string(layer_name(tag)); }

void from_json(const Json& j, LayerTag& tag) { tag = parse_layer(j.get<std::string>()); }

void to_json(Json& j, const Query& q) {
  j = Json{{"id", q.id}, {"text", q.text}, {"session_id", q.session_id}, {"issued_at", q.issued_at}};
}

void from_json(const Json& j, Query& q) {
  j.at("id").get_to(q.id);
  j.at("text").get_to(q.text);
  j.at("session_id").get_to(q.session_id);
  j.at("issued_at").get_to(q.issued_at);
}

void to_json(Json& j, const AnswerRecord& a) {
  j = Json{{"text", a.text},
           {"layer", a.layer},
           {"confidence", a.confidence},
           {"supporting_passage_ids", a.supporting_passage_ids},
           {"latency_seconds", a.latency_seconds}};
}

void from_json(const Json& j, AnswerRecord& a) {
  j.at("text").get_to(a.text);
  j.at("layer").get_to(a.layer);
  j.at("confidence").get_to(a.confidence);
  j.at("supporting_passage_ids").get_to(a.supporting_passage_ids);
  j.at("latency_seconds").get_to(a.latency_seconds);
}

void to_json(Json& j, const TrainingTriple& t) {
  j = Json{{"question", t.question}, {"context", t.context}, {"answer", t.answer}};
}

void from_json(const Json& j, TrainingTriple& t) {
  j.at("question").get_to(t.question);
  j.at("context").get_to(t.context);
  j.at("answer").get_to(t.answer);
  if (t.question.empty() || t.context.empty() || t.answer.empty()) {
    throw Error(ErrorCode::kMalformedInput, "training triple has an empty field");
  }
}

}  // namespace pentarag
