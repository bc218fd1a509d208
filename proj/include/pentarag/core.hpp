#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace pentarag {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorCode {
  kEmptyQuery,
  kEmptyInput,
  kDimensionMismatch,
  kInvalidVector,
  kCorruptSnapshot,
  kEmptyKnowledgeBase,
  kEmptyContext,
  kBackendUnavailable,
  kAllLayersMissed,
  kRatioMismatch,
  kZeroElapsed,
  kEmptyTrace,
  kNoClaims,
  kInsufficientData,
  kPoolExhausted,
  kConfigError,
  kPortBindError,
  kIoError,
  kMalformedInput,
};

/// snake_case name used on the wire, e.g. "empty_query".
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

// ---------------------------------------------------------------------------
// Layer provenance
// ---------------------------------------------------------------------------

/// The five serving paths, declared in routing precedence order.
enum class LayerTag : std::uint8_t {
  kFixedKV = 0,
  kSemanticCache = 1,
  kMemoryRecall = 2,
  kAdaptiveMemory = 3,
  kNaiveRAG = 4,
};

inline constexpr std::size_t kLayerCount = 5;

inline constexpr std::array<LayerTag, kLayerCount> kAllLayers = {
    LayerTag::kFixedKV, LayerTag::kSemanticCache, LayerTag::kMemoryRecall,
    LayerTag::kAdaptiveMemory, LayerTag::kNaiveRAG};

constexpr std::size_t layer_index(LayerTag tag) { return static_cast<std::size_t>(tag); }

std::string_view layer_name(LayerTag tag);
LayerTag parse_layer(std::string_view name);

/// Layers that answer from a cache or from parametric memory carry no passages.
constexpr bool layer_uses_context(LayerTag tag) {
  return tag == LayerTag::kAdaptiveMemory || tag == LayerTag::kNaiveRAG;
}

constexpr bool is_cache_layer(LayerTag tag) {
  return tag == LayerTag::kFixedKV || tag == LayerTag::kSemanticCache;
}

/// Per-layer value table indexed by LayerTag.
template <typename T>
using LayerArray = std::array<T, kLayerCount>;

// ---------------------------------------------------------------------------
// Monotonic time
// ---------------------------------------------------------------------------

std::int64_t monotonic_now_ns();

// ---------------------------------------------------------------------------
// Domain records
// ---------------------------------------------------------------------------

struct Query {
  std::string id;
  std::string text;
  std::string session_id;
  std::int64_t issued_at = 0;  // monotonic nanoseconds

  bool operator==(const Query&) const = default;
};

/// Builds a Query with a fresh id and timestamp. The text is kept byte for
/// byte; only an empty or whitespace-only text is rejected.
Query validate_query(std::string raw_text, std::string session_id);

/// True when `text` has no non-whitespace byte.
bool is_blank(std::string_view text);

struct AnswerRecord {
  std::string text;
  LayerTag layer = LayerTag::kNaiveRAG;
  double confidence = 0.0;
  std::vector<std::string> supporting_passage_ids;
  double latency_seconds = 0.0;

  bool operator==(const AnswerRecord&) const = default;
};

/// Throws kMalformedInput when a record breaks its invariants.
void check_answer_record(const AnswerRecord& record);

struct TrainingTriple {
  std::string question;
  std::string context;
  std::string answer;

  bool operator==(const TrainingTriple&) const = default;
};

void to_json(Json& j, const Query& q);
void from_json(const Json& j, Query& q);
void to_json(Json& j, const AnswerRecord& a);
void from_json(const Json& j, AnswerRecord& a);
void to_json(Json& j, const TrainingTriple& t);
void from_json(const Json& j, TrainingTriple& t);
void to_json(Json& j, LayerTag tag);
void from_json(const Json& j, LayerTag& tag);

}  // namespace pentarag
