#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "pentarag/core.hpp"
#include "pentarag/embedding.hpp"
#include "pentarag/flat_index.hpp"

namespace pentarag {

struct CacheCounters {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::size_t size = 0;
};

/// Layer 1: exact byte-string match from query text to answer.
/// max_entries = 0 means unbounded; otherwise least recently used entries are
/// evicted.
class FixedKVCache {
 public:
  struct Entry {
    AnswerRecord answer;
    std::int64_t created_at = 0;  // monotonic ns of the first write
  };

  explicit FixedKVCache(std::size_t max_entries = 0) : max_entries_(max_entries) {}

  std::optional<AnswerRecord> get(const std::string& query_text);
  void put(const std::string& query_text, AnswerRecord answer);

  /// Lookup without touching counters or recency.
  std::optional<Entry> peek(const std::string& query_text) const;

  CacheCounters counters() const;
  void clear();

  /// JSONL: {"key", "answer", "created_at"} per line, least recent first.
  void export_jsonl(std::ostream& out) const;
  void import_jsonl(std::istream& in, const std::string& source_name);

 private:
  using Recency = std::list<std::string>;
  struct Node {
    Entry entry;
    Recency::iterator position;
  };

  std::size_t max_entries_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, Node> map_;
  Recency recency_;  // front = least recent
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
};

struct SemanticEntry {
  std::string query_text;
  AnswerRecord answer;
  std::int64_t created_at = 0;
};

void to_json(Json& j, const SemanticEntry& e);
void from_json(const Json& j, SemanticEntry& e);

struct SemanticHit {
  AnswerRecord answer;
  double score = 0.0;
  std::string matched_query;
};

inline constexpr double kDefaultSemanticThreshold = 0.85;

/// Layer 2: answers keyed by the embedding of the original query text. A
/// lookup hits when the best cosine is >= threshold (inclusive).
class SemanticCache {
 public:
  explicit SemanticCache(double threshold = kDefaultSemanticThreshold,
                         std::size_t dimension = kEmbeddingDim, std::size_t max_entries = 0);

  double threshold() const { return threshold_; }
  void set_threshold(double threshold);

  std::optional<SemanticHit> lookup(const EmbeddingVector& query_embedding);

  /// Keyed by `query_text`; re-putting the same text replaces the answer.
  void put(const std::string& query_text, const EmbeddingVector& embedding, AnswerRecord answer);

  CacheCounters counters() const;
  std::uint64_t search_count() const { return index_.search_count(); }
  void clear();

  void write_snapshot(std::ostream& records, std::ostream& sidecar) const;
  void restore(std::istream& records, std::istream& sidecar);

 private:
  void touch_locked(const std::string& key);

  double threshold_;
  std::size_t max_entries_;
  FlatIndex<SemanticEntry> index_;
  std::mutex write_mu_;  // serialises put(); also guards recency_
  std::list<std::string> recency_;
  std::unordered_map<std::string, std::list<std::string>::iterator> recency_pos_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
};

/// Write-through of a served answer to both caches. Failures are logged to
/// stderr and swallowed.
void writeback(FixedKVCache& kv, SemanticCache& sc, const std::string& query_text,
               const EmbeddingVector& embedding, const AnswerRecord& answer) noexcept;

void writeback(FixedKVCache& kv, SemanticCache& sc, const Embedder& embedder,
               const std::string& query_text, const AnswerRecord& answer) noexcept;

}  // namespace pentarag
