#include "pentarag/cache_layers.hpp"

#include <iostream>

#include "pentarag/jsonl.hpp"

namespace pentarag {

// ---------------------------------------------------------------------------
// FixedKVCache
// ---------------------------------------------------------------------------

std::optional<AnswerRecord> FixedKVCache::get(const std::string& query_text) {
  std::lock_guard lock(mu_);
  auto it = map_.find(query_text);
  if (it == map_.end()) {
    misses_.fetch_add(1, std::memory_order_relaxed);
    return std::nullopt;
  }
  hits_.fetch_add(1, std::memory_order_relaxed);
  recency_.splice(recency_.end(), recency_, it->second.position);
  return it->second.entry.answer;
}

void FixedKVCache::put(const std::string& query_text, AnswerRecord answer) {
  std::lock_guard lock(mu_);
  if (auto it = map_.find(query_text); it != map_.end()) {
    it->second.entry.answer = std::move(answer);
    recency_.splice(recency_.end(), recency_, it->second.position);
    return;
  }
  if (max_entries_ > 0 && map_.size() >= max_entries_) {
    map_.erase(recency_.front());
    recency_.pop_front();
  }
  auto pos = recency_.insert(recency_.end(), query_text);
  map_.emplace(query_text, Node{Entry{std::move(answer), monotonic_now_ns()}, pos});
}

std::optional<FixedKVCache::Entry> FixedKVCache::peek(const std::string& query_text) const {
  std::lock_guard lock(mu_);
  auto it = map_.find(query_text);
  if (it == map_.end()) return std::nullopt;
  return it->second.entry;
}

CacheCounters FixedKVCache::counters() const {
  std::lock_guard lock(mu_);
  return {hits_.load(), misses_.load(), map_.size()};
}

void FixedKVCache::clear() {
  std::lock_guard lock(mu_);
  map_.clear();
  recency_.clear();
  hits_ = 0;
  misses_ = 0;
}

void FixedKVCache::export_jsonl(std::ostream& out) const {
  std::lock_guard lock(mu_);
  for (const auto& key : recency_) {
    const auto& e = map_.at(key).entry;
    out << Json{{"key", key}, {"answer", e.answer}, {"created_at", e.created_at}}.dump() << '\n';
  }
}

void FixedKVCache::import_jsonl(std::istream& in, const std::string& source_name) {
  read_jsonl(in, source_name, false, [&](const Json& j) {
    auto key = j.at("key").get<std::string>();
    put(key, j.at("answer").get<AnswerRecord>());
    std::lock_guard lock(mu_);
    map_.at(key).entry.created_at = j.at("created_at").get<std::int64_t>();
  });
}

// ---------------------------------------------------------------------------
// SemanticCache
// ---------------------------------------------------------------------------

void to_json(Json& j, const SemanticEntry& e) {
  j = Json{{"query_text", e.query_text}, {"answer", e.answer}, {"created_at", e.created_at}};
}

void from_json(const Json& j, SemanticEntry& e) {
  j.at("query_text").get_to(e.query_text);
  j.at("answer").get_to(e.answer);
  j.at("created_at").get_to(e.created_at);
}

SemanticCache::SemanticCache(double threshold, std::size_t dimension, std::size_t max_entries)
    : threshold_(kDefaultSemanticThreshold), max_entries_(max_entries), index_(dimension) {
  set_threshold(threshold);
}

void SemanticCache::set_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "semantic threshold must be in (0, 1]");
  }
  threshold_ = threshold;
}

std::optional<SemanticHit> SemanticCache::lookup(const EmbeddingVector& query_embedding) {
  auto top = index_.search_entries(query_embedding, 1);
  if (top.empty() || top.front().hit.score < threshold_) {
    misses_.fetch_add(1, std::memory_order_relaxed);
    return std::nullopt;
  }
  hits_.fetch_add(1, std::memory_order_relaxed);
  if (max_entries_ > 0) {
    std::lock_guard lock(write_mu_);
    touch_locked(top.front().hit.entry_id);
  }
  auto& m = top.front();
  return SemanticHit{std::move(m.payload.answer), m.hit.score, std::move(m.payload.query_text)};
}

void SemanticCache::touch_locked(const std::string& key) {
  auto it = recency_pos_.find(key);
  if (it == recency_pos_.end()) return;
  recency_.splice(recency_.end(), recency_, it->second);
}

void SemanticCache::put(const std::string& query_text, const EmbeddingVector& embedding,
                        AnswerRecord answer) {
  std::lock_guard lock(write_mu_);
  std::int64_t created = monotonic_now_ns();
  if (auto existing = index_.payload(query_text)) created = existing->created_at;
  index_.insert(query_text, embedding, SemanticEntry{query_text, std::move(answer), created});
  if (max_entries_ == 0) return;
  if (auto it = recency_pos_.find(query_text); it != recency_pos_.end()) {
    recency_.splice(recency_.end(), recency_, it->second);
  } else {
    recency_pos_.emplace(query_text, recency_.insert(recency_.end(), query_text));
  }
  while (recency_.size() > max_entries_) {
    index_.erase(recency_.front());
    recency_pos_.erase(recency_.front());
    recency_.pop_front();
  }
}

CacheCounters SemanticCache::counters() const { return {hits_.load(), misses_.load(), index_.size()}; }

void SemanticCache::clear() {
  std::lock_guard lock(write_mu_);
  index_.clear();
  recency_.clear();
  recency_pos_.clear();
  hits_ = 0;
  misses_ = 0;
}

void SemanticCache::write_snapshot(std::ostream& records, std::ostream& sidecar) const {
  index_.write_snapshot(records, sidecar);
}

void SemanticCache::restore(std::istream& records, std::istream& sidecar) {
  auto restored = FlatIndex<SemanticEntry>::restore(records, sidecar);
  std::lock_guard lock(write_mu_);
  recency_.clear();
  recency_pos_.clear();
  if (max_entries_ > 0) {
    for (const auto& id : restored.ids()) {
      recency_pos_.emplace(id, recency_.insert(recency_.end(), id));
    }
  }
  index_ = std::move(restored);
}

// ---------------------------------------------------------------------------
// Write-through
// ---------------------------------------------------------------------------

void writeback(FixedKVCache& kv, SemanticCache& sc, const std::string& query_text,
               const EmbeddingVector& embedding, const AnswerRecord& answer) noexcept {
  try {
    kv.put(query_text, answer);
    sc.put(query_text, embedding, answer);
  } catch (const std::exception& e) {
    std::cerr << "pentarag: writeback failed: " << e.what() << '\n';
  }
}

void writeback(FixedKVCache& kv, SemanticCache& sc, const Embedder& embedder,
               const std::string& query_text, const AnswerRecord& answer) noexcept {
  try {
    writeback(kv, sc, query_text, embedder.embed(query_text), answer);
  } catch (const std::exception& e) {
    std::cerr << "pentarag: writeback failed: " << e.what() << '\n';
  }
}

}  // namespace pentarag
