#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pentarag/core.hpp"
#include "pentarag/embedding.hpp"
#include "pentarag/flat_index.hpp"
#include "pentarag/jsonl.hpp"

namespace pentarag {

struct Passage {
  std::string id;
  std::string text;
  std::string source;
  EmbeddingVector embedding;
  /// QA annotation carried by fixture corpora; read by the stub backend.
  std::optional<std::string> answer;

  bool operator==(const Passage&) const = default;
};

void to_json(Json& j, const Passage& p);
void from_json(const Json& j, Passage& p);

/// Stored alongside each vector in a passage index.
struct PassageBody {
  std::string text;
  std::string source;
  std::optional<std::string> answer;
};

void to_json(Json& j, const PassageBody& b);
void from_json(const Json& j, PassageBody& b);

struct CorpusMetadata {
  std::string name;
  std::int64_t ingested_at = 0;  // monotonic ns of the last ingest
  std::size_t count = 0;
};

/// Ranked passages for one query against the main knowledge base.
struct Retrieval {
  std::vector<Passage> passages;  // top-k, used as generation context
  std::vector<Passage> seeds;     // top-min(seed_k, size), queued for AKM
  std::vector<SearchHit> hits;    // ranks and scores of `seeds`
};

inline constexpr std::size_t kDefaultRetrievalK = 3;
inline constexpr std::size_t kDefaultAkmSeedK = 10;

/// Layer 5 store: the full passage corpus behind an exact flat index.
class MainKnowledgeBase {
 public:
  explicit MainKnowledgeBase(std::size_t dimension = kEmbeddingDim, std::string name = "main");

  void add(const Passage& passage);

  /// Reads {"id","text","source"[,"answer"]} lines and embeds each text.
  JsonlReadStats ingest_jsonl(std::istream& in, const std::string& source_name, const Embedder& embedder,
                              bool lenient = false);
  JsonlReadStats ingest_file(const std::filesystem::path& path, const Embedder& embedder,
                             bool lenient = false);

  /// Throws kEmptyKnowledgeBase when nothing has been ingested.
  Retrieval retrieve(const EmbeddingVector& query, std::size_t k = kDefaultRetrievalK,
                     std::size_t seed_k = kDefaultAkmSeedK) const;

  std::size_t size() const { return index_.size(); }
  std::size_t dimension() const { return index_.dimension(); }
  bool contains(const std::string& id) const { return index_.contains(id); }
  std::optional<Passage> passage(const std::string& id) const;
  std::uint64_t search_count() const { return index_.search_count(); }
  const CorpusMetadata& metadata() const { return metadata_; }

  /// Writes kb.bin, kb.jsonl and kb_meta.json under `dir`.
  void save(const std::filesystem::path& dir) const;
  static MainKnowledgeBase load(const std::filesystem::path& dir);
  static bool snapshot_exists(const std::filesystem::path& dir);

 private:
  FlatIndex<PassageBody> index_;
  CorpusMetadata metadata_;
};

enum class SettleMode {
  kDeterministic,  // pending inserts are applied by settle(), called before each query
  kBackground,     // a worker thread applies them within the settle interval
};

inline constexpr double kDefaultAkmThreshold = 0.85;

/// Layer 4: a runtime-grown subset of the main knowledge base.
class AdaptiveKnowledgeMemory {
 public:
  AdaptiveKnowledgeMemory(const MainKnowledgeBase& kb, double threshold = kDefaultAkmThreshold,
                          SettleMode mode = SettleMode::kDeterministic,
                          std::chrono::milliseconds settle_interval = std::chrono::milliseconds(50));
  ~AdaptiveKnowledgeMemory();

  AdaptiveKnowledgeMemory(const AdaptiveKnowledgeMemory&) = delete;
  AdaptiveKnowledgeMemory& operator=(const AdaptiveKnowledgeMemory&) = delete;

  double threshold() const { return threshold_; }
  SettleMode mode() const { return mode_; }

  /// Queues passages for insertion; never blocks on the index.
  void enqueue(std::vector<Passage> passages);

  /// Deterministic mode: applies every pending insertion now. Background
  /// mode: waits until the worker has drained the queue.
  void settle();

  /// Synchronous insert. Skips ids already present and ids unknown to the
  /// main knowledge base. Returns the number added.
  std::size_t insert(const std::vector<Passage>& passages);

  /// Top-k passages if the best cosine is >= threshold, otherwise nullopt.
  std::optional<std::vector<Passage>> retrieve(const EmbeddingVector& query,
                                               std::size_t k = kDefaultRetrievalK);

  std::size_t size() const { return index_.size(); }
  bool contains(const std::string& id) const { return index_.contains(id); }
  std::vector<std::string> ids() const { return index_.ids(); }
  std::size_t pending() const;
  std::uint64_t search_count() const { return index_.search_count(); }
  std::uint64_t total_inserted() const { return total_inserted_.load(); }
  std::uint64_t hits() const { return hits_.load(); }
  std::uint64_t misses() const { return misses_.load(); }

  /// Drops pending insertions and every stored passage.
  void clear();

  void write_snapshot(std::ostream& records, std::ostream& sidecar) const;
  void restore(std::istream& records, std::istream& sidecar);

 private:
  void drain();
  void worker_loop(std::stop_token stop);

  const MainKnowledgeBase& kb_;
  double threshold_;
  SettleMode mode_;
  std::chrono::milliseconds settle_interval_;
  FlatIndex<PassageBody> index_;

  mutable std::mutex queue_mu_;
  std::condition_variable_any queue_cv_;
  std::condition_variable_any drained_cv_;
  std::vector<std::vector<Passage>> queue_;
  bool draining_ = false;
  std::mutex insert_mu_;  // serialises insert()

  std::atomic<std::uint64_t> total_inserted_{0};
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
  std::jthread worker_;
};

}  // namespace pentarag
