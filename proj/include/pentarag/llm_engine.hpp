#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pentarag/core.hpp"
#include "pentarag/knowledge.hpp"

namespace pentarag {

struct Generation {
  std::string text;
  double confidence = 0.0;  // in [0, 1]
};

/// Two entry points: answering from supplied passages, and answering from
/// the model's own knowledge with a self-reported confidence.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual Generation generate_with_context(const std::string& query, std::span<const Passage> passages) = 0;
  virtual Generation recall(const std::string& query) = 0;
};

inline constexpr double kDefaultRecallThreshold = 0.5;

/// Context generation. Throws kEmptyContext for an empty passage list. The
/// returned record lists passage ids in rank order; `layer` must be
/// AdaptiveMemory or NaiveRAG.
AnswerRecord generate_with_context(GenerationBackend& backend, const std::string& query,
                                   std::span<const Passage> passages, LayerTag layer);

/// Confidence-gated recall: accepted iff confidence >= recall_threshold.
std::optional<AnswerRecord> memory_recall(GenerationBackend& backend, const std::string& query,
                                          double recall_threshold = kDefaultRecallThreshold);

// ---------------------------------------------------------------------------
// Stub backend
// ---------------------------------------------------------------------------

/// What the stub model "knows": exact question text -> (answer, confidence).
class StubKnowledgeTable {
 public:
  struct Fact {
    std::string answer;
    double confidence = 0.0;
  };

  void set(const std::string& question, std::string answer, double confidence);
  std::optional<Fact> find(const std::string& question) const;
  std::size_t size() const { return facts_.size(); }

  /// Loads a TrainingTriple JSONL export; every question becomes recallable
  /// with `confidence`. Later lines overwrite earlier ones.
  static StubKnowledgeTable from_triples(const std::filesystem::path& path, double confidence = 1.0);
  void add_triples(std::span<const TrainingTriple> triples, double confidence = 1.0);

  /// Table file: {"question","answer","confidence"} per line.
  static StubKnowledgeTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Accepts either the table format or a triple export, line by line.
  static StubKnowledgeTable load_any(const std::filesystem::path& path, double triple_confidence = 1.0);

 private:
  std::unordered_map<std::string, Fact> facts_;
};

/// Deterministic backend for tests and simulation. Context answers come from
/// the top-ranked passage's annotation (or its first sentence when the
/// passage is unannotated); recall answers come from the knowledge table.
class StubBackend final : public GenerationBackend {
 public:
  StubBackend() : table_(std::make_shared<const StubKnowledgeTable>()) {}
  explicit StubBackend(StubKnowledgeTable table)
      : table_(std::make_shared<const StubKnowledgeTable>(std::move(table))) {}

  Generation generate_with_context(const std::string& query, std::span<const Passage> passages) override;
  Generation recall(const std::string& query) override;

  /// Replaces the knowledge table; in-flight calls keep the old one.
  void load_table(StubKnowledgeTable table);
  std::shared_ptr<const StubKnowledgeTable> table() const;

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const StubKnowledgeTable> table_;
};

/// Wraps another backend and counts calls.
class CountingBackend final : public GenerationBackend {
 public:
  explicit CountingBackend(GenerationBackend& inner) : inner_(inner) {}

  Generation generate_with_context(const std::string& query, std::span<const Passage> passages) override {
    context_calls_.fetch_add(1);
    return inner_.generate_with_context(query, passages);
  }
  Generation recall(const std::string& query) override {
    recall_calls_.fetch_add(1);
    return inner_.recall(query);
  }

  std::uint64_t context_calls() const { return context_calls_.load(); }
  std::uint64_t recall_calls() const { return recall_calls_.load(); }
  std::uint64_t total_calls() const { return context_calls() + recall_calls(); }

 private:
  GenerationBackend& inner_;
  std::atomic<std::uint64_t> context_calls_{0};
  std::atomic<std::uint64_t> recall_calls_{0};
};

class HttpJsonClient;

/// JSON-over-HTTP backend:
///   POST {"mode": "context"|"recall", "query": s, "passages": [s]}
///     -> {"answer": s, "confidence": x}
/// A missing or invalid confidence reads as 0, which makes recall fall through.
class RemoteBackend final : public GenerationBackend {
 public:
  explicit RemoteBackend(const std::string& endpoint, std::size_t max_in_flight = 4);
  ~RemoteBackend() override;

  Generation generate_with_context(const std::string& query, std::span<const Passage> passages) override;
  Generation recall(const std::string& query) override;

 private:
  Generation call(const std::string& mode, const std::string& query, std::span<const Passage> passages);
  std::unique_ptr<HttpJsonClient> client_;
};

}  // namespace pentarag
