#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pentarag/core.hpp"
#include "pentarag/embedding.hpp"
#include "pentarag/knowledge.hpp"
#include "pentarag/llm_engine.hpp"
#include "pentarag/metrics.hpp"
#include "pentarag/router.hpp"

namespace pentarag {

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct DatasetItem {
  std::string question;
  std::string answer;
  std::string context;

  bool operator==(const DatasetItem&) const = default;
};

void to_json(Json& j, const DatasetItem& d);
void from_json(const Json& j, DatasetItem& d);

/// {"question","answer","context"} per line.
std::vector<DatasetItem> load_dataset(const std::filesystem::path& path, bool lenient = false);

/// Reads a TriviaQA JSON file ({"Data": [{"Question", "Answer": {"Value"},
/// "SearchResults": [{"Description"}]}]}). Items without any description are
/// skipped. max_items = 0 reads everything.
std::vector<DatasetItem> load_triviaqa(const std::filesystem::path& path, std::size_t max_items = 0);

struct SyntheticDataset {
  std::vector<DatasetItem> items;
  /// Questions the stub model "already knows", with mixed confidences.
  StubKnowledgeTable pretrained;
};

/// Template questions over a generated vocabulary. Each context restates
/// its question with the answer, so a question is close to its own passage
/// and far from everyone else's.
SyntheticDataset synthetic_dataset(std::size_t size, std::uint64_t seed, double known_fraction = 0.1);

/// One passage per item: id "p<index>", text = context, answer annotation.
std::vector<Passage> dataset_passages(std::span<const DatasetItem> items, const Embedder& embedder);

void ingest_dataset(MainKnowledgeBase& kb, std::span<const DatasetItem> items, const Embedder& embedder);

// ---------------------------------------------------------------------------
// Replay schedule and perturbation
// ---------------------------------------------------------------------------

/// Probability that query i of n replays a past question.
class RampSchedule {
 public:
  virtual ~RampSchedule() = default;
  virtual double probability(std::size_t index, std::size_t length) const = 0;
};

/// p = i / (n - 1).
double replay_probability(std::size_t index, std::size_t length);

class LinearRamp final : public RampSchedule {
 public:
  double probability(std::size_t index, std::size_t length) const override {
    return replay_probability(index, length);
  }
};

/// `steps` equal plateaus from 0 to 1.
class StepRamp final : public RampSchedule {
 public:
  explicit StepRamp(std::size_t steps = 5) : steps_(steps < 2 ? 2 : steps) {}
  double probability(std::size_t index, std::size_t length) const override;

 private:
  std::size_t steps_;
};

/// Logistic curve centred mid-session, rescaled to hit 0 and 1 at the ends.
class SigmoidRamp final : public RampSchedule {
 public:
  explicit SigmoidRamp(double steepness = 10.0) : steepness_(steepness) {}
  double probability(std::size_t index, std::size_t length) const override;

 private:
  double steepness_;
};

class Perturber {
 public:
  virtual ~Perturber() = default;
  /// Returns text that differs from `text` in at least one byte.
  virtual std::string perturb(const std::string& text, Rng& rng) const = 0;
};

/// One uniformly chosen edit: swap two adjacent words, drop a stop-word, or
/// toggle the terminal punctuation. An edit that is not applicable, or that
/// would keep less than 70% of the tokens, falls back to the next one.
class CompositePerturber final : public Perturber {
 public:
  std::string perturb(const std::string& text, Rng& rng) const override;
};

inline constexpr double kMinPerturbOverlap = 0.7;

/// Multiset token overlap: |A n B| / max(|A|, |B|), tokens per tokenize().
double token_overlap(std::string_view a, std::string_view b);

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

enum class RampKind { kLinear, kStep, kSigmoid };
enum class PerturberKind { kComposite };

struct SimulationConfig {
  std::size_t n_sessions = 9;
  std::size_t queries_per_session = 1000;
  double replay_split = 0.5;  // P(exact replay | replay)
  RampKind ramp = RampKind::kLinear;
  PerturberKind perturber = PerturberKind::kComposite;
  std::uint64_t seed = 42;
  double latency_sigma = 0.25;  // lognormal jitter of synthetic latencies

  /// Throws kConfigError.
  void validate() const;
};

std::unique_ptr<RampSchedule> make_ramp(RampKind kind);
std::unique_ptr<Perturber> make_perturber(PerturberKind kind);

/// Question source for one session: fresh questions drawn without
/// replacement from a shuffled pool, replays drawn from what was served.
class QueryStream {
 public:
  QueryStream(std::vector<std::string> fresh_pool, std::size_t length, double replay_split,
              const RampSchedule& ramp, const Perturber& perturber);

  /// Throws kPoolExhausted when a fresh question is needed and none is left.
  std::pair<std::string, QueryOrigin> next(Rng& rng);

  std::size_t position() const { return position_; }
  const std::vector<std::string>& past() const { return past_; }

 private:
  std::vector<std::string> fresh_;
  std::size_t fresh_next_ = 0;
  std::vector<std::string> past_;
  std::size_t length_;
  std::size_t position_ = 0;
  double replay_split_;
  const RampSchedule& ramp_;
  const Perturber& perturber_;
};

/// Synthetic per-query latency: every probe costs a base from the cost model
/// times lognormal(0, sigma) jitter; the query latency is their sum.
class SyntheticLatencyModel {
 public:
  explicit SyntheticLatencyModel(const LayerCostModel& model = {}, double sigma = 0.25);

  double base(LayerTag layer, ProbeOutcome outcome) const;

  /// Rewrites probe durations and the total latency of `event`.
  void apply(RouteTraceEvent& event, Rng& rng) const;

 private:
  LayerArray<double> hit_base_{};
  LayerArray<double> miss_base_{};
  double sigma_;
};

inline constexpr double kFixedKvLatencyFloor = 1e-5;

struct SessionLog {
  std::string session_id;
  std::vector<LogEntry> entries;

  bool operator==(const SessionLog&) const = default;
};

/// Runs n_sessions sessions against a fresh deterministic-settle router
/// built from the given parts. Caches, adaptive memory and the past pool are
/// empty at the start of every session. Latencies and timestamps are
/// synthetic, so the logs depend only on the inputs and the seed.
std::vector<SessionLog> run_simulation(const SimulationConfig& config, RouterConfig router_config,
                                       const Embedder& embedder, GenerationBackend& backend,
                                       const MainKnowledgeBase& kb, std::span<const DatasetItem> dataset,
                                       const LayerCostModel& cost_model = {});

/// session_<k>.jsonl per session, one LogEntry per line.
std::vector<std::filesystem::path> write_session_logs(std::span<const SessionLog> logs,
                                                      const std::filesystem::path& dir);
SessionLog read_session_log(const std::filesystem::path& path);
/// All session_*.jsonl files in `dir`, in name order.
std::vector<SessionLog> read_session_logs(const std::filesystem::path& dir);

}  // namespace pentarag
