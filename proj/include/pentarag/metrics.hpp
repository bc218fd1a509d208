#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "pentarag/core.hpp"
#include "pentarag/embedding.hpp"
#include "pentarag/router.hpp"

namespace pentarag {

// ---------------------------------------------------------------------------
// Cost model
// ---------------------------------------------------------------------------

/// Per-layer GPU seconds per query and throughput. Defaults are the measured
/// figures of the reference deployment (Ministral-8B on four RTX 8000s).
struct LayerCostModel {
  LayerArray<double> gpu_seconds_per_query{0.0, 9.4e-4, 0.25703, 0.53866, 0.53866};
  LayerArray<double> qps{419430.0, 208.33, 2.51, 1.81431, 0.45579};

  /// Throws kConfigError on a negative cost or non-positive rate.
  void validate() const;
};

void to_json(Json& j, const LayerCostModel& m);
void from_json(const Json& j, LayerCostModel& m);

struct CostSample {
  double wall_time = 0.0;    // seconds
  double utilization = 0.0;  // [0, 1]
  std::string device_id;
};

/// Pluggable source of device cost samples for one query.
class CostSampler {
 public:
  virtual ~CostSampler() = default;
  virtual std::vector<CostSample> sample(LayerTag serving_layer) = 0;
};

/// Attributes the cost model's GPU seconds to a single virtual device at
/// full utilisation.
class ModelCostSampler final : public CostSampler {
 public:
  explicit ModelCostSampler(LayerCostModel model) : model_(std::move(model)) {}
  std::vector<CostSample> sample(LayerTag serving_layer) override;

 private:
  LayerCostModel model_;
};

/// Map LayerTag -> fraction, summing to 1.
struct UsageRatios {
  LayerArray<double> ratio{};
  double sum() const;
};

/// sum over samples of wall_time * utilization.
double gpu_time_per_query(std::span<const CostSample> samples);

/// sum_layer cost(layer) * ratio(layer). Throws kRatioMismatch unless the
/// ratios sum to 1 within 1e-6.
double weighted_cost(const LayerCostModel& model, const UsageRatios& ratios);

/// sum_layer qps(layer) * ratio(layer). Same precondition as weighted_cost.
double weighted_qps(const LayerCostModel& model, const UsageRatios& ratios);

/// query_count / elapsed. Throws kZeroElapsed when elapsed <= 0.
double measure_qps(std::uint64_t query_count, double elapsed_seconds);

/// Serving-layer shares of a trace. Unanswered events are ignored; throws
/// kEmptyTrace when no event was served.
UsageRatios usage_ratio(std::span<const RouteTraceEvent> trace);

/// QPS of a recorded trace: events over the span from the first timestamp
/// to the end of the last query.
double replay_qps(std::span<const RouteTraceEvent> trace);

// ---------------------------------------------------------------------------
// Quality metrics
// ---------------------------------------------------------------------------

/// supported / total. Throws kNoClaims when total is 0.
double faithfulness(std::size_t supported_claims, std::size_t total_claims);

struct RelevancyInputs {
  EmbeddingVector input;                   // embedding of the user input
  std::vector<EmbeddingVector> generated;  // embeddings of generated questions
};

/// Mean cosine of each generated-question embedding with the input
/// embedding. The result lies in [-1, 1]. Throws kEmptyInput when there are
/// no generated questions.
double answer_relevancy(const RelevancyInputs& inputs);

class ClaimExtractor {
 public:
  virtual ~ClaimExtractor() = default;
  virtual std::vector<std::string> claims(const std::string& answer) const = 0;
  virtual bool supported(const std::string& claim, const std::string& context) const = 0;
};

/// Sentences split on '.', '!' or '?'; a claim is supported when it occurs
/// verbatim in the context.
class SentenceClaimExtractor final : public ClaimExtractor {
 public:
  std::vector<std::string> claims(const std::string& answer) const override;
  bool supported(const std::string& claim, const std::string& context) const override;
};

class QuestionGenerator {
 public:
  virtual ~QuestionGenerator() = default;
  virtual std::vector<std::string> questions(const std::string& answer) const = 0;
};

/// Returns the answer's sentences unchanged.
class IdentityQuestionGenerator final : public QuestionGenerator {
 public:
  std::vector<std::string> questions(const std::string& answer) const override;
};

std::vector<std::string> split_sentences(const std::string& text);

double evaluate_faithfulness(const ClaimExtractor& extractor, const std::string& answer,
                             const std::string& context);
double evaluate_answer_relevancy(const QuestionGenerator& generator, const Embedder& embedder,
                                 const std::string& user_input, const std::string& answer);

// ---------------------------------------------------------------------------
// Latency statistics
// ---------------------------------------------------------------------------

/// Linear interpolation between closest ranks: h = (n - 1) p, result
/// x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]) on sorted x.
double quantile(std::span<const double> sorted, double p);

struct WarmupPoint {
  std::size_t index = 0;
  double mean = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct WarmupCurve {
  std::vector<WarmupPoint> points;
  bool insufficient_data = false;  // some session had fewer qualifying queries
};

inline constexpr std::size_t kWarmupQueries = 100;
inline constexpr double kWarmupLatencyCeiling = 6.0;

/// Per session: the first 100 queries with latency < 6 s, sorted by latency
/// descending. At each index the curve holds the mean and quartiles across
/// sessions. Sessions with fewer qualifying queries shorten the curve and
/// set insufficient_data. Throws kEmptyTrace for no sessions.
WarmupCurve warmup_curve(std::span<const std::vector<double>> session_latencies);

struct LatencyStats {
  LayerTag layer = LayerTag::kFixedKV;
  std::size_t count = 0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;
  std::vector<double> outliers;  // outside [p5, p95]
};

LatencyStats summarize_latencies(LayerTag layer, std::vector<double> samples);

/// Stats for every layer with at least one served event. Throws kEmptyTrace.
std::vector<LatencyStats> latency_distribution(std::span<const RouteTraceEvent> trace);

// ---------------------------------------------------------------------------
// Live collector and reports
// ---------------------------------------------------------------------------

/// Concurrent-append stats used by the service.
class StatsCollector {
 public:
  void record(const RouteTraceEvent& event);
  void reset();
  LayerArray<std::uint64_t> layer_counts() const;
  std::uint64_t total() const;
  std::uint64_t unanswered() const;
  std::vector<RouteTraceEvent> events() const;

 private:
  mutable std::mutex mu_;
  LayerArray<std::uint64_t> counts_{};
  std::uint64_t unanswered_ = 0;
  std::vector<RouteTraceEvent> events_;
};

struct ReportFiles {
  std::filesystem::path warmup_csv;
  std::filesystem::path boxplot_csv;
  std::filesystem::path outliers_csv;
  std::filesystem::path usage_csv;
  std::filesystem::path summary_json;
};

/// Writes warmup.csv, boxplot.csv, outliers.csv, usage.csv and summary.json.
ReportFiles write_report(std::span<const std::vector<LogEntry>> sessions, const LayerCostModel& model,
                         const std::filesystem::path& out_dir);

}  // namespace pentarag
