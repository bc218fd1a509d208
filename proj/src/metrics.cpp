#include "pentarag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "pentarag/jsonl.hpp"

namespace pentarag {

namespace {

constexpr double kRatioTolerance = 1e-6;

void check_ratios(const UsageRatios& ratios) {
  for (double r : ratios.ratio) {
    if (!(r >= 0.0)) throw Error(ErrorCode::kRatioMismatch, "negative or NaN usage ratio");
  }
  if (std::abs(ratios.sum() - 1.0) > kRatioTolerance) {
    throw Error(ErrorCode::kRatioMismatch, "usage ratios sum to " + std::to_string(ratios.sum()));
  }
}

double weighted_sum(const LayerArray<double>& values, const UsageRatios& ratios) {
  check_ratios(ratios);
  double total = 0.0;
  for (std::size_t i = 0; i < kLayerCount; ++i) total += values[i] * ratios.ratio[i];
  return total;
}

Json layer_map(const LayerArray<double>& values) {
  Json j = Json::object();
  for (LayerTag t : kAllLayers) j[std::string(layer_name(t))] = values[layer_index(t)];
  return j;
}

LayerArray<double> parse_layer_map(const Json& j, const LayerArray<double>& defaults) {
  LayerArray<double> out = defaults;
  for (const auto& [key, value] : j.items()) out[layer_index(parse_layer(key))] = value.get<double>();
  return out;
}

std::string format_double(double x) {
  std::ostringstream ss;
  ss << std::setprecision(17) << x;
  return ss.str();
}

}  // namespace

void LayerCostModel::validate() const {
  for (LayerTag t : kAllLayers) {
    double cost = gpu_seconds_per_query[layer_index(t)];
    double rate = qps[layer_index(t)];
    if (!(cost >= 0.0) || !std::isfinite(cost)) {
      throw Error(ErrorCode::kConfigError, "gpu cost for " + std::string(layer_name(t)) + " must be >= 0");
    }
    if (!(rate > 0.0) || !std::isfinite(rate)) {
      throw Error(ErrorCode::kConfigError, "qps for " + std::string(layer_name(t)) + " must be > 0");
    }
  }
}

void to_json(Json& j, const LayerCostModel& m) {
  j = Json{{"gpu_seconds_per_query", layer_map(m.gpu_seconds_per_query)}, {"qps", layer_map(m.qps)}};
}

void from_json(const Json& j, LayerCostModel& m) {
  LayerCostModel defaults;
  for (const auto& [key, _] : j.items()) {
    if (key != "gpu_seconds_per_query" && key != "qps") {
      throw Error(ErrorCode::kConfigError, "unknown cost model key '" + key + "'");
    }
  }
  m.gpu_seconds_per_query = j.contains("gpu_seconds_per_query")
                                ? parse_layer_map(j["gpu_seconds_per_query"], defaults.gpu_seconds_per_query)
                                : defaults.gpu_seconds_per_query;
  m.qps = j.contains("qps") ? parse_layer_map(j["qps"], defaults.qps) : defaults.qps;
  m.validate();
}

std::vector<CostSample> ModelCostSampler::sample(LayerTag serving_layer) {
  return {CostSample{model_.gpu_seconds_per_query[layer_index(serving_layer)], 1.0, "model"}};
}

double UsageRatios::sum() const {
  double s = 0.0;
  for (double r : ratio) s += r;
  return s;
}

double gpu_time_per_query(std::span<const CostSample> samples) {
  double total = 0.0;
  for (const auto& s : samples) total += s.wall_time * s.utilization;
  return total;
}

double weighted_cost(const LayerCostModel& model, const UsageRatios& ratios) {
  return weighted_sum(model.gpu_seconds_per_query, ratios);
}

double weighted_qps(const LayerCostModel& model, const UsageRatios& ratios) {
  return weighted_sum(model.qps, ratios);
}

double measure_qps(std::uint64_t query_count, double elapsed_seconds) {
  if (!(elapsed_seconds > 0.0)) throw Error(ErrorCode::kZeroElapsed, "elapsed time must be positive");
  return static_cast<double>(query_count) / elapsed_seconds;
}

UsageRatios usage_ratio(std::span<const RouteTraceEvent> trace) {
  LayerArray<std::uint64_t> counts{};
  std::uint64_t total = 0;
  for (const auto& e : trace) {
    if (!e.serving_layer) continue;
    ++counts[layer_index(*e.serving_layer)];
    ++total;
  }
  if (total == 0) throw Error(ErrorCode::kEmptyTrace, "no served events in trace");
  UsageRatios out;
  for (std::size_t i = 0; i < kLayerCount; ++i) {
    out.ratio[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return out;
}

double replay_qps(std::span<const RouteTraceEvent> trace) {
  if (trace.empty()) throw Error(ErrorCode::kEmptyTrace, "empty trace");
  std::int64_t first = trace.front().timestamp;
  double end = 0.0;
  for (const auto& e : trace) {
    first = std::min(first, e.timestamp);
  }
  for (const auto& e : trace) {
    end = std::max(end, static_cast<double>(e.timestamp - first) * 1e-9 + e.latency_seconds);
  }
  return measure_qps(trace.size(), end);
}

double faithfulness(std::size_t supported_claims, std::size_t total_claims) {
  if (total_claims == 0) throw Error(ErrorCode::kNoClaims, "answer has no claims");
  if (supported_claims > total_claims) {
    throw Error(ErrorCode::kMalformedInput, "more supported claims than claims");
  }
  return static_cast<double>(supported_claims) / static_cast<double>(total_claims);
}

double answer_relevancy(const RelevancyInputs& inputs) {
  if (inputs.generated.empty()) throw Error(ErrorCode::kEmptyInput, "no generated questions");
  double sum = 0.0;
  for (const auto& g : inputs.generated) sum += cosine(g, inputs.input);
  return sum / static_cast<double>(inputs.generated.size());
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    auto b = current.find_first_not_of(" \t\r\n");
    if (b != std::string::npos) {
      auto e = current.find_last_not_of(" \t\r\n");
      out.push_back(current.substr(b, e - b + 1));
    }
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    current.push_back(c);
    bool terminal = c == '.' || c == '!' || c == '?';
    bool boundary = i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\n' || text[i + 1] == '\t';
    if (terminal && boundary) flush();
  }
  flush();
  return out;
}

std::vector<std::string> SentenceClaimExtractor::claims(const std::string& answer) const {
  return split_sentences(answer);
}

bool SentenceClaimExtractor::supported(const std::string& claim, const std::string& context) const {
  return !claim.empty() && context.find(claim) != std::string::npos;
}

std::vector<std::string> IdentityQuestionGenerator::questions(const std::string& answer) const {
  return split_sentences(answer);
}

double evaluate_faithfulness(const ClaimExtractor& extractor, const std::string& answer,
                             const std::string& context) {
  auto claims = extractor.claims(answer);
  std::size_t supported = 0;
  for (const auto& c : claims) supported += extractor.supported(c, context) ? 1 : 0;
  return faithfulness(supported, claims.size());
}

double evaluate_answer_relevancy(const QuestionGenerator& generator, const Embedder& embedder,
                                 const std::string& user_input, const std::string& answer) {
  RelevancyInputs inputs{embedder.embed(user_input), {}};
  for (const auto& q : generator.questions(answer)) inputs.generated.push_back(embedder.embed(q));
  return answer_relevancy(inputs);
}

double quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::kEmptyTrace, "quantile of no samples");
  p = std::clamp(p, 0.0, 1.0);
  double h = static_cast<double>(sorted.size() - 1) * p;
  auto lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

WarmupCurve warmup_curve(std::span<const std::vector<double>> session_latencies) {
  if (session_latencies.empty()) throw Error(ErrorCode::kEmptyTrace, "no sessions");
  std::vector<std::vector<double>> kept;
  std::size_t length = kWarmupQueries;
  WarmupCurve curve;
  for (const auto& session : session_latencies) {
    std::vector<double> q;
    for (double latency : session) {
      if (q.size() == kWarmupQueries) break;
      if (latency < kWarmupLatencyCeiling) q.push_back(latency);
    }
    if (q.size() < kWarmupQueries) curve.insufficient_data = true;
    length = std::min(length, q.size());
    std::sort(q.begin(), q.end(), std::greater<>());
    kept.push_back(std::move(q));
  }
  std::vector<double> column(kept.size());
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t s = 0; s < kept.size(); ++s) column[s] = kept[s][i];
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double x : column) sum += x;
    curve.points.push_back(WarmupPoint{i, sum / static_cast<double>(column.size()), quantile(column, 0.25),
                                       quantile(column, 0.75)});
  }
  return curve;
}

LatencyStats summarize_latencies(LayerTag layer, std::vector<double> samples) {
  if (samples.empty()) throw Error(ErrorCode::kEmptyTrace, "no samples for " + std::string(layer_name(layer)));
  std::sort(samples.begin(), samples.end());
  LatencyStats s;
  s.layer = layer;
  s.count = samples.size();
  s.q1 = quantile(samples, 0.25);
  s.median = quantile(samples, 0.5);
  s.q3 = quantile(samples, 0.75);
  s.p5 = quantile(samples, 0.05);
  s.p95 = quantile(samples, 0.95);
  for (double x : samples) {
    if (x < s.p5 || x > s.p95) s.outliers.push_back(x);
  }
  return s;
}

std::vector<LatencyStats> latency_distribution(std::span<const RouteTraceEvent> trace) {
  LayerArray<std::vector<double>> by_layer;
  bool any = false;
  for (const auto& e : trace) {
    if (!e.serving_layer) continue;
    by_layer[layer_index(*e.serving_layer)].push_back(e.latency_seconds);
    any = true;
  }
  if (!any) throw Error(ErrorCode::kEmptyTrace, "no served events in trace");
  std::vector<LatencyStats> out;
  for (LayerTag t : kAllLayers) {
    auto& samples = by_layer[layer_index(t)];
    if (!samples.empty()) out.push_back(summarize_latencies(t, std::move(samples)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// StatsCollector
// ---------------------------------------------------------------------------

void StatsCollector::record(const RouteTraceEvent& event) {
  std::lock_guard lock(mu_);
  if (event.serving_layer) {
    ++counts_[layer_index(*event.serving_layer)];
  } else {
    ++unanswered_;
  }
  events_.push_back(event);
}

void StatsCollector::reset() {
  std::lock_guard lock(mu_);
  counts_ = {};
  unanswered_ = 0;
  events_.clear();
}

LayerArray<std::uint64_t> StatsCollector::layer_counts() const {
  std::lock_guard lock(mu_);
  return counts_;
}

std::uint64_t StatsCollector::total() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

std::uint64_t StatsCollector::unanswered() const {
  std::lock_guard lock(mu_);
  return unanswered_;
}

std::vector<RouteTraceEvent> StatsCollector::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

ReportFiles write_report(std::span<const std::vector<LogEntry>> sessions, const LayerCostModel& model,
                         const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  ReportFiles files{out_dir / "warmup.csv", out_dir / "boxplot.csv", out_dir / "outliers.csv",
                    out_dir / "usage.csv", out_dir / "summary.json"};

  std::vector<std::vector<double>> latencies;
  std::vector<RouteTraceEvent> all;
  for (const auto& session : sessions) {
    auto& lat = latencies.emplace_back();
    for (const auto& e : session) {
      lat.push_back(e.trace.latency_seconds);
      all.push_back(e.trace);
    }
  }

  auto curve = warmup_curve(latencies);
  std::string warmup = "index,mean,q1,q3\n";
  for (const auto& p : curve.points) {
    warmup += std::to_string(p.index) + "," + format_double(p.mean) + "," + format_double(p.q1) + "," +
              format_double(p.q3) + "\n";
  }
  write_text_file(files.warmup_csv, warmup);

  std::string boxplot = "layer,q1,median,q3,p5,p95\n";
  std::string outliers = "layer,latency_seconds\n";
  for (const auto& s : latency_distribution(all)) {
    std::string name(layer_name(s.layer));
    boxplot += name + "," + format_double(s.q1) + "," + format_double(s.median) + "," + format_double(s.q3) + "," +
               format_double(s.p5) + "," + format_double(s.p95) + "\n";
    for (double x : s.outliers) outliers += name + "," + format_double(x) + "\n";
  }
  write_text_file(files.boxplot_csv, boxplot);
  write_text_file(files.outliers_csv, outliers);

  auto ratios = usage_ratio(all);
  std::string usage = "layer,ratio\n";
  for (LayerTag t : kAllLayers) usage += std::string(layer_name(t)) + "," + format_double(ratios.ratio[layer_index(t)]) + "\n";
  write_text_file(files.usage_csv, usage);

  Json summary{{"weighted_gpu_s_per_query", weighted_cost(model, ratios)},
               {"weighted_qps", weighted_qps(model, ratios)}};
  write_text_file(files.summary_json, summary.dump(2) + "\n");
  return files;
}

}  // namespace pentarag
