#include <doctest.h>

#include <fstream>

#include "oracle.hpp"
#include "pentarag/jsonl.hpp"
#include "pentarag/metrics.hpp"

using namespace pentarag;

namespace {

RouteTraceEvent event(std::optional<LayerTag> layer, double latency = 0.1, std::int64_t ts = 0) {
  RouteTraceEvent e;
  e.query_id = "q";
  e.serving_layer = layer;
  e.latency_seconds = latency;
  e.timestamp = ts;
  return e;
}

UsageRatios table3_ratios() {
  UsageRatios r;
  r.ratio = {0.244, 0.255, 0.078, 0.279, 0.144};
  return r;
}

}  // namespace

TEST_CASE("gpu time per query") {
  std::vector<CostSample> one{{2.0, 0.5, "gpu0"}};
  CHECK(gpu_time_per_query(one) == 1.0);
  CHECK(gpu_time_per_query({}) == 0.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<CostSample> s;
    double want = 0.0;
    for (int d = 0; d < 4; ++d) {
      s.push_back({u(rng) * 3, u(rng), "gpu" + std::to_string(d)});
      want += s.back().wall_time * s.back().utilization;
    }
    CHECK(std::abs(gpu_time_per_query(s) - want) <= 1e-9);
  }
}

TEST_CASE("weighted cost and qps with the reference figures") {
  LayerCostModel m;
  CHECK(std::abs(weighted_cost(m, table3_ratios()) - 0.24814) <= 1e-4);
  CHECK(std::abs(weighted_qps(m, table3_ratios()) - 102395.0) <= 5.0);
}

TEST_CASE("weighted aggregation identities") {
  LayerCostModel zero;
  zero.gpu_seconds_per_query = {0, 0, 0, 0, 0};
  CHECK(weighted_cost(zero, table3_ratios()) == 0.0);

  LayerCostModel flat;
  flat.gpu_seconds_per_query = {0.3, 0.3, 0.3, 0.3, 0.3};
  UsageRatios uniform;
  uniform.ratio = {0.2, 0.2, 0.2, 0.2, 0.2};
  CHECK(weighted_cost(flat, uniform) == doctest::Approx(0.3).epsilon(1e-12));

  for (auto layer : kAllLayers) {
    UsageRatios single;
    single.ratio[layer_index(layer)] = 1.0;
    CHECK(weighted_qps(LayerCostModel{}, single) == LayerCostModel{}.qps[layer_index(layer)]);
  }
  UsageRatios bad;
  bad.ratio = {0.5, 0.5, 0.1, 0, 0};
  try {
    weighted_cost(LayerCostModel{}, bad);
    FAIL("ratios not summing to 1 accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kRatioMismatch);
  }
}

TEST_CASE("property: weighted aggregates match the scalar loop and are linear") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    LayerCostModel m;
    UsageRatios r;
    double total = 0.0;
    for (std::size_t i = 0; i < kLayerCount; ++i) {
      m.gpu_seconds_per_query[i] = u(rng);
      m.qps[i] = 0.1 + u(rng) * 1000;
      r.ratio[i] = u(rng);
      total += r.ratio[i];
    }
    for (auto& x : r.ratio) x /= total;
    double cost = 0.0, qps = 0.0;
    for (std::size_t i = 0; i < kLayerCount; ++i) {
      cost += m.gpu_seconds_per_query[i] * r.ratio[i];
      qps += m.qps[i] * r.ratio[i];
    }
    CHECK(std::abs(weighted_cost(m, r) - cost) <= 1e-9);
    CHECK(std::abs(weighted_qps(m, r) - qps) <= 1e-9);
    LayerCostModel twice = m;
    for (auto& c : twice.gpu_seconds_per_query) c *= 2;
    CHECK(weighted_cost(twice, r) == 2 * weighted_cost(m, r));
  }
}

TEST_CASE("measured qps") {
  CHECK(measure_qps(100, 10.0) == 10.0);
  CHECK(measure_qps(0, 5.0) == 0.0);
  try {
    measure_qps(5, 0.0);
    FAIL("zero elapsed accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kZeroElapsed);
  }
}

TEST_CASE("replayed trace qps equals count over its span") {
  std::vector<RouteTraceEvent> trace;
  std::int64_t t = 0;
  for (int i = 0; i < 50; ++i) {
    trace.push_back(event(LayerTag::kFixedKV, 0.02, t));
    t += 20'000'000;  // back to back
  }
  // Span runs from the first start to the end of the last query: 50 * 0.02 s.
  CHECK(replay_qps(trace) == doctest::Approx(50.0 / 1.0).epsilon(1e-9));
}

TEST_CASE("usage ratios") {
  std::vector<RouteTraceEvent> kv(10, event(LayerTag::kFixedKV));
  auto r = usage_ratio(kv);
  CHECK(r.ratio[0] == 1.0);
  for (std::size_t i = 1; i < kLayerCount; ++i) CHECK(r.ratio[i] == 0.0);

  std::vector<RouteTraceEvent> mixed;
  for (auto layer : kAllLayers) {
    mixed.push_back(event(layer));
    mixed.push_back(event(layer));
  }
  mixed.push_back(event(std::nullopt));
  auto m = usage_ratio(mixed);
  for (double x : m.ratio) CHECK(x == doctest::Approx(0.2));
  CHECK(std::abs(m.sum() - 1.0) <= 1e-9);
  try {
    usage_ratio({});
    FAIL("empty trace accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyTrace);
  }
}

TEST_CASE("faithfulness") {
  CHECK(faithfulness(3, 4) == 0.75);
  CHECK(faithfulness(0, 7) == 0.0);
  CHECK_THROWS_AS(faithfulness(0, 0), Error);
  SentenceClaimExtractor x;
  // Hand count: sentences 1 and 3 occur verbatim in the context, 2 does not.
  const std::string context = "Paris is the capital of France. The Seine runs through it. It has many museums.";
  const std::string answer = "Paris is the capital of France. Paris has ten million cats! It has many museums.";
  CHECK(evaluate_faithfulness(x, answer, context) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("answer relevancy") {
  HashEmbedder e;
  auto v = e.embed("who wrote hamlet");
  CHECK(answer_relevancy({v, {v}}) == doctest::Approx(1.0).epsilon(1e-6));
  const std::size_t dim = 8;
  RelevancyInputs two{oracle::axis(0, dim), {oracle::at_angle(0.8, dim), oracle::at_angle(0.6, dim)}};
  CHECK(answer_relevancy(two) == doctest::Approx(0.7).epsilon(1e-6));
  CHECK_THROWS_AS(answer_relevancy({v, {}}), Error);

  std::mt19937_64 rng(77);
  for (int t = 0; t < 50; ++t) {
    RelevancyInputs in{oracle::random_unit(rng, 64), {}};
    double sum = 0.0;
    std::size_t n = 1 + rng() % 10;
    for (std::size_t i = 0; i < n; ++i) {
      in.generated.push_back(oracle::random_unit(rng, 64));
      sum += oracle::cosine(in.generated.back(), in.input);
    }
    double got = answer_relevancy(in);
    CHECK(std::abs(got - sum / n) <= 1e-9);
    CHECK(got >= -1.0);
    CHECK(got <= 1.0);
  }
  IdentityQuestionGenerator g;
  CHECK(evaluate_answer_relevancy(g, e, "who wrote hamlet", "who wrote hamlet") == doctest::Approx(1.0));
}

TEST_CASE("quantiles by linear interpolation") {
  std::vector<double> xs;
  for (int i = 1; i <= 100; ++i) xs.push_back(i);
  CHECK(quantile(xs, 0.5) == doctest::Approx(50.5));
  CHECK(quantile(xs, 0.05) == doctest::Approx(5.95));
  CHECK(quantile(xs, 0.95) == doctest::Approx(95.05));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s(1 + rng() % 40);
    for (auto& x : s) x = u(rng);
    std::sort(s.begin(), s.end());
    for (double p : {0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0}) CHECK(quantile(s, p) == oracle::quantile(s, p));
  }
}

TEST_CASE("latency summaries") {
  auto one = summarize_latencies(LayerTag::kNaiveRAG, {0.7});
  CHECK(one.q1 == 0.7);
  CHECK(one.median == 0.7);
  CHECK(one.p95 == 0.7);
  CHECK(one.outliers.empty());

  std::vector<double> xs;
  for (int i = 1; i <= 100; ++i) xs.push_back(i);
  auto s = summarize_latencies(LayerTag::kFixedKV, xs);
  CHECK(s.median == doctest::Approx(50.5));
  CHECK(s.p5 == doctest::Approx(5.95));
  CHECK(s.outliers.size() == 10);

  std::vector<RouteTraceEvent> trace;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 300; ++i) trace.push_back(event(kAllLayers[rng() % 5], 0.01 * (rng() % 100)));
  trace.push_back(event(std::nullopt));
  std::size_t total = 0;
  for (const auto& st : latency_distribution(trace)) total += st.count;
  CHECK(total == 300);
}

TEST_CASE("warm-up curve") {
  SUBCASE("constant latency gives a flat curve") {
    std::vector<std::vector<double>> sessions{std::vector<double>(150, 1.0)};
    auto c = warmup_curve(sessions);
    CHECK(c.points.size() == 100);
    CHECK_FALSE(c.insufficient_data);
    for (const auto& p : c.points) {
      CHECK(p.mean == 1.0);
      CHECK(p.q1 == 1.0);
      CHECK(p.q3 == 1.0);
    }
  }
  SUBCASE("six-second filter") {
    std::vector<double> s;
    for (int i = 0; i < 200; ++i) s.push_back(i % 2 ? 6.5 : 1.0 + i * 0.001);
    auto c = warmup_curve(std::vector<std::vector<double>>{s});
    CHECK(c.points.size() == 100);
    for (const auto& p : c.points) CHECK(p.mean < 6.0);
  }
  SUBCASE("short sessions flag insufficient data") {
    auto c = warmup_curve(std::vector<std::vector<double>>{std::vector<double>(40, 1.0)});
    CHECK(c.insufficient_data);
    CHECK(c.points.size() == 40);
  }
  SUBCASE("nine sessions match a scripted re-implementation") {
    std::mt19937_64 rng(9);
    std::lognormal_distribution<double> ln(0.0, 1.0);
    std::vector<std::vector<double>> sessions(9);
    for (auto& s : sessions) {
      for (int i = 0; i < 300; ++i) s.push_back(ln(rng));
    }
    std::vector<std::vector<double>> kept;
    for (const auto& s : sessions) {
      std::vector<double> k;
      for (double x : s) {
        if (x < 6.0 && k.size() < 100) k.push_back(x);
      }
      std::sort(k.rbegin(), k.rend());
      kept.push_back(k);
    }
    auto c = warmup_curve(sessions);
    REQUIRE(c.points.size() == 100);
    for (std::size_t i = 0; i < 100; ++i) {
      std::vector<double> column;
      for (const auto& k : kept) column.push_back(k[i]);
      double mean = 0.0;
      for (double x : column) mean += x;
      mean /= column.size();
      CHECK(c.points[i].mean == doctest::Approx(mean).epsilon(1e-12));
      CHECK(c.points[i].q1 == oracle::quantile(column, 0.25));
      CHECK(c.points[i].q3 == oracle::quantile(column, 0.75));
    }
    // Session order does not matter.
    std::reverse(sessions.begin(), sessions.end());
    auto r = warmup_curve(sessions);
    for (std::size_t i = 0; i < 100; ++i) CHECK(r.points[i].mean == doctest::Approx(c.points[i].mean));
  }
}

TEST_CASE("stats collector") {
  StatsCollector s;
  s.record(event(LayerTag::kFixedKV));
  s.record(event(LayerTag::kNaiveRAG));
  s.record(event(std::nullopt));
  CHECK(s.total() == 3);
  CHECK(s.unanswered() == 1);
  CHECK(s.layer_counts()[0] == 1);
  s.reset();
  CHECK(s.total() == 0);
}

TEST_CASE("cost model JSON rejects unknown keys") {
  Json j = LayerCostModel{};
  CHECK(j.get<LayerCostModel>().qps == LayerCostModel{}.qps);
  j["bogus"] = 1;
  CHECK_THROWS(j.get<LayerCostModel>());
}

TEST_CASE("report files") {
  std::vector<std::vector<LogEntry>> sessions(2);
  std::mt19937_64 rng(5);
  for (auto& s : sessions) {
    for (int i = 0; i < 150; ++i) {
      LogEntry e;
      e.query = Query{"q" + std::to_string(i), "t", "s", 0};
      e.trace = event(kAllLayers[rng() % 5], 0.001 * (1 + rng() % 900));
      s.push_back(e);
    }
  }
  auto dir = oracle::temp_dir("report");
  auto files = write_report(sessions, LayerCostModel{}, dir);
  auto lines = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  };
  auto warm = lines(files.warmup_csv);
  CHECK(warm.front() == "index,mean,q1,q3");
  CHECK(warm.size() - 1 <= 100);
  CHECK(lines(files.boxplot_csv).front() == "layer,q1,median,q3,p5,p95");
  CHECK(lines(files.usage_csv).front() == "layer,ratio");
  auto summary = Json::parse(read_text_file(files.summary_json));
  CHECK(summary.contains("weighted_gpu_s_per_query"));
  CHECK(summary.contains("weighted_qps"));
  std::filesystem::remove_all(dir);
}
