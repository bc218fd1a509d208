#include <doctest.h>

#include <set>
#include <sstream>

#include "pentarag/cache_layers.hpp"
#include "pentarag/core.hpp"
#include "pentarag/jsonl.hpp"

using namespace pentarag;

TEST_CASE("validate_query keeps the text byte for byte") {
  auto q = validate_query("Who wrote Hamlet?", "s1");
  CHECK(q.text == "Who wrote Hamlet?");
  CHECK(q.session_id == "s1");
  CHECK(!q.id.empty());

  auto spaced = validate_query("Who wrote Hamlet? ", "s1");
  CHECK(spaced.text == "Who wrote Hamlet? ");
  CHECK(spaced.id != q.id);

  FixedKVCache kv;
  kv.put(q.text, AnswerRecord{"Shakespeare", LayerTag::kMemoryRecall, 0.9, {}, 0.1});
  CHECK(kv.get(q.text).has_value());
  CHECK_FALSE(kv.get(spaced.text).has_value());
}

TEST_CASE("blank queries are rejected") {
  for (std::string blank : {"", "   ", "\t\n", " \r\n "}) {
    try {
      validate_query(blank, "s1");
      FAIL("accepted a blank query");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kEmptyQuery);
    }
  }
}

TEST_CASE("query ids are unique and timestamps monotonic") {
  std::int64_t last = 0;
  std::set<std::string> ids;
  for (int i = 0; i < 200; ++i) {
    auto q = validate_query("q", "s");
    CHECK(ids.insert(q.id).second);
    CHECK(q.issued_at >= last);
    last = q.issued_at;
  }
}

TEST_CASE("layer tags are ordered and round-trip through JSON") {
  for (std::size_t i = 0; i + 1 < kAllLayers.size(); ++i) CHECK(kAllLayers[i] < kAllLayers[i + 1]);
  for (auto layer : kAllLayers) {
    Json j = layer;
    CHECK(j.get<LayerTag>() == layer);
    CHECK(parse_layer(layer_name(layer)) == layer);
  }
  CHECK(Json(LayerTag::kFixedKV).get<std::string>() == "fixed_kv");
  CHECK(Json(LayerTag::kNaiveRAG).get<std::string>() == "naive_rag");
  CHECK_THROWS_AS(parse_layer("layer6"), Error);
}

TEST_CASE("records round-trip with snake_case fields") {
  AnswerRecord a{"Paris", LayerTag::kNaiveRAG, 1.0, {"p1", "p2", "p3"}, 0.25};
  Json j = a;
  CHECK(j.contains("supporting_passage_ids"));
  CHECK(j.contains("latency_seconds"));
  CHECK(j["layer"] == "naive_rag");
  CHECK(j.get<AnswerRecord>() == a);

  Query q{"q1", "What?", "s", 42};
  CHECK(Json(q).get<Query>() == q);
  CHECK(Json(q).contains("issued_at"));

  TrainingTriple t{"q", "c", "a"};
  CHECK(Json(t).get<TrainingTriple>() == t);
  CHECK_THROWS(Json{{"question", ""}, {"context", "c"}, {"answer", "a"}}.get<TrainingTriple>());
}

TEST_CASE("answer record invariants") {
  CHECK_NOTHROW(check_answer_record({"x", LayerTag::kMemoryRecall, 0.5, {}, 0.0}));
  CHECK_NOTHROW(check_answer_record({"x", LayerTag::kAdaptiveMemory, 1.0, {"p"}, 0.0}));
  CHECK_THROWS(check_answer_record({"x", LayerTag::kMemoryRecall, 0.5, {"p"}, 0.0}));
  CHECK_THROWS(check_answer_record({"x", LayerTag::kNaiveRAG, 0.5, {}, 0.0}));
  CHECK_THROWS(check_answer_record({"x", LayerTag::kFixedKV, 1.5, {}, 0.0}));
  CHECK_THROWS(check_answer_record({"x", LayerTag::kFixedKV, 0.5, {}, -1.0}));
}

TEST_CASE("error codes have stable snake_case names") {
  CHECK(error_code_name(ErrorCode::kEmptyQuery) == "empty_query");
  CHECK(error_code_name(ErrorCode::kCorruptSnapshot) == "corrupt_snapshot");
  Error e(ErrorCode::kIoError, "disk");
  CHECK(e.detail() == "disk");
  CHECK(std::string(e.what()).find("disk") != std::string::npos);
}

TEST_CASE("jsonl reader reports line numbers and honours lenient mode") {
  std::string text = "{\"a\":1}\nnot json\n\n{\"a\":2}\n";
  {
    std::istringstream in(text);
    try {
      read_jsonl(in, "fixture.jsonl", false, [](const Json&) {});
      FAIL("strict read accepted a malformed line");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kMalformedInput);
      CHECK(e.detail().find("fixture.jsonl:2") != std::string::npos);
    }
  }
  std::istringstream in(text);
  int sum = 0;
  auto stats = read_jsonl(in, "fixture.jsonl", true, [&](const Json& j) { sum += j["a"].get<int>(); });
  CHECK(sum == 3);
  CHECK(stats.parsed == 2);
  CHECK(stats.skipped == 1);
  REQUIRE(stats.warnings.size() == 1);
  CHECK(stats.warnings[0].find("fixture.jsonl:2") != std::string::npos);
}
