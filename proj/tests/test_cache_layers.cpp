#include <doctest.h>

#include <sstream>

#include "oracle.hpp"
#include "pentarag/cache_layers.hpp"

using namespace pentarag;

namespace {
AnswerRecord answer(const std::string& text) { return AnswerRecord{text, LayerTag::kNaiveRAG, 1.0, {"p0"}, 0.5}; }
}  // namespace

TEST_CASE("fixed kv exact match, case and last write") {
  FixedKVCache kv;
  kv.put("Q1", answer("a"));
  CHECK(kv.get("Q1")->text == "a");
  CHECK_FALSE(kv.get("q1").has_value());
  kv.put("Q1", answer("a2"));
  CHECK(kv.get("Q1")->text == "a2");
  auto c = kv.counters();
  CHECK(c.hits == 2);
  CHECK(c.misses == 1);
  CHECK(c.size == 1);
}

TEST_CASE("property: any one-byte change is a different key") {
  FixedKVCache kv;
  std::mt19937_64 rng(4);
  std::string base = "What is the capital of Burkina Faso?";
  kv.put(base, answer("Ouagadougou"));
  for (int t = 0; t < 500; ++t) {
    std::string v = base;
    v[rng() % v.size()] ^= static_cast<char>(1 + rng() % 127);
    CHECK_FALSE(kv.peek(v).has_value());
  }
  CHECK(kv.peek(base).has_value());
}

TEST_CASE("fixed kv LRU cap") {
  FixedKVCache kv(2);
  kv.put("a", answer("1"));
  kv.put("b", answer("2"));
  kv.get("a");
  kv.put("c", answer("3"));
  CHECK(kv.peek("a").has_value());
  CHECK_FALSE(kv.peek("b").has_value());
  CHECK(kv.peek("c").has_value());
}

TEST_CASE("fixed kv export/import round-trip") {
  FixedKVCache kv;
  kv.put("x", answer("1"));
  kv.put("y", answer("2"));
  std::stringstream s;
  kv.export_jsonl(s);
  FixedKVCache back;
  back.import_jsonl(s, "kv.jsonl");
  CHECK(back.peek("x")->answer == kv.peek("x")->answer);
  CHECK(back.peek("y")->created_at == kv.peek("y")->created_at);
  CHECK(back.counters().size == 2);
}

TEST_CASE("semantic cache: identical query hits at 1.0") {
  HashEmbedder e;
  SemanticCache sc;
  sc.put("Who wrote Hamlet?", e.embed("Who wrote Hamlet?"), answer("Shakespeare"));
  auto hit = sc.lookup(e.embed("Who wrote Hamlet?"));
  REQUIRE(hit);
  CHECK(hit->score == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(hit->matched_query == "Who wrote Hamlet?");
}

TEST_CASE("semantic cache threshold boundary") {
  const std::size_t dim = 8;
  auto stored = oracle::axis(0, dim);
  for (double c : {0.84, 0.8499, 0.85, 0.8501, 0.9, 1.0}) {
    SemanticCache sc(0.85, dim);
    sc.put("q", stored, answer("a"));
    auto probe = oracle::at_angle(c, dim);
    double score = oracle::cosine(stored, probe);
    CAPTURE(c);
    CAPTURE(score);
    CHECK(sc.lookup(probe).has_value() == (score >= 0.85));
  }
}

TEST_CASE("semantic cache equality boundary is inclusive") {
  const std::size_t dim = 8;
  auto stored = oracle::axis(0, dim);
  auto probe = oracle::at_angle(0.85, dim);
  const double score = oracle::cosine(stored, probe);
  // Threshold set to the exact achieved score: equality must hit.
  SemanticCache sc(score, dim);
  sc.put("q", stored, answer("a"));
  CHECK(sc.lookup(probe).has_value());
  SemanticCache above(std::nextafter(score, 2.0), dim);
  above.put("q", stored, answer("a"));
  CHECK_FALSE(above.lookup(probe).has_value());
}

TEST_CASE("semantic cache returns the closer entry") {
  const std::size_t dim = 8;
  SemanticCache sc(0.5, dim);
  auto first = oracle::axis(0, dim);
  auto second = oracle::axis(1, dim);
  sc.put("first", first, answer("A"));
  sc.put("second", second, answer("B"));
  auto q = EmbeddingVector::normalized({0.3f, 0.9f, 0, 0, 0, 0, 0, 0});
  REQUIRE(oracle::cosine(q, second) > oracle::cosine(q, first));
  auto hit = sc.lookup(q);
  REQUIRE(hit);
  CHECK(hit->answer.text == "B");
}

TEST_CASE("semantic cache snapshot and counters") {
  HashEmbedder e;
  SemanticCache sc;
  sc.put("alpha beta", e.embed("alpha beta"), answer("1"));
  CHECK(sc.lookup(e.embed("alpha beta")));
  CHECK_FALSE(sc.lookup(e.embed("gamma delta")));
  auto c = sc.counters();
  CHECK(c.hits == 1);
  CHECK(c.misses == 1);
  std::stringstream r, s;
  sc.write_snapshot(r, s);
  SemanticCache back;
  back.restore(r, s);
  CHECK(back.lookup(e.embed("alpha beta"))->answer.text == "1");
  CHECK_THROWS_AS(SemanticCache(0.0), Error);
  CHECK_THROWS_AS(SemanticCache(1.5), Error);
}

TEST_CASE("writeback upserts both caches") {
  HashEmbedder e;
  FixedKVCache kv;
  SemanticCache sc;
  writeback(kv, sc, e, "q", answer("first"));
  writeback(kv, sc, e, "q", answer("second"));
  CHECK(kv.get("q")->text == "second");
  CHECK(sc.lookup(e.embed("q"))->answer.text == "second");
  CHECK(sc.counters().size == 1);
}
