#include <doctest.h>

#include "oracle.hpp"
#include "pentarag/router.hpp"

using namespace pentarag;

namespace {

struct Fixture {
  HashEmbedder embedder;
  MainKnowledgeBase kb;
  StubBackend stub;
  CountingBackend backend{stub};

  Fixture() {
    const char* texts[][2] = {
        {"alpha bravo charlie delta echo foxtrot golf hotel india juliet", "Answer One"},
        {"kilo lima mike november oscar papa quebec romeo sierra tango", "Answer Two"},
        {"uniform victor whiskey xray yankee zulu amber birch cedar dune", "Answer Three"},
        {"ember fjord grove heath islet jungle knoll lagoon marsh nook", "Answer Four"},
    };
    int i = 0;
    for (auto& t : texts) {
      kb.add(Passage{"p" + std::to_string(i++), t[0], "fixture", embedder.embed(t[0]), std::string(t[1])});
    }
  }

  Router router(RouterConfig config = {}) { return Router(config, embedder, backend, kb); }
};

Query query(const std::string& text) { return validate_query(text, "s"); }

std::vector<LayerTag> probed(const RouteResult& r) {
  std::vector<LayerTag> out;
  for (const auto& p : r.trace.layers_probed) out.push_back(p.layer);
  return out;
}

}  // namespace

TEST_CASE("fresh query goes to NaiveRAG, its repeat to FixedKV") {
  Fixture f;
  auto router = f.router();
  auto first = router.route(query("alpha bravo charlie question"));
  REQUIRE(first.answered());
  CHECK(first.trace.serving_layer == LayerTag::kNaiveRAG);
  REQUIRE(first.trace.layers_probed.size() == 5);
  for (std::size_t i = 0; i < 4; ++i) CHECK(first.trace.layers_probed[i].outcome != ProbeOutcome::kHit);
  CHECK(first.trace.layers_probed[2].outcome == ProbeOutcome::kRejected);
  CHECK(first.answer->text == "Answer One");
  CHECK(first.answer->supporting_passage_ids.size() == 3);
  CHECK_NOTHROW(check_answer_record(*first.answer));

  const auto calls = f.backend.total_calls();
  const auto kb_searches = f.kb.search_count();
  const auto sc_searches = router.semantic().search_count();
  const auto akm_searches = router.akm().search_count();
  auto repeat = router.route(query("alpha bravo charlie question"));
  CHECK(repeat.trace.serving_layer == LayerTag::kFixedKV);
  CHECK(repeat.trace.layers_probed.size() == 1);
  CHECK(repeat.answer->layer == LayerTag::kFixedKV);
  CHECK(repeat.answer->text == "Answer One");
  CHECK(repeat.answer->supporting_passage_ids.empty());
  CHECK(f.backend.total_calls() == calls);
  CHECK(f.kb.search_count() == kb_searches);
  CHECK(router.semantic().search_count() == sc_searches);
  CHECK(router.akm().search_count() == akm_searches);
}

TEST_CASE("near-duplicate query is served by the semantic cache") {
  Fixture f;
  auto router = f.router();
  const std::string q = "which kilo lima mike november oscar papa quebec romeo";
  const std::string q2 = "which kilo lima mike november oscar papa quebec romeo?";  // punctuation only
  const std::string q3 = "kilo which lima mike november oscar papa quebec romeo";   // swapped
  for (const auto& variant : {q2, q3}) {
    REQUIRE(oracle::cosine(f.embedder.embed(q), f.embedder.embed(variant)) >= 0.85);
  }
  router.route(query(q));
  auto r2 = router.route(query(q2));
  CHECK(r2.trace.serving_layer == LayerTag::kSemanticCache);
  CHECK(probed(r2) == std::vector<LayerTag>{LayerTag::kFixedKV, LayerTag::kSemanticCache});
  CHECK(r2.answer->layer == LayerTag::kSemanticCache);
  CHECK(r2.answer->supporting_passage_ids.empty());
  auto r3 = router.route(query(q3));
  CHECK(r3.trace.serving_layer <= LayerTag::kSemanticCache);
}

TEST_CASE("seeded passages answer a later related query from adaptive memory") {
  Fixture f;
  auto router = f.router();
  const std::string q = "alpha bravo charlie question";
  // q' restates passage p2 plus one token: close to p2, far from q.
  const std::string q2 = "uniform victor whiskey xray yankee zulu amber birch cedar dune please";
  auto e = [&](const std::string& s) { return f.embedder.embed(s); };
  REQUIRE(oracle::cosine(e(q), e(q2)) < 0.85);
  REQUIRE(oracle::cosine(e(q2), f.kb.passage("p2")->embedding) >= 0.85);

  auto first = router.route(query(q));
  CHECK(first.trace.serving_layer == LayerTag::kNaiveRAG);
  auto second = router.route(query(q2));
  CHECK(second.trace.serving_layer == LayerTag::kAdaptiveMemory);
  CHECK(second.answer->text == "Answer Three");
  CHECK(second.answer->supporting_passage_ids.front() == "p2");
  CHECK(router.akm().size() <= 10);
}

TEST_CASE("a weak adaptive-memory match falls through to NaiveRAG") {
  Fixture f;
  auto router = f.router();
  router.route(query("alpha bravo charlie question"));
  // Shares 4 of 10 passage tokens: cosine well under 0.85.
  const std::string q2 = "kilo lima mike november plus six other unrelated words here";
  REQUIRE(oracle::cosine(f.embedder.embed(q2), f.kb.passage("p1")->embedding) < 0.85);
  auto r = router.route(query(q2));
  CHECK(r.trace.serving_layer == LayerTag::kNaiveRAG);
  CHECK(r.trace.layers_probed[3].layer == LayerTag::kAdaptiveMemory);
  CHECK(r.trace.layers_probed[3].outcome == ProbeOutcome::kMiss);
}

TEST_CASE("confident recall answers at layer 3") {
  Fixture f;
  StubKnowledgeTable table;
  table.set("what is known", "known fact", 0.8);
  f.stub.load_table(table);
  auto router = f.router();
  auto r = router.route(query("what is known"));
  CHECK(r.trace.serving_layer == LayerTag::kMemoryRecall);
  CHECK(r.answer->text == "known fact");
  CHECK(r.answer->supporting_passage_ids.empty());
}

TEST_CASE("cascade order and disabled layers") {
  RouterConfig c;
  CHECK(c.cascade() == std::vector<LayerTag>(kAllLayers.begin(), kAllLayers.end()));
  c.recall_before_akm = false;
  CHECK(c.cascade()[2] == LayerTag::kAdaptiveMemory);
  c.enabled[layer_index(LayerTag::kSemanticCache)] = false;
  CHECK(c.cascade().size() == 4);

  Fixture f;
  RouterConfig only_rag;
  only_rag.enabled = {false, false, false, false, true};
  auto router = f.router(only_rag);
  router.route(query("alpha"));
  auto r = router.route(query("alpha"));
  CHECK(r.trace.serving_layer == LayerTag::kNaiveRAG);
  CHECK(r.trace.layers_probed.size() == 1);
  CHECK(router.akm().size() == 0);  // no seeding when the layer is off
}

TEST_CASE("empty knowledge base: all layers miss") {
  HashEmbedder e;
  MainKnowledgeBase kb;
  StubBackend stub;
  Router router({}, e, stub, kb);
  auto r = router.route(query("anything"));
  CHECK_FALSE(r.answered());
  CHECK_FALSE(r.trace.serving_layer.has_value());
  CHECK(r.trace.layers_probed.size() == 5);
  CHECK(router.unanswered() == 1);
  CHECK(Json(r.trace)["serving_layer"].is_null());
}

TEST_CASE("unavailable recall falls through") {
  struct Flaky final : GenerationBackend {
    StubBackend inner;
    Generation generate_with_context(const std::string& q, std::span<const Passage> p) override {
      return inner.generate_with_context(q, p);
    }
    Generation recall(const std::string&) override { throw Error(ErrorCode::kBackendUnavailable, "down"); }
  } flaky;
  Fixture f;
  Router router({}, f.embedder, flaky, f.kb);
  auto r = router.route(query("alpha bravo"));
  CHECK(r.trace.serving_layer == LayerTag::kNaiveRAG);
  CHECK(r.trace.layers_probed[2].outcome == ProbeOutcome::kRejected);
}

TEST_CASE("property: routing invariants over random traffic") {
  Fixture f;
  StubKnowledgeTable table;
  table.set("alpha", "A", 0.9);
  table.set("bravo", "B", 0.2);
  f.stub.load_table(table);
  auto router = f.router();
  std::mt19937_64 rng(2024);
  std::vector<std::string> words{"alpha", "bravo", "kilo",  "lima",  "zulu", "ember", "fjord",
                                 "grove", "cedar", "oscar", "tango", "dune", "nook",  "heath"};
  std::vector<std::string> seen;
  const auto cascade = router.config().cascade();
  std::size_t rag_served = 0;
  LayerArray<std::uint64_t> counted{};
  for (int i = 0; i < 400; ++i) {
    std::string text;
    if (!seen.empty() && rng() % 3 == 0) {
      text = seen[rng() % seen.size()];
    } else {
      std::size_t n = 1 + rng() % 5;
      for (std::size_t w = 0; w < n; ++w) text += (w ? " " : "") + words[rng() % words.size()];
    }
    const bool repeat = std::find(seen.begin(), seen.end(), text) != seen.end();
    const auto calls = f.backend.total_calls();
    auto r = router.route(query(text));
    REQUIRE(r.answered());
    seen.push_back(text);
    counted[layer_index(*r.trace.serving_layer)]++;

    // Probed layers are a prefix of the cascade ending in the hit.
    auto p = probed(r);
    REQUIRE(p.size() <= cascade.size());
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(p[k] == cascade[k]);
    CHECK(r.trace.layers_probed.back().outcome == ProbeOutcome::kHit);
    CHECK(p.back() == *r.trace.serving_layer);

    if (repeat) {
      CHECK(r.trace.serving_layer == LayerTag::kFixedKV);
      CHECK(f.backend.total_calls() == calls);
    }
    if (r.trace.serving_layer == LayerTag::kNaiveRAG) ++rag_served;
    CHECK(router.akm().total_inserted() <= 10 * rag_served);
    for (const auto& id : router.akm().ids()) CHECK(f.kb.contains(id));

    // Write-through completeness.
    CHECK(router.kv().peek(text).has_value());
    CHECK_NOTHROW(check_answer_record(*r.answer));
    CHECK(r.answer->layer == *r.trace.serving_layer);
  }
  CHECK(router.serving_counts() == counted);
  std::uint64_t sum = 0;
  for (auto c : router.serving_counts()) sum += c;
  CHECK(sum == router.routed());
  CHECK(router.routed() == 400);
  // Counters replayed from the trace equal the caches' own counters.
  CHECK(router.kv().counters().hits == counted[layer_index(LayerTag::kFixedKV)]);
  CHECK(router.semantic().counters().hits == counted[layer_index(LayerTag::kSemanticCache)]);
}

TEST_CASE("write-through puts a score-1 semantic entry") {
  Fixture f;
  auto router = f.router();
  router.route(query("ember fjord grove"));
  auto hit = router.semantic().lookup(f.embedder.embed("ember fjord grove"));
  REQUIRE(hit);
  CHECK(hit->score == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("reset clears caches and memory") {
  Fixture f;
  auto router = f.router();
  router.route(query("alpha bravo"));
  router.reset_session();
  CHECK(router.kv().counters().size == 0);
  CHECK(router.akm().size() == 0);
  CHECK(router.route(query("alpha bravo")).trace.serving_layer == LayerTag::kNaiveRAG);
}

TEST_CASE("persist_akm keeps adaptive memory across a reset") {
  Fixture f;
  RouterConfig c;
  c.persist_akm = true;
  auto router = f.router(c);
  router.route(query("alpha bravo"));
  router.akm().settle();
  const auto kept = router.akm().size();
  REQUIRE(kept > 0);
  router.reset_session();
  CHECK(router.kv().counters().size == 0);
  CHECK(router.akm().size() == kept);
}

TEST_CASE("triple export") {
  Fixture f;
  auto router = f.router();
  auto q = query("alpha bravo charlie");
  auto r = router.route(q);
  std::vector<LogEntry> log{make_log_entry(q, QueryOrigin::kLive, r)};
  auto triples = export_triples(log);
  REQUIRE(triples.size() == 1);
  CHECK(triples[0].question == "alpha bravo charlie");
  CHECK(triples[0].answer == r.answer->text);
  std::string want;
  for (std::size_t i = 0; i < r.context.size(); ++i) want += (i ? "\n\n" : "") + r.context[i].text;
  CHECK(triples[0].context == want);
  CHECK(r.context.size() == 3);

  auto q2 = query("alpha bravo charlie");
  std::vector<LogEntry> cached{make_log_entry(q2, QueryOrigin::kLive, router.route(q2))};
  CHECK(export_triples(cached).empty());

  // Reloaded triples turn the question into a recall hit.
  StubKnowledgeTable table;
  table.add_triples(triples);
  f.stub.load_table(table);
  router.reset_session();
  CHECK(router.route(query("alpha bravo charlie")).trace.serving_layer == LayerTag::kMemoryRecall);
}

TEST_CASE("log entries round-trip") {
  Fixture f;
  auto router = f.router();
  auto q = query("kilo lima");
  auto e = make_log_entry(q, QueryOrigin::kPerturbedReplay, router.route(q));
  Json j = e;
  CHECK(j["origin"] == "perturbed_replay");
  CHECK(j.get<LogEntry>() == e);
}
