#include "pentarag/llm_engine.hpp"

#include <algorithm>
#include <cmath>

#include "pentarag/http_client.hpp"
#include "pentarag/jsonl.hpp"

namespace pentarag {

namespace {

double sanitize_confidence(double c) {
  if (!std::isfinite(c)) return 0.0;
  return std::clamp(c, 0.0, 1.0);
}

std::string first_sentence(const std::string& text) {
  auto end = text.find_first_of(".!?");
  std::string s = end == std::string::npos ? text : text.substr(0, end + 1);
  auto begin = s.find_first_not_of(" \t\r\n");
  return begin == std::string::npos ? text : s.substr(begin);
}

}  // namespace

AnswerRecord generate_with_context(GenerationBackend& backend, const std::string& query,
                                   std::span<const Passage> passages, LayerTag layer) {
  if (passages.empty()) throw Error(ErrorCode::kEmptyContext, "context generation needs passages");
  if (!layer_uses_context(layer)) {
    throw Error(ErrorCode::kMalformedInput, "context answers must be tagged adaptive_memory or naive_rag");
  }
  Generation g = backend.generate_with_context(query, passages);
  AnswerRecord a;
  a.text = std::move(g.text);
  a.layer = layer;
  a.confidence = sanitize_confidence(g.confidence);
  for (const auto& p : passages) a.supporting_passage_ids.push_back(p.id);
  return a;
}

std::optional<AnswerRecord> memory_recall(GenerationBackend& backend, const std::string& query,
                                          double recall_threshold) {
  if (!(recall_threshold >= 0.0 && recall_threshold <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "recall threshold must be in [0, 1]");
  }
  Generation g = backend.recall(query);
  double confidence = sanitize_confidence(g.confidence);
  if (confidence < recall_threshold || g.text.empty()) return std::nullopt;
  AnswerRecord a;
  a.text = std::move(g.text);
  a.layer = LayerTag::kMemoryRecall;
  a.confidence = confidence;
  return a;
}

// ---------------------------------------------------------------------------
// StubKnowledgeTable
// ---------------------------------------------------------------------------

void StubKnowledgeTable::set(const std::string& question, std::string answer, double confidence) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw Error(ErrorCode::kMalformedInput, "fact confidence outside [0,1] for '" + question + "'");
  }
  facts_[question] = Fact{std::move(answer), confidence};
}

std::optional<StubKnowledgeTable::Fact> StubKnowledgeTable::find(const std::string& question) const {
  auto it = facts_.find(question);
  if (it == facts_.end()) return std::nullopt;
  return it->second;
}

void StubKnowledgeTable::add_triples(std::span<const TrainingTriple> triples, double confidence) {
  for (const auto& t : triples) set(t.question, t.answer, confidence);
}

StubKnowledgeTable StubKnowledgeTable::from_triples(const std::filesystem::path& path, double confidence) {
  auto triples = load_jsonl<TrainingTriple>(path);
  StubKnowledgeTable table;
  table.add_triples(triples, confidence);
  return table;
}

StubKnowledgeTable StubKnowledgeTable::load(const std::filesystem::path& path) {
  StubKnowledgeTable table;
  read_jsonl_file(path, false, [&](const Json& j) {
    table.set(j.at("question").get<std::string>(), j.at("answer").get<std::string>(),
              j.at("confidence").get<double>());
  });
  return table;
}

StubKnowledgeTable StubKnowledgeTable::load_any(const std::filesystem::path& path, double triple_confidence) {
  StubKnowledgeTable table;
  read_jsonl_file(path, false, [&](const Json& j) {
    double confidence = j.contains("confidence") ? j["confidence"].get<double>() : triple_confidence;
    table.set(j.at("question").get<std::string>(), j.at("answer").get<std::string>(), confidence);
  });
  return table;
}

void StubKnowledgeTable::save(const std::filesystem::path& path) const {
  std::vector<std::string> keys;
  keys.reserve(facts_.size());
  for (const auto& [k, _] : facts_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  std::string out;
  for (const auto& k : keys) {
    const auto& f = facts_.at(k);
    out += Json{{"question", k}, {"answer", f.answer}, {"confidence", f.confidence}}.dump();
    out += '\n';
  }
  write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// StubBackend
// ---------------------------------------------------------------------------

Generation StubBackend::generate_with_context(const std::string& /*query*/, std::span<const Passage> passages) {
  if (passages.empty()) throw Error(ErrorCode::kEmptyContext, "stub backend received no passages");
  const Passage& top = passages.front();
  if (top.answer) return Generation{*top.answer, 1.0};
  return Generation{first_sentence(top.text), 0.5};
}

Generation StubBackend::recall(const std::string& query) {
  auto fact = table()->find(query);
  if (!fact) return Generation{"", 0.0};
  return Generation{fact->answer, fact->confidence};
}

void StubBackend::load_table(StubKnowledgeTable table) {
  auto next = std::make_shared<const StubKnowledgeTable>(std::move(table));
  std::lock_guard lock(mu_);
  table_ = std::move(next);
}

std::shared_ptr<const StubKnowledgeTable> StubBackend::table() const {
  std::lock_guard lock(mu_);
  return table_;
}

// ---------------------------------------------------------------------------
// RemoteBackend
// ---------------------------------------------------------------------------

RemoteBackend::RemoteBackend(const std::string& endpoint, std::size_t max_in_flight)
    : client_(std::make_unique<HttpJsonClient>(endpoint, max_in_flight)) {}

RemoteBackend::~RemoteBackend() = default;

Generation RemoteBackend::call(const std::string& mode, const std::string& query,
                               std::span<const Passage> passages) {
  std::vector<std::string> texts;
  texts.reserve(passages.size());
  for (const auto& p : passages) texts.push_back(p.text);
  Json response = client_->post(Json{{"mode", mode}, {"query", query}, {"passages", texts}});
  if (!response.contains("answer") || !response["answer"].is_string()) {
    throw Error(ErrorCode::kBackendUnavailable, "backend response has no answer");
  }
  double confidence = 0.0;
  if (response.contains("confidence") && response["confidence"].is_number()) {
    confidence = sanitize_confidence(response["confidence"].get<double>());
  }
  return Generation{response["answer"].get<std::string>(), confidence};
}

Generation RemoteBackend::generate_with_context(const std::string& query, std::span<const Passage> passages) {
  if (passages.empty()) throw Error(ErrorCode::kEmptyContext, "context generation needs passages");
  return call("context", query, passages);
}

Generation RemoteBackend::recall(const std::string& query) { return call("recall", query, {}); }

}  // namespace pentarag
