#include "pentarag/knowledge.hpp"

#include <fstream>
#include <iostream>

namespace pentarag {

namespace fs = std::filesystem;

void to_json(Json& j, const Passage& p) {
  j = Json{{"id", p.id}, {"text", p.text}, {"source", p.source}, {"embedding", p.embedding}};
  if (p.answer) j["answer"] = *p.answer;
}

void from_json(const Json& j, Passage& p) {
  j.at("id").get_to(p.id);
  j.at("text").get_to(p.text);
  j.at("source").get_to(p.source);
  j.at("embedding").get_to(p.embedding);
  p.answer = j.contains("answer") ? std::optional(j["answer"].get<std::string>()) : std::nullopt;
}

void to_json(Json& j, const PassageBody& b) {
  j = Json{{"text", b.text}, {"source", b.source}};
  if (b.answer) j["answer"] = *b.answer;
}

void from_json(const Json& j, PassageBody& b) {
  j.at("text").get_to(b.text);
  j.at("source").get_to(b.source);
  b.answer = j.contains("answer") ? std::optional(j["answer"].get<std::string>()) : std::nullopt;
}

namespace {

Passage assemble(std::string id, PassageBody body, EmbeddingVector vector) {
  return Passage{std::move(id), std::move(body.text), std::move(body.source), std::move(vector),
                 std::move(body.answer)};
}

}  // namespace

// ---------------------------------------------------------------------------
// MainKnowledgeBase
// ---------------------------------------------------------------------------

MainKnowledgeBase::MainKnowledgeBase(std::size_t dimension, std::string name) : index_(dimension) {
  metadata_.name = std::move(name);
}

void MainKnowledgeBase::add(const Passage& passage) {
  if (passage.id.empty()) throw Error(ErrorCode::kMalformedInput, "passage id is empty");
  index_.insert(passage.id, passage.embedding, PassageBody{passage.text, passage.source, passage.answer});
  metadata_.count = index_.size();
  metadata_.ingested_at = monotonic_now_ns();
}

JsonlReadStats MainKnowledgeBase::ingest_jsonl(std::istream& in, const std::string& source_name,
                                               const Embedder& embedder, bool lenient) {
  constexpr std::size_t kBatch = 64;
  std::vector<std::string> ids, texts, sources;
  std::vector<std::optional<std::string>> answers;
  auto flush = [&] {
    if (texts.empty()) return;
    auto vectors = embedder.embed_batch(texts);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      add(Passage{ids[i], texts[i], sources[i], vectors[i], answers[i]});
    }
    ids.clear();
    texts.clear();
    sources.clear();
    answers.clear();
  };
  auto stats = read_jsonl(in, source_name, lenient, [&](const Json& j) {
    auto id = j.at("id").get<std::string>();
    auto text = j.at("text").get<std::string>();
    auto source = j.at("source").get<std::string>();
    if (id.empty()) throw Error(ErrorCode::kMalformedInput, "empty id");
    if (is_blank(text)) throw Error(ErrorCode::kMalformedInput, "blank text for id " + id);
    ids.push_back(std::move(id));
    texts.push_back(std::move(text));
    sources.push_back(std::move(source));
    answers.push_back(j.contains("answer") ? std::optional(j["answer"].get<std::string>()) : std::nullopt);
    if (texts.size() >= kBatch) flush();
  });
  flush();
  return stats;
}

JsonlReadStats MainKnowledgeBase::ingest_file(const fs::path& path, const Embedder& embedder, bool lenient) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  if (metadata_.name == "main") metadata_.name = path.stem().string();
  return ingest_jsonl(in, path.string(), embedder, lenient);
}

Retrieval MainKnowledgeBase::retrieve(const EmbeddingVector& query, std::size_t k, std::size_t seed_k) const {
  if (index_.size() == 0) throw Error(ErrorCode::kEmptyKnowledgeBase, "main knowledge base is empty");
  if (k == 0) k = 1;
  auto matches = index_.search_entries(query, std::max(k, seed_k));
  Retrieval r;
  for (auto& m : matches) {
    r.hits.push_back(m.hit);
    r.seeds.push_back(assemble(m.hit.entry_id, std::move(m.payload), std::move(m.vector)));
  }
  r.passages.assign(r.seeds.begin(), r.seeds.begin() + static_cast<std::ptrdiff_t>(std::min(k, r.seeds.size())));
  if (r.seeds.size() > seed_k) {
    r.seeds.resize(seed_k);
    r.hits.resize(seed_k);
  }
  return r;
}

std::optional<Passage> MainKnowledgeBase::passage(const std::string& id) const {
  auto m = index_.find(id);
  if (!m) return std::nullopt;
  return assemble(id, std::move(m->payload), std::move(m->vector));
}

void MainKnowledgeBase::save(const fs::path& dir) const {
  fs::create_directories(dir);
  std::ofstream records(dir / "kb.bin", std::ios::binary | std::ios::trunc);
  std::ofstream sidecar(dir / "kb.jsonl", std::ios::trunc);
  if (!records || !sidecar) throw Error(ErrorCode::kIoError, "cannot write snapshot in " + dir.string());
  index_.write_snapshot(records, sidecar);
  Json meta{{"name", metadata_.name}, {"count", metadata_.count}, {"dimension", index_.dimension()}};
  write_text_file(dir / "kb_meta.json", meta.dump(2) + "\n");
}

bool MainKnowledgeBase::snapshot_exists(const fs::path& dir) {
  return fs::exists(dir / "kb.bin") && fs::exists(dir / "kb.jsonl");
}

MainKnowledgeBase MainKnowledgeBase::load(const fs::path& dir) {
  std::ifstream records(dir / "kb.bin", std::ios::binary);
  std::ifstream sidecar(dir / "kb.jsonl");
  if (!records || !sidecar) throw Error(ErrorCode::kIoError, "no knowledge base snapshot in " + dir.string());
  auto index = FlatIndex<PassageBody>::restore(records, sidecar);
  MainKnowledgeBase kb(index.dimension());
  kb.index_ = std::move(index);
  kb.metadata_.count = kb.index_.size();
  kb.metadata_.ingested_at = monotonic_now_ns();
  if (fs::exists(dir / "kb_meta.json")) {
    auto meta = Json::parse(read_text_file(dir / "kb_meta.json"));
    kb.metadata_.name = meta.value("name", kb.metadata_.name);
  }
  return kb;
}

// ---------------------------------------------------------------------------
// AdaptiveKnowledgeMemory
// ---------------------------------------------------------------------------

AdaptiveKnowledgeMemory::AdaptiveKnowledgeMemory(const MainKnowledgeBase& kb, double threshold,
                                                 SettleMode mode, std::chrono::milliseconds settle_interval)
    : kb_(kb), threshold_(threshold), mode_(mode), settle_interval_(settle_interval), index_(kb.dimension()) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "akm threshold must be in (0, 1]");
  }
  if (mode_ == SettleMode::kBackground) {
    worker_ = std::jthread([this](std::stop_token stop) { worker_loop(stop); });
  }
}

AdaptiveKnowledgeMemory::~AdaptiveKnowledgeMemory() {
  if (worker_.joinable()) {
    worker_.request_stop();
    queue_cv_.notify_all();
    worker_.join();
  }
}

void AdaptiveKnowledgeMemory::enqueue(std::vector<Passage> passages) {
  if (passages.empty()) return;
  {
    std::lock_guard lock(queue_mu_);
    queue_.push_back(std::move(passages));
  }
  queue_cv_.notify_one();
}

std::size_t AdaptiveKnowledgeMemory::pending() const {
  std::lock_guard lock(queue_mu_);
  std::size_t n = 0;
  for (const auto& batch : queue_) n += batch.size();
  return n;
}

void AdaptiveKnowledgeMemory::drain() {
  std::vector<std::vector<Passage>> batches;
  {
    std::lock_guard lock(queue_mu_);
    batches.swap(queue_);
    draining_ = true;
  }
  for (const auto& batch : batches) {
    try {
      insert(batch);
    } catch (const std::exception& e) {
      std::cerr << "pentarag: akm insertion failed: " << e.what() << '\n';
    }
  }
  {
    std::lock_guard lock(queue_mu_);
    draining_ = false;
  }
  drained_cv_.notify_all();
}

void AdaptiveKnowledgeMemory::settle() {
  if (mode_ == SettleMode::kDeterministic) {
    drain();
    return;
  }
  std::unique_lock lock(queue_mu_);
  queue_cv_.notify_one();
  drained_cv_.wait(lock, [&] { return queue_.empty() && !draining_; });
}

void AdaptiveKnowledgeMemory::worker_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    {
      std::unique_lock lock(queue_mu_);
      queue_cv_.wait_for(lock, stop, settle_interval_, [&] { return !queue_.empty(); });
    }
    drain();
  }
  drain();
}

std::size_t AdaptiveKnowledgeMemory::insert(const std::vector<Passage>& passages) {
  std::lock_guard lock(insert_mu_);
  std::size_t added = 0;
  for (const auto& p : passages) {
    if (index_.contains(p.id) || !kb_.contains(p.id)) continue;
    index_.insert(p.id, p.embedding, PassageBody{p.text, p.source, p.answer});
    ++added;
  }
  total_inserted_.fetch_add(added);
  return added;
}

std::optional<std::vector<Passage>> AdaptiveKnowledgeMemory::retrieve(const EmbeddingVector& query, std::size_t k) {
  auto matches = index_.search_entries(query, k == 0 ? 1 : k);
  if (matches.empty() || matches.front().hit.score < threshold_) {
    misses_.fetch_add(1);
    return std::nullopt;
  }
  hits_.fetch_add(1);
  std::vector<Passage> out;
  out.reserve(matches.size());
  for (auto& m : matches) out.push_back(assemble(m.hit.entry_id, std::move(m.payload), std::move(m.vector)));
  return out;
}

void AdaptiveKnowledgeMemory::clear() {
  {
    std::lock_guard lock(queue_mu_);
    queue_.clear();
  }
  if (mode_ == SettleMode::kBackground) settle();
  std::lock_guard lock(insert_mu_);
  index_.clear();
  hits_ = 0;
  misses_ = 0;
  total_inserted_ = 0;
}

void AdaptiveKnowledgeMemory::write_snapshot(std::ostream& records, std::ostream& sidecar) const {
  index_.write_snapshot(records, sidecar);
}

void AdaptiveKnowledgeMemory::restore(std::istream& records, std::istream& sidecar) {
  auto restored = FlatIndex<PassageBody>::restore(records, sidecar);
  std::lock_guard lock(insert_mu_);
  index_ = std::move(restored);
}

}  // namespace pentarag
