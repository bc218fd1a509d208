#include "pentarag/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "pentarag/jsonl.hpp"

namespace pentarag {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

void to_json(Json& j, const DatasetItem& d) {
  j = Json{{"question", d.question}, {"answer", d.answer}, {"context", d.context}};
}

void from_json(const Json& j, DatasetItem& d) {
  j.at("question").get_to(d.question);
  j.at("answer").get_to(d.answer);
  j.at("context").get_to(d.context);
  if (is_blank(d.question) || is_blank(d.context)) {
    throw Error(ErrorCode::kMalformedInput, "dataset item needs a question and a context");
  }
}

std::vector<DatasetItem> load_dataset(const fs::path& path, bool lenient) {
  std::vector<DatasetItem> out;
  read_jsonl_file(path, lenient, [&](const Json& j) { out.push_back(j.get<DatasetItem>()); });
  return out;
}

std::vector<DatasetItem> load_triviaqa(const fs::path& path, std::size_t max_items) {
  Json doc;
  try {
    doc = Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kMalformedInput, path.string() + ": " + e.what());
  }
  if (!doc.contains("Data") || !doc["Data"].is_array()) {
    throw Error(ErrorCode::kMalformedInput, path.string() + ": no \"Data\" array");
  }
  std::vector<DatasetItem> out;
  for (const auto& row : doc["Data"]) {
    if (max_items > 0 && out.size() >= max_items) break;
    if (!row.contains("Question") || !row.contains("Answer")) continue;
    DatasetItem item;
    item.question = row["Question"].get<std::string>();
    item.answer = row["Answer"].value("Value", std::string());
    if (row.contains("SearchResults")) {
      for (const auto& sr : row["SearchResults"]) {
        auto desc = sr.value("Description", std::string());
        if (is_blank(desc)) continue;
        if (!item.context.empty()) item.context += ' ';
        item.context += desc;
      }
    }
    if (is_blank(item.question) || is_blank(item.context) || item.answer.empty()) continue;
    out.push_back(std::move(item));
  }
  return out;
}

namespace {

std::string make_word(Rng& rng, std::size_t syllables) {
  static constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p",
                                                 "r", "s", "t", "v", "z", "br", "tr", "st", "kl"};
  static constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  std::uniform_int_distribution<std::size_t> onset(0, std::size(kOnsets) - 1);
  std::uniform_int_distribution<std::size_t> vowel(0, std::size(kVowels) - 1);
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += kOnsets[onset(rng)];
    w += kVowels[vowel(rng)];
  }
  return w;
}

std::string capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

}  // namespace

SyntheticDataset synthetic_dataset(std::size_t size, std::uint64_t seed, double known_fraction) {
  Rng rng(seed);
  std::set<std::string> vocab_set;
  const std::size_t vocab_size = std::max<std::size_t>(64, size * 2);
  while (vocab_set.size() < vocab_size) vocab_set.insert(make_word(rng, 3));
  std::vector<std::string> vocab(vocab_set.begin(), vocab_set.end());
  std::shuffle(vocab.begin(), vocab.end(), rng);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);

  SyntheticDataset ds;
  std::unordered_set<std::string> seen;
  std::uniform_int_distribution<int> template_pick(0, 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (ds.items.size() < size) {
    std::string a = vocab[pick(rng)], b = vocab[pick(rng)], c = vocab[pick(rng)], d = vocab[pick(rng)],
                e = vocab[pick(rng)];
    std::string answer = capitalize(make_word(rng, 2)) + " " + capitalize(make_word(rng, 3));
    DatasetItem item;
    switch (template_pick(rng)) {
      case 0:
        item.question = "Which " + a + " " + b + " was " + c + " by the " + d + " of " + e + "?";
        item.context = "The " + a + " " + b + " " + c + " by the " + d + " of " + e + " was " + answer + ".";
        break;
      case 1:
        item.question = "Who " + c + " the " + a + " " + b + " in " + d + " " + e + "?";
        item.context = answer + " " + c + " the " + a + " " + b + " in " + d + " " + e + ".";
        break;
      default:
        item.question = "What is the " + a + " of the " + b + " " + c + " near " + d + " " + e + "?";
        item.context = "The " + a + " of the " + b + " " + c + " near " + d + " " + e + " is " + answer + ".";
        break;
    }
    item.answer = answer;
    if (!seen.insert(item.question).second) continue;
    if (unit(rng) < known_fraction) {
      ds.pretrained.set(item.question, answer, std::round(unit(rng) * 100.0) / 100.0);
    }
    ds.items.push_back(std::move(item));
  }
  return ds;
}

std::vector<Passage> dataset_passages(std::span<const DatasetItem> items, const Embedder& embedder) {
  std::vector<std::string> texts;
  texts.reserve(items.size());
  for (const auto& item : items) texts.push_back(item.context);
  auto vectors = embedder.embed_batch(texts);
  std::vector<Passage> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.push_back(Passage{"p" + std::to_string(i), items[i].context, "dataset", std::move(vectors[i]),
                          items[i].answer.empty() ? std::nullopt : std::optional(items[i].answer)});
  }
  return out;
}

void ingest_dataset(MainKnowledgeBase& kb, std::span<const DatasetItem> items, const Embedder& embedder) {
  for (const auto& p : dataset_passages(items, embedder)) kb.add(p);
}

// ---------------------------------------------------------------------------
// Ramp schedules
// ---------------------------------------------------------------------------

double replay_probability(std::size_t index, std::size_t length) {
  if (length < 2) return index == 0 ? 0.0 : 1.0;
  return std::clamp(static_cast<double>(index) / static_cast<double>(length - 1), 0.0, 1.0);
}

double StepRamp::probability(std::size_t index, std::size_t length) const {
  if (length == 0) return 0.0;
  auto plateau = std::min(steps_ - 1, index * steps_ / length);
  return static_cast<double>(plateau) / static_cast<double>(steps_ - 1);
}

double SigmoidRamp::probability(std::size_t index, std::size_t length) const {
  double x = replay_probability(index, length);
  auto logistic = [&](double t) { return 1.0 / (1.0 + std::exp(-steepness_ * (t - 0.5))); };
  double lo = logistic(0.0), hi = logistic(1.0);
  return std::clamp((logistic(x) - lo) / (hi - lo), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Perturbation
// ---------------------------------------------------------------------------

double token_overlap(std::string_view a, std::string_view b) {
  auto ta = tokenize(a);
  auto tb = tokenize(b);
  if (ta.empty() && tb.empty()) return 1.0;
  std::unordered_map<std::string, int> counts;
  for (const auto& t : ta) ++counts[t];
  std::size_t shared = 0;
  for (const auto& t : tb) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++shared;
    }
  }
  return static_cast<double>(shared) / static_cast<double>(std::max(ta.size(), tb.size()));
}

namespace {

bool is_stop_word(std::string_view word) {
  static const std::unordered_set<std::string> kStopWords = {
      "a", "an", "the", "of", "in", "on", "at", "to", "for", "by", "with", "is", "was",
      "are", "were", "and", "or", "from", "as", "that", "this", "it", "its", "be", "been"};
  auto tokens = tokenize(word);
  return tokens.size() == 1 && kStopWords.contains(tokens.front());
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::string join_words(const std::vector<std::string>& words, const std::string& terminal) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += ' ';
    out += words[i];
  }
  return out + terminal;
}

}  // namespace

std::string CompositePerturber::perturb(const std::string& text, Rng& rng) const {
  std::vector<std::string> words = split_words(text);
  std::string terminal;
  if (!words.empty()) {
    auto& last = words.back();
    while (!last.empty() && (last.back() == '?' || last.back() == '.' || last.back() == '!')) {
      terminal.insert(terminal.begin(), last.back());
      last.pop_back();
    }
    if (last.empty()) words.pop_back();
  }

  auto swap_adjacent = [&]() -> std::optional<std::string> {
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i + 1 < words.size(); ++i) {
      if (words[i] != words[i + 1]) positions.push_back(i);
    }
    if (positions.empty()) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick(0, positions.size() - 1);
    auto w = words;
    const auto at = positions[pick(rng)];
    std::swap(w[at], w[at + 1]);
    return join_words(w, terminal);
  };
  auto drop_stop_word = [&]() -> std::optional<std::string> {
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (is_stop_word(words[i])) positions.push_back(i);
    }
    if (positions.empty()) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick(0, positions.size() - 1);
    auto w = words;
    w.erase(w.begin() + static_cast<std::ptrdiff_t>(positions[pick(rng)]));
    return join_words(w, terminal);
  };
  auto toggle_terminal = [&]() -> std::optional<std::string> {
    return join_words(words, terminal.empty() ? std::string("?") : std::string());
  };

  std::uniform_int_distribution<int> choose(0, 2);
  const int first = choose(rng);
  for (int attempt = 0; attempt < 3; ++attempt) {
    std::optional<std::string> candidate;
    switch ((first + attempt) % 3) {
      case 0: candidate = swap_adjacent(); break;
      case 1: candidate = drop_stop_word(); break;
      default: candidate = toggle_terminal(); break;
    }
    if (candidate && *candidate != text && token_overlap(text, *candidate) >= kMinPerturbOverlap) {
      return *candidate;
    }
  }
  // Reached only when the text is pure punctuation or whitespace quirks made
  // every edit a no-op.
  return text + (text.empty() || text.back() != '?' ? "?" : "!");
}

std::unique_ptr<RampSchedule> make_ramp(RampKind kind) {
  switch (kind) {
    case RampKind::kLinear: return std::make_unique<LinearRamp>();
    case RampKind::kStep: return std::make_unique<StepRamp>();
    case RampKind::kSigmoid: return std::make_unique<SigmoidRamp>();
  }
  return std::make_unique<LinearRamp>();
}

std::unique_ptr<Perturber> make_perturber(PerturberKind) { return std::make_unique<CompositePerturber>(); }

void SimulationConfig::validate() const {
  if (n_sessions == 0) throw Error(ErrorCode::kConfigError, "n_sessions must be >= 1");
  if (queries_per_session < 2) throw Error(ErrorCode::kConfigError, "queries_per_session must be >= 2");
  if (!(replay_split >= 0.0 && replay_split <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "replay_split must be in [0, 1]");
  }
  if (!(latency_sigma >= 0.0) || !std::isfinite(latency_sigma)) {
    throw Error(ErrorCode::kConfigError, "latency_sigma must be >= 0");
  }
}

// ---------------------------------------------------------------------------
// QueryStream
// ---------------------------------------------------------------------------

QueryStream::QueryStream(std::vector<std::string> fresh_pool, std::size_t length, double replay_split,
                         const RampSchedule& ramp, const Perturber& perturber)
    : fresh_(std::move(fresh_pool)), length_(length), replay_split_(replay_split), ramp_(ramp), perturber_(perturber) {}

std::pair<std::string, QueryOrigin> QueryStream::next(Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double p = ramp_.probability(position_, length_);
  ++position_;
  const double replay_draw = unit(rng);
  std::pair<std::string, QueryOrigin> out;
  if (!past_.empty() && replay_draw < p) {
    std::uniform_int_distribution<std::size_t> pick(0, past_.size() - 1);
    const std::string& source = past_[pick(rng)];
    if (unit(rng) < replay_split_) {
      out = {source, QueryOrigin::kExactReplay};
    } else {
      out = {perturber_.perturb(source, rng), QueryOrigin::kPerturbedReplay};
    }
  } else {
    if (fresh_next_ >= fresh_.size()) {
      throw Error(ErrorCode::kPoolExhausted, "no unused fresh questions left after " +
                                                 std::to_string(fresh_.size()));
    }
    out = {fresh_[fresh_next_++], QueryOrigin::kFresh};
  }
  past_.push_back(out.first);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic latency
// ---------------------------------------------------------------------------

SyntheticLatencyModel::SyntheticLatencyModel(const LayerCostModel& model, double sigma) : sigma_(sigma) {
  model.validate();
  const auto& cost = model.gpu_seconds_per_query;
  const double search = cost[layer_index(LayerTag::kSemanticCache)];
  hit_base_ = cost;
  hit_base_[layer_index(LayerTag::kFixedKV)] = std::max(cost[layer_index(LayerTag::kFixedKV)], kFixedKvLatencyFloor);
  // A miss costs the lookup; a rejected recall still paid for generation.
  miss_base_ = {kFixedKvLatencyFloor, search, cost[layer_index(LayerTag::kMemoryRecall)], search, search};
}

double SyntheticLatencyModel::base(LayerTag layer, ProbeOutcome outcome) const {
  return outcome == ProbeOutcome::kHit ? hit_base_[layer_index(layer)] : miss_base_[layer_index(layer)];
}

void SyntheticLatencyModel::apply(RouteTraceEvent& event, Rng& rng) const {
  std::lognormal_distribution<double> jitter(0.0, sigma_);
  double total = 0.0;
  for (auto& probe : event.layers_probed) {
    probe.seconds = base(probe.layer, probe.outcome) * (sigma_ > 0.0 ? jitter(rng) : 1.0);
    total += probe.seconds;
  }
  event.latency_seconds = total;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

std::vector<SessionLog> run_simulation(const SimulationConfig& config, RouterConfig router_config,
                                       const Embedder& embedder, GenerationBackend& backend,
                                       const MainKnowledgeBase& kb, std::span<const DatasetItem> dataset,
                                       const LayerCostModel& cost_model) {
  config.validate();
  router_config.deterministic_settle = true;
  router_config.persist_akm = false;
  Router router(router_config, embedder, backend, kb);
  auto ramp = make_ramp(config.ramp);
  auto perturber = make_perturber(config.perturber);
  SyntheticLatencyModel latency(cost_model, config.latency_sigma);

  std::vector<std::string> questions;
  questions.reserve(dataset.size());
  for (const auto& item : dataset) questions.push_back(item.question);

  std::vector<SessionLog> logs;
  for (std::size_t s = 0; s < config.n_sessions; ++s) {
    router.reset_session();
    Rng stream_rng(config.seed * 1000003ULL + s);
    Rng latency_rng(config.seed * 1000003ULL + s + 0x5bd1e995ULL);
    auto pool = questions;
    std::shuffle(pool.begin(), pool.end(), stream_rng);
    QueryStream stream(std::move(pool), config.queries_per_session, config.replay_split, *ramp, *perturber);

    SessionLog log;
    char session_id[48];
    std::snprintf(session_id, sizeof(session_id), "session-%02zu", s + 1);
    log.session_id = session_id;
    std::int64_t clock_ns = 0;
    for (std::size_t i = 0; i < config.queries_per_session; ++i) {
      auto [text, origin] = stream.next(stream_rng);
      Query q{log.session_id + "-q" + std::to_string(i), std::move(text), log.session_id, clock_ns};
      RouteResult result = router.route(q);
      result.trace.timestamp = clock_ns;
      latency.apply(result.trace, latency_rng);
      if (result.answer) result.answer->latency_seconds = result.trace.latency_seconds;
      clock_ns += static_cast<std::int64_t>(std::llround(result.trace.latency_seconds * 1e9));
      log.entries.push_back(make_log_entry(q, origin, result));
    }
    logs.push_back(std::move(log));
  }
  return logs;
}

std::vector<fs::path> write_session_logs(std::span<const SessionLog> logs, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> paths;
  for (std::size_t s = 0; s < logs.size(); ++s) {
    char name[48];
    std::snprintf(name, sizeof(name), "session_%02zu.jsonl", s + 1);
    std::string body;
    for (const auto& e : logs[s].entries) body += Json(e).dump() + "\n";
    write_text_file(dir / name, body);
    paths.push_back(dir / name);
  }
  return paths;
}

SessionLog read_session_log(const fs::path& path) {
  SessionLog log;
  read_jsonl_file(path, false, [&](const Json& j) { log.entries.push_back(j.get<LogEntry>()); });
  if (!log.entries.empty()) log.session_id = log.entries.front().query.session_id;
  return log;
}

std::vector<SessionLog> read_session_logs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("session_") && name.ends_with(".jsonl")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<SessionLog> logs;
  for (const auto& f : files) logs.push_back(read_session_log(f));
  return logs;
}

}  // namespace pentarag
