#pragma once

#include <atomic>
#include <cstdint>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pentarag/core.hpp"
#include "pentarag/embedding.hpp"

namespace pentarag {

struct SearchHit {
  std::string entry_id;
  double score = 0.0;   // cosine in [-1, 1]
  std::size_t rank = 0;  // 1-based

  bool operator==(const SearchHit&) const = default;
};

namespace detail {

struct RowScore {
  std::size_t row;
  double score;
};

/// Exhaustive scan of a row-major matrix. Returns the min(k, rows) best rows
/// ordered by score descending, ties by ascending row.
std::vector<RowScore> scan_top_k(std::span<const float> matrix, std::size_t dimension,
                                 std::span<const float> query, std::size_t k);

inline constexpr char kSnapshotMagic[8] = {'P', 'R', 'A', 'G', 'F', 'L', 'A', 'T'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

struct SnapshotHeader {
  std::uint32_t dimension = 0;
  std::uint64_t count = 0;
  std::uint32_t checksum = 0;
};

std::uint32_t crc32_of(std::span<const float> data);
void write_snapshot_header(std::ostream& out, const SnapshotHeader& header);
SnapshotHeader read_snapshot_header(std::istream& in);
std::vector<float> read_snapshot_records(std::istream& in, const SnapshotHeader& header);

}  // namespace detail

/// Exact linear-scan cosine index. Rows are kept in insertion order, which is
/// also the tie-break order. Upserting an existing id keeps its position.
///
/// Readers share a lock; writers take it exclusively, so a search sees either
/// the whole of an insert or none of it.
template <typename Payload>
class FlatIndex {
 public:
  struct Match {
    SearchHit hit;
    Payload payload;
    EmbeddingVector vector;
  };

  explicit FlatIndex(std::size_t dimension = kEmbeddingDim) : dimension_(dimension) {}

  FlatIndex(FlatIndex&& other) noexcept {
    std::unique_lock lock(other.mu_);
    move_from(other);
  }
  FlatIndex& operator=(FlatIndex&& other) noexcept {
    if (this != &other) {
      std::scoped_lock lock(mu_, other.mu_);
      move_from(other);
    }
    return *this;
  }
  FlatIndex(const FlatIndex&) = delete;
  FlatIndex& operator=(const FlatIndex&) = delete;

  std::size_t dimension() const { return dimension_; }

  /// Inserts or replaces. Throws kInvalidVector for a vector of the wrong
  /// dimension (values are already validated by EmbeddingVector).
  void insert(const std::string& id, const EmbeddingVector& vector, Payload payload) {
    if (vector.dimension() != dimension_) {
      throw Error(ErrorCode::kInvalidVector, "expected dimension " + std::to_string(dimension_) +
                                                 ", got " + std::to_string(vector.dimension()));
    }
    std::unique_lock lock(mu_);
    ++insertion_counter_;
    auto comps = vector.components();
    if (auto it = row_of_.find(id); it != row_of_.end()) {
      std::copy(comps.begin(), comps.end(), matrix_.begin() + it->second * dimension_);
      payloads_[it->second] = std::move(payload);
      return;
    }
    row_of_.emplace(id, ids_.size());
    ids_.push_back(id);
    matrix_.insert(matrix_.end(), comps.begin(), comps.end());
    payloads_.push_back(std::move(payload));
  }

  /// Exact top-k; an empty index yields an empty list. k = 0 is treated as 1.
  std::vector<SearchHit> search(const EmbeddingVector& query, std::size_t k) const {
    std::shared_lock lock(mu_);
    std::vector<SearchHit> hits;
    for (const auto& rs : scan_locked(query, k)) {
      hits.push_back(SearchHit{ids_[rs.row], rs.score, hits.size() + 1});
    }
    return hits;
  }

  /// Same as search() but also copies each hit's payload and vector under
  /// the same read lock.
  std::vector<Match> search_entries(const EmbeddingVector& query, std::size_t k) const {
    std::shared_lock lock(mu_);
    std::vector<Match> out;
    for (const auto& rs : scan_locked(query, k)) {
      out.push_back(Match{SearchHit{ids_[rs.row], rs.score, out.size() + 1}, payloads_[rs.row],
                          row_vector(rs.row)});
    }
    return out;
  }

  /// Removes one entry, preserving the relative order of the rest.
  bool erase(const std::string& id) {
    std::unique_lock lock(mu_);
    auto it = row_of_.find(id);
    if (it == row_of_.end()) return false;
    std::size_t row = it->second;
    ids_.erase(ids_.begin() + static_cast<std::ptrdiff_t>(row));
    payloads_.erase(payloads_.begin() + static_cast<std::ptrdiff_t>(row));
    auto first = matrix_.begin() + static_cast<std::ptrdiff_t>(row * dimension_);
    matrix_.erase(first, first + static_cast<std::ptrdiff_t>(dimension_));
    row_of_.clear();
    for (std::size_t r = 0; r < ids_.size(); ++r) row_of_.emplace(ids_[r], r);
    return true;
  }

  void clear() {
    std::unique_lock lock(mu_);
    ids_.clear();
    payloads_.clear();
    matrix_.clear();
    row_of_.clear();
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return ids_.size();
  }

  bool contains(const std::string& id) const {
    std::shared_lock lock(mu_);
    return row_of_.contains(id);
  }

  std::optional<Payload> payload(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = row_of_.find(id);
    if (it == row_of_.end()) return std::nullopt;
    return payloads_[it->second];
  }

  /// Entry by id; the returned hit has score 1 and rank 0.
  std::optional<Match> find(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = row_of_.find(id);
    if (it == row_of_.end()) return std::nullopt;
    return Match{SearchHit{id, 1.0, 0}, payloads_[it->second], row_vector(it->second)};
  }

  std::vector<std::string> ids() const {
    std::shared_lock lock(mu_);
    return ids_;
  }

  /// Number of insert() calls, including upserts.
  std::uint64_t insertion_counter() const {
    std::shared_lock lock(mu_);
    return insertion_counter_;
  }

  /// Number of search calls served. Used to assert that cache hits never
  /// touch an index.
  std::uint64_t search_count() const { return search_count_.load(std::memory_order_relaxed); }

  /// Binary vector records go to `records`; ids and payloads go to
  /// `sidecar` as one JSON object per line, in row order.
  void write_snapshot(std::ostream& records, std::ostream& sidecar) const {
    std::shared_lock lock(mu_);
    detail::SnapshotHeader header{static_cast<std::uint32_t>(dimension_), ids_.size(),
                                  detail::crc32_of(matrix_)};
    detail::write_snapshot_header(records, header);
    records.write(reinterpret_cast<const char*>(matrix_.data()),
                  static_cast<std::streamsize>(matrix_.size() * sizeof(float)));
    for (std::size_t r = 0; r < ids_.size(); ++r) {
      sidecar << Json{{"id", ids_[r]}, {"payload", payloads_[r]}}.dump() << '\n';
    }
    if (!records || !sidecar) throw Error(ErrorCode::kIoError, "snapshot write failed");
  }

  /// Throws kCorruptSnapshot on a bad magic, version, checksum, truncated
  /// records or a sidecar that does not line up with the records.
  static FlatIndex restore(std::istream& records, std::istream& sidecar) {
    auto header = detail::read_snapshot_header(records);
    auto matrix = detail::read_snapshot_records(records, header);
    FlatIndex index(header.dimension);
    std::string line;
    for (std::uint64_t r = 0; r < header.count; ++r) {
      if (!std::getline(sidecar, line)) {
        throw Error(ErrorCode::kCorruptSnapshot, "sidecar has fewer lines than records");
      }
      std::string id;
      Payload payload;
      try {
        auto j = Json::parse(line);
        id = j.at("id").get<std::string>();
        payload = j.at("payload").get<Payload>();
      } catch (const Json::exception& e) {
        throw Error(ErrorCode::kCorruptSnapshot, std::string("sidecar line: ") + e.what());
      }
      std::vector<float> row(matrix.begin() + static_cast<std::ptrdiff_t>(r * header.dimension),
                             matrix.begin() + static_cast<std::ptrdiff_t>((r + 1) * header.dimension));
      EmbeddingVector v;
      try {
        v = EmbeddingVector::from_unit(std::move(row));
      } catch (const Error& e) {
        throw Error(ErrorCode::kCorruptSnapshot, e.detail());
      }
      if (index.contains(id)) throw Error(ErrorCode::kCorruptSnapshot, "duplicate id " + id);
      index.insert(id, v, std::move(payload));
    }
    while (std::getline(sidecar, line)) {
      if (!is_blank(line)) throw Error(ErrorCode::kCorruptSnapshot, "sidecar has extra lines");
    }
    return index;
  }

 private:
  std::vector<detail::RowScore> scan_locked(const EmbeddingVector& query, std::size_t k) const {
    search_count_.fetch_add(1, std::memory_order_relaxed);
    if (query.dimension() != dimension_) {
      throw Error(ErrorCode::kDimensionMismatch, "query dimension " + std::to_string(query.dimension()));
    }
    return detail::scan_top_k(matrix_, dimension_, query.components(), k == 0 ? 1 : k);
  }

  EmbeddingVector row_vector(std::size_t row) const {
    auto first = matrix_.begin() + static_cast<std::ptrdiff_t>(row * dimension_);
    return EmbeddingVector::from_unit(std::vector<float>(first, first + static_cast<std::ptrdiff_t>(dimension_)));
  }

  void move_from(FlatIndex& other) {
    dimension_ = other.dimension_;
    ids_ = std::move(other.ids_);
    payloads_ = std::move(other.payloads_);
    matrix_ = std::move(other.matrix_);
    row_of_ = std::move(other.row_of_);
    insertion_counter_ = other.insertion_counter_;
    search_count_.store(other.search_count_.load());
  }

  std::size_t dimension_ = kEmbeddingDim;
  mutable std::shared_mutex mu_;
  std::vector<std::string> ids_;
  std::vector<Payload> payloads_;
  std::vector<float> matrix_;
  std::unordered_map<std::string, std::size_t> row_of_;
  std::uint64_t insertion_counter_ = 0;
  mutable std::atomic<std::uint64_t> search_count_{0};
};

}  // namespace pentarag
