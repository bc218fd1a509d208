#include "pentarag/flat_index.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>

namespace pentarag::detail {

std::vector<RowScore> scan_top_k(std::span<const float> matrix, std::size_t dimension,
                                 std::span<const float> query, std::size_t k) {
  const std::size_t rows = dimension == 0 ? 0 : matrix.size() / dimension;
  std::vector<RowScore> scored;
  scored.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = dot_product(matrix.subspan(r * dimension, dimension), query);
    scored.push_back(RowScore{r, std::clamp(s, -1.0, 1.0)});
  }
  const std::size_t take = std::min(k, rows);
  auto better = [](const RowScore& a, const RowScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.row < b.row;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);
  scored.resize(take);
  return scored;
}

std::uint32_t crc32_of(std::span<const float> data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* bytes = reinterpret_cast<const Bytef*>(data.data());
  std::size_t remaining = data.size_bytes();
  // zlib takes uInt lengths.
  while (remaining > 0) {
    auto chunk = static_cast<uInt>(std::min<std::size_t>(remaining, 1u << 30));
    crc = crc32(crc, bytes, chunk);
    bytes += chunk;
    remaining -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw Error(ErrorCode::kCorruptSnapshot, "truncated header");
  }
  return value;
}

}  // namespace

void write_snapshot_header(std::ostream& out, const SnapshotHeader& header) {
  out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
  put(out, kSnapshotVersion);
  put(out, header.dimension);
  put(out, header.count);
  put(out, header.checksum);
}

SnapshotHeader read_snapshot_header(std::istream& in) {
  char magic[sizeof(kSnapshotMagic)] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(magic)) ||
      std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::kCorruptSnapshot, "bad magic");
  }
  auto version = get<std::uint32_t>(in);
  if (version != kSnapshotVersion) {
    throw Error(ErrorCode::kCorruptSnapshot, "unsupported version " + std::to_string(version));
  }
  SnapshotHeader h;
  h.dimension = get<std::uint32_t>(in);
  h.count = get<std::uint64_t>(in);
  h.checksum = get<std::uint32_t>(in);
  if (h.dimension == 0) throw Error(ErrorCode::kCorruptSnapshot, "zero dimension");
  return h;
}

std::vector<float> read_snapshot_records(std::istream& in, const SnapshotHeader& header) {
  constexpr std::uint64_t kMaxFloats = 1ULL << 34;
  if (header.count > kMaxFloats / header.dimension) {
    throw Error(ErrorCode::kCorruptSnapshot, "implausible record count");
  }
  std::vector<float> matrix(header.count * header.dimension);
  auto bytes = static_cast<std::streamsize>(matrix.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(matrix.data()), bytes);
  if (in.gcount() != bytes) throw Error(ErrorCode::kCorruptSnapshot, "truncated records");
  if (crc32_of(matrix) != header.checksum) throw Error(ErrorCode::kCorruptSnapshot, "checksum mismatch");
  return matrix;
}

}  // namespace pentarag::detail
