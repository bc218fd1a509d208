#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pentarag/core.hpp"

namespace pentarag {

inline constexpr std::size_t kEmbeddingDim = 1024;
inline constexpr double kUnitNormTolerance = 1e-5;

/// A unit-norm float32 vector. Construction always validates, so every
/// live instance satisfies the invariants (finite, ||v|| = 1 +- 1e-5).
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  /// Accepts components that are already unit-norm. Throws kInvalidVector.
  static EmbeddingVector from_unit(std::vector<float> components);

  /// Scales `components` to unit length. Throws kInvalidVector on a zero,
  /// NaN or Inf input.
  static EmbeddingVector normalized(std::vector<float> components);

  std::span<const float> components() const { return components_; }
  std::size_t dimension() const { return components_.size(); }
  bool empty() const { return components_.empty(); }
  float operator[](std::size_t i) const { return components_[i]; }

  bool operator==(const EmbeddingVector&) const = default;

 private:
  explicit EmbeddingVector(std::vector<float> c) : components_(std::move(c)) {}
  std::vector<float> components_;
};

/// Sum of exact float products accumulated left to right in double.
/// Both the flat index and the cosine below use this definition so that
/// scores agree bit for bit.
double dot_product(std::span<const float> a, std::span<const float> b);

/// Dot product of two unit vectors clamped to [-1, 1].
/// Throws kDimensionMismatch when the lengths differ.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

void to_json(Json& j, const EmbeddingVector& v);
void from_json(const Json& j, EmbeddingVector& v);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  /// Throws kEmptyInput for blank text.
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const;
};

/// Splits on Unicode whitespace and punctuation; ASCII letters are folded to
/// lower case. Bytes of other scripts are kept verbatim.
std::vector<std::string> tokenize(std::string_view text);

inline constexpr std::uint64_t kDefaultHashSeed = 0x9e3779b97f4a7c15ULL;

/// Seeded 64-bit FNV-1a followed by a splitmix64 finalizer. Stable across
/// platforms.
std::uint64_t stable_hash64(std::string_view bytes, std::uint64_t seed);

/// Signed feature hashing of the token bag into `dimension` buckets, then L2
/// normalisation. When every bucket cancels to zero the vector falls back to
/// a signed one-hot axis chosen by hashing the raw bytes.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension = kEmbeddingDim,
                        std::uint64_t seed = kDefaultHashSeed);

  std::size_t dimension() const override { return dimension_; }
  EmbeddingVector embed(std::string_view text) const override;

  /// Bucket and sign a token contributes to.
  std::pair<std::size_t, float> feature(std::string_view token) const;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

class HttpJsonClient;

/// JSON-over-HTTP embedder: POST {"texts": [...]} -> {"vectors": [[...]]}.
/// Returned vectors are re-normalised; a wrong length is kDimensionMismatch.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(const std::string& endpoint, std::size_t dimension = kEmbeddingDim,
                 std::size_t max_in_flight = 8);
  ~RemoteEmbedder() override;

  std::size_t dimension() const override { return dimension_; }
  EmbeddingVector embed(std::string_view text) const override;
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;

 private:
  std::size_t dimension_;
  std::unique_ptr<HttpJsonClient> client_;
};

}  // namespace pentarag
