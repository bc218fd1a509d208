#include "pentarag/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "pentarag/http_client.hpp"

namespace pentarag {

namespace {

bool all_finite(const std::vector<float>& v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

double squared_norm(const std::vector<float>& v) { return dot_product(v, v); }

bool is_unicode_separator(char32_t cp) {
  if (cp < 0x80) {
    return (cp <= 0x20) || cp == 0x7f || (cp >= 0x21 && cp <= 0x2f) || (cp >= 0x3a && cp <= 0x40) ||
           (cp >= 0x5b && cp <= 0x60) || (cp >= 0x7b && cp <= 0x7e);
  }
  // Whitespace (Zs, line/paragraph separators, NEL, BOM).
  if (cp == 0x85 || cp == 0xa0 || cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200b) || cp == 0x2028 ||
      cp == 0x2029 || cp == 0x202f || cp == 0x205f || cp == 0x3000 || cp == 0xfeff) {
    return true;
  }
  // Common punctuation blocks.
  if (cp == 0xa1 || cp == 0xa7 || cp == 0xab || cp == 0xb6 || cp == 0xb7 || cp == 0xbb || cp == 0xbf) {
    return true;
  }
  if ((cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205e)) return true;
  if ((cp >= 0x3001 && cp <= 0x3003) || (cp >= 0x3008 && cp <= 0x3011)) return true;
  if ((cp >= 0xff01 && cp <= 0xff0f) || (cp >= 0xff1a && cp <= 0xff20)) return true;
  return false;
}

// Decodes one UTF-8 sequence starting at `i`. Malformed bytes decode as
// themselves with length 1 so they stay inside tokens.
std::pair<char32_t, std::size_t> decode_utf8(std::string_view s, std::size_t i) {
  auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = (b0 >= 0xf0 && b0 < 0xf8) ? 4 : (b0 >= 0xe0) ? 3 : (b0 >= 0xc0) ? 2 : 0;
  if (len == 0 || i + len > s.size()) return {0xfffd, 1};
  char32_t cp = b0 & (0x7f >> len);
  for (std::size_t k = 1; k < len; ++k) {
    auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xc0) != 0x80) return {0xfffd, 1};
    cp = (cp << 6) | (b & 0x3f);
  }
  return {cp, len};
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

EmbeddingVector EmbeddingVector::from_unit(std::vector<float> components) {
  if (components.empty()) throw Error(ErrorCode::kInvalidVector, "vector has no components");
  if (!all_finite(components)) throw Error(ErrorCode::kInvalidVector, "vector has NaN/Inf components");
  double norm = std::sqrt(squared_norm(components));
  if (std::abs(norm - 1.0) > kUnitNormTolerance) {
    throw Error(ErrorCode::kInvalidVector, "vector norm " + std::to_string(norm) + " is not 1");
  }
  return EmbeddingVector(std::move(components));
}

EmbeddingVector EmbeddingVector::normalized(std::vector<float> components) {
  if (components.empty()) throw Error(ErrorCode::kInvalidVector, "vector has no components");
  if (!all_finite(components)) throw Error(ErrorCode::kInvalidVector, "vector has NaN/Inf components");
  double norm = std::sqrt(squared_norm(components));
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::kInvalidVector, "cannot normalise a zero vector");
  }
  for (float& x : components) x = static_cast<float>(x / norm);
  return from_unit(std::move(components));
}

double dot_product(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw Error(ErrorCode::kDimensionMismatch, std::to_string(a.dimension()) + " vs " +
                                                   std::to_string(b.dimension()));
  }
  return std::clamp(dot_product(a.components(), b.components()), -1.0, 1.0);
}

void to_json(Json& j, const EmbeddingVector& v) {
  j = Json(std::vector<float>(v.components().begin(), v.components().end()));
}

void from_json(const Json& j, EmbeddingVector& v) {
  v = EmbeddingVector::from_unit(j.get<std::vector<float>>());
}

std::vector<EmbeddingVector> Embedder::embed_batch(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    auto [cp, len] = decode_utf8(text, i);
    if (is_unicode_separator(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else if (len == 1 && cp < 0x80) {
      char c = text[i];
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      current.push_back(c);
    } else {
      current.append(text.substr(i, len));
    }
    i += len;
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::uint64_t stable_hash64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

HashEmbedder::HashEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension_ == 0) throw Error(ErrorCode::kConfigError, "embedding dimension must be positive");
}

std::pair<std::size_t, float> HashEmbedder::feature(std::string_view token) const {
  std::uint64_t h = stable_hash64(token, seed_);
  float sign = (h >> 63) ? -1.0f : 1.0f;
  return {static_cast<std::size_t>(h % dimension_), sign};
}

EmbeddingVector HashEmbedder::embed(std::string_view text) const {
  if (is_blank(text)) throw Error(ErrorCode::kEmptyInput, "cannot embed blank text");
  std::vector<float> acc(dimension_, 0.0f);
  for (const auto& token : tokenize(text)) {
    auto [bucket, sign] = feature(token);
    acc[bucket] += sign;
  }
  bool all_zero = std::all_of(acc.begin(), acc.end(), [](float x) { return x == 0.0f; });
  if (all_zero) {
    auto [bucket, sign] = feature(text);
    acc[bucket] = sign;
  }
  return EmbeddingVector::normalized(std::move(acc));
}

RemoteEmbedder::RemoteEmbedder(const std::string& endpoint, std::size_t dimension,
                               std::size_t max_in_flight)
    : dimension_(dimension), client_(std::make_unique<HttpJsonClient>(endpoint, max_in_flight)) {}

RemoteEmbedder::~RemoteEmbedder() = default;

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
  std::string owned(text);
  return embed_batch(std::span<const std::string>(&owned, 1)).front();
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) const {
  for (const auto& t : texts) {
    if (is_blank(t)) throw Error(ErrorCode::kEmptyInput, "cannot embed blank text");
  }
  Json request{{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  Json response = client_->post(request);
  if (!response.contains("vectors") || !response["vectors"].is_array() ||
      response["vectors"].size() != texts.size()) {
    throw Error(ErrorCode::kBackendUnavailable, "embedder response lacks one vector per text");
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& row : response["vectors"]) {
    auto components = row.get<std::vector<float>>();
    if (components.size() != dimension_) {
      throw Error(ErrorCode::kDimensionMismatch, "remote embedder returned " +
                                                     std::to_string(components.size()) + " components");
    }
    out.push_back(EmbeddingVector::normalized(std::move(components)));
  }
  return out;
}

}  // namespace pentarag
