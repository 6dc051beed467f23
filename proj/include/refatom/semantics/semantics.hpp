#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "refatom/core/dense.hpp"

namespace refatom::semantics {

using StopSet = std::set<std::string>;

/// Version tag of the bundled stop list (data/stopwords.txt).
inline constexpr std::string_view kStopwordsVersion = "v1";

StopSet default_stopwords();

/// One token per line, '#' starts a comment, blank lines ignored.
StopSet parse_stopwords(std::istream& in);
StopSet load_stopwords(const std::filesystem::path& path);

struct TokenizedText {
  std::vector<std::string> words;
  std::vector<std::string> keywords;
};

/// Lowercases and splits on whitespace/punctuation, then drops stop words
/// (order and duplicates preserved). Throws InputError on empty text.
TokenizedText tokenize_and_filter(std::string_view text, const StopSet& stop);

std::vector<std::string> filter_stopwords(std::span<const std::string> words, const StopSet& stop);

/// 64-bit FNV-1a over the bytes of `word`, folded with `seed`.
std::uint64_t word_hash(std::string_view word, std::uint64_t seed);

/// Deterministic unit vector for a word: normal draws from a PRNG seeded by
/// word_hash(word, seed), then L2-normalized. Throws ConfigError if dim < 2.
Vec synthetic_encode(std::string_view word, std::size_t dim, std::uint64_t seed);

/// Renormalized mean of the rows of `vectors`.
RowVec normalized_mean(const Mat& vectors);

struct AdapterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Text-side adapter: stands in for the frozen language backbone.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::size_t dim() const = 0;
  virtual Vec encode_word(std::string_view word) const = 0;
  /// Holistic sentence embedding(s), one row each.
  virtual Mat encode_sentence(std::string_view text, std::span<const std::string> words) const = 0;
};

class SyntheticEncoder final : public TextEncoder {
 public:
  SyntheticEncoder(std::size_t dim, std::uint64_t seed);
  std::size_t dim() const override { return dim_; }
  Vec encode_word(std::string_view word) const override;
  /// Renormalized mean of the word vectors (one row).
  Mat encode_sentence(std::string_view text, std::span<const std::string> words) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Reads embeddings produced offline by a real encoder. JSON layout:
/// {"dim": d, "words": {"w": [..]}, "sentences": {"text": [[..], ..]}}
class PrecomputedEncoder final : public TextEncoder {
 public:
  static PrecomputedEncoder load(const std::filesystem::path& path);
  static PrecomputedEncoder parse(std::string_view json_text);

  std::size_t dim() const override { return dim_; }
  Vec encode_word(std::string_view word) const override;
  Mat encode_sentence(std::string_view text, std::span<const std::string> words) const override;

 private:
  std::size_t dim_ = 0;
  std::map<std::string, Vec, std::less<>> words_;
  std::map<std::string, Mat, std::less<>> sentences_;
};

struct ReferenceBundle {
  std::string raw_text;
  std::vector<std::string> words;
  std::vector<std::string> keywords;
  Mat holistic;            // N_R x d
  Mat keyword_embeddings;  // N_K' x d, one row per surviving keyword
};

ReferenceBundle embed_reference(std::string_view text, const StopSet& stop, const TextEncoder& encoder);

struct Detection {
  std::array<double, 4> bbox{};  // x1, y1, x2, y2 normalized
  std::string category;
  double confidence = 0.0;

  bool operator==(const Detection&) const = default;
};

/// Throws InputError unless x1<x2, y1<y2, coords and confidence in [0,1].
void validate(const Detection& detection);

/// Detector-side adapter: returns keyframe detections for a sample id.
class DetectionSource {
 public:
  virtual ~DetectionSource() = default;
  virtual std::vector<Detection> detect(const std::string& sample_id) const = 0;
};

/// Detections recorded alongside the annotations.
class RecordedDetections final : public DetectionSource {
 public:
  void set(const std::string& sample_id, std::vector<Detection> detections);
  std::vector<Detection> detect(const std::string& sample_id) const override;

 private:
  std::map<std::string, std::vector<Detection>> by_sample_;
};

struct SceneAttributeToken {
  Vec vector;
  std::size_t source_detection = 0;
};

/// Projection applied to concat(category embedding, bbox): y = x W + b.
struct AttributeProjection {
  const Mat& weight;  // (d + 4) x d'
  const Mat& bias;    // 1 x d'
};

/// Indices of detections passing `threshold`, by confidence descending
/// (stable), truncated to `max_count`.
std::vector<std::size_t> select_detections(std::span<const Detection> detections, double threshold,
                                           std::size_t max_count);

/// `category_embeddings` holds one row per detection (same order).
std::vector<SceneAttributeToken> build_scene_attribute_tokens(std::span<const Detection> detections,
                                                              const Mat& category_embeddings,
                                                              AttributeProjection projection, double threshold,
                                                              std::size_t max_count);

std::vector<SceneAttributeToken> build_scene_attribute_tokens(std::span<const Detection> detections,
                                                              const TextEncoder& encoder,
                                                              AttributeProjection projection, double threshold,
                                                              std::size_t max_count);

/// One encoder row per detection category.
Mat encode_categories(std::span<const Detection> detections, const TextEncoder& encoder);

}  // namespace refatom::semantics
