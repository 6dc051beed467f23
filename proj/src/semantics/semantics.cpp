#include "refatom/semantics/semantics.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "refatom/core/ops.hpp"

namespace refatom::semantics {

namespace {

constexpr const char* kDefaultStopwords[] = {
    "a",    "an",    "the",  "is",   "are",   "was",  "were",  "be",    "been", "being",
    "am",   "in",    "on",   "at",   "of",    "to",   "for",   "with",  "by",   "from",
    "into", "onto",  "upon", "about", "as",   "and",  "or",    "but",   "nor",  "so",
    "this", "that",  "these", "those", "it",  "its",  "who",   "whom",  "whose", "which",
    "there", "here", "has",  "have", "had",   "do",   "does",  "did",   "can",  "will"};

bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; }

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b])) != 0) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])) != 0) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

StopSet default_stopwords() { return StopSet(std::begin(kDefaultStopwords), std::end(kDefaultStopwords)); }

StopSet parse_stopwords(std::istream& in) {
  StopSet out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string word = trim(line);
    if (word.empty()) continue;
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.insert(std::move(word));
  }
  return out;
}

StopSet load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open stop list '" + path.string() + "'");
  return parse_stopwords(in);
}

TokenizedText tokenize_and_filter(std::string_view text, const StopSet& stop) {
  if (trim(text).empty()) throw InputError("tokenize_and_filter: empty reference text");
  TokenizedText out;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    } else if (!current.empty()) {
      out.words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.words.push_back(std::move(current));
  if (out.words.empty()) throw InputError("tokenize_and_filter: no words in '" + std::string(text) + "'");
  out.keywords = filter_stopwords(out.words, stop);
  return out;
}

std::vector<std::string> filter_stopwords(std::span<const std::string> words, const StopSet& stop) {
  std::vector<std::string> kept;
  for (const auto& w : words) {
    if (!stop.contains(w)) kept.push_back(w);
  }
  return kept;
}

std::uint64_t word_hash(std::string_view word, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
  for (char c : word) mix(static_cast<unsigned char>(c));
  return h;
}

Vec synthetic_encode(std::string_view word, std::size_t dim, std::uint64_t seed) {
  if (dim < 2) throw ConfigError("synthetic_encode: dim must be >= 2, got " + std::to_string(dim));
  std::mt19937_64 rng(word_hash(word, seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  return v / v.norm();
}

RowVec normalized_mean(const Mat& vectors) {
  if (vectors.rows() == 0) throw DomainError("normalized_mean: no vectors");
  RowVec m = vectors.colwise().sum() / static_cast<double>(vectors.rows());
  const double n = m.norm();
  if (!(n > 0.0)) throw DomainError("normalized_mean: zero mean vector");
  return m / n;
}

SyntheticEncoder::SyntheticEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 2) throw ConfigError("SyntheticEncoder: dim must be >= 2");
}

Vec SyntheticEncoder::encode_word(std::string_view word) const { return synthetic_encode(word, dim_, seed_); }

Mat SyntheticEncoder::encode_sentence(std::string_view, std::span<const std::string> words) const {
  Mat rows(static_cast<Eigen::Index>(words.size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < words.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = encode_word(words[i]).transpose();
  return normalized_mean(rows);
}

PrecomputedEncoder PrecomputedEncoder::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw AdapterError("cannot open embedding file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

PrecomputedEncoder PrecomputedEncoder::parse(std::string_view json_text) {
  PrecomputedEncoder enc;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
    enc.dim_ = doc.at("dim").get<std::size_t>();
    auto to_vec = [&](const nlohmann::json& arr) {
      const auto vals = arr.get<std::vector<double>>();
      if (vals.size() != enc.dim_) throw AdapterError("embedding length " + std::to_string(vals.size()) + " != dim");
      return Vec(Eigen::Map<const Vec>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    };
    if (doc.contains("words")) {
      for (const auto& [word, arr] : doc["words"].items()) enc.words_.emplace(word, to_vec(arr));
    }
    if (doc.contains("sentences")) {
      for (const auto& [text, rows] : doc["sentences"].items()) {
        Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(enc.dim_));
        for (std::size_t r = 0; r < rows.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = to_vec(rows[r]).transpose();
        enc.sentences_.emplace(text, std::move(m));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw AdapterError(std::string("malformed embedding file: ") + e.what());
  }
  return enc;
}

Vec PrecomputedEncoder::encode_word(std::string_view word) const {
  auto it = words_.find(word);
  if (it == words_.end()) throw AdapterError("no embedding for word '" + std::string(word) + "'");
  return it->second;
}

Mat PrecomputedEncoder::encode_sentence(std::string_view text, std::span<const std::string>) const {
  auto it = sentences_.find(text);
  if (it == sentences_.end()) throw AdapterError("no sentence embedding for '" + std::string(text) + "'");
  return it->second;
}

ReferenceBundle embed_reference(std::string_view text, const StopSet& stop, const TextEncoder& encoder) {
  TokenizedText tok = tokenize_and_filter(text, stop);
  ReferenceBundle out;
  out.raw_text = std::string(text);
  out.holistic = encoder.encode_sentence(text, tok.words);
  const auto d = static_cast<Eigen::Index>(encoder.dim());
  out.keyword_embeddings.resize(static_cast<Eigen::Index>(tok.keywords.size()), d);
  for (std::size_t i = 0; i < tok.keywords.size(); ++i) {
    Vec v;
    try {
      v = encoder.encode_word(tok.keywords[i]);
    } catch (const std::exception& e) {
      throw AdapterError("encoder failed at keyword index " + std::to_string(i) + " ('" + tok.keywords[i] +
                         "'): " + e.what());
    }
    if (v.size() != d) throw AdapterError("encoder returned wrong dimension at keyword index " + std::to_string(i));
    out.keyword_embeddings.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  out.words = std::move(tok.words);
  out.keywords = std::move(tok.keywords);
  return out;
}

void validate(const Detection& det) {
  const auto& b = det.bbox;
  for (double c : b) {
    if (!(c >= 0.0 && c <= 1.0)) throw InputError("detection bbox coordinate outside [0,1]");
  }
  if (!(b[0] < b[2] && b[1] < b[3])) throw InputError("detection bbox must satisfy x1<x2, y1<y2");
  if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) throw InputError("detection confidence outside [0,1]");
}

void RecordedDetections::set(const std::string& sample_id, std::vector<Detection> detections) {
  by_sample_[sample_id] = std::move(detections);
}

std::vector<Detection> RecordedDetections::detect(const std::string& sample_id) const {
  auto it = by_sample_.find(sample_id);
  if (it == by_sample_.end()) return {};
  return it->second;
}

std::vector<std::size_t> select_detections(std::span<const Detection> detections, double threshold,
                                           std::size_t max_count) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (detections[i].confidence >= threshold) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });
  if (idx.size() > max_count) idx.resize(max_count);
  return idx;
}

std::vector<SceneAttributeToken> build_scene_attribute_tokens(std::span<const Detection> detections,
                                                              const Mat& category_embeddings,
                                                              AttributeProjection projection, double threshold,
                                                              std::size_t max_count) {
  if (category_embeddings.rows() != static_cast<Eigen::Index>(detections.size())) {
    throw DimensionError("build_scene_attribute_tokens: one category embedding per detection required");
  }
  const Eigen::Index d = category_embeddings.cols();
  if (projection.weight.rows() != d + 4) {
    throw DimensionError("build_scene_attribute_tokens: projection expects input dim " +
                         std::to_string(projection.weight.rows()) + ", have d + 4 = " + std::to_string(d + 4));
  }
  std::vector<SceneAttributeToken> out;
  for (std::size_t i : select_detections(detections, threshold, max_count)) {
    Mat x(1, d + 4);
    x.leftCols(d) = category_embeddings.row(static_cast<Eigen::Index>(i));
    for (int k = 0; k < 4; ++k) x(0, d + k) = detections[i].bbox[static_cast<std::size_t>(k)];
    Mat y = linear(x, projection.weight, projection.bias);
    out.push_back(SceneAttributeToken{y.row(0).transpose(), i});
  }
  return out;
}

Mat encode_categories(std::span<const Detection> detections, const TextEncoder& encoder) {
  Mat out(static_cast<Eigen::Index>(detections.size()), static_cast<Eigen::Index>(encoder.dim()));
  for (std::size_t i = 0; i < detections.size(); ++i) {
    try {
      out.row(static_cast<Eigen::Index>(i)) = encoder.encode_word(detections[i].category).transpose();
    } catch (const std::exception& e) {
      throw AdapterError("encoder failed at detection index " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

std::vector<SceneAttributeToken> build_scene_attribute_tokens(std::span<const Detection> detections,
                                                              const TextEncoder& encoder,
                                                              AttributeProjection projection, double threshold,
                                                              std::size_t max_count) {
  return build_scene_attribute_tokens(detections, encode_categories(detections, encoder), projection, threshold,
                                      max_count);
}

}  // namespace refatom::semantics
