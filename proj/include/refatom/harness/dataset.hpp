#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "refatom/retrieval/retrieval.hpp"
#include "refatom/semantics/semantics.hpp"

namespace refatom::harness {

/// Malformed annotation line. `line` is 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& message);
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

/// A sample references a feature file that cannot be found or read.
struct ResolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SampleRecord {
  std::string video_id;
  std::size_t num_frames = 8;
  std::size_t keyframe_index = 4;
  std::string reference;
  std::array<double, 4> gt_bbox{};
  std::vector<std::size_t> action_labels;
  std::string features_ref;  // relative to the dataset directory
  std::vector<semantics::Detection> detections;

  bool operator==(const SampleRecord&) const = default;
};

/// dataset.json
struct DatasetMeta {
  std::size_t num_samples = 0;
  std::size_t frames = 8;
  std::size_t grid_rows = 4;
  std::size_t grid_cols = 4;
  std::size_t dim = 32;
  std::size_t num_classes = 10;
  std::uint64_t seed = 0;
  std::uint64_t encoder_seed = 0;

  std::size_t cells() const { return grid_rows * grid_cols; }
  bool operator==(const DatasetMeta&) const = default;
};

inline constexpr const char* kMetaFile = "dataset.json";
inline constexpr const char* kAnnotationFile = "annotations.jsonl";

std::string record_to_json_line(const SampleRecord& record);

/// Parses one JSON-lines record; `num_classes` of 0 skips the label bound.
SampleRecord parse_record(const std::string& line, std::size_t line_number, std::size_t num_classes = 0);

std::vector<SampleRecord> read_annotations(std::istream& in, std::size_t num_classes = 0);
std::vector<SampleRecord> load_annotations(const std::filesystem::path& path, std::size_t num_classes = 0);
void write_annotations(std::ostream& out, const std::vector<SampleRecord>& records);

std::string meta_to_json(const DatasetMeta& meta);
DatasetMeta parse_meta(const std::string& text);

struct Dataset {
  std::filesystem::path root;
  DatasetMeta meta;
  std::vector<SampleRecord> records;
};

/// Reads dataset.json and annotations.jsonl; feature files are resolved lazily.
Dataset load_dataset(const std::filesystem::path& dir);

/// Loads the feature tensor [T, S, d] of one sample. Throws ResolutionError
/// if the file is missing or unreadable and InputError if its shape
/// disagrees with the metadata.
retrieval::VisualTokenGrid load_features(const Dataset& dataset, const SampleRecord& record);

/// Writes dataset.json and annotations.jsonl into `dir`.
void write_index_files(const std::filesystem::path& dir, const DatasetMeta& meta,
                       const std::vector<SampleRecord>& records);

/// Re-serializes every file of `dataset` under `dir`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Normalized rectangle of grid cell `s` (row-major cells).
std::array<double, 4> cell_box(std::size_t s, std::size_t rows, std::size_t cols);

}  // namespace refatom::harness
