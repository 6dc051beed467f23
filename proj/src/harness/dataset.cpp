#include "refatom/harness/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "refatom/harness/tensor_io.hpp"

namespace refatom::harness {

using nlohmann::json;

ParseError::ParseError(std::size_t line, std::string field, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", field '" + field + "': " + message),
      line_(line),
      field_(std::move(field)) {}

namespace {

json box_json(const std::array<double, 4>& b) { return json::array({b[0], b[1], b[2], b[3]}); }

const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line, key, "missing");
  return *it;
}

std::array<double, 4> parse_box(const json& v, std::size_t line, const std::string& field) {
  if (!v.is_array() || v.size() != 4) throw ParseError(line, field, "expected 4 numbers");
  std::array<double, 4> b{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!v[i].is_number()) throw ParseError(line, field, "expected 4 numbers");
    b[i] = v[i].get<double>();
  }
  for (double c : b)
    if (!(c >= 0.0 && c <= 1.0)) throw ParseError(line, field, "coordinate outside [0, 1]");
  if (!(b[0] < b[2]) || !(b[1] < b[3])) throw ParseError(line, field, "box must satisfy x1<x2 and y1<y2");
  return b;
}

std::size_t parse_count(const json& v, std::size_t line, const char* field) {
  if (!v.is_number_unsigned()) throw ParseError(line, field, "expected a non-negative integer");
  return v.get<std::size_t>();
}

std::string parse_string(const json& v, std::size_t line, const char* field) {
  if (!v.is_string()) throw ParseError(line, field, "expected a string");
  return v.get<std::string>();
}

}  // namespace

std::string record_to_json_line(const SampleRecord& r) {
  json dets = json::array();
  for (const auto& d : r.detections)
    dets.push_back({{"bbox", box_json(d.bbox)}, {"category", d.category}, {"confidence", d.confidence}});
  json j = {{"video-id", r.video_id},
            {"num-frames", r.num_frames},
            {"keyframe-index", r.keyframe_index},
            {"reference", r.reference},
            {"gt-bbox", box_json(r.gt_bbox)},
            {"action-labels", r.action_labels},
            {"features-ref", r.features_ref},
            {"detections", dets}};
  return j.dump();
}

SampleRecord parse_record(const std::string& line, std::size_t n, std::size_t num_classes) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(n, "<record>", e.what());
  }
  if (!j.is_object()) throw ParseError(n, "<record>", "expected an object");

  SampleRecord r;
  r.video_id = parse_string(require(j, "video-id", n), n, "video-id");
  r.num_frames = parse_count(require(j, "num-frames", n), n, "num-frames");
  if (r.num_frames == 0) throw ParseError(n, "num-frames", "must be at least 1");
  r.keyframe_index = parse_count(require(j, "keyframe-index", n), n, "keyframe-index");
  if (r.keyframe_index >= r.num_frames) throw ParseError(n, "keyframe-index", "must be below num-frames");
  r.reference = parse_string(require(j, "reference", n), n, "reference");
  r.gt_bbox = parse_box(require(j, "gt-bbox", n), n, "gt-bbox");

  const json& labels = require(j, "action-labels", n);
  if (!labels.is_array()) throw ParseError(n, "action-labels", "expected an array");
  for (const auto& v : labels) {
    const auto c = parse_count(v, n, "action-labels");
    if (num_classes > 0 && c >= num_classes)
      throw ParseError(n, "action-labels", "class " + std::to_string(c) + " out of range");
    r.action_labels.push_back(c);
  }

  r.features_ref = parse_string(require(j, "features-ref", n), n, "features-ref");

  const json& dets = require(j, "detections", n);
  if (!dets.is_array()) throw ParseError(n, "detections", "expected an array");
  for (const auto& d : dets) {
    if (!d.is_object()) throw ParseError(n, "detections", "expected objects");
    semantics::Detection det;
    det.bbox = parse_box(require(d, "bbox", n), n, "detections.bbox");
    det.category = parse_string(require(d, "category", n), n, "detections.category");
    const json& conf = require(d, "confidence", n);
    if (!conf.is_number()) throw ParseError(n, "detections.confidence", "expected a number");
    det.confidence = conf.get<double>();
    if (!(det.confidence >= 0.0 && det.confidence <= 1.0))
      throw ParseError(n, "detections.confidence", "outside [0, 1]");
    r.detections.push_back(std::move(det));
  }
  return r;
}

std::vector<SampleRecord> read_annotations(std::istream& in, std::size_t num_classes) {
  std::vector<SampleRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_record(line, n, num_classes));
  }
  return out;
}

std::vector<SampleRecord> load_annotations(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_annotations(in, num_classes);
}

void write_annotations(std::ostream& out, const std::vector<SampleRecord>& records) {
  for (const auto& r : records) out << record_to_json_line(r) << '\n';
}

std::string meta_to_json(const DatasetMeta& m) {
  json j = {{"format", "refatom-dataset"},
            {"version", 1},
            {"num-samples", m.num_samples},
            {"frames", m.frames},
            {"grid", {m.grid_rows, m.grid_cols}},
            {"dim", m.dim},
            {"classes", m.num_classes},
            {"seed", m.seed},
            {"encoder-seed", m.encoder_seed}};
  return j.dump(2) + "\n";
}

DatasetMeta parse_meta(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "refatom-dataset") throw InputError("dataset.json: unknown format");
    if (j.at("version") != 1) throw InputError("dataset.json: unsupported version");
    DatasetMeta m;
    m.num_samples = j.at("num-samples").get<std::size_t>();
    m.frames = j.at("frames").get<std::size_t>();
    m.grid_rows = j.at("grid").at(0).get<std::size_t>();
    m.grid_cols = j.at("grid").at(1).get<std::size_t>();
    m.dim = j.at("dim").get<std::size_t>();
    m.num_classes = j.at("classes").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.encoder_seed = j.at("encoder-seed").get<std::uint64_t>();
    if (m.frames == 0 || m.cells() == 0 || m.dim == 0 || m.num_classes == 0)
      throw InputError("dataset.json: sizes must be positive");
    return m;
  } catch (const json::exception& e) {
    throw InputError(std::string("dataset.json: ") + e.what());
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.root = dir;
  std::ifstream meta_in(dir / kMetaFile);
  if (!meta_in) throw IoError("cannot open '" + (dir / kMetaFile).string() + "'");
  std::stringstream buf;
  buf << meta_in.rdbuf();
  ds.meta = parse_meta(buf.str());
  ds.records = load_annotations(dir / kAnnotationFile, ds.meta.num_classes);
  if (ds.records.size() != ds.meta.num_samples)
    throw InputError("dataset.json lists " + std::to_string(ds.meta.num_samples) + " samples but annotations hold " +
                     std::to_string(ds.records.size()));
  return ds;
}

retrieval::VisualTokenGrid load_features(const Dataset& dataset, const SampleRecord& record) {
  const auto path = dataset.root / record.features_ref;
  Tensor t;
  try {
    t = load_tensor(path);
  } catch (const IoError& e) {
    throw ResolutionError("sample '" + record.video_id + "': " + e.what());
  }
  const auto& m = dataset.meta;
  if (t.dims.size() != 3 || t.dims[0] != record.num_frames || t.dims[1] != m.cells() || t.dims[2] != m.dim)
    throw InputError("sample '" + record.video_id + "': feature tensor shape does not match [frames, cells, dim]");
  Mat tokens(static_cast<Eigen::Index>(t.dims[0] * t.dims[1]), static_cast<Eigen::Index>(t.dims[2]));
  std::copy(t.data.begin(), t.data.end(), tokens.data());
  return retrieval::VisualTokenGrid(t.dims[0], t.dims[1], std::move(tokens));
}

void write_index_files(const std::filesystem::path& dir, const DatasetMeta& meta,
                       const std::vector<SampleRecord>& records) {
  {
    std::ofstream out(dir / kMetaFile, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (dir / kMetaFile).string() + "'");
    out << meta_to_json(meta);
  }
  std::ofstream out(dir / kAnnotationFile, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + (dir / kAnnotationFile).string() + "'");
  write_annotations(out, records);
  if (!out) throw IoError("write failed for '" + (dir / kAnnotationFile).string() + "'");
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  for (const auto& r : dataset.records) {
    Tensor t;
    try {
      t = load_tensor(dataset.root / r.features_ref);
    } catch (const IoError& e) {
      throw ResolutionError("sample '" + r.video_id + "': " + e.what());
    }
    const auto target = dir / r.features_ref;
    std::filesystem::create_directories(target.parent_path());
    save_tensor(target, t);
  }
  write_index_files(dir, dataset.meta, dataset.records);
}

std::array<double, 4> cell_box(std::size_t s, std::size_t rows, std::size_t cols) {
  const double r = static_cast<double>(s / cols);
  const double c = static_cast<double>(s % cols);
  const double h = 1.0 / static_cast<double>(rows);
  const double w = 1.0 / static_cast<double>(cols);
  return {c * w, r * h, (c + 1.0) * w, (r + 1.0) * h};
}

}  // namespace refatom::harness
