#include "refatom/harness/samples.hpp"

namespace refatom::harness {

void check_compatible(const TrainConfig& config, const DatasetMeta& meta) {
  const auto& m = config.model;
  if (static_cast<std::size_t>(m.dim) != meta.dim)
    throw ConfigError("config dim " + std::to_string(m.dim) + " does not match dataset dim " + std::to_string(meta.dim));
  if (static_cast<std::size_t>(m.num_classes) != meta.num_classes)
    throw ConfigError("config classes " + std::to_string(m.num_classes) + " does not match dataset classes " +
                      std::to_string(meta.num_classes));
  if (config.frames != meta.frames)
    throw ConfigError("config frames " + std::to_string(config.frames) + " does not match dataset frames " +
                      std::to_string(meta.frames));
}

std::vector<PreparedSample> prepare_samples(const Dataset& dataset) {
  const semantics::SyntheticEncoder encoder(dataset.meta.dim, dataset.meta.encoder_seed);
  return prepare_samples(dataset, encoder, semantics::default_stopwords());
}

std::vector<PreparedSample> prepare_samples(const Dataset& dataset, const semantics::TextEncoder& encoder,
                                            const semantics::StopSet& stop) {
  const auto classes = dataset.meta.num_classes;
  std::vector<PreparedSample> out;
  out.reserve(dataset.records.size());
  for (const auto& r : dataset.records) {
    PreparedSample s;
    s.id = r.video_id;
    s.grid = load_features(dataset, r);
    s.reference = semantics::embed_reference(r.reference, stop, encoder);
    s.detections = r.detections;
    s.category_embeddings = semantics::encode_categories(s.detections, encoder);
    s.gt_bbox = r.gt_bbox;
    s.gt_labels.assign(classes, 0);
    for (auto c : r.action_labels) {
      if (c >= classes) throw InputError("sample '" + r.video_id + "': label out of range");
      s.gt_labels[c] = 1;
    }
    s.target.bbox = RowVec(4);
    for (int i = 0; i < 4; ++i) s.target.bbox(i) = r.gt_bbox[static_cast<std::size_t>(i)];
    s.target.labels = RowVec::Zero(static_cast<Eigen::Index>(classes));
    for (std::size_t c = 0; c < classes; ++c) s.target.labels(static_cast<Eigen::Index>(c)) = s.gt_labels[c];
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace refatom::harness
