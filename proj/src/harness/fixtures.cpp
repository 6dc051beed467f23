#include "refatom/harness/fixtures.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <random>

#include "refatom/harness/tensor_io.hpp"

namespace refatom::harness {

namespace {

constexpr std::array<const char*, 8> kNouns{"man", "woman", "boy", "girl", "person", "child", "adult", "teenager"};
constexpr std::array<const char*, 8> kColors{"red", "blue", "green", "black", "white", "yellow", "gray", "brown"};
constexpr std::array<const char*, 8> kGarments{"shirt", "jacket", "hat", "coat", "dress", "sweater", "scarf", "cap"};
constexpr std::array<const char*, 4> kTemplates{"the %s in a %s %s", "a %s with the %s %s", "the %s wearing a %s %s",
                                                "that %s in the %s %s"};
constexpr std::array<const char*, 8> kObjects{"chair", "phone", "cup", "bag", "table", "bottle", "laptop", "book"};

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

Vec gaussian(std::mt19937_64& rng, std::size_t dim, double sigma) {
  std::normal_distribution<double> nd(0.0, sigma);
  Vec v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = nd(rng);
  return v;
}

std::size_t cell_at(const std::array<double, 4>& box, std::size_t rows, std::size_t cols) {
  auto index = [](double centre, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(centre * static_cast<double>(n)));
  };
  return index(0.5 * (box[1] + box[3]), rows) * cols + index(0.5 * (box[0] + box[2]), cols);
}

Vec unit(std::mt19937_64& rng, std::size_t dim) {
  Vec v = gaussian(rng, dim, 1.0);
  return v / v.norm();
}

std::array<double, 4> random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x1 = u(rng), x2 = u(rng), y1 = u(rng), y2 = u(rng);
  if (x1 > x2) std::swap(x1, x2);
  if (y1 > y2) std::swap(y1, y2);
  x2 = std::max(x2, std::min(1.0, x1 + 0.05));
  y2 = std::max(y2, std::min(1.0, y1 + 0.05));
  if (x1 >= x2) x1 = x2 - 0.05;
  if (y1 >= y2) y1 = y2 - 0.05;
  return {x1, y1, x2, y2};
}

}  // namespace

void FixtureConfig::validate() const {
  if (frames == 0 || grid_rows == 0 || grid_cols == 0 || dim < 2 || num_classes == 0)
    throw ConfigError("fixtures: frames, grid, classes must be positive and dim >= 2");
  if (max_labels == 0 || max_labels > num_classes) throw ConfigError("fixtures: max_labels must be in [1, classes]");
  if (target_noise < 0.0 || background_norm < 0.0) throw ConfigError("fixtures: scales must be non-negative");
  if (!(track_strength >= 0.0 && track_strength <= 1.0)) throw ConfigError("fixtures: track_strength must be in [0, 1]");
}

FixtureSet generate_fixtures(const FixtureConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "features", ec);
  if (ec) throw IoError("cannot create '" + (out_dir / "features").string() + "': " + ec.message());

  FixtureSet set;
  set.meta = DatasetMeta{cfg.num_samples, cfg.frames, cfg.grid_rows, cfg.grid_cols, cfg.dim, cfg.num_classes,
                         seed, cfg.encoder_seed};

  const std::size_t d = cfg.dim;
  const std::size_t cells = cfg.grid_rows * cfg.grid_cols;
  const semantics::SyntheticEncoder encoder(d, cfg.encoder_seed);
  const semantics::StopSet stop = semantics::default_stopwords();
  std::mt19937_64 rng(seed);

  // Shared across the set: location basis and class signatures.
  const Vec ux = unit(rng, d);
  const Vec uy = unit(rng, d);
  std::vector<Vec> signatures;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) signatures.push_back(cfg.signature_scale * unit(rng, d));
  auto location_code = [&](const std::array<double, 4>& box) -> Vec {
    return (0.5 * (box[0] + box[2]) - 0.5) * ux + (0.5 * (box[1] + box[3]) - 0.5) * uy;
  };

  const double bg_sigma = cfg.background_norm / std::sqrt(static_cast<double>(d));
  const std::size_t keyframe = cfg.frames / 2;

  for (std::size_t i = 0; i < cfg.num_samples; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "fx%llu-%05zu", static_cast<unsigned long long>(seed), i);

    char ref[128];
    const auto* tmpl = kTemplates[pick(rng, kTemplates.size())];
    std::snprintf(ref, sizeof ref, tmpl, kNouns[pick(rng, kNouns.size())], kColors[pick(rng, kColors.size())],
                  kGarments[pick(rng, kGarments.size())]);

    const std::size_t target_cell = pick(rng, cells);
    const auto gt_box = cell_box(target_cell, cfg.grid_rows, cfg.grid_cols);

    std::vector<std::size_t> classes(cfg.num_classes);
    for (std::size_t c = 0; c < classes.size(); ++c) classes[c] = c;
    std::shuffle(classes.begin(), classes.end(), rng);
    const std::size_t label_count = 1 + pick(rng, cfg.max_labels);
    std::vector<std::size_t> labels(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(label_count));
    std::sort(labels.begin(), labels.end());

    Vec shared = cfg.context_scale * location_code(gt_box);
    for (auto c : labels) shared += signatures[c];

    Mat tokens(static_cast<Eigen::Index>(cfg.frames * cells), static_cast<Eigen::Index>(d));
    for (std::size_t l = 0; l < cfg.frames; ++l) {
      for (std::size_t s = 0; s < cells; ++s) {
        const Vec pos = cfg.position_scale * location_code(cell_box(s, cfg.grid_rows, cfg.grid_cols));
        tokens.row(static_cast<Eigen::Index>(l * cells + s)) = (gaussian(rng, d, bg_sigma) + pos + shared).transpose();
      }
    }
    const auto bundle = semantics::embed_reference(ref, stop, encoder);
    const RowVec planted = semantics::normalized_mean(bundle.keyword_embeddings);
    const Vec pos = cfg.position_scale * location_code(gt_box);
    for (std::size_t l = 0; l < cfg.frames; ++l) {
      const double w = l == keyframe ? 1.0 : cfg.track_strength;
      if (w == 0.0) continue;
      auto row = tokens.row(static_cast<Eigen::Index>(l * cells + target_cell));
      const RowVec clutter = row - (pos + shared).transpose();
      row = w * planted + (1.0 - w) * clutter + (gaussian(rng, d, cfg.target_noise) + pos + shared).transpose();
    }

    SampleRecord r;
    r.video_id = id;
    r.num_frames = cfg.frames;
    r.keyframe_index = keyframe;
    r.reference = ref;
    r.gt_bbox = gt_box;
    r.action_labels = labels;
    r.features_ref = std::string("features/") + id + ".rten";
    r.detections.push_back({gt_box, "person", 0.95});
    const std::size_t distractors = 1 + pick(rng, cfg.max_distractors);
    std::uniform_real_distribution<double> conf(0.3, 0.99);
    for (std::size_t k = 0; k < distractors; ++k) {
      semantics::Detection det;
      det.bbox = random_box(rng);
      det.category = kObjects[pick(rng, kObjects.size())];
      det.confidence = conf(rng);
      r.detections.push_back(std::move(det));
    }

    if (cfg.object_scale != 0.0) {
      for (const auto& det : r.detections) {
        const RowVec code = cfg.object_scale * encoder.encode_word(det.category).transpose();
        const std::size_t cell = cell_at(det.bbox, cfg.grid_rows, cfg.grid_cols);
        for (std::size_t l = 0; l < cfg.frames; ++l) tokens.row(static_cast<Eigen::Index>(l * cells + cell)) += code;
      }
    }

    Tensor t;
    t.dims = {static_cast<std::uint32_t>(cfg.frames), static_cast<std::uint32_t>(cells),
              static_cast<std::uint32_t>(d)};
    t.data.assign(tokens.data(), tokens.data() + tokens.size());
    save_tensor(out_dir / r.features_ref, t);

    set.records.push_back(std::move(r));
    set.targets.push_back({keyframe, target_cell});
  }

  write_index_files(out_dir, set.meta, set.records);
  return set;
}

}  // namespace refatom::harness
