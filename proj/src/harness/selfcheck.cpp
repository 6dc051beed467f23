#include "refatom/harness/selfcheck.hpp"

#include <random>

#include "refatom/fusion/model.hpp"

namespace refatom::harness {

TrainConfig grad_check_config() {
  TrainConfig cfg;
  cfg.frames = 4;
  cfg.model.dim = 16;
  cfg.model.ssm_dim = 8;
  cfg.model.attn_dim = 8;
  cfg.model.state_dim = 4;
  cfg.model.num_classes = 5;
  cfg.model.num_prompts = 2;
  return cfg;
}

GradCheckReport model_grad_check(const TrainConfig& config, std::uint64_t seed) {
  const auto& m = config.model;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const std::size_t cells = 4;
  const semantics::SyntheticEncoder encoder(static_cast<std::size_t>(m.dim), seed + 1);

  Mat tokens(static_cast<Eigen::Index>(config.frames * cells), m.dim);
  for (auto& x : tokens.reshaped()) x = nd(rng);
  const retrieval::VisualTokenGrid grid(config.frames, cells, tokens);
  const auto reference =
      semantics::embed_reference("the tall woman in a red coat", semantics::default_stopwords(), encoder);
  const std::vector<semantics::Detection> detections{{{0.1, 0.1, 0.5, 0.6}, "person", 0.95},
                                                     {{0.5, 0.2, 0.9, 0.8}, "chair", 0.8}};
  const Mat categories = semantics::encode_categories(detections, encoder);
  fusion::Target target{RowVec{{0.1, 0.1, 0.5, 0.6}}, RowVec::Zero(m.num_classes)};
  target.labels(0) = 1.0;

  const fusion::LabeledInput sample{{grid, reference, detections, categories}, target};
  return grad_check(fusion::make_objective(m, std::span(&sample, 1)), fusion::init_params(m, seed));
}

}  // namespace refatom::harness
