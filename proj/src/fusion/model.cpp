#include "refatom/fusion/model.hpp"

#include <random>

namespace refatom::fusion {

namespace {

using retrieval::Hierarchy;

std::string ssm_prefix(const std::string& which) { return "ssm." + which + "."; }
std::string attn_prefix(std::size_t branch, std::size_t h) {
  return std::string("attn.") + kBranchNames[branch] + "." + kHierarchyNames[h] + ".";
}
std::string head_prefix(std::size_t branch) { return std::string("head.") + kBranchNames[branch] + "."; }

void add_ssm(ParamStore& p, const std::string& which, const ModelConfig& c, std::mt19937_64& rng) {
  ssm::SsmLayerParams layer = ssm::init_ssm_layer(c.dim, c.ssm_dim, c.state_dim, rng);
  const std::string pre = ssm_prefix(which);
  p.add(pre + "in_proj", std::move(layer.in_proj));
  p.add(pre + "A", std::move(layer.A));
  p.add(pre + "B", std::move(layer.B));
  p.add(pre + "C", std::move(layer.C));
}

void add_mlp(ParamStore& p, const std::string& pre, Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
  p.add(pre + "w1", uniform_init(in, in, in, rng));
  p.add(pre + "b1", Mat::Zero(1, in));
  p.add(pre + "w2", uniform_init(in, out, in, rng));
  p.add(pre + "b2", Mat::Zero(1, out));
}

class Graph {
 public:
  Graph(const ParamStore& params, ParamStore* grads) : params_(params), grads_(grads) {}

  DVar param(const std::string& name) {
    if (grads_ != nullptr) return tape_.parameter(params_.value(name), &grads_->grad(name));
    return tape_.constant(params_.value(name));
  }
  DVar constant(Mat m) { return tape_.constant(std::move(m)); }
  ad::Tape<double>& tape() { return tape_; }

  ssm::SsmVars ssm(const std::string& which) {
    const std::string pre = ssm_prefix(which);
    return {param(pre + "in_proj"), param(pre + "A"), param(pre + "B"), param(pre + "C")};
  }

  AttentionVars attention(std::size_t branch, std::size_t h) {
    const std::string pre = attn_prefix(branch, h);
    AttentionVars v{param(pre + "w_q"), param(pre + "w_k"), param(pre + "w_v"), DVar()};
    if (params_.contains(pre + "prompts")) v.prompts = param(pre + "prompts");
    return v;
  }

  HeadVars head(std::size_t branch) {
    const std::string pre = head_prefix(branch);
    return {param(pre + "reg.w1"), param(pre + "reg.b1"), param(pre + "reg.w2"), param(pre + "reg.b2"),
            param(pre + "cls.w1"), param(pre + "cls.b1"), param(pre + "cls.w2"), param(pre + "cls.b2")};
  }

 private:
  const ParamStore& params_;
  ParamStore* grads_;
  ad::Tape<double> tape_;
};

StepResult run(const ParamStore& params, const ModelConfig& config, const ModelInput& input, const Target* target,
               ParamStore* grads) {
  config.validate();
  if (static_cast<Eigen::Index>(input.grid.dim()) != config.dim) {
    throw ConfigError("forward: grid dim " + std::to_string(input.grid.dim()) + " != model dim " +
                      std::to_string(config.dim));
  }
  Graph g(params, grads);
  StepResult result;
  ModelOutput& out = result.output;
  std::array<DVar, 3> queries;

  if (config.hierarchies[kHolistic] && input.reference.holistic.rows() > 0) {
    queries[kHolistic] = g.constant(input.reference.holistic);
    out.active[kHolistic] = true;
  }

  if (config.hierarchies[kKeyword] && input.reference.keyword_embeddings.rows() > 0) {
    const auto set = retrieval::build_trajectory_set(input.reference.keyword_embeddings, input.grid, Hierarchy::kKeyword);
    for (const auto& t : set.trajectories) out.selections.insert(out.selections.end(), t.cells.begin(), t.cells.end());
    queries[kKeyword] = ssm::aggregate_keyword(set, g.ssm("keyword"), g.tape());
    out.active[kKeyword] = true;
  }
  out.selections.push_back(static_cast<std::size_t>(-1));

  if (config.hierarchies[kScene]) {
    const auto tokens = semantics::build_scene_attribute_tokens(
        input.detections, input.category_embeddings,
        {params.value("attr.proj.w"), params.value("attr.proj.b")}, config.conf_threshold, config.max_detections);
    if (!tokens.empty()) {
      Mat q(static_cast<Eigen::Index>(tokens.size()), config.dim);
      for (std::size_t j = 0; j < tokens.size(); ++j) {
        q.row(static_cast<Eigen::Index>(j)) = tokens[j].vector.transpose();
        out.selections.push_back(tokens[j].source_detection);
      }
      const auto set = retrieval::build_trajectory_set(q, input.grid, Hierarchy::kSceneAttribute);
      for (const auto& t : set.trajectories) out.selections.insert(out.selections.end(), t.cells.begin(), t.cells.end());
      queries[kScene] = ssm::aggregate_scene(set, g.ssm("scene"), g.tape());
      out.active[kScene] = true;
    }
  }
  if (!out.active[kHolistic] && !out.active[kKeyword] && !out.active[kScene]) {
    throw ConfigError("forward: no semantic hierarchy is active for this sample");
  }

  std::array<std::optional<PredictionVars>, 2> branch_preds;
  for (std::size_t b = 0; b < 2; ++b) {
    if (!config.branches[b]) continue;
    Mat pooled = b == kTemporal ? pool_spatial(input.grid) : pool_temporal(input.grid);
    DVar enhanced = ssm::scan(g.constant(std::move(pooled)), g.ssm(kBranchNames[b]));
    std::array<AttentionVars, 3> attn;
    for (std::size_t h = 0; h < 3; ++h) {
      if (out.active[h]) attn[h] = g.attention(b, h);
    }
    DVar z = mhs_ca_branch(enhanced, queries, attn, out.active);
    PredictionVars pred = heads(z, g.head(b));
    out.branches[b] = BranchOutput{RowVec(z.value()), Prediction{RowVec(pred.bbox.value()), RowVec(pred.probs.value())}};
    branch_preds[b] = pred;
  }

  PredictionVars fused;
  if (branch_preds[kTemporal] && branch_preds[kSpatial]) {
    fused = fuse_predictions(*branch_preds[kTemporal], *branch_preds[kSpatial]);
  } else {
    fused = branch_preds[kTemporal] ? *branch_preds[kTemporal] : *branch_preds[kSpatial];
  }
  out.prediction = Prediction{RowVec(fused.bbox.value()), RowVec(fused.probs.value())};

  if (target == nullptr) return result;
  if (target->labels.size() != config.num_classes) {
    throw DimensionError("forward_loss: label vector has " + std::to_string(target->labels.size()) + " classes, model " +
                         std::to_string(config.num_classes));
  }

  DVar bce = bce_loss(target->labels, fused.probs);
  DVar mse = mse_loss(target->bbox, fused.bbox);
  result.loss.bce = bce.value()(0, 0);
  result.loss.mse = mse.value()(0, 0);
  DVar total = ad::add(bce, ad::scale(mse, config.bbox_loss_weight));
  if (config.aux_branch_losses) {
    for (const auto& pred : branch_preds) {
      if (!pred) continue;
      total = ad::add(total, ad::add(bce_loss(target->labels, pred->probs),
                                     ad::scale(mse_loss(target->bbox, pred->bbox), config.bbox_loss_weight)));
    }
  }
  result.loss.total = total.value()(0, 0);
  if (grads != nullptr) g.tape().backward(total);
  return result;
}

}  // namespace

void ModelConfig::validate() const {
  if (dim < 2 || ssm_dim < 1 || attn_dim < 1 || state_dim < 1 || num_classes < 1) {
    throw ConfigError("ModelConfig: dimensions must be positive (dim >= 2)");
  }
  if (num_prompts < 0) throw ConfigError("ModelConfig: num_prompts must be >= 0");
  if (!hierarchies[kHolistic] && !hierarchies[kKeyword] && !hierarchies[kScene]) {
    throw ConfigError("ModelConfig: at least one hierarchy must stay enabled");
  }
  if (!branches[kTemporal] && !branches[kSpatial]) throw ConfigError("ModelConfig: at least one branch must stay enabled");
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) throw ConfigError("ModelConfig: conf_threshold outside [0,1]");
}

ParamStore init_params(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  ParamStore p(seed);
  std::mt19937_64 rng(seed);
  if (c.hierarchies[kScene]) {
    Mat proj = Mat::Zero(c.dim + 4, c.dim);
    proj.topRows(c.dim).setIdentity();
    p.add("attr.proj.w", std::move(proj));
    p.add("attr.proj.b", Mat::Zero(1, c.dim));
  }
  if (c.hierarchies[kKeyword]) add_ssm(p, "keyword", c, rng);
  if (c.hierarchies[kScene]) add_ssm(p, "scene", c, rng);
  for (std::size_t b = 0; b < 2; ++b) {
    if (!c.branches[b]) continue;
    add_ssm(p, kBranchNames[b], c, rng);
    for (std::size_t h = 0; h < 3; ++h) {
      if (!c.hierarchies[h]) continue;
      const std::string pre = attn_prefix(b, h);
      const Eigen::Index dq = h == kHolistic ? c.dim : c.ssm_dim;
      p.add(pre + "w_q", uniform_init(dq, c.attn_dim, dq, rng));
      p.add(pre + "w_k", uniform_init(c.ssm_dim, c.attn_dim, c.ssm_dim, rng));
      p.add(pre + "w_v", uniform_init(c.ssm_dim, c.attn_dim, c.ssm_dim, rng));
      if (c.num_prompts > 0) p.add(pre + "prompts", uniform_init(c.num_prompts, c.attn_dim, c.attn_dim, rng));
    }
    add_mlp(p, head_prefix(b) + "reg.", c.attn_dim, 4, rng);
    add_mlp(p, head_prefix(b) + "cls.", c.attn_dim, c.num_classes, rng);
  }
  return p;
}

ModelOutput forward(const ParamStore& params, const ModelConfig& config, const ModelInput& input) {
  return run(params, config, input, nullptr, nullptr).output;
}

StepResult forward_loss(const ParamStore& params, const ModelConfig& config, const ModelInput& input,
                        const Target& target, ParamStore* grads) {
  return run(params, config, input, &target, grads);
}

namespace {

// Hidden-unit signs of both head MLPs; a probe that flips one crosses a kink.
void append_relu_pattern(const ParamStore& params, const ModelOutput& out, std::vector<std::size_t>& fingerprint) {
  for (std::size_t b = 0; b < 2; ++b) {
    if (!out.branches[b]) continue;
    for (const char* head : {"reg.", "cls."}) {
      const std::string pre = head_prefix(b) + head;
      const Mat hidden = linear(Mat(out.branches[b]->z), params.value(pre + "w1"), params.value(pre + "b1"));
      for (double h : hidden.reshaped()) fingerprint.push_back(h > 0.0 ? 1 : 0);
    }
  }
}

}  // namespace

Objective make_objective(const ModelConfig& config, std::span<const LabeledInput> samples) {
  return [config, samples](ParamStore& params, bool with_grad) {
    Evaluation eval;
    for (const auto& s : samples) {
      StepResult r = forward_loss(params, config, s.input, s.target, with_grad ? &params : nullptr);
      eval.loss += r.loss.total;
      eval.selections.insert(eval.selections.end(), r.output.selections.begin(), r.output.selections.end());
      append_relu_pattern(params, r.output, eval.selections);
    }
    const double n = static_cast<double>(samples.size());
    eval.loss /= n;
    if (with_grad) {
      for (const auto& name : params.names()) params.grad(name) /= n;
    }
    return eval;
  };
}

}  // namespace refatom::fusion
