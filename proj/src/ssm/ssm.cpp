#include "refatom/ssm/ssm.hpp"

#include "refatom/core/param_store.hpp"

namespace refatom::ssm {

SsmLayerParams init_ssm_layer(Eigen::Index input_dim, Eigen::Index inner_dim, Eigen::Index state_dim,
                              std::mt19937_64& rng) {
  SsmLayerParams p;
  p.in_proj = uniform_init(input_dim, inner_dim, input_dim, rng);
  p.A = Mat::Zero(state_dim, state_dim);
  std::uniform_real_distribution<double> diag(0.5, 0.95);
  for (Eigen::Index i = 0; i < state_dim; ++i) p.A(i, i) = diag(rng);
  p.B = uniform_init(state_dim, inner_dim, inner_dim, rng);
  p.C = uniform_init(inner_dim, state_dim, state_dim, rng);
  return p;
}

Mat aggregate_keyword(const retrieval::TrajectorySet& set, const SsmLayerParams& p) {
  Mat out(static_cast<Eigen::Index>(set.size()), p.inner_dim());
  for (std::size_t k = 0; k < set.size(); ++k) {
    const ScanOutput<double> scan = ssm_scan(set.trajectories[k].tokens, p);
    out.row(static_cast<Eigen::Index>(k)) = scan.outputs.row(scan.outputs.rows() - 1);
  }
  return out;
}

Mat aggregate_scene(const retrieval::TrajectorySet& set, const SsmLayerParams& p) {
  if (set.empty()) return Mat(0, p.inner_dim());
  Mat acc = ssm_scan(set.trajectories.front().tokens, p).outputs;
  for (std::size_t j = 1; j < set.size(); ++j) {
    const Mat next = ssm_scan(set.trajectories[j].tokens, p).outputs;
    if (next.rows() != acc.rows()) throw DimensionError("aggregate_scene: trajectories differ in length");
    acc += next;
  }
  acc /= static_cast<double>(set.size());
  return acc;
}

Mat aggregate_holistic(const Mat& branch_tokens, const SsmLayerParams& p) { return ssm_scan(branch_tokens, p).outputs; }

ad::Var<double> scan(ad::Var<double> inputs, const SsmVars& v) {
  const SsmLayerParams p{v.in_proj.value(), v.A.value(), v.B.value(), v.C.value()};
  Mat xt;
  Mat states = scan_states(inputs.value(), p, &xt);
  Mat outputs = states * p.C.transpose();
  auto& tape = inputs.tape();
  return tape.record(
      std::move(outputs), {inputs, v.in_proj, v.A, v.B, v.C},
      [inputs, v, states = std::move(states), xt = std::move(xt)](ad::Tape<double>& t, const Mat& g) {
        const Mat& A = v.A.value();
        const Mat& B = v.B.value();
        const Mat& C = v.C.value();
        const Eigen::Index L = states.rows();
        const Eigen::Index n = states.cols();
        if (t.requires_grad(v.C)) t.accumulate(v.C, g.transpose() * states);
        // Backpropagate through time: gs(l) = C^T g(l) + A^T gs(l+1).
        Mat gs = g * C;  // L x n
        for (Eigen::Index l = L - 2; l >= 0; --l) gs.row(l) += gs.row(l + 1) * A;
        if (t.requires_grad(v.A)) {
          Mat dA = Mat::Zero(n, n);
          if (L > 1) dA = gs.bottomRows(L - 1).transpose() * states.topRows(L - 1);
          t.accumulate(v.A, dA);
        }
        if (t.requires_grad(v.B)) t.accumulate(v.B, gs.transpose() * xt);
        const bool need_x = t.requires_grad(inputs);
        const bool need_w = t.requires_grad(v.in_proj);
        if (need_x || need_w) {
          const Mat dxt = gs * B;  // L x d_s
          if (need_w) t.accumulate(v.in_proj, inputs.value().transpose() * dxt);
          if (need_x) t.accumulate(inputs, dxt * v.in_proj.value().transpose());
        }
      });
}

ad::Var<double> aggregate_keyword(const retrieval::TrajectorySet& set, const SsmVars& p, ad::Tape<double>& tape) {
  if (set.empty()) throw DomainError("aggregate_keyword: empty trajectory set");
  std::vector<ad::Var<double>> finals;
  for (const auto& traj : set.trajectories) {
    ad::Var<double> out = scan(tape.constant(traj.tokens), p);
    finals.push_back(ad::row(out, out.rows() - 1));
  }
  return ad::stack_rows<double>(finals);
}

ad::Var<double> aggregate_scene(const retrieval::TrajectorySet& set, const SsmVars& p, ad::Tape<double>& tape) {
  if (set.empty()) throw DomainError("aggregate_scene: empty trajectory set");
  std::vector<ad::Var<double>> outs;
  for (const auto& traj : set.trajectories) outs.push_back(scan(tape.constant(traj.tokens), p));
  return ad::mean_of<double>(outs);
}

}  // namespace refatom::ssm
