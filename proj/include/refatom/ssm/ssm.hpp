#pragma once

#include <random>

#include "refatom/core/dense.hpp"
#include "refatom/core/tape.hpp"
#include "refatom/retrieval/retrieval.hpp"

namespace refatom::ssm {

/// One state-space scan layer with unit step size:
///   x~(l) = x(l) W_in,  h(l) = A h(l-1) + B x~(l),  y(l) = C h(l).
template <class Scalar>
struct SsmLayer {
  Matrix<Scalar> in_proj;  // d x d_s
  Matrix<Scalar> A;        // n x n
  Matrix<Scalar> B;        // n x d_s
  Matrix<Scalar> C;        // d_s x n

  Eigen::Index input_dim() const { return in_proj.rows(); }
  Eigen::Index inner_dim() const { return in_proj.cols(); }
  Eigen::Index state_dim() const { return A.rows(); }

  void validate() const {
    const Eigen::Index ds = in_proj.cols();
    const Eigen::Index n = A.rows();
    if (A.cols() != n) throw DimensionError("SsmLayer: A must be square, got " + shape_of(A));
    if (B.rows() != n || B.cols() != ds) throw DimensionError("SsmLayer: B must be n x d_s, got " + shape_of(B));
    if (C.rows() != ds || C.cols() != n) throw DimensionError("SsmLayer: C must be d_s x n, got " + shape_of(C));
  }
};

using SsmLayerParams = SsmLayer<double>;

template <class Scalar>
struct ScanOutput {
  Matrix<Scalar> outputs;       // L x d_s
  Vector<Scalar> final_state;   // n
};

/// Hidden states of the recurrence, one row per step (L x n).
template <class DX, class Scalar>
Matrix<Scalar> scan_states(const Eigen::MatrixBase<DX>& inputs, const SsmLayer<Scalar>& p,
                           Matrix<Scalar>* projected = nullptr) {
  p.validate();
  if (inputs.rows() < 1) throw DimensionError("ssm_scan: empty input sequence");
  if (inputs.cols() != p.in_proj.rows()) throw_shape_mismatch("ssm_scan(inputs, in_proj)", inputs, p.in_proj);
  // Both input-side products are hoisted out of the recurrence as GEMMs.
  Matrix<Scalar> xt = inputs * p.in_proj;
  Matrix<Scalar> drive = xt * p.B.transpose();  // L x n
  Matrix<Scalar> states(inputs.rows(), p.state_dim());
  states.row(0) = drive.row(0);
  for (Eigen::Index l = 1; l < inputs.rows(); ++l) {
    states.row(l).noalias() = states.row(l - 1) * p.A.transpose();
    states.row(l) += drive.row(l);
  }
  if (projected != nullptr) *projected = std::move(xt);
  return states;
}

template <class DX, class Scalar>
ScanOutput<Scalar> ssm_scan(const Eigen::MatrixBase<DX>& inputs, const SsmLayer<Scalar>& p) {
  Matrix<Scalar> states = scan_states(inputs, p);
  ScanOutput<Scalar> out;
  out.outputs = states * p.C.transpose();
  out.final_state = states.row(states.rows() - 1).transpose();
  return out;
}

/// Literal step-by-step reference of the same recurrence.
template <class DX, class Scalar>
ScanOutput<Scalar> ssm_scan_oracle(const Eigen::MatrixBase<DX>& inputs, const SsmLayer<Scalar>& p) {
  p.validate();
  if (inputs.rows() < 1) throw DimensionError("ssm_scan_oracle: empty input sequence");
  if (inputs.cols() != p.in_proj.rows()) throw_shape_mismatch("ssm_scan_oracle(inputs, in_proj)", inputs, p.in_proj);
  const Eigen::Index n = p.state_dim();
  const Eigen::Index ds = p.inner_dim();
  ScanOutput<Scalar> out;
  out.outputs.resize(inputs.rows(), ds);
  Vector<Scalar> h = Vector<Scalar>::Zero(n);
  for (Eigen::Index l = 0; l < inputs.rows(); ++l) {
    Vector<Scalar> xt = Vector<Scalar>::Zero(ds);
    for (Eigen::Index j = 0; j < ds; ++j) {
      for (Eigen::Index i = 0; i < inputs.cols(); ++i) xt(j) += inputs(l, i) * p.in_proj(i, j);
    }
    Vector<Scalar> next = Vector<Scalar>::Zero(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) next(r) += p.A(r, c) * h(c);
      for (Eigen::Index c = 0; c < ds; ++c) next(r) += p.B(r, c) * xt(c);
    }
    h = next;
    for (Eigen::Index r = 0; r < ds; ++r) {
      Scalar y = 0;
      for (Eigen::Index c = 0; c < n; ++c) y += p.C(r, c) * h(c);
      out.outputs(l, r) = y;
    }
  }
  out.final_state = h;
  return out;
}

/// in_proj, B, C ~ uniform(+-1/sqrt(fan_in)); A diagonal with entries in [0.5, 0.95].
SsmLayerParams init_ssm_layer(Eigen::Index input_dim, Eigen::Index inner_dim, Eigen::Index state_dim,
                              std::mt19937_64& rng);

/// Final-step readout per keyword trajectory: N_K' x d_s (0 rows if empty).
Mat aggregate_keyword(const retrieval::TrajectorySet& set, const SsmLayerParams& p);

/// Per-timestep mean of the per-trajectory scans: N_L x d_s (0 rows if empty).
Mat aggregate_scene(const retrieval::TrajectorySet& set, const SsmLayerParams& p);

/// All per-step outputs of one scan over a pooled branch sequence.
Mat aggregate_holistic(const Mat& branch_tokens, const SsmLayerParams& p);

// ---------------------------------------------------------------------------
// Differentiable counterparts (values bit-identical to the functions above).

struct SsmVars {
  ad::Var<double> in_proj, A, B, C;
};

/// Per-step outputs of a scan recorded on the tape.
ad::Var<double> scan(ad::Var<double> inputs, const SsmVars& p);

ad::Var<double> aggregate_keyword(const retrieval::TrajectorySet& set, const SsmVars& p, ad::Tape<double>& tape);
ad::Var<double> aggregate_scene(const retrieval::TrajectorySet& set, const SsmVars& p, ad::Tape<double>& tape);

}  // namespace refatom::ssm
