#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "refatom/core/ops.hpp"

namespace refatom::ad {

template <class Scalar>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
template <class Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}
  const Matrix<Scalar>& value() const;
  Tape<Scalar>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Matrix-granular reverse-mode tape.
///
/// Every node stores its forward value; the value is computed by the same
/// free functions in ops.hpp that the non-differentiable path uses, so a
/// taped forward pass is bit-identical to an untaped one. Backward closures
/// receive the node's output gradient and push contributions to parents.
template <class Scalar>
class Tape {
 public:
  using M = Matrix<Scalar>;
  using Var = ad::Var<Scalar>;
  using Backward = std::function<void(Tape&, const M& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(M value) { return push(std::move(value), false, nullptr, nullptr); }

  /// A leaf whose gradient is added into `*grad_sink` when backward() finishes.
  Var parameter(const M& value, M* grad_sink) { return push(value, true, grad_sink, nullptr); }

  /// Records an interior node. It requires a gradient iff any parent does.
  Var record(M value, std::initializer_list<Var> parents, Backward backward) {
    bool needs = false;
    for (const Var& p : parents) needs = needs || requires_grad(p);
    return push(std::move(value), needs, nullptr, needs ? std::move(backward) : nullptr);
  }
  Var record(M value, std::span<const Var> parents, Backward backward) {
    bool needs = false;
    for (const Var& p : parents) needs = needs || requires_grad(p);
    return push(std::move(value), needs, nullptr, needs ? std::move(backward) : nullptr);
  }

  const M& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  /// Adds `g` into the gradient of `v`; no-op for constants.
  template <class Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    if (g.rows() != n.value.rows() || g.cols() != n.value.cols()) {
      throw_shape_mismatch("Tape::accumulate", n.value, g);
    }
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }

  /// Reverse sweep from a 1x1 root; flushes parameter gradients into sinks.
  void backward(Var root) {
    if (value(root).size() != 1) throw DimensionError("Tape::backward: root must be scalar, got " + shape_of(value(root)));
    if (!requires_grad(root)) return;
    accumulate(root, M::Ones(1, 1));
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.sink != nullptr) *n.sink += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    M value;
    M grad;
    bool requires_grad = false;
    bool has_grad = false;
    M* sink = nullptr;
    Backward backward;
  };

  Var push(M value, bool requires_grad, M* sink, Backward backward) {
    nodes_.push_back(Node{std::move(value), M(), requires_grad, false, sink, std::move(backward)});
    return Var(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;
};

template <class Scalar>
const Matrix<Scalar>& Var<Scalar>::value() const {
  return tape_->value(*this);
}

// ---------------------------------------------------------------------------
// Differentiable ops. Forward values come from ops.hpp.

template <class Scalar>
Var<Scalar> linear(Var<Scalar> x, Var<Scalar> w, Var<Scalar> b) {
  auto& t = x.tape();
  return t.record(refatom::linear(x.value(), w.value(), b.value()), {x, w, b},
                  [x, w, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                    if (t.requires_grad(x)) t.accumulate(x, g * w.value().transpose());
                    if (t.requires_grad(w)) t.accumulate(w, x.value().transpose() * g);
                    if (t.requires_grad(b)) {
                      Matrix<Scalar> db = g.colwise().sum();
                      if (b.rows() != 1) db.transposeInPlace();
                      t.accumulate(b, db);
                    }
                  });
}

/// x W without bias.
template <class Scalar>
Var<Scalar> project(Var<Scalar> x, Var<Scalar> w) {
  auto& t = x.tape();
  return t.record(refatom::project(x.value(), w.value()), {x, w},
                  [x, w](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                    if (t.requires_grad(x)) t.accumulate(x, g * w.value().transpose());
                    if (t.requires_grad(w)) t.accumulate(w, x.value().transpose() * g);
                  });
}

/// a * b^T.
template <class Scalar>
Var<Scalar> matmul_nt(Var<Scalar> a, Var<Scalar> b) {
  if (a.cols() != b.cols()) throw_shape_mismatch("matmul_nt", a.value(), b.value());
  auto& t = a.tape();
  Matrix<Scalar> out = a.value() * b.value().transpose();
  return t.record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value());
    if (t.requires_grad(b)) t.accumulate(b, g.transpose() * a.value());
  });
}

template <class Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  if (a.cols() != b.rows()) throw_shape_mismatch("matmul", a.value(), b.value());
  auto& t = a.tape();
  Matrix<Scalar> out = a.value() * b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

template <class Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
  auto& t = a.tape();
  Matrix<Scalar> out = a.value();
  out *= s;
  return t.record(std::move(out), {a},
                  [a, s](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(a, g * s); });
}

template <class Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw_shape_mismatch("add", a.value(), b.value());
  auto& t = a.tape();
  Matrix<Scalar> out = a.value() + b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <class Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  return add(a, b);
}

template <class Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
  auto& t = a.tape();
  Matrix<Scalar> out = refatom::sigmoid(a.value());
  return t.record(out, {a}, [a, out](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g.cwiseProduct(out.cwiseProduct((Scalar(1) - out.array()).matrix())));
  });
}

template <class Scalar>
Var<Scalar> relu(Var<Scalar> a) {
  auto& t = a.tape();
  return t.record(refatom::relu(a.value()), {a}, [a](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> mask = (a.value().array() > Scalar(0)).template cast<Scalar>();
    t.accumulate(a, g.cwiseProduct(mask));
  });
}

template <class Scalar>
Var<Scalar> softmax_rows(Var<Scalar> a) {
  auto& t = a.tape();
  Matrix<Scalar> p = refatom::softmax_rows(a.value());
  return t.record(p, {a}, [a, p](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    // dL/dx = p * (g - <g, p>) per row.
    Matrix<Scalar> gp = g.cwiseProduct(p);
    Vector<Scalar> dots = gp.rowwise().sum();
    Matrix<Scalar> dx = gp - (p.array().colwise() * dots.array()).matrix();
    t.accumulate(a, dx);
  });
}

template <class Scalar>
Var<Scalar> concat_rows(Var<Scalar> a, Var<Scalar> b) {
  auto& t = a.tape();
  const Eigen::Index ra = a.rows();
  return t.record(refatom::concat_rows(a.value(), b.value()), {a, b},
                  [a, b, ra](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                    if (ra > 0) t.accumulate(a, g.topRows(ra));
                    if (g.rows() - ra > 0) t.accumulate(b, g.bottomRows(g.rows() - ra));
                  });
}

/// Stacks 1-row (or any same-width) vars vertically.
template <class Scalar>
Var<Scalar> stack_rows(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw DomainError("stack_rows: nothing to stack");
  auto& t = parts.front().tape();
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw_shape_mismatch("stack_rows", parts.front().value(), p.value());
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    offsets.push_back(r);
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var<Scalar>> ps(parts.begin(), parts.end());
  return t.record(std::move(out), std::span<const Var<Scalar>>(ps),
                  [ps, offsets](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                    for (std::size_t i = 0; i < ps.size(); ++i) {
                      t.accumulate(ps[i], g.middleRows(offsets[i], ps[i].rows()));
                    }
                  });
}

/// Mean over rows: [n x m] -> [1 x m].
template <class Scalar>
Var<Scalar> mean_rows(Var<Scalar> a) {
  auto& t = a.tape();
  const Eigen::Index n = a.rows();
  Matrix<Scalar> out = refatom::mean_rows(a.value());
  return t.record(std::move(out), {a}, [a, n](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> dx = g.replicate(n, 1) / static_cast<Scalar>(n);
    t.accumulate(a, dx);
  });
}

/// Elementwise mean of same-shape vars, summed left to right.
template <class Scalar>
Var<Scalar> mean_of(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw DomainError("mean_of: empty");
  auto& t = parts.front().tape();
  Matrix<Scalar> acc = parts.front().value();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i].rows() != acc.rows() || parts[i].cols() != acc.cols()) {
      throw_shape_mismatch("mean_of", acc, parts[i].value());
    }
    acc += parts[i].value();
  }
  const Scalar k = static_cast<Scalar>(parts.size());
  acc /= k;
  std::vector<Var<Scalar>> ps(parts.begin(), parts.end());
  return t.record(std::move(acc), std::span<const Var<Scalar>>(ps),
                  [ps, k](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                    for (const auto& p : ps) t.accumulate(p, g / k);
                  });
}

template <class Scalar>
Var<Scalar> row(Var<Scalar> a, Eigen::Index i) {
  if (i < 0 || i >= a.rows()) throw DimensionError("row: index out of range");
  auto& t = a.tape();
  Matrix<Scalar> out = a.value().row(i);
  return t.record(std::move(out), {a}, [a, i](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> dx = Matrix<Scalar>::Zero(a.rows(), a.cols());
    dx.row(i) = g;
    t.accumulate(a, dx);
  });
}

}  // namespace refatom::ad
