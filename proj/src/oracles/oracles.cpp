#include "refatom/oracles/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "refatom/ssm/ssm.hpp"

namespace refatom::oracles {

namespace {

bool any_positive(std::span<const metrics::EvalRecord> records, std::size_t c) {
  return std::any_of(records.begin(), records.end(), [c](const auto& r) { return r.gt_labels[c] != 0; });
}

bool any_negative(std::span<const metrics::EvalRecord> records, std::size_t c) {
  return std::any_of(records.begin(), records.end(), [c](const auto& r) { return r.gt_labels[c] == 0; });
}

std::vector<metrics::EvalRecord> random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> samples(1, 6);
  std::uniform_int_distribution<int> classes(1, 3);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution coarse(0.5);
  std::uniform_int_distribution<int> level(0, 3);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const int n = samples(rng);
  const int c = classes(rng);
  const bool tied = coarse(rng);  // coarse scores force ties
  std::vector<metrics::EvalRecord> out(static_cast<std::size_t>(n));
  for (auto& r : out) {
    for (int k = 0; k < c; ++k) {
      r.gt_labels.push_back(coin(rng) ? 1 : 0);
      r.pred_scores.push_back(tied ? 0.25 * level(rng) : uniform(rng));
    }
  }
  return out;
}

template <class Fn>
double elapsed(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

double map_by_enumeration(std::span<const metrics::EvalRecord> records) {
  if (records.empty()) throw MetricError("map_by_enumeration: no records");
  const std::size_t nc = records.front().gt_labels.size();
  const std::size_t n = records.size();
  double total = 0.0;
  std::size_t valid = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    if (!any_positive(records, c)) continue;
    auto rank_of = [&](std::size_t i) {
      std::size_t r = 1;
      for (std::size_t j = 0; j < n; ++j) {
        const double sj = records[j].pred_scores[c];
        const double si = records[i].pred_scores[c];
        if (sj > si || (sj == si && j < i)) ++r;
      }
      return r;
    };
    double ap = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (records[i].gt_labels[c] == 0) continue;
      const std::size_t ri = rank_of(i);
      std::size_t hits = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (records[j].gt_labels[c] != 0 && rank_of(j) <= ri) ++hits;
      }
      ap += static_cast<double>(hits) / static_cast<double>(ri);
      ++positives;
    }
    total += ap / static_cast<double>(positives);
    ++valid;
  }
  if (valid == 0) throw MetricError("map_by_enumeration: no positives");
  return total / static_cast<double>(valid);
}

double auroc_by_pairs(std::span<const metrics::EvalRecord> records) {
  if (records.empty()) throw MetricError("auroc_by_pairs: no records");
  const std::size_t nc = records.front().gt_labels.size();
  double total = 0.0;
  std::size_t valid = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    if (!any_positive(records, c) || !any_negative(records, c)) continue;
    double concordant = 0.0;
    double pairs = 0.0;
    for (const auto& p : records) {
      if (p.gt_labels[c] == 0) continue;
      for (const auto& q : records) {
        if (q.gt_labels[c] != 0) continue;
        pairs += 1.0;
        if (p.pred_scores[c] > q.pred_scores[c]) {
          concordant += 1.0;
        } else if (p.pred_scores[c] == q.pred_scores[c]) {
          concordant += 0.5;
        }
      }
    }
    total += concordant / pairs;
    ++valid;
  }
  if (valid == 0) throw MetricError("auroc_by_pairs: no class with both labels");
  return total / static_cast<double>(valid);
}

namespace {

struct ScanCaseGen {
  std::mt19937_64 rng;
  std::uniform_int_distribution<int> len{1, 32};
  std::uniform_int_distribution<int> width{1, 8};
  std::uniform_real_distribution<double> u{-1.0, 1.0};

  explicit ScanCaseGen(std::uint64_t seed) : rng(seed) {}

  Mat random(Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
  }
  ssm::SsmLayerParams layer() {
    const int d = width(rng);
    const int ds = width(rng);
    const int n = width(rng);
    return {random(d, ds), random(n, n) * (0.9 / n), random(n, ds), random(ds, n)};
  }
};

template <class A, class B>
double max_abs(const A& a, const B& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

SuiteResult run_scan_suite(std::size_t cases, std::uint64_t seed) {
  SuiteResult res{"scan", cases, 0.0, 0.0};
  ScanCaseGen gen(seed);
  res.seconds = elapsed([&] {
    for (std::size_t k = 0; k < cases; ++k) {
      const auto p = gen.layer();
      const Mat x = gen.random(gen.len(gen.rng), p.input_dim());
      const auto fast = ssm::ssm_scan(x, p);
      const auto slow = ssm::ssm_scan_oracle(x, p);
      res.max_abs_diff = std::max(res.max_abs_diff, max_abs(fast.outputs, slow.outputs));
      res.max_abs_diff = std::max(res.max_abs_diff, max_abs(fast.final_state, slow.final_state));
    }
  });
  return res;
}

SuiteResult run_linearity_suite(std::size_t cases, std::uint64_t seed) {
  SuiteResult res{"scan-linearity", cases, 0.0, 0.0};
  ScanCaseGen gen(seed);
  res.seconds = elapsed([&] {
    for (std::size_t k = 0; k < cases; ++k) {
      const auto p = gen.layer();
      const Eigen::Index L = gen.len(gen.rng);
      const Mat x = gen.random(L, p.input_dim());
      const Mat y = gen.random(L, p.input_dim());
      const double a = 2.0 * gen.u(gen.rng);
      const double b = 2.0 * gen.u(gen.rng);
      const Mat lhs = ssm::ssm_scan(Mat(a * x + b * y), p).outputs;
      const Mat rhs = a * ssm::ssm_scan(x, p).outputs + b * ssm::ssm_scan(y, p).outputs;
      res.max_abs_diff = std::max(res.max_abs_diff, max_abs(lhs, rhs));
    }
  });
  return res;
}

SuiteResult run_prefix_suite(std::size_t cases, std::uint64_t seed) {
  SuiteResult res{"scan-prefix", cases, 0.0, 0.0};
  ScanCaseGen gen(seed);
  res.seconds = elapsed([&] {
    for (std::size_t k = 0; k < cases; ++k) {
      const auto p = gen.layer();
      const Eigen::Index L = gen.len(gen.rng);
      const Eigen::Index m = std::uniform_int_distribution<Eigen::Index>(1, L)(gen.rng);
      const Mat x = gen.random(L, p.input_dim());
      const Mat full = ssm::ssm_scan(x, p).outputs;
      const Mat head = ssm::ssm_scan(Mat(x.topRows(m)), p).outputs;
      res.max_abs_diff = std::max(res.max_abs_diff, max_abs(full.topRows(m), head));
    }
  });
  return res;
}

namespace {

template <class Fast, class Slow>
SuiteResult run_metric_suite(const char* name, std::size_t cases, std::uint64_t seed, Fast fast, Slow slow,
                             bool need_negative) {
  SuiteResult res{name, 0, 0.0, 0.0};
  std::mt19937_64 rng(seed);
  res.seconds = elapsed([&] {
    while (res.cases < cases) {
      const auto inst = random_instance(rng);
      bool ok = false;
      for (std::size_t c = 0; c < inst.front().gt_labels.size(); ++c) {
        ok = ok || (any_positive(inst, c) && (!need_negative || any_negative(inst, c)));
      }
      if (!ok) continue;  // metric undefined for this draw
      res.max_abs_diff = std::max(res.max_abs_diff, std::abs(fast(inst) - slow(inst)));
      ++res.cases;
    }
  });
  return res;
}

}  // namespace

SuiteResult run_map_suite(std::size_t cases, std::uint64_t seed) {
  return run_metric_suite(
      "map", cases, seed, [](const auto& r) { return metrics::multilabel_map(r); },
      [](const auto& r) { return map_by_enumeration(r); }, false);
}

SuiteResult run_auroc_suite(std::size_t cases, std::uint64_t seed) {
  return run_metric_suite(
      "auroc", cases, seed, [](const auto& r) { return metrics::auroc(r); },
      [](const auto& r) { return auroc_by_pairs(r); }, true);
}

}  // namespace refatom::oracles
