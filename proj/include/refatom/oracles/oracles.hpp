#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "refatom/metrics/metrics.hpp"

// Brute-force references kept apart from the production code paths they
// check. Nothing in the main library depends on this target.
namespace refatom::oracles {

/// mAP by direct enumeration: the rank of sample i is 1 + the number of
/// samples scored higher, or equal with a smaller index.
double map_by_enumeration(std::span<const metrics::EvalRecord> records);

/// Macro AUROC by counting every (positive, negative) pair.
double auroc_by_pairs(std::span<const metrics::EvalRecord> records);

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  double max_abs_diff = 0.0;
  double seconds = 0.0;
};

/// ssm_scan vs ssm_scan_oracle on random (N_L <= 32, d <= 8, n <= 8) cases.
SuiteResult run_scan_suite(std::size_t cases, std::uint64_t seed);
/// scan(a x + b y) against a scan(x) + b scan(y).
SuiteResult run_linearity_suite(std::size_t cases, std::uint64_t seed);
/// Scanning a prefix reproduces the leading rows of the full scan.
SuiteResult run_prefix_suite(std::size_t cases, std::uint64_t seed);
/// multilabel_map / auroc vs enumeration on random <= 6 x <= 3 instances.
SuiteResult run_map_suite(std::size_t cases, std::uint64_t seed);
SuiteResult run_auroc_suite(std::size_t cases, std::uint64_t seed);

}  // namespace refatom::oracles
