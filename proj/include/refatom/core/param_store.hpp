#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "refatom/core/dense.hpp"

namespace refatom {

/// Named learnable tensors plus their gradient accumulators.
///
/// Iteration order is lexicographic by name, which makes every traversal
/// (serialization, optimizer updates, gradient checks) deterministic.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  /// Registers a parameter; throws ConfigError on a duplicate name.
  Mat& add(const std::string& name, Mat init);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  Mat& value(const std::string& name);
  const Mat& value(const std::string& name) const;
  Mat& grad(const std::string& name);
  const Mat& grad(const std::string& name) const;

  void zero_grad();
  std::vector<std::string> names() const;
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  std::uint64_t seed() const { return seed_; }

  /// Adds every gradient of `other` (same keys/shapes) into this store.
  void accumulate_grads(const ParamStore& other);

  bool operator==(const ParamStore& other) const;

 private:
  struct Entry {
    Mat value;
    Mat grad;
  };
  const Entry& entry(const std::string& name) const;
  Entry& entry(const std::string& name);

  std::map<std::string, Entry> entries_;
  std::uint64_t seed_;
};

/// uniform(-s, s) with s = 1/sqrt(fan_in).
Mat uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, std::mt19937_64& rng);

}  // namespace refatom
