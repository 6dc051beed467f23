#include "refatom/core/param_store.hpp"

#include <cmath>

namespace refatom {

Mat& ParamStore::add(const std::string& name, Mat init) {
  if (contains(name)) throw ConfigError("ParamStore: duplicate parameter '" + name + "'");
  Mat zeros = Mat::Zero(init.rows(), init.cols());
  auto [it, _] = entries_.emplace(name, Entry{std::move(init), std::move(zeros)});
  return it->second.value;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  return const_cast<Entry&>(static_cast<const ParamStore&>(*this).entry(name));
}

Mat& ParamStore::value(const std::string& name) { return entry(name).value; }
const Mat& ParamStore::value(const std::string& name) const { return entry(name).value; }
Mat& ParamStore::grad(const std::string& name) { return entry(name).grad; }
const Mat& ParamStore::grad(const std::string& name) const { return entry(name).grad; }

void ParamStore::zero_grad() {
  for (auto& [_, e] : entries_) e.grad.setZero();
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

void ParamStore::accumulate_grads(const ParamStore& other) {
  for (auto& [name, e] : entries_) {
    const Mat& g = other.grad(name);
    if (g.rows() != e.grad.rows() || g.cols() != e.grad.cols()) {
      throw_shape_mismatch("ParamStore::accumulate_grads", e.grad, g);
    }
    e.grad += g;
  }
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first) return false;
    if (a->second.value.rows() != b->second.value.rows() ||
        a->second.value.cols() != b->second.value.cols())
      return false;
    if (a->second.value != b->second.value) return false;
  }
  return true;
}

Mat uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-s, s);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace refatom
