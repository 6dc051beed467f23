#include "refatom/harness/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <vector>

#include "refatom/harness/tensor_io.hpp"

namespace refatom::harness {

namespace {

constexpr const char* kMagic = "refatom-checkpoint";

struct DirEntry {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::uint64_t offset = 0;
};

std::string next_line(std::istream& in, const char* expect) {
  std::string line;
  if (!std::getline(in, line)) throw IoError(std::string("checkpoint: truncated header before '") + expect + "'");
  const std::string key = std::string(expect) + " ";
  if (line.rfind(key, 0) != 0) throw IoError(std::string("checkpoint: expected '") + expect + "' line");
  return line.substr(key.size());
}

bool same(const std::map<std::string, Mat>& a, const std::map<std::string, Mat>& b) {
  if (a.size() != b.size()) return false;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.rows() != ib->second.rows() || ia->second.cols() != ib->second.cols() ||
        ia->second != ib->second)
      return false;
  }
  return true;
}

}  // namespace

bool Checkpoint::operator==(const Checkpoint& o) const {
  return config == o.config && params == o.params && same(first_moment, o.first_moment) &&
         same(second_moment, o.second_moment) && step == o.step && rng_state == o.rng_state;
}

Checkpoint initial_checkpoint(const TrainConfig& config) {
  config.validate();
  Checkpoint c;
  c.config = config;
  c.params = fusion::init_params(config.model, config.seed);
  for (const auto& name : c.params.names()) {
    const Mat& v = c.params.value(name);
    c.first_moment[name] = Mat::Zero(v.rows(), v.cols());
    c.second_moment[name] = Mat::Zero(v.rows(), v.cols());
  }
  std::mt19937_64 rng(config.seed);
  std::ostringstream s;
  s << rng;
  c.rng_state = s.str();
  return c;
}

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  std::vector<std::pair<std::string, const Mat*>> tensors;
  for (const auto& name : c.params.names()) tensors.emplace_back("param/" + name, &c.params.value(name));
  for (const auto& [name, m] : c.first_moment) tensors.emplace_back("adam.m/" + name, &m);
  for (const auto& [name, m] : c.second_moment) tensors.emplace_back("adam.v/" + name, &m);

  out << kMagic << ' ' << kCheckpointVersion << '\n';
  out << "config " << to_json(c.config) << '\n';
  out << "step " << c.step << '\n';
  out << "rng " << c.rng_state << '\n';
  out << "tensors " << tensors.size() << '\n';
  std::uint64_t offset = 0;
  for (const auto& [name, m] : tensors) {
    out << name << ' ' << m->rows() << ' ' << m->cols() << ' ' << offset << '\n';
    offset += static_cast<std::uint64_t>(m->size()) * 8;
  }
  out << "payload " << offset << '\n';
  for (const auto& [name, m] : tensors) {
    (void)name;
    for (Eigen::Index i = 0; i < m->size(); ++i) put_f64(out, m->data()[i]);
  }
  if (!out) throw IoError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("checkpoint: empty file");
  {
    std::istringstream head(line);
    std::string magic;
    std::uint32_t version = 0;
    head >> magic >> version;
    if (magic != kMagic) throw IoError("checkpoint: bad magic");
    if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  c.config = parse_train_config(next_line(in, "config"));
  c.step = std::stoull(next_line(in, "step"));
  c.rng_state = next_line(in, "rng");
  const std::size_t count = std::stoull(next_line(in, "tensors"));
  std::vector<DirEntry> dir(count);
  for (auto& e : dir) {
    if (!std::getline(in, line)) throw IoError("checkpoint: truncated tensor directory");
    std::istringstream ls(line);
    if (!(ls >> e.name >> e.rows >> e.cols >> e.offset) || e.rows < 0 || e.cols < 0)
      throw IoError("checkpoint: malformed directory line '" + line + "'");
  }
  const std::uint64_t total = std::stoull(next_line(in, "payload"));
  std::uint64_t expected = 0;
  c.params = ParamStore(c.config.seed);
  for (const auto& e : dir) {
    if (e.offset != expected) throw IoError("checkpoint: tensor '" + e.name + "' has an inconsistent offset");
    Mat m(e.rows, e.cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_f64(in);
    expected += static_cast<std::uint64_t>(m.size()) * 8;
    const auto slash = e.name.find('/');
    const std::string kind = e.name.substr(0, slash);
    const std::string name = slash == std::string::npos ? std::string() : e.name.substr(slash + 1);
    if (kind == "param")
      c.params.add(name, std::move(m));
    else if (kind == "adam.m")
      c.first_moment[name] = std::move(m);
    else if (kind == "adam.v")
      c.second_moment[name] = std::move(m);
    else
      throw IoError("checkpoint: unknown tensor kind in '" + e.name + "'");
  }
  if (expected != total) throw IoError("checkpoint: payload size mismatch");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace refatom::harness
