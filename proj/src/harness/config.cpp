#include "refatom/harness/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace refatom::harness {

using nlohmann::json;

void TrainConfig::validate() const {
  model.validate();
  if (frames == 0 || batch == 0 || threads == 0) throw ConfigError("train config: frames, batch and threads must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train config: learning-rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train config: lr-decay must be in (0, 1]");
  if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) throw ConfigError("train config: warmup-ratio must be in [0, 1]");
  if (!(grad_clip >= 0.0)) throw ConfigError("train config: grad-clip must be >= 0");
}

std::string to_json(const TrainConfig& c) {
  const auto& m = c.model;
  json j = {
      {"dim", m.dim},
      {"ssm-dim", m.ssm_dim},
      {"attn-dim", m.attn_dim},
      {"state-dim", m.state_dim},
      {"classes", m.num_classes},
      {"prompts", m.num_prompts},
      {"hierarchies", {{"holistic", m.hierarchies[0]}, {"keyword", m.hierarchies[1]}, {"scene", m.hierarchies[2]}}},
      {"branches", {{"temporal", m.branches[0]}, {"spatial", m.branches[1]}}},
      {"conf-threshold", m.conf_threshold},
      {"max-detections", m.max_detections},
      {"bbox-loss-weight", m.bbox_loss_weight},
      {"aux-branch-losses", m.aux_branch_losses},
      {"frames", c.frames},
      {"learning-rate", c.learning_rate},
      {"lr-decay", c.lr_decay},
      {"warmup-ratio", c.warmup_ratio},
      {"batch", c.batch},
      {"steps", c.steps},
      {"seed", c.seed},
      {"decay-interval", c.decay_interval},
      {"grad-clip", c.grad_clip},
      {"threads", c.threads},
  };
  return j.dump();
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void read_count(const json& j, const char* key, Eigen::Index& out) {
  if (auto it = j.find(key); it != j.end()) {
    if (!it->is_number_integer()) throw ConfigError(std::string("train config: '") + key + "' must be an integer");
    out = it->get<Eigen::Index>();
  }
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
  static const std::set<std::string> known{
      "dim",   "ssm-dim",  "attn-dim",         "state-dim", "classes",       "prompts",      "hierarchies",
      "branches", "conf-threshold", "max-detections", "bbox-loss-weight", "aux-branch-losses", "frames",
      "learning-rate", "lr-decay", "warmup-ratio", "batch", "steps", "seed", "decay-interval", "grad-clip", "threads"};
  TrainConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("train config: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
      (void)value;
      if (!known.count(key)) throw ConfigError("train config: unknown key '" + key + "'");
    }
    auto& m = c.model;
    read_count(j, "dim", m.dim);
    read_count(j, "ssm-dim", m.ssm_dim);
    read_count(j, "attn-dim", m.attn_dim);
    read_count(j, "state-dim", m.state_dim);
    read_count(j, "classes", m.num_classes);
    read_count(j, "prompts", m.num_prompts);
    if (auto it = j.find("hierarchies"); it != j.end()) {
      read(*it, "holistic", m.hierarchies[0]);
      read(*it, "keyword", m.hierarchies[1]);
      read(*it, "scene", m.hierarchies[2]);
    }
    if (auto it = j.find("branches"); it != j.end()) {
      read(*it, "temporal", m.branches[0]);
      read(*it, "spatial", m.branches[1]);
    }
    read(j, "conf-threshold", m.conf_threshold);
    read(j, "max-detections", m.max_detections);
    read(j, "bbox-loss-weight", m.bbox_loss_weight);
    read(j, "aux-branch-losses", m.aux_branch_losses);
    read(j, "frames", c.frames);
    read(j, "learning-rate", c.learning_rate);
    read(j, "lr-decay", c.lr_decay);
    read(j, "warmup-ratio", c.warmup_ratio);
    read(j, "batch", c.batch);
    read(j, "steps", c.steps);
    read(j, "seed", c.seed);
    read(j, "decay-interval", c.decay_interval);
    read(j, "grad-clip", c.grad_clip);
    read(j, "threads", c.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_train_config(buf.str());
}

}  // namespace refatom::harness
