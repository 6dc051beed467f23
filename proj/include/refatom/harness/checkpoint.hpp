#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "refatom/core/param_store.hpp"
#include "refatom/harness/config.hpp"

namespace refatom::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Text header (version, config, rng, step, tensor directory with shape and
/// byte offset) followed by the little-endian float64 payloads.
struct Checkpoint {
  TrainConfig config;
  ParamStore params;
  std::map<std::string, Mat> first_moment;
  std::map<std::string, Mat> second_moment;
  std::uint64_t step = 0;
  std::string rng_state;  // engine state at the start of the current epoch

  bool operator==(const Checkpoint&) const;
};

/// Fresh parameters and zeroed optimizer moments for `config`.
Checkpoint initial_checkpoint(const TrainConfig& config);

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace refatom::harness
