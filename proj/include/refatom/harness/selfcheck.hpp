#pragma once

#include <cstdint>

#include "refatom/core/grad_check.hpp"
#include "refatom/harness/config.hpp"

namespace refatom::harness {

/// T=4, S=4, d=16, d_s=8, d_a=8, n=4, N_c=5, N_p=2.
TrainConfig grad_check_config();

/// Central-difference check of every model parameter on one random clip
/// (2x2 grid) with a reference sentence and two detections.
GradCheckReport model_grad_check(const TrainConfig& config, std::uint64_t seed);

}  // namespace refatom::harness
