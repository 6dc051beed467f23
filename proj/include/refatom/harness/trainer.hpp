#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "refatom/harness/checkpoint.hpp"
#include "refatom/harness/samples.hpp"

namespace refatom::harness {

struct StepLog {
  std::uint64_t step = 0;
  double loss = 0.0;
  double bce = 0.0;
  double mse = 0.0;
  double learning_rate = 0.0;
};

/// Raised on a non-finite loss; carries the state before the failing step.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, Checkpoint last_good)
      : std::runtime_error(what), last_good_(std::move(last_good)) {}
  const Checkpoint& last_good() const { return last_good_; }

 private:
  Checkpoint last_good_;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepLog> log;
};

/// Linear warmup over ceil(warmup_ratio * steps) steps, then the base rate
/// times lr_decay once per decay interval (one epoch by default).
double learning_rate_at(const TrainConfig& config, std::uint64_t step, std::size_t steps_per_epoch);

std::size_t steps_per_epoch(std::size_t num_samples, std::size_t batch);

/// Runs from `start.step` up to `start.config.steps`, minibatches drawn from
/// a per-epoch shuffle. Results do not depend on the thread count.
TrainResult train(Checkpoint start, std::span<const PreparedSample> samples,
                  const std::function<void(const StepLog&)>& on_step = {});

inline TrainResult train(const TrainConfig& config, std::span<const PreparedSample> samples,
                         const std::function<void(const StepLog&)>& on_step = {}) {
  return train(initial_checkpoint(config), samples, on_step);
}

/// "step,loss,bce,mse,lr" CSV.
void write_loss_log(const std::filesystem::path& path, std::span<const StepLog> log);

}  // namespace refatom::harness
