#include "refatom/harness/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "refatom/harness/tensor_io.hpp"

namespace refatom::harness {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct SampleGrad {
  ParamStore grads;
  fusion::LossBreakdown loss;
};

void run_batch(const Checkpoint& state, std::span<const PreparedSample> samples, std::span<const std::size_t> batch,
               std::vector<SampleGrad>& slots, std::size_t threads) {
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      SampleGrad& slot = slots[k];
      slot.grads.zero_grad();
      const auto& s = samples[batch[k]];
      slot.loss =
          fusion::forward_loss(state.params, state.config.model, s.input(), s.target, &slot.grads).loss;
    }
  };
  const std::size_t n = batch.size();
  const std::size_t workers = std::min(threads, n);
  if (workers <= 1) {
    work(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers, end = n * (w + 1) / workers;
    pool.emplace_back([&, w, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::size_t steps_per_epoch(std::size_t num_samples, std::size_t batch) {
  return std::max<std::size_t>(1, (num_samples + batch - 1) / batch);
}

double learning_rate_at(const TrainConfig& c, std::uint64_t step, std::size_t per_epoch) {
  const auto warmup = static_cast<std::uint64_t>(std::ceil(c.warmup_ratio * static_cast<double>(c.steps)));
  if (step < warmup) return c.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
  const std::uint64_t interval = c.decay_interval > 0 ? c.decay_interval : per_epoch;
  const auto decays = (step - warmup) / interval;
  return c.learning_rate * std::pow(c.lr_decay, static_cast<double>(decays));
}

TrainResult train(Checkpoint state, std::span<const PreparedSample> samples,
                  const std::function<void(const StepLog&)>& on_step) {
  const TrainConfig& cfg = state.config;
  cfg.validate();
  if (samples.empty()) throw InputError("train: dataset is empty");
  for (const auto& s : samples)
    if (static_cast<Eigen::Index>(s.grid.dim()) != cfg.model.dim)
      throw ConfigError("train: sample '" + s.id + "' has dim " + std::to_string(s.grid.dim()));

  const std::size_t n = samples.size();
  const std::size_t bsize = std::min(cfg.batch, n);
  const std::size_t per_epoch = steps_per_epoch(n, bsize);
  const auto names = state.params.names();

  std::mt19937_64 rng;
  std::vector<std::size_t> order(n);
  auto begin_epoch = [&] {
    std::ostringstream s;
    s << rng;
    state.rng_state = s.str();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
  };
  {
    std::istringstream s(state.rng_state);
    s >> rng;
    if (!s) throw InputError("train: unreadable rng state");
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<SampleGrad> slots(bsize, SampleGrad{state.params, {}});
  ParamStore batch_grads = state.params;
  TrainResult result;

  for (; state.step < cfg.steps; ++state.step) {
    const std::size_t pos = static_cast<std::size_t>(state.step % per_epoch);
    if (pos == 0 && state.step > 0) begin_epoch();
    const std::size_t first = pos * bsize;
    const std::size_t last = std::min(n, first + bsize);
    const std::span<const std::size_t> batch(order.data() + first, last - first);

    run_batch(state, samples, batch, slots, cfg.threads);

    StepLog entry;
    entry.step = state.step;
    entry.learning_rate = learning_rate_at(cfg, state.step, per_epoch);
    batch_grads.zero_grad();
    for (std::size_t k = 0; k < batch.size(); ++k) {
      batch_grads.accumulate_grads(slots[k].grads);
      entry.loss += slots[k].loss.total;
      entry.bce += slots[k].loss.bce;
      entry.mse += slots[k].loss.mse;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    entry.loss *= inv;
    entry.bce *= inv;
    entry.mse *= inv;
    if (!std::isfinite(entry.loss)) {
      throw TrainingAborted("train: non-finite loss at step " + std::to_string(state.step), state);
    }

    double norm2 = 0.0;
    for (const auto& name : names) norm2 += batch_grads.grad(name).squaredNorm();
    const double norm = std::sqrt(norm2) * inv;
    const double scale = cfg.grad_clip > 0.0 && norm > cfg.grad_clip ? inv * cfg.grad_clip / norm : inv;

    const double t = static_cast<double>(state.step + 1);
    const double c1 = 1.0 - std::pow(kBeta1, t);
    const double c2 = 1.0 - std::pow(kBeta2, t);
    for (const auto& name : names) {
      const Mat g = batch_grads.grad(name) * scale;
      Mat& m = state.first_moment.at(name);
      Mat& v = state.second_moment.at(name);
      m = kBeta1 * m + (1.0 - kBeta1) * g;
      v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
      Mat& p = state.params.value(name);
      p.array() -= entry.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEps);
    }
    result.log.push_back(entry);
    if (on_step) on_step(entry);
  }
  state.params.zero_grad();
  result.checkpoint = std::move(state);
  return result;
}

void write_loss_log(const std::filesystem::path& path, std::span<const StepLog> log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "step,loss,bce,mse,lr\n";
  for (const auto& e : log) out << e.step << ',' << e.loss << ',' << e.bce << ',' << e.mse << ',' << e.learning_rate << '\n';
}

}  // namespace refatom::harness
