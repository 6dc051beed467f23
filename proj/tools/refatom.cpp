// refatom: fixture generation, training, evaluation and self-checks.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "refatom/harness/evaluate.hpp"
#include "refatom/harness/fixtures.hpp"
#include "refatom/harness/selfcheck.hpp"
#include "refatom/harness/tensor_io.hpp"
#include "refatom/harness/trainer.hpp"
#include "refatom/oracles/oracles.hpp"

namespace {

using namespace refatom;
using namespace refatom::harness;

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos) throw ConfigError("--grid expects RxC, got '" + text + "'");
  try {
    const auto r = std::stoul(text.substr(0, x));
    const auto c = std::stoul(text.substr(x + 1));
    return {r, c};
  } catch (const std::exception&) {
    throw ConfigError("--grid expects RxC, got '" + text + "'");
  }
}

int cmd_gen(std::size_t num, std::size_t frames, const std::string& grid, std::size_t dim, std::size_t classes,
            std::uint64_t seed, const std::string& out, const std::string& fixture_config) {
  FixtureConfig cfg;
  if (!fixture_config.empty()) {
    std::ifstream in(fixture_config);
    if (!in) throw ConfigError("cannot open '" + fixture_config + "'");
    const auto j = nlohmann::json::parse(in);
    cfg.target_noise = j.value("target-noise", cfg.target_noise);
    cfg.background_norm = j.value("background-norm", cfg.background_norm);
    cfg.position_scale = j.value("position-scale", cfg.position_scale);
    cfg.context_scale = j.value("context-scale", cfg.context_scale);
    cfg.signature_scale = j.value("signature-scale", cfg.signature_scale);
    cfg.track_strength = j.value("track-strength", cfg.track_strength);
    cfg.object_scale = j.value("object-scale", cfg.object_scale);
    cfg.encoder_seed = j.value("encoder-seed", cfg.encoder_seed);
  }
  cfg.num_samples = num;
  cfg.frames = frames;
  std::tie(cfg.grid_rows, cfg.grid_cols) = parse_grid(grid);
  cfg.dim = dim;
  cfg.num_classes = classes;
  const auto set = generate_fixtures(cfg, seed, out);
  std::cout << "wrote " << set.records.size() << " samples to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& config_path, const std::string& ckpt_out,
              const std::string& log_path, long long steps, int threads) {
  TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_train_config(config_path);
  if (steps >= 0) cfg.steps = static_cast<std::size_t>(steps);
  if (threads > 0) cfg.threads = static_cast<std::size_t>(threads);
  cfg.validate();
  const Dataset ds = load_dataset(data);
  check_compatible(cfg, ds.meta);
  const auto samples = prepare_samples(ds);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t every = std::max<std::size_t>(1, cfg.steps / 20);
  try {
    auto result = train(cfg, samples, [&](const StepLog& e) {
      if (e.step % every == 0 || e.step + 1 == cfg.steps)
        std::fprintf(stderr, "step %6llu  loss %.6f  (bce %.4f  mse %.4f)  lr %.3g\n",
                     static_cast<unsigned long long>(e.step), e.loss, e.bce, e.mse, e.learning_rate);
    });
    save_checkpoint(ckpt_out, result.checkpoint);
    if (!log_path.empty()) write_loss_log(log_path, result.log);
  } catch (const TrainingAborted& e) {
    save_checkpoint(ckpt_out, e.last_good());
    throw;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "trained " << cfg.steps << " steps in " << secs << " s, checkpoint " << ckpt_out << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data, const std::string& report_path, int threads) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Dataset ds = load_dataset(data);
  const auto report = evaluate(ckpt, ds, threads > 0 ? static_cast<std::size_t>(threads) : 1);
  if (!report_path.empty()) save_report(report_path, report);
  std::printf("mIOU %.4f  mAP %.4f  AUROC %.4f  (%zu samples)\n", report.miou, report.map, report.auroc,
              report.rows.size());
  return 0;
}

int cmd_gradcheck(const std::string& config_path, std::uint64_t seed, double tolerance) {
  const TrainConfig cfg = config_path.empty() ? grad_check_config() : load_train_config(config_path);
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = model_grad_check(cfg, seed);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& p : report.params)
    std::printf("%-36s checked %5zu  skipped %3zu  max rel %.3e\n", p.name.c_str(), p.checked, p.skipped,
                p.max_rel_err);
  if (report.aborted) std::printf("aborted: %s\n", report.abort_reason.c_str());
  std::printf("max rel err %.3e over %zu probes (%zu skipped), %.2f s: %s\n", report.max_rel_err, report.checked,
              report.skipped, secs, report.passed(tolerance) ? "PASS" : "FAIL");
  return report.passed(tolerance) ? 0 : 1;
}

int cmd_oracle(const std::string& suite, std::size_t cases, std::uint64_t seed) {
  oracles::SuiteResult r;
  double tol = 0.0;
  if (suite == "scan") {
    r = oracles::run_scan_suite(cases, seed);
    tol = 1e-10;
  } else if (suite == "linearity") {
    r = oracles::run_linearity_suite(cases, seed);
    tol = 1e-10;
  } else if (suite == "prefix") {
    r = oracles::run_prefix_suite(cases, seed);
    tol = 1e-10;
  } else if (suite == "map") {
    r = oracles::run_map_suite(cases, seed);
    tol = 1e-9;
  } else if (suite == "auroc") {
    r = oracles::run_auroc_suite(cases, seed);
    tol = 1e-9;
  } else {
    throw ConfigError("unknown suite '" + suite + "'");
  }
  const bool ok = r.max_abs_diff <= tol;
  std::printf("%s: %zu cases, max abs diff %.3e (tol %.0e), %.3f s: %s\n", r.name.c_str(), r.cases, r.max_abs_diff,
              tol, r.seconds, ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"refatom: referring atomic action pipeline at desk scale"};
  app.require_subcommand(1);
  app.set_config("--config-file", "", "read options from a TOML/INI file");

  std::size_t num = 32, frames = 8, dim = 32, classes = 10;
  std::string grid = "4x4", out, fixture_config;
  std::uint64_t seed = 7;
  auto* gen = app.add_subcommand("gen", "write a planted-signal fixture dataset");
  gen->add_option("--num", num, "number of samples");
  gen->add_option("--frames", frames, "frames per clip");
  gen->add_option("--grid", grid, "token grid RxC");
  gen->add_option("--dim", dim, "token width");
  gen->add_option("--classes", classes, "action classes");
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--fixture-config", fixture_config, "JSON with signal scales");

  std::string data, config, ckpt, log, report;
  long long steps = -1;
  int threads = 0;
  auto* tr = app.add_subcommand("train", "train on a dataset directory");
  tr->add_option("--data", data, "dataset directory")->required();
  tr->add_option("--config", config, "train config JSON");
  tr->add_option("--out-ckpt", ckpt, "checkpoint to write")->required();
  tr->add_option("--log", log, "loss curve CSV");
  tr->add_option("--steps", steps, "override step count");
  tr->add_option("--threads", threads, "worker threads");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--ckpt", ckpt, "checkpoint")->required();
  ev->add_option("--data", data, "dataset directory")->required();
  ev->add_option("--report", report, "JSON report to write");
  ev->add_option("--threads", threads, "worker threads");

  double tolerance = 1e-4;
  std::uint64_t gc_seed = 0;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the full model");
  gc->add_option("--config", config, "train config JSON (defaults to the small check config)");
  gc->add_option("--seed", gc_seed, "parameter and input seed");
  gc->add_option("--tol", tolerance, "max relative error");

  std::string suite;
  std::size_t cases = 1000;
  std::uint64_t oracle_seed = 1;
  auto* orc = app.add_subcommand("oracle", "compare fast paths against brute-force references");
  orc->add_option("--suite", suite, "scan | linearity | prefix | map | auroc")
      ->required()
      ->check(CLI::IsMember({"scan", "linearity", "prefix", "map", "auroc"}));
  orc->add_option("--cases", cases, "randomized cases");
  orc->add_option("--seed", oracle_seed, "case seed");

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return cmd_gen(num, frames, grid, dim, classes, seed, out, fixture_config);
    if (tr->parsed()) return cmd_train(data, config, ckpt, log, steps, threads);
    if (ev->parsed()) return cmd_eval(ckpt, data, report, threads);
    if (gc->parsed()) return cmd_gradcheck(config, gc_seed, tolerance);
    if (orc->parsed()) return cmd_oracle(suite, cases, oracle_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
