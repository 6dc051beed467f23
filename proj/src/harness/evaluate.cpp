#include "refatom/harness/evaluate.hpp"

#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "refatom/harness/tensor_io.hpp"

namespace refatom::harness {

EvalReport evaluate_records(std::span<const metrics::EvalRecord> records) {
  EvalReport r;
  r.miou = metrics::mean_iou(records);
  r.map = metrics::multilabel_map(records);
  r.auroc = metrics::auroc(records);
  for (const auto& rec : records) {
    r.rows.push_back({rec.sample_id, metrics::iou(rec.gt_bbox, rec.pred_bbox), rec.gt_bbox, rec.pred_bbox,
                      rec.gt_labels, rec.pred_scores});
  }
  return r;
}

std::vector<metrics::EvalRecord> predict(const ParamStore& params, const fusion::ModelConfig& config,
                                         std::span<const PreparedSample> samples, std::size_t threads) {
  std::vector<metrics::EvalRecord> out(samples.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& s = samples[i];
      const auto pred = fusion::forward(params, config, s.input()).prediction;
      auto& rec = out[i];
      rec.sample_id = s.id;
      rec.gt_bbox = s.gt_bbox;
      for (std::size_t k = 0; k < 4; ++k) rec.pred_bbox[k] = pred.bbox(static_cast<Eigen::Index>(k));
      rec.gt_labels = s.gt_labels;
      rec.pred_scores.assign(pred.probs.data(), pred.probs.data() + pred.probs.size());
    }
  };
  const std::size_t n = samples.size();
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    work(0, n);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        work(n * w / workers, n * (w + 1) / workers);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

EvalReport evaluate(const Checkpoint& ckpt, std::span<const PreparedSample> samples, std::size_t threads) {
  const auto records = predict(ckpt.params, ckpt.config.model, samples, threads);
  return evaluate_records(records);
}

EvalReport evaluate(const Checkpoint& ckpt, const Dataset& dataset, std::size_t threads) {
  check_compatible(ckpt.config, dataset.meta);
  const auto samples = prepare_samples(dataset);
  return evaluate(ckpt, samples, threads);
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["mIOU"] = r.miou;
  j["mAP"] = r.map;
  j["AUROC"] = r.auroc;
  j["samples"] = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json s;
    s["id"] = row.id;
    s["iou"] = row.iou;
    s["gt-bbox"] = row.gt_bbox;
    s["pred-bbox"] = row.pred_bbox;
    s["gt-labels"] = row.gt_labels;
    s["scores"] = row.scores;
    j["samples"].push_back(std::move(s));
  }
  return j.dump(2) + "\n";
}

void save_report(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << report_to_json(report);
}

}  // namespace refatom::harness
