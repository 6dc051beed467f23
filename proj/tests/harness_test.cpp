#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "refatom/harness/checkpoint.hpp"
#include "refatom/harness/config.hpp"
#include "refatom/harness/dataset.hpp"
#include "refatom/harness/evaluate.hpp"
#include "refatom/harness/fixtures.hpp"
#include "refatom/harness/samples.hpp"
#include "refatom/harness/tensor_io.hpp"
#include "refatom/harness/trainer.hpp"
#include "refatom/retrieval/retrieval.hpp"
#include "test_util.hpp"

namespace refatom::harness {
namespace {

using test::slurp;
using test::TempDir;

FixtureConfig small_fixture(std::size_t n) {
  FixtureConfig f;
  f.num_samples = n;
  f.frames = 4;
  f.grid_rows = 2;
  f.grid_cols = 2;
  f.dim = 16;
  f.num_classes = 5;
  return f;
}

TrainConfig small_train() {
  TrainConfig c;
  c.model.dim = 16;
  c.model.ssm_dim = 8;
  c.model.attn_dim = 8;
  c.model.state_dim = 4;
  c.model.num_classes = 5;
  c.model.num_prompts = 2;
  c.frames = 4;
  c.batch = 4;
  c.steps = 20;
  c.learning_rate = 1e-2;
  c.decay_interval = 10;
  c.seed = 3;
  return c;
}

TEST(TensorIo, RoundTripAndLayout) {
  Tensor t{{2, 3}, {1, 2, 3, 4, 5, -0.0}};
  std::stringstream s;
  write_tensor(s, t);
  const std::string bytes = s.str();
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 2 * 4 + 6 * 8);
  EXPECT_EQ(bytes.substr(0, 4), "RTEN");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(read_tensor(s), t);
  EXPECT_TRUE(std::signbit(t.data.back()));
}

TEST(TensorIo, RejectsBadMagicAndTruncation) {
  std::stringstream bad("XTEN0000");
  EXPECT_THROW(read_tensor(bad), IoError);
  std::stringstream s;
  write_tensor(s, Tensor{{4}, {1, 2, 3, 4}});
  std::stringstream cut(s.str().substr(0, s.str().size() - 3));
  EXPECT_THROW(read_tensor(cut), IoError);
  EXPECT_THROW(load_tensor("/nonexistent/x.rten"), IoError);
}

TEST(Annotations, RoundTrip) {
  SampleRecord r;
  r.video_id = "clip-1";
  r.keyframe_index = 3;
  r.reference = "the man in a \"red\" shirt";
  r.gt_bbox = {0.1, 0.2, 0.3, 0.4};
  r.action_labels = {0, 4};
  r.features_ref = "features/clip-1.rten";
  r.detections = {{{0.1, 0.2, 0.3, 0.4}, "person", 0.95}};
  std::stringstream s;
  write_annotations(s, {r, r});
  const auto back = read_annotations(s, 5);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], r);
}

TEST(Annotations, InvertedBoxNamesField) {
  SampleRecord r;
  r.video_id = "v";
  r.reference = "x";
  r.gt_bbox = {0.1, 0.2, 0.3, 0.4};
  std::string good = record_to_json_line(r);
  r.gt_bbox = {0.5, 0.2, 0.3, 0.4};
  std::stringstream s(good + "\n" + record_to_json_line(r) + "\n");
  try {
    read_annotations(s);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.field(), "gt-bbox");
    EXPECT_NE(std::string(e.what()).find("gt-bbox"), std::string::npos);
  }
}

TEST(Annotations, RejectsKeyframeAndLabelViolations) {
  SampleRecord r;
  r.video_id = "v";
  r.reference = "x";
  r.gt_bbox = {0.1, 0.2, 0.3, 0.4};
  r.num_frames = 4;
  r.keyframe_index = 4;
  EXPECT_THROW(parse_record(record_to_json_line(r), 1), ParseError);
  r.keyframe_index = 2;
  r.action_labels = {7};
  EXPECT_THROW(parse_record(record_to_json_line(r), 1, 5), ParseError);
  EXPECT_NO_THROW(parse_record(record_to_json_line(r), 1, 8));
  EXPECT_THROW(parse_record("{not json", 1), ParseError);
}

TEST(Fixtures, SameSeedIsByteIdentical) {
  TempDir a("fxa"), b("fxb");
  const auto cfg = small_fixture(6);
  const auto set = generate_fixtures(cfg, 11, a.path());
  generate_fixtures(cfg, 11, b.path());
  EXPECT_EQ(slurp(a / kMetaFile), slurp(b / kMetaFile));
  EXPECT_EQ(slurp(a / kAnnotationFile), slurp(b / kAnnotationFile));
  for (const auto& r : set.records) EXPECT_EQ(slurp(a / r.features_ref), slurp(b / r.features_ref)) << r.video_id;
  TempDir c("fxc");
  generate_fixtures(cfg, 12, c.path());
  EXPECT_NE(slurp(a / kAnnotationFile), slurp(c / kAnnotationFile));
}

TEST(Fixtures, LoadMatchesGenerated) {
  TempDir dir("fxload");
  const auto set = generate_fixtures(small_fixture(5), 2, dir.path());
  const Dataset ds = load_dataset(dir.path());
  EXPECT_EQ(ds.meta, set.meta);
  EXPECT_EQ(ds.records, set.records);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    EXPECT_EQ(r.keyframe_index, 2u);
    EXPECT_EQ(r.gt_bbox, cell_box(set.targets[i].cell, 2, 2));
    EXPECT_EQ(r.detections.front().category, "person");
    EXPECT_EQ(r.detections.front().bbox, r.gt_bbox);
    const auto grid = load_features(ds, r);
    EXPECT_EQ(grid.frames(), 4u);
    EXPECT_EQ(grid.cells(), 4u);
  }
}

TEST(Fixtures, SaveLoadSaveIsByteIdentical) {
  TempDir a("rta"), b("rtb");
  const auto set = generate_fixtures(small_fixture(4), 8, a.path());
  save_dataset(load_dataset(a.path()), b.path());
  EXPECT_EQ(slurp(a / kMetaFile), slurp(b / kMetaFile));
  EXPECT_EQ(slurp(a / kAnnotationFile), slurp(b / kAnnotationFile));
  for (const auto& r : set.records) EXPECT_EQ(slurp(a / r.features_ref), slurp(b / r.features_ref));
}

TEST(Fixtures, EmptySet) {
  TempDir dir("fxempty");
  const auto set = generate_fixtures(small_fixture(0), 1, dir.path());
  EXPECT_TRUE(set.records.empty());
  const Dataset ds = load_dataset(dir.path());
  EXPECT_EQ(ds.meta.num_samples, 0u);
  EXPECT_TRUE(ds.records.empty());
  EXPECT_TRUE(prepare_samples(ds).empty());
}

double keyword_hit_rate(FixtureConfig cfg, const std::string& tag) {
  TempDir dir(tag);
  cfg.num_samples = 64;
  const auto set = generate_fixtures(cfg, 7, dir.path());
  const Dataset ds = load_dataset(dir.path());
  const auto samples = prepare_samples(ds);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Mat& kw = samples[i].reference.keyword_embeddings;
    EXPECT_GT(kw.rows(), 0);
    const RowVec query = semantics::normalized_mean(kw);
    const auto& t = set.targets[i];
    const auto found = retrieval::nearest_token(query.transpose(), samples[i].grid.frame(t.frame));
    if (found.index == t.cell) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

TEST(Fixtures, KeywordRetrievalRecoversPlantedCell) {
  FixtureConfig cfg;
  cfg.object_scale = 0.0;
  EXPECT_GE(keyword_hit_rate(cfg, "fxret0"), 0.95);
}

TEST(Fixtures, KeywordRetrievalSurvivesObjectPlanting) {
  EXPECT_GE(keyword_hit_rate(FixtureConfig{}, "fxret"), 0.85);
}

TEST(Dataset, MissingFeaturesIsResolutionError) {
  TempDir dir("fxmiss");
  const auto set = generate_fixtures(small_fixture(3), 4, dir.path());
  std::filesystem::remove(dir / set.records[1].features_ref);
  const Dataset ds = load_dataset(dir.path());
  EXPECT_NO_THROW(load_features(ds, ds.records[0]));
  EXPECT_THROW(load_features(ds, ds.records[1]), ResolutionError);
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  TrainConfig c = small_train();
  c.model.hierarchies = {true, false, true};
  c.model.aux_branch_losses = true;
  EXPECT_EQ(parse_train_config(to_json(c)), c);
  EXPECT_THROW(parse_train_config(R"({"learning_rate": 1})"), ConfigError);
  EXPECT_THROW(parse_train_config(R"({"batch": 0})"), ConfigError);
  EXPECT_THROW(parse_train_config(R"({"hierarchies": {"holistic": false, "keyword": false, "scene": false}})"),
               ConfigError);
}

TEST(Schedule, WarmupThenStepDecay) {
  TrainConfig c;
  c.learning_rate = 1.0;
  c.steps = 100;
  c.warmup_ratio = 0.1;
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 0, 4), 0.1);
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 9, 4), 1.0);
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 13, 4), 1.0);
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 14, 4), 0.9);
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 18, 4), 0.81);
  c.decay_interval = 10;
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 20, 4), 0.9);
  EXPECT_EQ(steps_per_epoch(32, 8), 4u);
  EXPECT_EQ(steps_per_epoch(5, 8), 1u);
}

class Trained : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("trained");
    generate_fixtures(small_fixture(8), 5, dir_->path());
    dataset_ = new Dataset(load_dataset(dir_->path()));
    samples_ = new std::vector<PreparedSample>(prepare_samples(*dataset_));
  }
  static void TearDownTestSuite() {
    delete samples_;
    delete dataset_;
    delete dir_;
  }
  static inline TempDir* dir_ = nullptr;
  static inline Dataset* dataset_ = nullptr;
  static inline std::vector<PreparedSample>* samples_ = nullptr;
};

TEST_F(Trained, ZeroStepsEqualsInitialization) {
  TrainConfig c = small_train();
  c.steps = 0;
  const auto r = train(c, *samples_);
  EXPECT_TRUE(r.log.empty());
  EXPECT_TRUE(r.checkpoint == initial_checkpoint(c));
}

TEST_F(Trained, TwoRunsAreByteIdentical) {
  const auto a = train(small_train(), *samples_);
  const auto b = train(small_train(), *samples_);
  std::stringstream sa, sb;
  write_checkpoint(sa, a.checkpoint);
  write_checkpoint(sb, b.checkpoint);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(report_to_json(evaluate(a.checkpoint, *samples_)), report_to_json(evaluate(b.checkpoint, *samples_)));
}

TEST_F(Trained, ThreadCountDoesNotChangeResult) {
  TrainConfig c = small_train();
  c.threads = 3;
  const auto a = train(small_train(), *samples_);
  const auto b = train(c, *samples_);
  EXPECT_TRUE(a.checkpoint.params == b.checkpoint.params);
  EXPECT_EQ(report_to_json(evaluate(a.checkpoint, *samples_, 1)), report_to_json(evaluate(a.checkpoint, *samples_, 3)));
}

TEST_F(Trained, ResumeMatchesUninterrupted) {
  TrainConfig cfg = small_train();
  cfg.warmup_ratio = 0.0;
  TrainConfig half = cfg;
  half.steps = 9;
  auto mid = train(half, *samples_).checkpoint;
  std::stringstream s;
  write_checkpoint(s, mid);
  Checkpoint resumed = read_checkpoint(s);
  resumed.config.steps = cfg.steps;
  const auto full = train(cfg, *samples_);
  const auto rest = train(resumed, *samples_);
  EXPECT_TRUE(rest.checkpoint.params == full.checkpoint.params);
  ASSERT_EQ(rest.log.size(), 11u);
  EXPECT_EQ(rest.log.front().step, 9u);
  EXPECT_EQ(rest.log.front().loss, full.log[9].loss);
}

TEST_F(Trained, CheckpointRoundTripIsBitExact) {
  const auto ckpt = train(small_train(), *samples_).checkpoint;
  TempDir d("ckpt");
  save_checkpoint(d / "a.ckpt", ckpt);
  const Checkpoint back = load_checkpoint(d / "a.ckpt");
  EXPECT_TRUE(back == ckpt);
  save_checkpoint(d / "b.ckpt", back);
  EXPECT_EQ(slurp(d / "a.ckpt"), slurp(d / "b.ckpt"));
  EXPECT_EQ(slurp(d / "a.ckpt").rfind("refatom-checkpoint 1\n", 0), 0u);

  const std::string bytes = slurp(d / "a.ckpt");
  std::stringstream cut(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(read_checkpoint(cut), IoError);
}

TEST_F(Trained, LossLogHasOneRowPerStep) {
  const auto r = train(small_train(), *samples_);
  ASSERT_EQ(r.log.size(), 20u);
  TempDir d("log");
  write_loss_log(d / "loss.csv", r.log);
  std::ifstream in(d / "loss.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "step,loss,bce,mse,lr");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 20u);
}

TEST_F(Trained, NonFiniteLossAbortsWithLastGood) {
  TrainConfig half = small_train();
  half.steps = 5;
  Checkpoint ckpt = train(half, *samples_).checkpoint;
  ckpt.config.steps = 20;
  const Checkpoint good = ckpt;
  ckpt.params.value("head.temporal.reg.b2")(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    train(ckpt, *samples_);
    FAIL() << "expected TrainingAborted";
  } catch (const TrainingAborted& e) {
    EXPECT_EQ(e.last_good().step, 5u);
    EXPECT_TRUE(e.last_good().first_moment == good.first_moment);
  }
}

TEST_F(Trained, DimMismatchIsConfigError) {
  TrainConfig c = small_train();
  c.model.dim = 8;
  EXPECT_THROW(evaluate(initial_checkpoint(c), *dataset_), ConfigError);
  c = small_train();
  c.model.num_classes = 7;
  EXPECT_THROW(check_compatible(c, dataset_->meta), ConfigError);
}

TEST(Evaluate, GroundTruthScoresPerfect) {
  std::vector<metrics::EvalRecord> recs;
  for (int i = 0; i < 6; ++i) {
    metrics::EvalRecord r;
    r.sample_id = "s" + std::to_string(i);
    r.gt_bbox = {0.1 * i / 6, 0.2, 0.5, 0.9};
    r.pred_bbox = r.gt_bbox;
    r.gt_labels = {i % 2, (i + 1) % 2, i % 3 == 0 ? 1 : 0};
    r.pred_scores.assign(r.gt_labels.begin(), r.gt_labels.end());
    recs.push_back(r);
  }
  const auto rep = evaluate_records(recs);
  EXPECT_EQ(rep.miou, 1.0);
  EXPECT_EQ(rep.map, 1.0);
  EXPECT_EQ(rep.auroc, 1.0);
  EXPECT_EQ(rep.rows.size(), 6u);
}

TEST(Evaluate, EmptyDatasetIsMetricError) {
  TempDir dir("evempty");
  generate_fixtures(small_fixture(0), 1, dir.path());
  TrainConfig c = small_train();
  EXPECT_THROW(evaluate(initial_checkpoint(c), load_dataset(dir.path())), MetricError);
}

TEST(Evaluate, UntrainedAurocNearChance) {
  TempDir dir("evchance");
  generate_fixtures(small_fixture(128), 9, dir.path());
  const auto samples = prepare_samples(load_dataset(dir.path()));
  double sum = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    TrainConfig c = small_train();
    c.seed = seed;
    sum += evaluate(initial_checkpoint(c), samples).auroc;
  }
  EXPECT_NEAR(sum / 3.0, 0.5, 0.1);
}

TEST(Evaluate, ReportJsonShape) {
  std::vector<metrics::EvalRecord> recs(2);
  recs[0] = {"a", {0, 0, 0.5, 0.5}, {0, 0, 0.5, 0.5}, {1, 0}, {0.9, 0.1}};
  recs[1] = {"b", {0, 0, 0.5, 0.5}, {0.5, 0.5, 1, 1}, {0, 1}, {0.2, 0.8}};
  const auto text = report_to_json(evaluate_records(recs));
  const auto j = nlohmann::json::parse(text);
  EXPECT_DOUBLE_EQ(j["mIOU"].get<double>(), 0.5);
  EXPECT_EQ(j["samples"].size(), 2u);
  EXPECT_EQ(j["samples"][1]["id"], "b");
  EXPECT_LT(text.find("mIOU"), text.find("mAP"));
}

}  // namespace
}  // namespace refatom::harness
