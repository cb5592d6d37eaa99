#include <filesystem>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "tsrp/checkpoint.hpp"
#include "tsrp/error.hpp"
#include "tsrp/trainer.hpp"

using namespace tsrp;

namespace {

struct Fixture {
  PlantData data = testing_util::fixture_plant(6);
  WindowSet train = data.train_windows(24, 12, 9);
  WindowSet val = data.val_windows(24, 12, 24);
  std::shared_ptr<const Backbone> backbone = testing_util::small_backbone();

  ModelState model(std::uint64_t seed = 0) const {
    ForecasterConfig c;
    c.seed = seed;
    return ModelState::init(c, backbone);
  }
};

TrainConfig quick(std::size_t steps) {
  TrainConfig t;
  t.max_epochs = 1000;
  t.max_steps = steps;
  t.batch_size = 8;
  return t;
}

}  // namespace

TEST(MseLoss, Examples) {
  EXPECT_EQ(mse_loss(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}), 0.0);
  EXPECT_EQ(mse_loss(std::vector<double>{0, 0}, std::vector<double>{1, 3}), 5.0);
  EXPECT_THROW(mse_loss(std::vector<double>{0}, std::vector<double>{1, 3}), ShapeError);
}

TEST(Trainer, ZeroLearningRateChangesNothing) {
  Fixture f;
  ModelState s = f.model();
  const std::string h = s.trainable_hash();
  TrainConfig t = quick(3);
  t.lr = 0.0;
  train(s, f.train, nullptr, t);
  EXPECT_EQ(s.trainable_hash(), h);
}

TEST(Trainer, FrozenBackboneAndEveryModuleMoves) {
  Fixture f;
  ModelState s = f.model();
  const std::string bb = f.backbone->hash();
  std::vector<std::vector<Matrix>> before;
  for (const auto& [name, ps] : s.modules()) {
    before.emplace_back();
    for (const Parameter* p : ps) before.back().push_back(p->value);
  }
  const TrainHistory h = train(s, f.train, nullptr, quick(5));
  EXPECT_EQ(h.steps, 5u);
  EXPECT_EQ(f.backbone->hash(), bb);
  std::size_t i = 0;
  for (const auto& [name, ps] : s.modules()) {
    bool moved = false;
    for (std::size_t j = 0; j < ps.size(); ++j) moved = moved || ps[j]->value != before[i][j];
    EXPECT_TRUE(moved) << name;
    ++i;
  }
}

TEST(Trainer, SeedDeterminism) {
  Fixture f;
  ModelState a = f.model(3), b = f.model(3), c = f.model(4);
  train(a, f.train, nullptr, quick(4));
  train(b, f.train, nullptr, quick(4));
  train(c, f.train, nullptr, quick(4));
  EXPECT_EQ(a.trainable_hash(), b.trainable_hash());
  EXPECT_NE(a.trainable_hash(), c.trainable_hash());
}

TEST(Trainer, EarlyStoppingRestoresBestEpoch) {
  Fixture f;
  ModelState s = f.model();
  TrainConfig t;
  t.max_epochs = 6;
  t.patience = 1;
  t.lr = 0.05;  // large enough to overshoot
  std::vector<EpochLog> logs;
  const TrainHistory h = train(s, f.train, &f.val, t, nullptr, [&](const EpochLog& e) { logs.push_back(e); });
  ASSERT_EQ(h.val_loss.size(), logs.size());
  const double best = *std::min_element(h.val_loss.begin(), h.val_loss.end());
  EXPECT_EQ(h.val_loss[h.best_epoch], best);
  EXPECT_NEAR(loss_on(s, f.val), best, 1e-15);
  if (h.stopped_early) {
    EXPECT_LT(h.val_loss.size(), 6u);
  }
}

TEST(Trainer, RejectsBadInputs) {
  Fixture f;
  ModelState s = f.model();
  const WindowSet wrong = f.data.train_windows(48, 24, 9);
  EXPECT_THROW(train(s, wrong, nullptr, quick(1)), ConfigError);
  TrainConfig t = quick(1);
  t.batch_size = 0;
  EXPECT_THROW(train(s, f.train, nullptr, t), ConfigError);
  t = quick(1);
  t.lr = 1e300;
  train(s, f.train, nullptr, t);
  EXPECT_THROW(train(s, f.train, nullptr, t), NumericError);
}

TEST(Trainer, EvaluationLeavesParametersAlone) {
  Fixture f;
  ModelState s = f.model();
  const std::string h = s.trainable_hash();
  const WindowSet test = f.data.test_windows(24, 12, 6);
  const Evaluation ev = evaluate(s, test);
  EXPECT_EQ(s.trainable_hash(), h);
  EXPECT_EQ(ev.truth.size(), test.size() * 12);
  EXPECT_EQ(ev.metrics.n, ev.truth.size());
}

TEST(Checkpoint, ModelRoundTrip) {
  Fixture f;
  ModelState s = f.model(2);
  train(s, f.train, nullptr, quick(2));
  const auto path = std::filesystem::temp_directory_path() / "tsrp_model_rt.tsrp";
  save_model(path, s);
  ModelState back = load_model(path);
  EXPECT_EQ(back.trainable_hash(), s.trainable_hash());
  const WindowSet test = f.data.test_windows(24, 12, 30);
  EXPECT_EQ(evaluate(back, test).forecast, evaluate(s, test).forecast);

  BackboneConfig other;
  other.seed = 5;
  EXPECT_THROW(load_model(path, std::make_shared<const Backbone>(other)), FormatError);
  Checkpoint ck = model_checkpoint(s);
  ck.metadata["kind"] = "dlinear";
  EXPECT_THROW(model_from_checkpoint(ck), FormatError);
  ck = model_checkpoint(s);
  ck.arrays.erase(ck.arrays.begin());
  EXPECT_THROW(model_from_checkpoint(ck), FormatError);
  std::filesystem::remove(path);
}
