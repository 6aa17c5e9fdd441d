// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "casaug/evaluation.hpp"
#include "casaug/gradcheck.hpp"
#include "casaug/training.hpp"
#include "casaug/verify.hpp"
#include "fixtures.hpp"

using namespace casaug;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.encoder.dim = 8;
  cfg.encoder.max_len = 16;
  cfg.m = 4;
  cfg.n = 2;
  return cfg;
}

TrainConfig quick_train(std::size_t epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 2;
  t.learning_rate = 1e-2;
  t.seed = 3;
  t.dev_fraction = 0.0;
  return t;
}

FitOptions no_dev() {
  FitOptions o;
  o.dev = std::vector<AnnotatedSentence>{};
  return o;
}

bool same_params(const Model& a, const Model& b) {
  const auto pa = a.params.named(), pb = b.params.named();
  if (pa.size() != pb.size()) return false;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    if (pa[k].first != pb[k].first) return false;
    const auto x = pa[k].second.data(), y = pb[k].second.data();
    if (!std::equal(x.begin(), x.end(), y.begin(), y.end())) return false;
  }
  return true;
}

}  // namespace

TEST(SubjectLoss, ConstantHalfIsLn2) {
  SubjectScores s{Tensor::vector({0.5, 0.5, 0.5}), Tensor::vector({0.5, 0.5, 0.5})};
  EXPECT_NEAR(subject_loss(s, {{0, 1}}).item(), std::log(2.0), 1e-15);
}

TEST(SubjectLoss, PerfectPredictionNearZero) {
  SubjectScores s{Tensor::vector({1, 0, 0}), Tensor::vector({0, 1, 0})};
  EXPECT_LT(subject_loss(s, {{0, 1}}).item(), 1e-6);
}

TEST(ObjectLoss, EmptyHeldSetIsZero) {
  ObjectScores s{Tensor::from({2, 2}, {0.3, 0.6, 0.2, 0.1}), Tensor::from({2, 2}, {0.5, 0.5, 0.5, 0.5})};
  const auto terms = object_loss(s, {{}, {}});
  EXPECT_EQ(terms.object.item(), 0.0);
  EXPECT_GT(terms.null_object.item(), 0.0);
  EXPECT_THROW(object_loss(s, {{}}), ContractError);
}

TEST(ObjectLoss, MatchesEnumeratedOracle) {
  const std::vector<double> st = {0.7, 0.2, 0.4, 0.1, 0.6, 0.3}, en = {0.2, 0.9, 0.5, 0.3, 0.3, 0.8};
  ObjectScores s{Tensor::matrix(2, 3, st), Tensor::matrix(2, 3, en)};
  const auto terms = object_loss(s, {{{0, 1}}, {}});
  const auto bce = [](double p, double y) { return -(y * std::log(p) + (1 - y) * std::log(1 - p)); };
  const double held = 0.5 * ((bce(0.7, 1) + bce(0.2, 0) + bce(0.4, 0)) / 3 +
                             (bce(0.2, 0) + bce(0.9, 1) + bce(0.5, 0)) / 3);
  const double null = 0.5 * ((bce(0.1, 0) + bce(0.6, 0) + bce(0.3, 0)) / 3 +
                             (bce(0.3, 0) + bce(0.3, 0) + bce(0.8, 0)) / 3);
  EXPECT_NEAR(terms.object.item(), held, 1e-12);
  EXPECT_NEAR(terms.null_object.item(), null, 1e-12);
}

class LossTest : public ::testing::Test {
 protected:
  std::vector<AnnotatedSentence> corpus = casaug::testing::memo_fixture();
  RelationSchema schema = casaug::testing::memo_schema();
  Model model = Model::create(small_config(), schema, corpus, InitMode::Random, 5);
  RelationTargetIndex targets{corpus, schema.size()};
};

TEST_F(LossTest, TotalIsWeightedSumOfParts) {
  const LossWeights w{0.5, 2.0, 1.5, 0.25};
  for (const auto& s : corpus)
    for (const Span subj : gold_subjects(s)) {
      const auto out = total_loss(model, s, subj, targets, w);
      ASSERT_TRUE(out);
      const auto& b = out->breakdown;
      const double recomposed = 0.5 * b.subject_loss + 2.0 * b.object_loss + 1.5 * b.null_object_loss +
                                0.25 * b.preclass_loss;
      EXPECT_NEAR(b.total, recomposed, 1e-9);
      EXPECT_GT(b.preclass_loss, 0.0);
    }
}

TEST_F(LossTest, NoTriplesNoLoss) {
  AnnotatedSentence empty = casaug::testing::sentence("Ada Lind was born in Oslo .", {});
  EXPECT_FALSE(total_loss(model, empty, {0, 0}, targets, {}));
}

TEST_F(LossTest, SubjectBeyondSentenceRejected) {
  EXPECT_THROW(total_loss(model, corpus[3], {0, 40}, targets, {}), ContractError);
}

TEST_F(LossTest, FullLossGradientCheck) {
  std::vector<Tensor> params;
  for (const auto& [_, p] : model.params.named()) params.push_back(p);
  const auto r = grad_check_detailed([&] { return corpus_loss(model, corpus, targets, {}); }, params);
  EXPECT_LT(r.max_relative_error, 1e-4) << "worst param " << r.worst_param << " index " << r.worst_index;
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p = Tensor::from({2}, {1.0, -1.0}, true);
  NamedParams named = {{"p", p}};
  p.mutable_grad()[0] = 0.3;
  p.mutable_grad()[1] = -7.0;
  AdamOptimizer adam(0.1, 0.9, 0.999, 1e-8);
  adam.step(named);
  // bias-corrected first step is lr * g / (|g| + eps)
  EXPECT_NEAR(p[0], 1.0 - 0.1 * 0.3 / (0.3 + 1e-8), 1e-12);
  EXPECT_NEAR(p[1], -1.0 + 0.1 * 7.0 / (7.0 + 1e-8), 1e-12);
}

TEST(Adam, TwoStepOracle) {
  Tensor p = Tensor::from({1}, {0.5}, true);
  NamedParams named = {{"p", p}};
  AdamOptimizer adam(0.01, 0.9, 0.99, 1e-8);
  double m = 0, v = 0, x = 0.5;
  for (int t = 1; t <= 2; ++t) {
    const double g = 2 * x;
    p.zero_grad();
    p.mutable_grad()[0] = g;
    adam.step(named);
    m = 0.9 * m + 0.1 * g;
    v = 0.99 * v + 0.01 * g * g;
    x -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.99, t))) + 1e-8);
  }
  EXPECT_NEAR(p[0], x, 1e-15);
}

TEST(SplitDev, FloorCountAndSeeded) {
  const auto corpus = casaug::testing::memo_fixture();
  EXPECT_TRUE(split_dev(corpus, 0.1, 1).second.empty());
  const auto [train, dev] = split_dev(corpus, 0.4, 1);
  EXPECT_EQ(dev.size(), 2U);
  EXPECT_EQ(train.size(), 3U);
  EXPECT_EQ(split_dev(corpus, 0.4, 1).second, dev);
}

TEST(TrainConfig, Validation) {
  TrainConfig t;
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.beta1 = 1.0;
  EXPECT_THROW(t.validate(), ConfigError);
}

class FitTest : public ::testing::Test {
 protected:
  std::vector<AnnotatedSentence> corpus = casaug::testing::memo_fixture();
  RelationSchema schema = casaug::testing::memo_schema();
};

TEST_F(FitTest, ZeroLearningRateLeavesParameters) {
  auto t = quick_train(2);
  t.learning_rate = 0.0;
  const auto trained = fit(corpus, schema, small_config(), t, no_dev());
  const auto fresh = Model::create(small_config(), schema, corpus, InitMode::Random, t.seed);
  EXPECT_TRUE(same_params(trained.model, fresh));
}

TEST_F(FitTest, SameSeedSameRun) {
  const auto a = fit(corpus, schema, small_config(), quick_train(3), no_dev());
  const auto b = fit(corpus, schema, small_config(), quick_train(3), no_dev());
  EXPECT_TRUE(same_params(a.model, b.model));
  ASSERT_EQ(a.log.size(), 3U);
  for (std::size_t e = 0; e < 3; ++e) EXPECT_EQ(a.log[e].mean_loss.total, b.log[e].mean_loss.total);
}

TEST_F(FitTest, LossFallsOverFirstEpochs) {
  const auto r = fit(corpus, schema, small_config(), quick_train(6), no_dev());
  int rises = 0;
  for (std::size_t e = 1; e < 5; ++e) rises += r.log[e].mean_loss.total > r.log[e - 1].mean_loss.total;
  EXPECT_LE(rises, 1);
  EXPECT_LT(r.log.back().mean_loss.total, r.log.front().mean_loss.total);
}

TEST_F(FitTest, AblationMatchesZeroedEnhancementStepForStep) {
  auto disabled = small_config();
  disabled.disable_enhancement = true;
  auto zeroed = small_config();
  zeroed.enhancement_weight = 0.0;
  auto t = quick_train(3);
  auto tz = t;
  tz.weights.preclass = 0.0;
  const auto a = fit(corpus, schema, disabled, t, no_dev());
  const auto b = fit(corpus, schema, zeroed, tz, no_dev());
  const auto pa = a.model.params.named(), pb = b.model.params.named();
  for (std::size_t k = 0; k < pa.size(); ++k) {
    const auto x = pa[k].second.data(), y = pb[k].second.data();
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin(), y.end())) << pa[k].first;
  }
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(a.log[e].mean_loss.subject_loss, b.log[e].mean_loss.subject_loss);
    EXPECT_EQ(a.log[e].mean_loss.object_loss, b.log[e].mean_loss.object_loss);
  }
}

TEST_F(FitTest, DevF1ReportedWhenDevGiven) {
  FitOptions o;
  o.dev = corpus;
  const auto r = fit(corpus, schema, small_config(), quick_train(2), o);
  ASSERT_TRUE(r.log.back().dev_f1);
  EXPECT_GE(*r.log.back().dev_f1, 0.0);
}

TEST_F(FitTest, MemorizesOverlappingTriples) {
  auto t = quick_train(300);
  t.batch_size = 1;
  const auto r = fit(corpus, schema, small_config(), t, no_dev());
  const auto report = evaluate(r.model, corpus, 0.5);
  EXPECT_EQ(report.overall.metrics.f1, 1.0);
  const auto epo = extract(r.model, corpus[1].text);
  EXPECT_EQ(epo.size(), 2U);
}

TEST_F(FitTest, EmptyCorpusRejected) {
  EXPECT_THROW(fit({}, schema, small_config(), quick_train(1)), InputError);
}
