#include "adaptrack/embedder.hpp"
#include "adaptrack/synth.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "test_support.hpp"

using namespace adaptrack;
using adaptrack::testing::throws_error;
using adaptrack::testing::vec;

namespace {

Vector random_vector(std::mt19937_64& rng, int dim, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = g(rng);
  return v;
}

// Central-difference gradient of a scalar function of one embedding.
template <typename Fn>
Vector numeric_gradient(Fn&& f, Vector x, double eps = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x(i);
    x(i) = orig + eps;
    const double up = f(x);
    x(i) = orig - eps;
    const double down = f(x);
    x(i) = orig;
    g(i) = (up - down) / (2 * eps);
  }
  return g;
}

// Plain loop forward pass used as an independent reference.
Vector reference_forward(const EmbeddingModel& m, const Vector& x) {
  std::vector<double> a(x.data(), x.data() + x.size());
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const Matrix& w = m.weights()[l];
    std::vector<double> z(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double s = m.biases()[l](r);
      for (Eigen::Index c = 0; c < w.cols(); ++c) s += w(r, c) * a[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = (l + 1 < m.num_layers()) ? std::max(0.0, s) : s;
    }
    a = z;
  }
  return Eigen::Map<Vector>(a.data(), static_cast<Eigen::Index>(a.size()));
}

}  // namespace

TEST(Forward, ZeroModelGivesZero) {
  const EmbeddingModel m({4, 6, 3});
  EXPECT_TRUE(m.forward(vec({1, -2, 3, 4})).isZero(0.0));
}

TEST(Forward, IdentityLayer) {
  EmbeddingModel m({3, 3});
  m.weights()[0] = Matrix::Identity(3, 3);
  const Vector x = vec({1.5, -2, 7});
  EXPECT_EQ(m.forward(x), x);
}

TEST(Forward, MatchesLoopReference) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = EmbeddingModel::random({7, 9, 5, 4}, 100 + trial);
    const Vector x = random_vector(rng, 7);
    EXPECT_TRUE(m.forward(x).isApprox(reference_forward(m, x), 1e-13));
  }
}

TEST(Forward, RejectsWrongInputSize) {
  const EmbeddingModel m({3, 2});
  EXPECT_TRUE(throws_error([&] { m.forward(vec({1, 2})); }, ErrorKind::dimension_mismatch));
}

TEST(ContrastiveLoss, HandValues) {
  const LossConfig cfg;
  auto r = contrastive_loss(vec({1, 2}), vec({1, 2}), true, cfg);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_TRUE(r.grad_a.isZero(0.0));
  EXPECT_EQ(contrastive_loss(vec({0}), vec({2}), false, cfg).loss, 0.0);
  r = contrastive_loss(vec({0}), vec({0.5}), false, cfg);
  EXPECT_DOUBLE_EQ(r.loss, 0.375);
  EXPECT_DOUBLE_EQ(r.grad_a(0), 0.5);
  EXPECT_DOUBLE_EQ(r.grad_b(0), -0.5);
}

TEST(TripletLoss, HandValues) {
  const LossConfig cfg;
  // anchor == positive, negative at squared distance alpha + 1
  auto r = triplet_loss(vec({0, 0}), vec({0, 0}), vec({std::sqrt(2.0), 0}), cfg);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_TRUE(r.grad_anchor.isZero(0.0));
  r = triplet_loss(vec({0}), vec({2}), vec({1}), cfg);
  EXPECT_DOUBLE_EQ(r.loss, 2.0);
}

TEST(SymTripletLoss, HandValues) {
  const LossConfig cfg;
  EXPECT_EQ(symtriplet_loss(vec({0, 0}), vec({0, 0}), vec({1, 0}), cfg).loss, 0.0);
  const auto r = symtriplet_loss(vec({0, 0}), vec({2, 0}), vec({1, 0}), cfg);
  EXPECT_DOUBLE_EQ(r.loss, 4.0);
}

TEST(Losses, EmbeddingGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  LossConfig cfg;
  cfg.alpha = 50.0;  // keeps random samples active
  cfg.tau = 100.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Vector a = random_vector(rng, 5), b = random_vector(rng, 5), c = random_vector(rng, 5);
    for (bool positive : {true, false}) {
      const auto r = contrastive_loss(a, b, positive, cfg);
      const Vector ga = numeric_gradient([&](const Vector& x) { return contrastive_loss(x, b, positive, cfg).loss; }, a);
      const Vector gb = numeric_gradient([&](const Vector& x) { return contrastive_loss(a, x, positive, cfg).loss; }, b);
      EXPECT_TRUE(r.grad_a.isApprox(ga, 1e-6));
      EXPECT_TRUE(r.grad_b.isApprox(gb, 1e-6));
    }
    for (auto fn : {&triplet_loss, &symtriplet_loss}) {
      const auto r = fn(a, b, c, cfg);
      ASSERT_GT(r.loss, 0.0);
      EXPECT_TRUE(r.grad_anchor.isApprox(numeric_gradient([&](const Vector& x) { return fn(x, b, c, cfg).loss; }, a), 1e-6));
      EXPECT_TRUE(r.grad_positive.isApprox(numeric_gradient([&](const Vector& x) { return fn(a, x, c, cfg).loss; }, b), 1e-6));
      EXPECT_TRUE(r.grad_negative.isApprox(numeric_gradient([&](const Vector& x) { return fn(a, b, x, cfg).loss; }, c), 1e-6));
    }
  }
}

TEST(SymTripletLoss, GradientsSumToZero) {
  std::mt19937_64 rng(6);
  LossConfig cfg;
  cfg.alpha = 50.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = symtriplet_loss(random_vector(rng, 4), random_vector(rng, 4), random_vector(rng, 4), cfg);
    EXPECT_LE((r.grad_anchor + r.grad_positive + r.grad_negative).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(LossKind, Names) {
  EXPECT_EQ(parse_loss_kind("symtriplet"), LossKind::symtriplet);
  EXPECT_STREQ(to_string(LossKind::contrastive), "contrastive");
  EXPECT_THROW(parse_loss_kind("hinge"), Error);
}

TEST(GradCheck, SymTripletActiveSample) {
  std::mt19937_64 rng(7);
  const auto m = EmbeddingModel::random({6, 8, 5}, 1);
  LossConfig cfg;
  cfg.alpha = 20.0;
  const GradCheckSample s{random_vector(rng, 6), random_vector(rng, 6), random_vector(rng, 6), true};
  const auto rep = grad_check(m, s, cfg, 1e-5, 1e-4);
  EXPECT_TRUE(rep.active);
  EXPECT_FALSE(rep.rejected_at_hinge);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
}

TEST(GradCheck, InactiveSampleHasZeroGradients) {
  std::mt19937_64 rng(8);
  const auto m = EmbeddingModel::random({4, 4}, 2);
  const Vector x = random_vector(rng, 4);
  LossConfig cfg;
  cfg.kind = LossKind::triplet;
  const GradCheckSample s{x, x, x + Vector::Constant(4, 100.0), true};
  const auto rep = grad_check(m, s, cfg, 1e-5, 1e-4);
  EXPECT_FALSE(rep.active);
  EXPECT_EQ(rep.loss, 0.0);
  EXPECT_LE(rep.max_abs_error, 1e-12);
}

TEST(GradCheck, ContrastivePositiveIsTight) {
  std::mt19937_64 rng(9);
  LossConfig cfg;
  cfg.kind = LossKind::contrastive;
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = EmbeddingModel::random({5, 6, 6, 3}, 10 + trial);
    const GradCheckSample s{random_vector(rng, 5), random_vector(rng, 5), Vector(), true};
    // piecewise quadratic in the parameters: central differences are exact
    // away from rectifier kinks, so a wider step only reduces round-off
    const auto rep = grad_check(m, s, cfg, 1e-4, 1e-6);
    if (rep.rejected_at_hinge) continue;
    EXPECT_TRUE(rep.passed) << rep.max_rel_error << " abs " << rep.max_abs_error;
  }
}

TEST(GradCheck, RandomSummaryPassesAndTinyToleranceFails) {
  for (LossKind k : {LossKind::contrastive, LossKind::triplet, LossKind::symtriplet}) {
    const auto ok = grad_check_random(k, 10, 3, 42, 1e-5, 1e-4);
    EXPECT_TRUE(ok.passed) << to_string(k) << " " << ok.max_rel_error;
    EXPECT_EQ(ok.samples, 10u);
    EXPECT_FALSE(grad_check_random(k, 10, 3, 42, 1e-5, 1e-12).passed);
  }
}

TEST(Train, InactiveDataLeavesParametersUnchanged) {
  const auto m = EmbeddingModel::random({3, 4, 2}, 4);
  TrainingData data;
  data.inputs = {vec({1, 0, 0}), vec({1, 0, 0}), vec({500, -500, 500})};
  data.triplets = {{0, 1, 2}};
  LossConfig loss;
  ASSERT_EQ(triplet_loss(m.forward(data.inputs[0]), m.forward(data.inputs[1]), m.forward(data.inputs[2]), loss).loss, 0.0);
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  cfg.epochs = 25;
  cfg.learning_rate = 0.1;
  const auto r = train(m, data, loss, cfg);
  EXPECT_TRUE(r.model == m);
  EXPECT_EQ(r.epoch_loss.size(), 25u);
}

TEST(Train, SingleStepIsPlainGradientDescent) {
  std::mt19937_64 rng(10);
  const auto m = EmbeddingModel::random({4, 5, 3}, 11);
  TrainingData data;
  data.inputs = {random_vector(rng, 4), random_vector(rng, 4), random_vector(rng, 4)};
  data.triplets = {{0, 1, 2}};
  LossConfig loss;
  loss.alpha = 20.0;
  TrainConfig cfg;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 1;
  const auto r = train(m, data, loss, cfg);

  // expected step from a finite-difference gradient of the sample loss
  EmbeddingModel probe = m;
  auto sample_loss = [&](const EmbeddingModel& model) {
    return symtriplet_loss(model.forward(data.inputs[0]), model.forward(data.inputs[1]), model.forward(data.inputs[2]),
                           loss)
        .loss;
  };
  const double eps = 1e-6;
  for (std::size_t p = 0; p < m.parameter_count(); ++p) {
    const double orig = probe.parameter(p);
    probe.parameter(p) = orig + eps;
    const double up = sample_loss(probe);
    probe.parameter(p) = orig - eps;
    const double down = sample_loss(probe);
    probe.parameter(p) = orig;
    const double expected = orig - cfg.learning_rate * (up - down) / (2 * eps);
    EXPECT_NEAR(r.model.parameter(p), expected, 1e-9);
  }
}

TEST(Train, LossDecreasesOnTwoIdentities) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    TrainingData data;
    const Vector c1 = random_vector(rng, 8), c2 = c1 + random_vector(rng, 8, 0.3);
    for (int i = 0; i < 10; ++i) data.inputs.push_back(c1 + random_vector(rng, 8, 0.3));
    for (int i = 0; i < 10; ++i) data.inputs.push_back(c2 + random_vector(rng, 8, 0.3));
    for (std::size_t k = 0; k < 10; ++k) {
      for (std::size_t l = 0; l < 10; ++l) {
        if (k == l) continue;
        data.triplets.push_back({k, l, 10 + (k + l) % 10});
        data.triplets.push_back({10 + k, 10 + l, (k + l) % 10});
      }
    }
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 20;
    cfg.batch_size = 32;
    cfg.seed = seed;
    const auto r = train(EmbeddingModel::random({8, 16, 8}, seed), data, LossConfig{}, cfg);
    EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front()) << "seed " << seed;
  }
}

TEST(Train, DeterministicTrace) {
  ScenarioConfig sc;
  sc.n_shots = 1;
  const Scenario s = generate(sc);
  TrainingData data;
  for (std::size_t i = 0; i < 60; ++i) data.inputs.push_back(s.detections[i].feature);
  for (std::size_t i = 0; i + 2 < 60; ++i) data.triplets.push_back({i, i + 1, (i + 7) % 60});
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 5;
  cfg.batch_size = 16;
  const auto a = train(EmbeddingModel::random({32, 16, 8}, 3), data, LossConfig{}, cfg);
  const auto b = train(EmbeddingModel::random({32, 16, 8}, 3), data, LossConfig{}, cfg);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  EXPECT_TRUE(a.model == b.model);
}

TEST(Train, Preconditions) {
  TrainingData empty;
  EXPECT_TRUE(throws_error([&] { train(EmbeddingModel({2, 2}), empty, LossConfig{}, TrainConfig{}); },
                           ErrorKind::precondition));
  TrainConfig bad;
  bad.learning_rate = 0.0;
  EXPECT_TRUE(throws_error([&] { bad.validate(); }, ErrorKind::validation));
}

TEST(Train, DivergenceIsReported) {
  TrainingData data;
  data.inputs = {vec({1e200, 1e200}), vec({-1e200, -1e200})};
  data.pairs = {{0, 1, true}};
  LossConfig loss;
  loss.kind = LossKind::contrastive;
  TrainConfig cfg;
  cfg.epochs = 3;
  EmbeddingModel m({2, 2});
  m.weights()[0] = Matrix::Identity(2, 2);
  EXPECT_TRUE(throws_error([&] { train(m, data, loss, cfg); }, ErrorKind::numeric, "epoch 0"));
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto m = EmbeddingModel::random({5, 7, 3}, 77);
  std::stringstream ss;
  save_model(ss, m);
  const auto back = load_model(ss);
  EXPECT_TRUE(back == m);
  EXPECT_EQ(back.seed(), 77u);
  std::stringstream bad("adaptrack-model 2\n");
  EXPECT_TRUE(throws_error([&] { load_model(bad); }, ErrorKind::io));
}
