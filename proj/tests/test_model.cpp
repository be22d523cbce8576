#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "fmd/datagen.hpp"
#include "fmd/error.hpp"
#include "fmd/model.hpp"
#include "fmd/rng.hpp"

using namespace fmd;

namespace {

Image random_image(std::uint64_t seed) {
  SplitMix64 rng(seed);
  Image img(32, 32, 3, 0.0);
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

struct FdResult {
  int kink_free_ok = 0;   // agreeing probes among the kink-free ones
  int kink_free = 0;      // probes whose +-h stencil stays on one linear piece
  int raw_ok = 0;         // agreeing probes without the kink filter
  int raw = 0;
};

// Central differences with h = 1e-3 on random pixels of random dataset
// images; relative error |a - b| / max(|a|, |b|, 1e-12) <= 1e-3. Probes are
// drawn until 100 kink-free ones were seen.
FdResult fd_check(const Network& net, const Dataset& images, std::uint64_t seed) {
  SplitMix64 rng(seed);
  FdResult r;
  while (r.kink_free < 100) {
    const Sample& s = images[rng.below(images.size())];
    const std::size_t i = rng.below(s.image.size());
    const Image g = net.input_gradient(s.image, s.label);
    Image a = s.image, b = s.image;
    a.data()[i] += 1e-3;
    b.data()[i] -= 1e-3;
    const double fd = (net.loss(a, s.label) - net.loss(b, s.label)) / 2e-3;
    const double an = g.data()[i];
    const bool ok = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-12}) <= 1e-3;
    if (r.raw < 100) {
      ++r.raw;
      r.raw_ok += ok;
    }
    const auto p = net.activation_pattern(s.image);
    if (net.activation_pattern(a) == p && net.activation_pattern(b) == p) {
      ++r.kink_free;
      r.kink_free_ok += ok;
    }
  }
  return r;
}

// Same probes with a step small enough to stay off the kinks in practice.
double fd_small_step(const Network& net, const Dataset& images, std::uint64_t seed) {
  SplitMix64 rng(seed);
  int ok = 0;
  for (int t = 0; t < 100; ++t) {
    const Sample& s = images[rng.below(images.size())];
    const std::size_t i = rng.below(s.image.size());
    Image a = s.image, b = s.image;
    a.data()[i] += 1e-6;
    b.data()[i] -= 1e-6;
    const double fd = (net.loss(a, s.label) - net.loss(b, s.label)) / 2e-6;
    const double an = net.input_gradient(s.image, s.label).data()[i];
    ok += std::abs(fd - an) <= 1e-5 * std::max({std::abs(fd), std::abs(an), 1e-6});
  }
  return ok / 100.0;
}

}  // namespace

TEST(Softmax, Examples) {
  const auto u = softmax(std::vector<double>(10, 0.0));
  for (double p : u) EXPECT_DOUBLE_EQ(p, 0.1);
  const auto two = softmax(std::vector<double>{std::log(2.0), 0.0});
  EXPECT_NEAR(two[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(two[1], 1.0 / 3.0, 1e-15);
  std::vector<double> z{1.0, -2.0, 0.5, 3.0};
  const auto p = softmax(z);
  for (double& v : z) v += 123.0;
  const auto q = softmax(z);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-7);
  const auto big = softmax(std::vector<double>{1000.0, 0.0});
  EXPECT_EQ(big[0], 1.0);
}

TEST(CrossEntropy, Examples) {
  std::vector<double> onehot(10, 0.0);
  onehot[3] = 1.0;
  EXPECT_EQ(cross_entropy(onehot, 3), 0.0);
  EXPECT_NEAR(cross_entropy(std::vector<double>(10, 0.1), 4), 2.302585, 1e-6);
  EXPECT_LE(cross_entropy(onehot, 0), -std::log(1e-12) + 1e-12);
  EXPECT_NEAR(cross_entropy(onehot, 0), 27.631021, 1e-6);
  EXPECT_THROW(cross_entropy(onehot, 10), Error);
  EXPECT_THROW(cross_entropy(onehot, -1), Error);
}

TEST(Forward, IsDistribution) {
  const Network net(ModelParams::he_uniform(1));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto p = net.forward(random_image(s));
    ASSERT_EQ(p.size(), 10u);
    const double sum = std::accumulate(p.begin(), p.end(), 0.0);
    EXPECT_NEAR(sum, 1.0, 1e-6);
    for (double v : p) EXPECT_GE(v, 0.0);
  }
}

TEST(Forward, ZeroFinalLayerIsUniform) {
  ModelParams p = ModelParams::he_uniform(2);
  for (auto slot : {ModelParams::fc2_w, ModelParams::fc2_b})
    std::fill(p[slot].values.begin(), p[slot].values.end(), 0.0f);
  for (double v : forward(p, random_image(1))) EXPECT_DOUBLE_EQ(v, 0.1);
}

TEST(Forward, DeterministicAndShapeChecked) {
  const ModelParams p = ModelParams::he_uniform(3);
  const Image img = random_image(4);
  EXPECT_EQ(forward(p, img), forward(p, img));
  EXPECT_THROW(forward(p, Image(16, 16, 3, 0.5)), Error);
  EXPECT_THROW(forward(p, Image(32, 32, 1, 0.5)), Error);
}

TEST(InputGradient, ZeroModelGivesZero) {
  const Image g = input_gradient(ModelParams::zeros(), random_image(5), 3);
  for (double v : g.data()) EXPECT_EQ(v, 0.0);
}

TEST(InputGradient, MatchesFiniteDifferencesOnFreshModel) {
  DatasetSpec spec;
  spec.per_class = 3;
  const Dataset d = generate(spec);
  const Network net(ModelParams::he_uniform(42));
  const FdResult r = fd_check(net, d, 1);
  EXPECT_GE(r.kink_free_ok, 99);
  EXPECT_GE(fd_small_step(net, d, 1), 0.99);
}

TEST(InputGradient, MatchesFiniteDifferencesOnTrainedModel) {
  DatasetSpec spec;
  spec.per_class = 20;
  const Dataset d = generate(spec);
  TrainConfig cfg;
  cfg.epochs = 3;
  const auto r = train(d, cfg);
  EXPECT_GT(r.log.back().train_accuracy, 0.3);
  const FdResult fd = fd_check(Network(r.params), d, 2);
  EXPECT_GE(fd.kink_free_ok, 99);
  EXPECT_GE(fd_small_step(Network(r.params), d, 2), 0.99);
}

TEST(InputGradient, Deterministic) {
  const Network net(ModelParams::he_uniform(6));
  const Image img = random_image(6);
  EXPECT_EQ(net.input_gradient(img, 2), net.input_gradient(img, 2));
  EXPECT_THROW(net.input_gradient(img, 10), Error);
}

TEST(ParameterGradient, MatchesFiniteDifferences) {
  // Perturb float weights through a double copy by rebuilding the network.
  const ModelParams base = ModelParams::he_uniform(9);
  const Image img = random_image(10);
  const int label = 4;
  const Network net(base);
  std::vector<std::vector<double>> grads;
  for (const auto& t : base.tensors) grads.emplace_back(t.values.size(), 0.0);
  net.accumulate_gradients(img, label, grads);

  SplitMix64 rng(11);
  int ok = 0, total = 0;
  for (int slot = 0; slot < ModelParams::kTensorCount; ++slot) {
    for (int t = 0; t < 6; ++t) {
      const std::size_t i = rng.below(base.tensors[slot].values.size());
      ModelParams a = base, b = base;
      const float w = base.tensors[slot].values[i];
      const float h = 1e-4f;
      a.tensors[slot].values[i] = w + h;
      b.tensors[slot].values[i] = w - h;
      const double step = static_cast<double>(a.tensors[slot].values[i]) -
                          static_cast<double>(b.tensors[slot].values[i]);
      const double fd = (Network(a).loss(img, label) - Network(b).loss(img, label)) / step;
      const double an = grads[slot][i];
      if (Network(a).activation_pattern(img) != Network(b).activation_pattern(img)) continue;
      ++total;
      ok += std::abs(fd - an) <= 1e-3 * std::max({std::abs(fd), std::abs(an), 1e-3});
    }
  }
  EXPECT_GE(total, 30);
  EXPECT_EQ(ok, total);
}

TEST(HeUniform, BoundsAndBiases) {
  const ModelParams p = ModelParams::he_uniform(42);
  const auto shapes = reference_shapes();
  for (int s = 0; s < ModelParams::kTensorCount; ++s) {
    EXPECT_EQ(p.tensors[s].rows, shapes[s].first);
    EXPECT_EQ(p.tensors[s].cols, shapes[s].second);
  }
  for (auto [slot, fan_in] : {std::pair{ModelParams::conv1_w, 27}, std::pair{ModelParams::conv2_w, 72},
                              std::pair{ModelParams::fc1_w, 1024}, std::pair{ModelParams::fc2_w, 64}}) {
    const double bound = std::sqrt(6.0 / fan_in);
    double mx = 0.0;
    for (float v : p[slot].values) mx = std::max(mx, std::abs(static_cast<double>(v)));
    EXPECT_LE(mx, bound);
    EXPECT_GT(mx, 0.9 * bound);
  }
  for (auto slot : {ModelParams::conv1_b, ModelParams::conv2_b, ModelParams::fc1_b, ModelParams::fc2_b})
    for (float v : p[slot].values) EXPECT_EQ(v, 0.0f);
  // first weight drawn from the stream
  SplitMix64 rng(42);
  const double expect = (2.0 * rng.uniform() - 1.0) * std::sqrt(6.0 / 27.0);
  EXPECT_EQ(p[ModelParams::conv1_w].values[0], static_cast<float>(expect));
}

TEST(Train, ZeroEpochsReturnsInit) {
  DatasetSpec spec;
  spec.per_class = 2;
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 5;
  const auto r = train(generate(spec), cfg);
  EXPECT_EQ(r.params, ModelParams::he_uniform(5));
  EXPECT_TRUE(r.log.empty());
}

TEST(Train, DeterministicAndLogged) {
  DatasetSpec spec;
  spec.per_class = 6;
  const Dataset d = generate(spec);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch = 8;
  int calls = 0;
  const auto a = train(d, cfg, &d, [&](const EpochLog&) { ++calls; });
  const auto b = train(d, cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(calls, 2);
  ASSERT_EQ(a.log.size(), 2u);
  EXPECT_GE(a.log[1].validation_accuracy, 0.0);
  EXPECT_EQ(b.log[1].validation_accuracy, -1.0);
}

TEST(Train, Errors) {
  TrainConfig cfg;
  EXPECT_THROW(train(Dataset{}, cfg), Error);
  // Step size near FLT_MAX with heavy momentum: float weights overflow.
  DatasetSpec spec;
  spec.per_class = 2;
  const Dataset data = generate(spec);
  cfg.lr = 3e38;
  cfg.momentum = 0.99;
  cfg.epochs = 30;
  try {
    train(data, cfg);
    FAIL() << "expected a numeric error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric);
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
  }
  cfg = TrainConfig{};
  cfg.batch = 0;
  EXPECT_THROW(train(data, cfg), Error);
  cfg = TrainConfig{};
  cfg.momentum = 1.0;
  EXPECT_THROW(train(data, cfg), Error);
}

TEST(Weights, RoundTripAndErrors) {
  const ModelParams p = ModelParams::he_uniform(12);
  const auto bytes = save_weights(p);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 6), "FMDW1\n");
  EXPECT_EQ(load_weights(bytes), p);

  auto message = [](std::vector<std::uint8_t> b) {
    try {
      load_weights(b);
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::data);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_NE(message(bad_magic).find("bad magic"), std::string::npos);
  auto bad_shape = bytes;
  bad_shape[6] = 9;  // conv1_w rows 8 -> 9
  EXPECT_NE(message(bad_shape).find("shape"), std::string::npos);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  EXPECT_NE(message(truncated).find("truncated"), std::string::npos);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_NE(message(trailing), "no error");
}

TEST(Weights, LittleEndianLayout) {
  ModelParams p = ModelParams::zeros();
  p[ModelParams::conv1_w].values[0] = 1.0f;  // 0x3F800000
  const auto b = save_weights(p);
  // magic(6) rows(4) cols(4)
  EXPECT_EQ(b[6], 8);
  EXPECT_EQ(b[10], 27);
  EXPECT_EQ(b[14], 0x00);
  EXPECT_EQ(b[16], 0x80);
  EXPECT_EQ(b[17], 0x3F);
}
