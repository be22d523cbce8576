#include <gtest/gtest.h>

#include "fmd/attacks.hpp"
#include "fmd/datagen.hpp"
#include "fmd/error.hpp"
#include "fmd/rng.hpp"

using namespace fmd;

namespace {

Dataset small_set() {
  DatasetSpec spec;
  spec.per_class = 3;
  return generate(spec);
}

}  // namespace

TEST(Fgsm, ZeroGradientLeavesImage) {
  const Image img = small_set()[0].image;
  const Image adv = fgsm(ModelParams::zeros(), img, 0, {0.1, 1, 0.1});
  EXPECT_EQ(adv, img);
}

TEST(Fgsm, SignStepAndClip) {
  const Network net(ModelParams::he_uniform(3));
  const Sample s = small_set()[4];
  const AttackConfig cfg{0.1, 1, 0.1};
  const Image g = net.input_gradient(s.image, s.label);
  const Image adv = fgsm(net, s.image, s.label, cfg);
  for (std::size_t i = 0; i < adv.size(); ++i) {
    const double x = s.image.data()[i];
    const double gi = g.data()[i];
    const double expect = std::clamp(x + (gi > 0 ? 0.1 : gi < 0 ? -0.1 : 0.0), 0.0, 1.0);
    EXPECT_EQ(adv.data()[i], expect);
  }
  EXPECT_LE(linf_distance(adv, s.image), 0.1 + 1e-12);
  EXPECT_TRUE(adv.in_unit_range());
}

TEST(Fgsm, IncreasesLoss) {
  const Network net(ModelParams::he_uniform(4));
  int increased = 0;
  const Dataset d = small_set();
  for (const auto& s : d)
    increased += net.loss(fgsm(net, s.image, s.label, {2.0 / 255, 1, 2.0 / 255}), s.label) >
                 net.loss(s.image, s.label);
  EXPECT_GE(increased, static_cast<int>(d.size()) - 1);
}

TEST(Bim, OneStepEqualsFgsmBitwise) {
  const Network net(ModelParams::he_uniform(5));
  for (const auto& s : small_set()) {
    const double e = 8.0 / 255.0;
    EXPECT_EQ(bim(net, s.image, s.label, {e, 1, e}), fgsm(net, s.image, s.label, {e, 1, e}));
  }
}

TEST(Bim, StaysInEpsilonBall) {
  const Network net(ModelParams::he_uniform(6));
  const double e = 8.0 / 255.0;
  for (const auto& s : small_set()) {
    const Image adv = bim(net, s.image, s.label, {e, 10, 2.0 / 255.0});
    EXPECT_LE(linf_distance(adv, s.image), e + 1e-7);
    for (std::size_t i = 0; i < adv.size(); ++i) {
      EXPECT_GE(adv.data()[i], std::max(0.0, s.image.data()[i] - e));
      EXPECT_LE(adv.data()[i], std::min(1.0, s.image.data()[i] + e));
    }
  }
}

TEST(Bim, Deterministic) {
  const Network net(ModelParams::he_uniform(7));
  const Sample s = small_set()[9];
  const AttackConfig cfg{0.05, 5, 0.01};
  EXPECT_EQ(bim(net, s.image, s.label, cfg), bim(net, s.image, s.label, cfg));
}

TEST(AttackConfig, Validation) {
  EXPECT_THROW((AttackConfig{0.0, 1, 0.1}.validate()), Error);
  EXPECT_THROW((AttackConfig{0.1, 0, 0.1}.validate()), Error);
  EXPECT_THROW((AttackConfig{0.1, 3, 0.2}.validate()), Error);
  EXPECT_THROW((AttackConfig{1.5, 1, 0.1}.validate()), Error);
  EXPECT_NO_THROW((AttackConfig{8.0 / 255, 10, 2.0 / 255}.validate()));
  EXPECT_EQ(parse_attack("bim"), AttackMethod::bim);
  EXPECT_THROW(parse_attack("pgd"), Error);
}

TEST(Linf, ShapeMismatch) {
  EXPECT_THROW(linf_distance(Image(2, 2, 1, 0.0), Image(2, 2, 3, 0.0)), Error);
  EXPECT_DOUBLE_EQ(linf_distance(Image(2, 2, 1, 0.25), Image(2, 2, 1, 0.5)), 0.25);
}
