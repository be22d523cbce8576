#include <gtest/gtest.h>

#include "fmd/datagen.hpp"
#include "fmd/error.hpp"
#include "fmd/filters.hpp"
#include "fmd/rng.hpp"

using namespace fmd;

namespace {

Image gray_of(int h, int w, std::vector<double> v) { return Image(h, w, 1, std::move(v)); }

Image noisy_constant(std::uint64_t seed) {
  SplitMix64 rng(seed);
  Image img(32, 32, 1, 0.0);
  for (double& v : img.data()) v = std::clamp(0.5 + 0.05 * rng.gaussian(), 0.0, 1.0);
  return img;
}

}  // namespace

TEST(Reflect, Indices) {
  EXPECT_EQ(reflect_index(-1, 5), 1);
  EXPECT_EQ(reflect_index(-2, 5), 2);
  EXPECT_EQ(reflect_index(5, 5), 3);
  EXPECT_EQ(reflect_index(6, 5), 2);
  EXPECT_EQ(reflect_index(2, 5), 2);
  EXPECT_EQ(reflect_index(-1, 1), 0);
}

TEST(Median, HandEnumeratedCorner) {
  const Image img = gray_of(3, 3, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
  const Image out = median_filter(img, 3);
  EXPECT_DOUBLE_EQ(out.at(1, 1), 0.5);
  // reflected neighbourhood of (0,0): {5,4,5,2,1,2,5,4,5}
  EXPECT_DOUBLE_EQ(out.at(0, 0), 0.4);
}

TEST(Median, ImpulseAndConstant) {
  const Image impulse = gray_of(3, 3, {0, 0, 0, 0, 1, 0, 0, 0, 0});
  EXPECT_EQ(median_filter(impulse, 3).at(1, 1), 0.0);
  const Image c(8, 8, 3, 0.37);
  EXPECT_EQ(median_filter(c, 3), c);
  EXPECT_EQ(median_filter(c, 5), c);
}

TEST(Median, PerChannelAndErrors) {
  SplitMix64 rng(2);
  Image img(6, 6, 3, 0.0);
  for (double& v : img.data()) v = rng.uniform();
  const Image out = median_filter(img, 3);
  // channel 1 of the RGB result equals the median of channel 1 alone
  Image ch(6, 6, 1, 0.0);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) ch.at(y, x) = img.at(y, x, 1);
  const Image ref = median_filter(ch, 3);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) EXPECT_EQ(out.at(y, x, 1), ref.at(y, x));
  EXPECT_THROW(median_filter(img, 4), Error);
  EXPECT_THROW(median_filter(img, 1), Error);
}

TEST(WienerAdaptive, ConstantAndNoiseFreeLimit) {
  const Image c(8, 8, 1, 0.6);
  EXPECT_EQ(wiener_adaptive(c, 5), c);
  const Image noisy = noisy_constant(3);
  EXPECT_EQ(wiener_adaptive(noisy, 5, 0.0), noisy);
  EXPECT_EQ(wiener_gain(0.0, 0.0), 0.0);
  EXPECT_EQ(wiener_gain(0.5, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(wiener_gain(0.04, 0.01), 0.75);
  EXPECT_EQ(wiener_gain(0.01, 0.04), 0.0);
}

TEST(WienerAdaptive, HalvesMseOnNoisyConstant) {
  const Image clean(32, 32, 1, 0.5);
  const Image noisy = noisy_constant(42);
  const double before = mse(noisy, clean);
  const double after = mse(wiener_adaptive(noisy, 5), clean);
  EXPECT_LE(after, 0.5 * before) << before << " -> " << after;
}

TEST(WienerAdaptive, Errors) {
  EXPECT_NE(std::string([] {
              try {
                wiener_adaptive(Image(4, 4, 3, 0.5), 3);
              } catch (const Error& e) {
                return std::string(e.what());
              }
              return std::string();
            }())
                .find("grayscale required"),
            std::string::npos);
  EXPECT_THROW(wiener_adaptive(Image(4, 4, 1, 0.5), 2), Error);
}

TEST(WienerDeconvolve, DeltaKernel) {
  const Image img = noisy_constant(5);
  const Image same = wiener_deconvolve(img, delta_kernel(), 0.0);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(same.data()[i], img.data()[i], 1e-6);
  const Image scaled = wiener_deconvolve(img, delta_kernel(), 0.5);
  for (std::size_t i = 0; i < img.size(); ++i)
    EXPECT_NEAR(scaled.data()[i], img.data()[i] / 1.5, 1e-6);
}

TEST(WienerDeconvolve, UndoesBoxBlur) {
  DatasetSpec spec;
  spec.per_class = 1;
  for (const auto& s : generate(spec)) {
    const Image orig = to_grayscale(s.image);
    const Image blurred = convolve_circular(orig, box_kernel(3));
    const Image restored = wiener_deconvolve(blurred, box_kernel(3), 1e-4);
    EXPECT_LE(mse(restored, orig), 0.25 * mse(blurred, orig)) << shape_name(s.label);
  }
}

TEST(WienerDeconvolve, IllConditioned) {
  // A 2x1 averaging kernel has H = 0 at the Nyquist column of an even width.
  RealGrid k(1, 2, 0.5);
  try {
    wiener_deconvolve(Image(4, 4, 1, 0.5), k, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric);
    EXPECT_NE(std::string(e.what()).find("ill-conditioned deconvolution"), std::string::npos);
  }
  EXPECT_NO_THROW(wiener_deconvolve(Image(4, 4, 1, 0.5), k, 0.01));
  EXPECT_THROW(wiener_deconvolve(Image(4, 4, 1, 0.5), k, -1.0), Error);
  EXPECT_THROW(wiener_deconvolve(Image(4, 4, 3, 0.5), k, 0.1), Error);
}

TEST(Mse, Examples) {
  const Image a(4, 4, 1, 0.0), b(4, 4, 1, 0.5);
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_DOUBLE_EQ(mse(a, b), 0.25);
  const Image r = noisy_constant(1);
  const Image c(32, 32, 1, 0.3);
  EXPECT_EQ(mse(r, c), mse(c, r));
  EXPECT_THROW(mse(a, Image(4, 4, 3, 0.0)), Error);
}
