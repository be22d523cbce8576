#include <gtest/gtest.h>

#include <cmath>

#include "fmd/fft.hpp"
#include "fmd/rng.hpp"

using namespace fmd;

namespace {

// Direct double sum, O((MN)^2).
ComplexGrid naive_dft(const RealGrid& f) {
  ComplexGrid out(f.rows, f.cols);
  for (int u = 0; u < f.rows; ++u)
    for (int v = 0; v < f.cols; ++v) {
      cplx acc = 0.0;
      for (int m = 0; m < f.rows; ++m)
        for (int n = 0; n < f.cols; ++n) {
          const double ang = -2.0 * M_PI * (static_cast<double>(u * m) / f.rows +
                                            static_cast<double>(v * n) / f.cols);
          acc += f(m, n) * cplx(std::cos(ang), std::sin(ang));
        }
      out(u, v) = acc;
    }
  return out;
}

RealGrid random_grid(int r, int c, std::uint64_t seed) {
  SplitMix64 rng(seed);
  RealGrid g(r, c);
  for (double& v : g.values) v = 2.0 * rng.uniform() - 1.0;
  return g;
}

}  // namespace

TEST(Fft2, MatchesNaiveDft8x8) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const RealGrid f = random_grid(8, 8, seed);
    const ComplexGrid a = fft2(f);
    const ComplexGrid b = naive_dft(f);
    for (std::size_t i = 0; i < a.values.size(); ++i)
      EXPECT_LT(std::abs(a.values[i] - b.values[i]), 1e-9);
  }
}

TEST(Fft2, NonPowerOfTwoUsesBluestein) {
  for (auto [r, c] : {std::pair{5, 7}, std::pair{6, 12}, std::pair{1, 9}, std::pair{3, 1}}) {
    const RealGrid f = random_grid(r, c, 17);
    const ComplexGrid a = fft2(f);
    const ComplexGrid b = naive_dft(f);
    for (std::size_t i = 0; i < a.values.size(); ++i)
      EXPECT_LT(std::abs(a.values[i] - b.values[i]), 1e-9) << r << "x" << c;
  }
}

TEST(Fft2, ConstantIsDcOnly) {
  RealGrid f(6, 4, 0.75);
  const ComplexGrid F = fft2(f);
  EXPECT_NEAR(F(0, 0).real(), 0.75 * 24, 1e-9);
  for (std::size_t i = 1; i < F.values.size(); ++i) EXPECT_LT(std::abs(F.values[i]), 1e-9);
}

TEST(Fft2, Parseval) {
  const RealGrid f = random_grid(16, 10, 4);
  const ComplexGrid F = fft2(f);
  double a = 0, b = 0;
  for (double v : f.values) a += v * v;
  for (const cplx& v : F.values) b += std::norm(v);
  EXPECT_NEAR(a, b / (16.0 * 10.0), 1e-9 * a);
}

TEST(Fft2, InverseRoundTrip) {
  const RealGrid f = random_grid(12, 32, 5);
  const ComplexGrid back = ifft2(fft2(f));
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    EXPECT_NEAR(back.values[i].real(), f.values[i], 1e-12);
    EXPECT_NEAR(back.values[i].imag(), 0.0, 1e-12);
  }
}

TEST(Fft1d, LengthOneAndEmpty) {
  std::vector<cplx> one{cplx(2.0, -1.0)};
  fft_inplace(one, false);
  EXPECT_EQ(one[0], cplx(2.0, -1.0));
  std::vector<cplx> none;
  fft_inplace(none, false);
  EXPECT_TRUE(none.empty());
}
