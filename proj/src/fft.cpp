#include "fmd/fft.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "fmd/error.hpp"

namespace fmd {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void radix2(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1 : -1);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        // Twiddles computed directly rather than by recurrence to keep the
        // round-off at the 1e-15 level for every length.
        const cplx w = std::polar(1.0, ang * static_cast<double>(k));
        const cplx u = a[i + k];
        const cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

void bluestein(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  const std::size_t m = std::bit_ceil(2 * n - 1);
  const double sgn = inverse ? 1.0 : -1.0;
  std::vector<cplx> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small.
    const auto k2 = static_cast<double>((k * k) % (2 * n));
    chirp[k] = std::polar(1.0, sgn * std::numbers::pi * k2 / static_cast<double>(n));
  }
  std::vector<cplx> x(m), y(m);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  y[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(chirp[k]);
  radix2(x, false);
  radix2(y, false);
  for (std::size_t i = 0; i < m; ++i) x[i] *= y[i];
  radix2(x, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * scale * chirp[k];
}

void transform2(ComplexGrid& g, bool inverse) {
  std::vector<cplx> line(static_cast<std::size_t>(g.cols));
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) line[c] = g(r, c);
    fft_inplace(line, inverse);
    for (int c = 0; c < g.cols; ++c) g(r, c) = line[c];
  }
  line.resize(static_cast<std::size_t>(g.rows));
  for (int c = 0; c < g.cols; ++c) {
    for (int r = 0; r < g.rows; ++r) line[r] = g(r, c);
    fft_inplace(line, inverse);
    for (int r = 0; r < g.rows; ++r) g(r, c) = line[r];
  }
}

}  // namespace

void fft_inplace(std::vector<cplx>& a, bool inverse) {
  if (a.size() <= 1) return;
  if (is_pow2(a.size()))
    radix2(a, inverse);
  else
    bluestein(a, inverse);
}

ComplexGrid fft2(const ComplexGrid& f) {
  if (f.rows < 1 || f.cols < 1) data_error("fft2: empty array");
  ComplexGrid g = f;
  transform2(g, false);
  return g;
}

ComplexGrid fft2(const RealGrid& f) {
  ComplexGrid g(f.rows, f.cols);
  for (std::size_t i = 0; i < f.values.size(); ++i) g.values[i] = f.values[i];
  return fft2(g);
}

ComplexGrid ifft2(const ComplexGrid& F) {
  if (F.rows < 1 || F.cols < 1) data_error("ifft2: empty array");
  ComplexGrid g = F;
  transform2(g, true);
  const double scale = 1.0 / (static_cast<double>(F.rows) * F.cols);
  for (auto& v : g.values) v *= scale;
  return g;
}

}  // namespace fmd
