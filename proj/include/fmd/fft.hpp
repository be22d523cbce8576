#pragma once

#include <complex>
#include <vector>

namespace fmd {

using cplx = std::complex<double>;

template <class T>
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<T> values;  // row-major

  Grid() = default;
  Grid(int r, int c, T fill = T{})
      : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}

  T& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  const T& operator()(int r, int c) const {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
};

using RealGrid = Grid<double>;
using ComplexGrid = Grid<cplx>;

// In-place 1-D DFT of any length: iterative radix-2 for powers of two,
// Bluestein's chirp-z otherwise. inverse=true computes the unscaled inverse.
void fft_inplace(std::vector<cplx>& a, bool inverse);

// F[u,v] = sum_{m,n} f[m,n] exp(-2 pi i (u m / M + v n / N))
ComplexGrid fft2(const RealGrid& f);
ComplexGrid fft2(const ComplexGrid& f);
// Inverse including the 1/(MN) factor.
ComplexGrid ifft2(const ComplexGrid& F);

}  // namespace fmd
