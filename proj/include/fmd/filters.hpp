#pragma once

#include <optional>
#include <string>

#include "fmd/fft.hpp"
#include "fmd/image.hpp"

namespace fmd {

struct FilterConfig {
  int window = 3;            // odd, >= 3 (median and adaptive Wiener)
  double K = 0.01;           // Wiener deconvolution regulariser, >= 0
  RealGrid kernel;           // degradation PSF for deconvolution

  void validate() const;
};

// Reflect padding without repeating the edge sample: -1 -> 1, n -> n - 2.
int reflect_index(int i, int n);

// Per-channel window x window median over the reflect-padded neighbourhood.
Image median_filter(const Image& img, int window);

// Gain applied to (y - mu) by the adaptive Wiener filter; always in [0, 1].
double wiener_gain(double local_variance, double noise_power);

/// Local-statistics Wiener filter on a grayscale image:
///   out = mu + max(var - noise, 0) / max(var, noise) * (y - mu)
/// with mu, var the window mean and (population) variance. noise defaults
/// to the mean local variance over the image.
Image wiener_adaptive(const Image& img, int window,
                      std::optional<double> noise_power = std::nullopt);

/// Frequency-domain Wiener deconvolution of a grayscale image:
///   X = conj(H) * Y / (|H|^2 + K)
/// where H is the DFT of the kernel zero-padded to the image size with its
/// center tap moved to (0, 0). Output is the clipped real part of the
/// inverse transform.
Image wiener_deconvolve(const Image& img, const RealGrid& kernel, double K);

RealGrid box_kernel(int size);
RealGrid delta_kernel();

// Circular 2-D convolution with the same centering as wiener_deconvolve.
Image convolve_circular(const Image& img, const RealGrid& kernel);

double mse(const Image& a, const Image& b);

}  // namespace fmd
