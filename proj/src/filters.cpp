#include "fmd/filters.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fmd/error.hpp"

namespace fmd {

namespace {

void check_window(int window) {
  if (window < 3 || window % 2 == 0)
    config_error("window must be an odd integer >= 3, got " + std::to_string(window));
}

void check_kernel(const RealGrid& kernel, const Image& img) {
  if (kernel.rows < 1 || kernel.cols < 1) config_error("kernel is empty");
  if (kernel.values.size() != static_cast<std::size_t>(kernel.rows) * kernel.cols)
    config_error("kernel data length does not match its shape");
  if (kernel.rows > img.height() || kernel.cols > img.width())
    config_error("kernel is larger than the image");
  for (double v : kernel.values)
    if (!std::isfinite(v)) config_error("kernel entries must be finite");
}

ComplexGrid kernel_spectrum(const RealGrid& kernel, int rows, int cols) {
  RealGrid padded(rows, cols, 0.0);
  const int cy = kernel.rows / 2;
  const int cx = kernel.cols / 2;
  for (int r = 0; r < kernel.rows; ++r)
    for (int c = 0; c < kernel.cols; ++c) {
      const int pr = ((r - cy) % rows + rows) % rows;
      const int pc = ((c - cx) % cols + cols) % cols;
      padded(pr, pc) += kernel(r, c);
    }
  return fft2(padded);
}

RealGrid to_grid(const Image& img) {
  RealGrid g(img.height(), img.width());
  std::copy(img.data().begin(), img.data().end(), g.values.begin());
  return g;
}

}  // namespace

void FilterConfig::validate() const {
  check_window(window);
  if (!(K >= 0.0) || !std::isfinite(K)) config_error("K must be finite and >= 0");
  for (double v : kernel.values)
    if (!std::isfinite(v)) config_error("kernel entries must be finite");
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Image median_filter(const Image& img, int window) {
  check_window(window);
  const int h = img.height(), w = img.width(), ch = img.channels();
  const int half = window / 2;
  Image out(h, w, ch);
  std::vector<double> buf(static_cast<std::size_t>(window) * window);
  const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        std::size_t k = 0;
        for (int dy = -half; dy <= half; ++dy)
          for (int dx = -half; dx <= half; ++dx)
            buf[k++] = img.at(reflect_index(y + dy, h), reflect_index(x + dx, w), c);
        std::nth_element(buf.begin(), mid, buf.end());
        out.at(y, x, c) = *mid;
      }
  return out;
}

double wiener_gain(double local_variance, double noise_power) {
  const double denom = std::max(local_variance, noise_power);
  if (denom <= 0.0) return 0.0;
  return std::max(local_variance - noise_power, 0.0) / denom;
}

Image wiener_adaptive(const Image& img, int window, std::optional<double> noise_power) {
  if (img.channels() != 1) data_error("grayscale required");
  check_window(window);
  if (noise_power && !(*noise_power >= 0.0)) config_error("noise_power must be >= 0");
  const int h = img.height(), w = img.width();
  const int half = window / 2;
  const double count = static_cast<double>(window) * window;

  // Window statistics are taken on deviations from the centre pixel, so a
  // flat window gives exactly mean = y and var = 0.
  std::vector<double> offset(img.size()), var(img.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double c = img.at(y, x);
      double s = 0.0, s2 = 0.0;
      for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) {
          const double d = img.at(reflect_index(y + dy, h), reflect_index(x + dx, w)) - c;
          s += d;
          s2 += d * d;
        }
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      offset[i] = s / count;  // mean - y
      var[i] = std::max(0.0, s2 / count - offset[i] * offset[i]);
    }

  double noise = 0.0;
  if (noise_power) {
    noise = *noise_power;
  } else {
    for (double v : var) noise += v;
    noise /= static_cast<double>(var.size());
  }

  // mu + g (y - mu) written as y + (1 - g)(mu - y)
  std::vector<double> out(img.size());
  auto y = img.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = y[i] + (1.0 - wiener_gain(var[i], noise)) * offset[i];
    out[i] = std::min(1.0, std::max(0.0, v));
  }
  return Image(h, w, 1, std::move(out));
}

Image wiener_deconvolve(const Image& img, const RealGrid& kernel, double K) {
  if (img.channels() != 1) data_error("grayscale required");
  check_kernel(kernel, img);
  if (!(K >= 0.0) || !std::isfinite(K)) config_error("K must be finite and >= 0");
  const ComplexGrid H = kernel_spectrum(kernel, img.height(), img.width());
  if (K == 0.0) {
    for (const cplx& v : H.values)
      if (std::abs(v) < 1e-8)
        numeric_error("ill-conditioned deconvolution: |H| < 1e-8 with K = 0");
  }
  ComplexGrid Y = fft2(to_grid(img));
  for (std::size_t i = 0; i < Y.values.size(); ++i) {
    const cplx hv = H.values[i];
    Y.values[i] = std::conj(hv) * Y.values[i] / (std::norm(hv) + K);
  }
  const ComplexGrid x = ifft2(Y);
  std::vector<double> out(img.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::min(1.0, std::max(0.0, x.values[i].real()));
  return Image(img.height(), img.width(), 1, std::move(out));
}

RealGrid box_kernel(int size) {
  if (size < 1) config_error("box kernel size must be >= 1");
  return RealGrid(size, size, 1.0 / (static_cast<double>(size) * size));
}

RealGrid delta_kernel() { return RealGrid(1, 1, 1.0); }

Image convolve_circular(const Image& img, const RealGrid& kernel) {
  check_kernel(kernel, img);
  const int h = img.height(), w = img.width(), ch = img.channels();
  const int cy = kernel.rows / 2, cx = kernel.cols / 2;
  std::vector<double> out(img.size(), 0.0);
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int r = 0; r < kernel.rows; ++r)
          for (int k = 0; k < kernel.cols; ++k) {
            const int sy = ((y - (r - cy)) % h + h) % h;
            const int sx = ((x - (k - cx)) % w + w) % w;
            acc += kernel(r, k) * img.at(sy, sx, c);
          }
        out[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
      }
  return clip01(Image::from_raw(h, w, ch, std::move(out)));
}

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) data_error("mse: shape mismatch");
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

}  // namespace fmd
