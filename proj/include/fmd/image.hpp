#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fmd {

/// H x W x C intensities in [0,1], row-major with channels interleaved per
/// pixel (the P6 byte order). Channels is 1 or 3.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);
  // Values outside [0,1] are rejected; use from_raw + clip01 for those.
  Image(int height, int width, int channels, std::vector<double> data);

  // Unchecked range: holds intermediate attack/filter values.
  static Image from_raw(int height, int width, int channels,
                        std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  double at(int y, int x, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double& at(int y, int x, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }
  bool in_unit_range() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

Image clip01(Image img);
Image to_grayscale(const Image& img);
Image replicate_gray(const Image& img);

// Snap every intensity to the nearest multiple of 1/255.
Image quantize8(Image img);

// PPM/PGM binary (P6 / P5), maxval 255. Comments are accepted on read and
// never written.
Image read_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_ppm(const Image& img);

Image load_ppm(const std::string& path);
void save_ppm(const std::string& path, const Image& img);

}  // namespace fmd
