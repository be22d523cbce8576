#include "fmd/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "fmd/error.hpp"

namespace fmd {

namespace {

void check_shape(int height, int width, int channels, std::size_t n) {
  if (height <= 0 || width <= 0) data_error("image dimensions must be positive");
  if (channels != 1 && channels != 3) data_error("image channels must be 1 or 3");
  if (n != static_cast<std::size_t>(height) * width * channels)
    data_error("image data length does not match height*width*channels");
}

}  // namespace

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  check_shape(height, width, channels,
              static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0) *
                  channels);
  if (!(fill >= 0.0 && fill <= 1.0)) data_error("fill intensity outside [0,1]");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_shape(height, width, channels, data_.size());
  if (!in_unit_range()) data_error("image intensity outside [0,1]");
}

Image Image::from_raw(int height, int width, int channels,
                      std::vector<double> data) {
  check_shape(height, width, channels, data.size());
  Image img;
  img.height_ = height;
  img.width_ = width;
  img.channels_ = channels;
  img.data_ = std::move(data);
  return img;
}

bool Image::in_unit_range() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

Image clip01(Image img) {
  for (double& v : img.data()) v = std::min(1.0, std::max(0.0, v));
  return img;
}

Image to_grayscale(const Image& img) {
  if (img.channels() == 1) data_error("already grayscale");
  Image out(img.height(), img.width(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < dst.size(); ++p) {
    const double g =
        src[3 * p] + 0.587 * (src[3 * p + 1] - src[3 * p]) + 0.114 * (src[3 * p + 2] - src[3 * p]);
    dst[p] = std::min(1.0, std::max(0.0, g));
  }
  return out;
}

Image replicate_gray(const Image& img) {
  if (img.channels() != 1) data_error("replicate_gray needs a 1-channel image");
  Image out(img.height(), img.width(), 3);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < src.size(); ++p)
    dst[3 * p] = dst[3 * p + 1] = dst[3 * p + 2] = src[p];
  return out;
}

Image quantize8(Image img) {
  for (double& v : img.data())
    v = std::nearbyint(std::min(1.0, std::max(0.0, v)) * 255.0) / 255.0;
  return img;
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  // Skips whitespace and '#' comments, then parses a decimal integer.
  long next_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) data_error("truncated PPM header");
    if (!std::isdigit(bytes_[pos_])) data_error("malformed PPM header field");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000) data_error("PPM header value too large");
      ++pos_;
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      data_error("truncated PPM header");
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

Image read_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    data_error("bad magic: expected P5 or P6");
  const int channels = bytes[1] == '6' ? 3 : 1;
  HeaderReader header(bytes);
  const long width = header.next_int();
  const long height = header.next_int();
  const long maxval = header.next_int();
  if (width <= 0 || height <= 0) data_error("PPM dimensions must be positive");
  if (maxval != 255) data_error("unsupported maxval (only 255 is accepted)");
  const std::size_t start = header.raster_start();
  const std::size_t n = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() < start + n) data_error("truncated PPM payload");
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = bytes[start + i] / 255.0;
  return Image(static_cast<int>(height), static_cast<int>(width), channels,
               std::move(data));
}

std::vector<std::uint8_t> write_ppm(const Image& img) {
  const std::string header = (img.channels() == 3 ? "P6\n" : "P5\n") +
                             std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.size());
  for (double v : img.data()) {
    const double c = std::min(1.0, std::max(0.0, v));
    out.push_back(static_cast<std::uint8_t>(std::nearbyint(c * 255.0)));
  }
  return out;
}

Image load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) data_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return read_ppm(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

void save_ppm(const std::string& path, const Image& img) {
  const auto bytes = write_ppm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) data_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace fmd
