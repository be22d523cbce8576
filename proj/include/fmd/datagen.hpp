#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fmd/image.hpp"

namespace fmd {

inline constexpr int kNumClasses = 10;

enum class Shape : int {
  filled_circle = 0,
  hollow_circle,
  filled_square,
  hollow_square,
  filled_triangle,
  plus_sign,
  horizontal_stripes,
  vertical_stripes,
  diagonal_line,
  checkerboard,
};

const char* shape_name(int label);

struct DatasetSpec {
  std::uint64_t seed = 42;
  int per_class = 100;
  int image_size = 32;
  double noise_sigma = 0.02;
  bool jitter = true;
};

struct Sample {
  Image image;
  int label = 0;
};

using Dataset = std::vector<Sample>;

/// Renders per_class images of each of the ten shape classes.
///
/// Draw order per image (class-major, index-minor): background RGB (3
/// uniforms), foreground RGB (3 uniforms), center jitter x then y
/// (below(9) - 4 each), size scale (1 uniform, 0.8 + 0.4u), then one
/// Gaussian per pixel per channel in raster order. With jitter disabled the
/// jitter/scale draws still happen but are ignored.
Dataset generate(const DatasetSpec& spec);

/// Stratified split: within each class, a seeded Fisher-Yates shuffle of the
/// class members; the first round(ratio * n) go to the first half. Both halves
/// keep the original relative order of items.
template <class T, class LabelFn>
std::pair<std::vector<T>, std::vector<T>> stratified_split(
    const std::vector<T>& items, double ratio, std::uint64_t seed,
    LabelFn label_of);

std::pair<Dataset, Dataset> split(const Dataset& data, double ratio,
                                  std::uint64_t seed);

// Writes cls<label>_<index>.ppm files and manifest.csv (filename,label).
void write_dataset_dir(const std::string& dir, const Dataset& data);
// Reads a directory written by write_dataset_dir (or any dir with manifest.csv).
Dataset read_dataset_dir(const std::string& dir);

}  // namespace fmd

#include "fmd/detail/split_impl.hpp"
