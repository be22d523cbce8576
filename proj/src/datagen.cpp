#include "fmd/datagen.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fmd/error.hpp"
#include "fmd/rng.hpp"

namespace fmd {

namespace {

constexpr const char* kShapeNames[kNumClasses] = {
    "filled_circle",   "hollow_circle",      "filled_square",
    "hollow_square",   "filled_triangle",    "plus_sign",
    "horizontal_stripes", "vertical_stripes", "diagonal_line",
    "checkerboard"};

// Base half-extent of every shape in pixels at scale 1 on a 32 px canvas.
constexpr double kBaseExtent = 6.0;

bool inside(Shape shape, double dx, double dy, double s) {
  const double ax = std::abs(dx);
  const double ay = std::abs(dy);
  const double r = std::sqrt(dx * dx + dy * dy);
  switch (shape) {
    case Shape::filled_circle:
      return r <= s;
    case Shape::hollow_circle:
      return r <= s && r >= s - 2.5;
    case Shape::filled_square:
      return ax <= 0.8 * s && ay <= 0.8 * s;
    case Shape::hollow_square: {
      const double h = 0.8 * s;
      return ax <= h && ay <= h && (ax > h - 2.0 || ay > h - 2.0);
    }
    case Shape::filled_triangle:
      // apex up; base at dy = +s
      return dy >= -s && dy <= s && ax <= 0.5 * (dy + s);
    case Shape::plus_sign:
      return (ax <= 1.5 && ay <= s) || (ay <= 1.5 && ax <= s);
    case Shape::horizontal_stripes:
      return ax <= s && ay <= s &&
             static_cast<long>(std::floor((dy + s) / 2.0)) % 2 == 0;
    case Shape::vertical_stripes:
      return ax <= s && ay <= s &&
             static_cast<long>(std::floor((dx + s) / 2.0)) % 2 == 0;
    case Shape::diagonal_line:
      return ax <= s && ay <= s && std::abs(dx - dy) <= 1.5;
    case Shape::checkerboard:
      return ax <= s && ay <= s &&
             (static_cast<long>(std::floor((dx + s) / 4.0)) +
              static_cast<long>(std::floor((dy + s) / 4.0))) %
                     2 ==
                 0;
  }
  return false;
}

Image render(int label, const DatasetSpec& spec, SplitMix64& rng) {
  const int n = spec.image_size;
  double bg[3], fg[3];
  for (double& c : bg) c = 0.4 * rng.uniform();
  for (double& c : fg) c = 0.6 + 0.4 * rng.uniform();
  const int jx = static_cast<int>(rng.below(9)) - 4;
  const int jy = static_cast<int>(rng.below(9)) - 4;
  const double scale = 0.8 + 0.4 * rng.uniform();

  const double cx = (n - 1) / 2.0 + (spec.jitter ? jx : 0);
  const double cy = (n - 1) / 2.0 + (spec.jitter ? jy : 0);
  const double s = kBaseExtent * (spec.jitter ? scale : 1.0) * n / 32.0;
  const auto shape = static_cast<Shape>(label);

  std::vector<double> data(static_cast<std::size_t>(n) * n * 3);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const bool on = inside(shape, x - cx, y - cy, s);
      for (int c = 0; c < 3; ++c) {
        double v = on ? fg[c] : bg[c];
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.gaussian();
        data[(static_cast<std::size_t>(y) * n + x) * 3 + c] = v;
      }
    }
  }
  return clip01(Image::from_raw(n, n, 3, std::move(data)));
}

}  // namespace

const char* shape_name(int label) {
  if (label < 0 || label >= kNumClasses) return "unknown";
  return kShapeNames[label];
}

Dataset generate(const DatasetSpec& spec) {
  if (spec.per_class < 1) config_error("per_class must be >= 1");
  if (spec.noise_sigma < 0.0) config_error("noise_sigma must be >= 0");
  if (spec.image_size < 8) config_error("image_size must be >= 8");
  SplitMix64 rng(spec.seed);
  Dataset out;
  out.reserve(static_cast<std::size_t>(spec.per_class) * kNumClasses);
  for (int label = 0; label < kNumClasses; ++label)
    for (int i = 0; i < spec.per_class; ++i)
      out.push_back({render(label, spec, rng), label});
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double ratio,
                                  std::uint64_t seed) {
  return stratified_split(data, ratio, seed,
                          [](const Sample& s) { return s.label; });
}

void write_dataset_dir(const std::string& dir, const Dataset& data) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.csv");
  if (!manifest) data_error("cannot write manifest in " + dir);
  manifest << "filename,label\n";
  std::vector<int> counter(kNumClasses, 0);
  for (const auto& s : data) {
    std::ostringstream name;
    name << "cls" << s.label << "_" << counter[s.label]++ << ".ppm";
    save_ppm((fs::path(dir) / name.str()).string(), s.image);
    manifest << name.str() << "," << s.label << "\n";
  }
}

Dataset read_dataset_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream manifest(fs::path(dir) / "manifest.csv");
  if (!manifest) data_error("missing manifest.csv in " + dir);
  std::string line;
  std::getline(manifest, line);
  if (line.rfind("filename,label", 0) != 0)
    data_error("manifest.csv: unexpected header '" + line + "'");
  Dataset out;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) data_error("manifest.csv: malformed row");
    int label = 0;
    try {
      label = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      data_error("manifest.csv: bad label in row '" + line + "'");
    }
    if (label < 0 || label >= kNumClasses)
      data_error("manifest.csv: label out of range in row '" + line + "'");
    out.push_back(
        {load_ppm((fs::path(dir) / line.substr(0, comma)).string()), label});
  }
  return out;
}

}  // namespace fmd
