#pragma once

// Directory-level operations behind the command-line subcommands. Image
// directories always hold PPM files plus a manifest.csv ("filename,label").

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fmd/attacks.hpp"
#include "fmd/datagen.hpp"
#include "fmd/detectors.hpp"
#include "fmd/harness.hpp"
#include "fmd/model.hpp"
#include "fmd/scoring.hpp"

namespace fmd::ops {

struct NamedImages {
  std::vector<std::string> filenames;  // as listed in the manifest
  Dataset samples;
};

NamedImages read_dir(const std::string& dir);
void write_dir(const std::string& dir, const NamedImages& images);

// Generates the synthetic dataset into out_dir; returns the image count.
std::size_t dataset_gen(const std::string& out_dir, const DatasetSpec& spec);

// Trains on every image of data_dir (optionally tracking accuracy on
// validation_dir) and writes the weight file.
nlohmann::ordered_json model_train(const std::string& data_dir, const std::string& weights_out,
                                   const TrainConfig& cfg, const std::string& validation_dir = "",
                                   const LogFn& log = {});

// Attacks every image of in_dir with its manifest label. Writes the adversarial
// PPMs under the same filenames, a manifest and attack_log.csv.
nlohmann::ordered_json attack_dir(const std::string& weights, const std::string& in_dir,
                                  const std::string& out_dir, AttackMethod method,
                                  const AttackConfig& cfg);

enum class DenoiseMode { median, wiener, wiener_deconv };
DenoiseMode parse_denoise_mode(const std::string& s);

struct DenoiseOptions {
  DenoiseMode mode = DenoiseMode::median;
  int window = 3;       // median / adaptive Wiener window
  double K = 0.01;      // deconvolution regulariser
  int kernel_size = 3;  // box PSF size for deconvolution
};

// median keeps the channel count; both Wiener modes write grayscale (P5).
std::size_t denoise_dir(const std::string& in_dir, const std::string& out_dir,
                        const DenoiseOptions& opts);

// Scores every image of in_dir. image_id is "<attack>/<file stem>".
std::vector<ScoreRecord> score_dir(const std::string& weights, const std::string& in_dir,
                                   FilterTag filter, AttackTag attack, const ScoreOptions& opts,
                                   const std::string& out_csv, bool append);

struct DetectTrainOptions {
  std::string kind = "auto";  // auto | knn | dtree | rforest | svm
  int folds = 5;
  std::uint64_t seed = 42;
};

// Tunes on the records of the given score CSVs, fits, writes model JSON.
nlohmann::ordered_json detect_train(const std::vector<std::string>& score_csvs,
                                    const std::string& model_out, const DetectTrainOptions& opts);

nlohmann::ordered_json detect_eval(const std::string& model_json,
                                   const std::vector<std::string>& score_csvs);

}  // namespace fmd::ops
