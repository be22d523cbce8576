#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fmd/attacks.hpp"
#include "fmd/datagen.hpp"
#include "fmd/detectors.hpp"
#include "fmd/model.hpp"
#include "fmd/scoring.hpp"

namespace fmd {

using LogFn = std::function<void(const std::string&)>;

struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::string output_dir = "fmd_run";

  DatasetSpec dataset;  // dataset.seed is forced to `seed`
  TrainConfig training;  // training.seed is forced to `seed`
  double train_ratio = 0.5;
  std::string weights;  // optional: load instead of training

  int candidates = 200;
  int min_candidates = 50;
  AttackConfig fgsm{8.0 / 255.0, 1, 8.0 / 255.0};
  AttackConfig bim{8.0 / 255.0, 10, 2.0 / 255.0};

  std::vector<FilterTag> filters{FilterTag::median, FilterTag::wiener};
  ScoreOptions scoring;

  double detector_split = 0.5;
  int folds = 5;
  std::string selection = "auto";  // auto | knn | dtree | rforest | svm

  void validate() const;
  // Everything except output_dir; this is what the report echoes and what
  // stage fingerprints hash.
  nlohmann::ordered_json to_json() const;
};

/// Layering: defaults < config file < FMD_SEED env < explicit overrides.
/// Both JSON objects use the same schema as to_json() (plus output_dir).
ExperimentConfig resolve_config(const nlohmann::json* file,
                                const nlohmann::json* overrides,
                                const char* env_seed);

/// Known-attack experiment for one (attack, filter) cell: adversarial records
/// of `attack` plus every clean record, split, then each classifier of the
/// row set (knn/dtree/rforest, plus svm on the wiener path) is tuned on the
/// training half and evaluated on the other half. Fitted detectors are saved
/// under model_dir when it is non-empty.
nlohmann::ordered_json run_known_attack(const ExperimentConfig& cfg,
                                        const std::vector<ScoreRecord>& records,
                                        AttackTag attack, FilterTag filter,
                                        const std::string& model_dir = "");

/// Hybrid experiment for one filter: the first half of the FGSM records, the
/// second half of the BIM records and every clean record (so both labels are
/// balanced), split, best classifier selected by CV, evaluated.
nlohmann::ordered_json run_hybrid(const ExperimentConfig& cfg,
                                  const std::vector<ScoreRecord>& records,
                                  FilterTag filter, const std::string& model_dir = "");

struct ExperimentResult {
  nlohmann::ordered_json report;
  std::string report_text;
};

/// dataset -> model -> attacks -> scores -> detectors -> report.
/// Each of the first four stages persists its artifacts, writes a stage
/// marker carrying a fingerprint of the config it depends on, and the
/// pipeline always continues from the persisted files. With resume=true a
/// stage whose marker matches is not recomputed.
ExperimentResult run_all(const ExperimentConfig& cfg, bool resume, const LogFn& log = {});

// Aligned text tables in the layout of the known-attack and hybrid-attack
// result tables.
std::string format_report_text(const nlohmann::ordered_json& report);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::string& path);

}  // namespace fmd
