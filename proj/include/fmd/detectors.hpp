#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "fmd/scoring.hpp"

namespace fmd {

// One training/test point for the 1-D detectors.
struct LabeledScore {
  double x = 0.0;
  int y = 0;  // 1 adversarial, 0 legitimate
};

std::vector<LabeledScore> to_points(const std::vector<ScoreRecord>& records);

// ---- k nearest neighbours -------------------------------------------------

struct KnnModel {
  int k = 1;
  std::vector<LabeledScore> train;  // original order; ties go to lower index

  // Internal search index, rebuilt by knn_fit / from_json.
  std::vector<std::size_t> order;  // train indices sorted by (x, index)
};

KnnModel knn_fit(std::span<const LabeledScore> train, int k);
int knn_predict(const KnnModel& m, double x);

// ---- CART decision tree ---------------------------------------------------

struct TreeNode {
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;           // -1 marks a leaf
  int right = -1;
  int label = 0;
};

struct TreeModel {
  int max_depth = 1;
  std::vector<TreeNode> nodes;  // nodes[0] is the root
};

double gini(std::size_t positives, std::size_t total);
TreeModel dtree_fit(std::span<const LabeledScore> train, int max_depth);
int dtree_predict(const TreeModel& m, double x);

// ---- random forest --------------------------------------------------------

struct ForestModel {
  int n_trees = 1;
  int max_depth = 1;
  std::uint64_t seed = 0;
  bool bootstrap = true;
  std::vector<TreeModel> trees;
};

ForestModel rforest_fit(std::span<const LabeledScore> train, int n_trees, int max_depth,
                        std::uint64_t seed, bool bootstrap = true);
int rforest_predict(const ForestModel& m, double x);

// ---- RBF support vector machine -------------------------------------------

struct SvmModel {
  double C = 1.0;
  double gamma = 1.0;
  double bias = 0.0;
  // All training points with their dual variables; alpha == 0 entries are
  // kept so feasibility can be audited after loading.
  std::vector<double> xs;
  std::vector<int> ys;  // +1 / -1
  std::vector<double> alpha;
  int iterations = 0;
};

double rbf_kernel(double a, double b, double gamma);
SvmModel svm_fit(std::span<const LabeledScore> train, double C, double gamma,
                 double tolerance = 1e-3);
double svm_decision(const SvmModel& m, double x);
int svm_predict(const SvmModel& m, double x);

// ---- unified model --------------------------------------------------------

enum class DetectorKind { knn, dtree, rforest, svm };

const char* detector_name(DetectorKind k);
DetectorKind parse_detector(const std::string& s);

struct Hyperparams {
  DetectorKind kind = DetectorKind::knn;
  int k = 1;
  int max_depth = 1;
  int n_trees = 1;
  double C = 1.0;
  double gamma = 1.0;

  nlohmann::ordered_json to_json() const;
};

struct DetectorModel {
  DetectorKind kind = DetectorKind::knn;
  std::variant<KnnModel, TreeModel, ForestModel, SvmModel> model;

  int predict(double x) const;
  Hyperparams hyperparams() const;
};

DetectorModel fit(std::span<const LabeledScore> train, const Hyperparams& hp,
                  std::uint64_t seed);

nlohmann::ordered_json to_json(const DetectorModel& m);
DetectorModel detector_from_json(const nlohmann::json& j);

// ---- tuning ---------------------------------------------------------------

std::vector<Hyperparams> default_grid(DetectorKind kind);

struct TuneResult {
  Hyperparams best;
  double cv_accuracy = 0.0;
  std::vector<double> grid_accuracy;  // -1 for entries that could not run
  int folds = 0;                      // after any re-stratification
};

/// Stratified k-fold grid search. Ties go to the earliest grid entry. If a
/// class has fewer members than folds, folds drops to that count; below 2
/// it is an error.
TuneResult tune(std::span<const LabeledScore> train, DetectorKind kind,
                const std::vector<Hyperparams>& grid, int folds, std::uint64_t seed);

struct Selection {
  TuneResult tuned;
  std::map<std::string, double> cv_by_kind;
};

// Tunes every kind and keeps the best CV accuracy; ties by knn < dtree <
// rforest < svm.
Selection select_best(std::span<const LabeledScore> train, int folds, std::uint64_t seed);

// ---- metrics --------------------------------------------------------------

struct Metrics {
  std::size_t n = 0;
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  double accuracy = 0.0;
  // Recall on adversarial records of each attack tag present.
  std::map<std::string, double> detection_rate;
  std::map<std::string, std::size_t> attack_count;

  nlohmann::ordered_json to_json() const;
};

Metrics evaluate(const DetectorModel& m, const std::vector<ScoreRecord>& test);

}  // namespace fmd
