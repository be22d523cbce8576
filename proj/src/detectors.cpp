#include "fmd/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fmd/error.hpp"
#include "fmd/rng.hpp"

namespace fmd {

std::vector<LabeledScore> to_points(const std::vector<ScoreRecord>& records) {
  std::vector<LabeledScore> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.score, r.label});
  return out;
}

namespace {

int majority(std::size_t positives, std::size_t total) {
  return 2 * positives > total ? 1 : 0;  // tie -> 0
}

void require_non_empty(std::span<const LabeledScore> train, const char* who) {
  if (train.empty()) data_error(std::string(who) + ": empty training set");
}

}  // namespace

// ---- KNN --------------------------------------------------------------------

KnnModel knn_fit(std::span<const LabeledScore> train, int k) {
  require_non_empty(train, "knn_fit");
  if (k < 1 || k % 2 == 0) config_error("knn: k must be a positive odd integer");
  if (static_cast<std::size_t>(k) > train.size())
    config_error("knn: k exceeds the training set size");
  KnnModel m;
  m.k = k;
  m.train.assign(train.begin(), train.end());
  m.order.resize(train.size());
  std::iota(m.order.begin(), m.order.end(), std::size_t{0});
  std::sort(m.order.begin(), m.order.end(), [&](std::size_t a, std::size_t b) {
    return m.train[a].x != m.train[b].x ? m.train[a].x < m.train[b].x : a < b;
  });
  return m;
}

int knn_predict(const KnnModel& m, double x) {
  const auto& pts = m.train;
  const auto& ord = m.order;
  const std::size_t n = ord.size();
  if (n == 0) data_error("knn_predict: model has no training data");
  auto dist = [&](std::size_t pos) { return std::abs(pts[ord[pos]].x - x); };

  // Walk outwards from the insertion point to find the k-th smallest distance.
  auto it = std::lower_bound(ord.begin(), ord.end(), x,
                             [&](std::size_t i, double v) { return pts[i].x < v; });
  std::ptrdiff_t l = (it - ord.begin()) - 1;
  auto r = static_cast<std::ptrdiff_t>(it - ord.begin());
  double kth = 0.0;
  for (int taken = 0; taken < m.k; ++taken) {
    const bool left_ok = l >= 0;
    const bool right_ok = r < static_cast<std::ptrdiff_t>(n);
    if (left_ok && (!right_ok || dist(l) <= dist(r))) {
      kth = dist(l--);
    } else {
      kth = dist(r++);
    }
  }
  while (l >= 0 && dist(l) <= kth) --l;
  while (r < static_cast<std::ptrdiff_t>(n) && dist(r) <= kth) ++r;

  // Strictly closer points all vote; equal-distance points by training index.
  int votes = 0, counted = 0;
  std::vector<std::size_t> boundary;
  for (std::ptrdiff_t p = l + 1; p < r; ++p) {
    const double d = dist(p);
    if (d < kth) {
      votes += pts[ord[p]].y;
      ++counted;
    } else {
      boundary.push_back(ord[p]);
    }
  }
  std::sort(boundary.begin(), boundary.end());
  for (std::size_t i = 0; counted < m.k && i < boundary.size(); ++i, ++counted)
    votes += pts[boundary[i]].y;
  return 2 * votes > m.k ? 1 : 0;
}

// ---- decision tree ----------------------------------------------------------

double gini(std::size_t positives, std::size_t total) {
  if (total == 0) return 0.0;
  const double p = static_cast<double>(positives) / static_cast<double>(total);
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

namespace {

int grow(TreeModel& tree, std::vector<LabeledScore> pts, int depth) {
  const std::size_t n = pts.size();
  std::size_t pos = 0;
  for (const auto& p : pts) pos += static_cast<std::size_t>(p.y);
  const int node = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back({0.0, -1, -1, majority(pos, n)});
  if (pos == 0 || pos == n || depth >= tree.max_depth) return node;

  std::stable_sort(pts.begin(), pts.end(),
                   [](const LabeledScore& a, const LabeledScore& b) { return a.x < b.x; });
  const double parent = gini(pos, n);
  double best = parent;
  std::size_t best_split = 0;  // size of the left part
  std::size_t left_pos = 0;
  for (std::size_t i = 1; i < n; ++i) {
    left_pos += static_cast<std::size_t>(pts[i - 1].y);
    if (pts[i].x == pts[i - 1].x) continue;
    const double w = (static_cast<double>(i) * gini(left_pos, i) +
                      static_cast<double>(n - i) * gini(pos - left_pos, n - i)) /
                     static_cast<double>(n);
    if (w < best - 1e-12) {
      best = w;
      best_split = i;
    }
  }
  if (best_split == 0) return node;

  const double threshold = 0.5 * (pts[best_split - 1].x + pts[best_split].x);
  std::vector<LabeledScore> left(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(best_split));
  std::vector<LabeledScore> right(pts.begin() + static_cast<std::ptrdiff_t>(best_split), pts.end());
  tree.nodes[node].threshold = threshold;
  const int l = grow(tree, std::move(left), depth + 1);
  const int r = grow(tree, std::move(right), depth + 1);
  tree.nodes[node].left = l;
  tree.nodes[node].right = r;
  return node;
}

}  // namespace

TreeModel dtree_fit(std::span<const LabeledScore> train, int max_depth) {
  require_non_empty(train, "dtree_fit");
  if (max_depth < 1) config_error("dtree: max_depth must be >= 1");
  TreeModel t;
  t.max_depth = max_depth;
  grow(t, std::vector<LabeledScore>(train.begin(), train.end()), 0);
  return t;
}

int dtree_predict(const TreeModel& m, double x) {
  if (m.nodes.empty()) data_error("dtree_predict: empty tree");
  int i = 0;
  for (std::size_t guard = 0; guard <= m.nodes.size(); ++guard) {
    const TreeNode& nd = m.nodes[static_cast<std::size_t>(i)];
    if (nd.left < 0) return nd.label;
    i = x <= nd.threshold ? nd.left : nd.right;
    if (i < 0 || static_cast<std::size_t>(i) >= m.nodes.size())
      data_error("dtree_predict: malformed tree");
  }
  data_error("dtree_predict: cycle in tree");
}

// ---- random forest ----------------------------------------------------------

ForestModel rforest_fit(std::span<const LabeledScore> train, int n_trees, int max_depth,
                        std::uint64_t seed, bool bootstrap) {
  require_non_empty(train, "rforest_fit");
  if (n_trees < 1) config_error("rforest: n_trees must be >= 1");
  ForestModel f;
  f.n_trees = n_trees;
  f.max_depth = max_depth;
  f.seed = seed;
  f.bootstrap = bootstrap;
  const std::size_t n = train.size();
  std::vector<LabeledScore> sample(n);
  for (int t = 0; t < n_trees; ++t) {
    if (bootstrap) {
      SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
      for (auto& s : sample) s = train[rng.below(n)];
      f.trees.push_back(dtree_fit(sample, max_depth));
    } else {
      f.trees.push_back(dtree_fit(train, max_depth));
    }
  }
  return f;
}

int rforest_predict(const ForestModel& m, double x) {
  if (m.trees.empty()) data_error("rforest_predict: empty forest");
  std::size_t votes = 0;
  for (const auto& t : m.trees) votes += static_cast<std::size_t>(dtree_predict(t, x));
  return majority(votes, m.trees.size());
}

// ---- SVM --------------------------------------------------------------------

double rbf_kernel(double a, double b, double gamma) {
  const double d = a - b;
  return std::exp(-gamma * d * d);
}

SvmModel svm_fit(std::span<const LabeledScore> train, double C, double gamma,
                 double tolerance) {
  require_non_empty(train, "svm_fit");
  if (!(C > 0.0)) config_error("svm: C must be > 0");
  if (!(gamma > 0.0)) config_error("svm: gamma must be > 0");
  const std::size_t n = train.size();
  SvmModel m;
  m.C = C;
  m.gamma = gamma;
  m.xs.resize(n);
  m.ys.resize(n);
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    m.xs[i] = train[i].x;
    m.ys[i] = train[i].y == 1 ? 1 : -1;
    (m.ys[i] > 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) data_error("svm_fit: training data has a single class");

  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      K[i * n + j] = K[j * n + i] = rbf_kernel(m.xs[i], m.xs[j], gamma);

  // Dual: min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0, Q_ij = y_i y_j K_ij.
  // Working-set selection follows the second-order rule of Fan, Chen & Lin.
  std::vector<double>& a = m.alpha;
  a.assign(n, 0.0);
  std::vector<double> G(n, -1.0);
  const auto& y = m.ys;
  constexpr double kTau = 1e-12;
  auto up = [&](std::size_t t) { return (y[t] > 0 && a[t] < C) || (y[t] < 0 && a[t] > 0); };
  auto low = [&](std::size_t t) { return (y[t] > 0 && a[t] > 0) || (y[t] < 0 && a[t] < C); };

  const std::size_t max_iter = std::max<std::size_t>(100000, 100 * n);
  std::size_t iter = 0;
  for (; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i = -1;
    for (std::size_t t = 0; t < n; ++t)
      if (up(t) && -y[t] * G[t] > gmax) {
        gmax = -y[t] * G[t];
        i = static_cast<std::ptrdiff_t>(t);
      }
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t j = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      if (!low(t)) continue;
      gmax2 = std::max(gmax2, y[t] * G[t]);
      if (i < 0) continue;
      const double diff = gmax + y[t] * G[t];
      if (diff > 0.0) {
        const auto ii = static_cast<std::size_t>(i);
        double quad = K[ii * n + ii] + K[t * n + t] - 2.0 * K[ii * n + t];
        if (quad <= 0.0) quad = kTau;
        const double obj = -(diff * diff) / quad;
        if (obj < best_obj) {
          best_obj = obj;
          j = static_cast<std::ptrdiff_t>(t);
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < tolerance) break;

    const auto ii = static_cast<std::size_t>(i);
    const auto jj = static_cast<std::size_t>(j);
    const double Qij = y[ii] * y[jj] * K[ii * n + jj];
    const double old_i = a[ii], old_j = a[jj];
    if (y[ii] != y[jj]) {
      double quad = K[ii * n + ii] + K[jj * n + jj] + 2.0 * Qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-G[ii] - G[jj]) / quad;
      const double diff = a[ii] - a[jj];
      a[ii] += delta;
      a[jj] += delta;
      if (diff > 0.0) {
        if (a[jj] < 0.0) { a[jj] = 0.0; a[ii] = diff; }
      } else {
        if (a[ii] < 0.0) { a[ii] = 0.0; a[jj] = -diff; }
      }
      if (diff > 0.0) {
        if (a[ii] > C) { a[ii] = C; a[jj] = C - diff; }
      } else {
        if (a[jj] > C) { a[jj] = C; a[ii] = C + diff; }
      }
    } else {
      double quad = K[ii * n + ii] + K[jj * n + jj] - 2.0 * Qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (G[ii] - G[jj]) / quad;
      const double sum = a[ii] + a[jj];
      a[ii] -= delta;
      a[jj] += delta;
      if (sum > C) {
        if (a[ii] > C) { a[ii] = C; a[jj] = sum - C; }
      } else {
        if (a[jj] < 0.0) { a[jj] = 0.0; a[ii] = sum; }
      }
      if (sum > C) {
        if (a[jj] > C) { a[jj] = C; a[ii] = sum - C; }
      } else {
        if (a[ii] < 0.0) { a[ii] = 0.0; a[jj] = sum; }
      }
    }
    const double di = a[ii] - old_i, dj = a[jj] - old_j;
    for (std::size_t t = 0; t < n; ++t)
      G[t] += y[t] * (y[ii] * K[ii * n + t] * di + y[jj] * K[jj * n + t] * dj);
  }
  m.iterations = static_cast<int>(iter);

  // Bias: average over free vectors, else the midpoint of the feasible range.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yG = y[t] * G[t];
    if (a[t] >= C) {
      if (y[t] < 0) ub = std::min(ub, yG); else lb = std::max(lb, yG);
    } else if (a[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yG); else lb = std::max(lb, yG);
    } else {
      ++n_free;
      sum_free += yG;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  m.bias = -rho;
  return m;
}

double svm_decision(const SvmModel& m, double x) {
  double f = m.bias;
  for (std::size_t i = 0; i < m.xs.size(); ++i)
    if (m.alpha[i] > 0.0) f += m.alpha[i] * m.ys[i] * rbf_kernel(m.xs[i], x, m.gamma);
  return f;
}

int svm_predict(const SvmModel& m, double x) { return svm_decision(m, x) >= 0.0 ? 1 : 0; }

// ---- unified model ----------------------------------------------------------

const char* detector_name(DetectorKind k) {
  switch (k) {
    case DetectorKind::knn: return "knn";
    case DetectorKind::dtree: return "dtree";
    case DetectorKind::rforest: return "rforest";
    case DetectorKind::svm: return "svm";
  }
  return "knn";
}

DetectorKind parse_detector(const std::string& s) {
  if (s == "knn") return DetectorKind::knn;
  if (s == "dtree") return DetectorKind::dtree;
  if (s == "rforest") return DetectorKind::rforest;
  if (s == "svm") return DetectorKind::svm;
  config_error("unknown classifier '" + s + "' (expected knn|dtree|rforest|svm)");
}

nlohmann::ordered_json Hyperparams::to_json() const {
  nlohmann::ordered_json j;
  switch (kind) {
    case DetectorKind::knn: j["k"] = k; break;
    case DetectorKind::dtree: j["max_depth"] = max_depth; break;
    case DetectorKind::rforest:
      j["n_trees"] = n_trees;
      j["max_depth"] = max_depth;
      break;
    case DetectorKind::svm:
      j["C"] = C;
      j["gamma"] = gamma;
      break;
  }
  return j;
}

int DetectorModel::predict(double x) const {
  return std::visit(
      [x](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KnnModel>) return knn_predict(m, x);
        else if constexpr (std::is_same_v<T, TreeModel>) return dtree_predict(m, x);
        else if constexpr (std::is_same_v<T, ForestModel>) return rforest_predict(m, x);
        else return svm_predict(m, x);
      },
      model);
}

Hyperparams DetectorModel::hyperparams() const {
  Hyperparams hp;
  hp.kind = kind;
  std::visit(
      [&hp](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KnnModel>) {
          hp.k = m.k;
        } else if constexpr (std::is_same_v<T, TreeModel>) {
          hp.max_depth = m.max_depth;
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          hp.n_trees = m.n_trees;
          hp.max_depth = m.max_depth;
        } else {
          hp.C = m.C;
          hp.gamma = m.gamma;
        }
      },
      model);
  return hp;
}

DetectorModel fit(std::span<const LabeledScore> train, const Hyperparams& hp,
                  std::uint64_t seed) {
  DetectorModel d;
  d.kind = hp.kind;
  switch (hp.kind) {
    case DetectorKind::knn: d.model = knn_fit(train, hp.k); break;
    case DetectorKind::dtree: d.model = dtree_fit(train, hp.max_depth); break;
    case DetectorKind::rforest:
      d.model = rforest_fit(train, hp.n_trees, hp.max_depth, seed);
      break;
    case DetectorKind::svm: d.model = svm_fit(train, hp.C, hp.gamma); break;
  }
  return d;
}

namespace {

nlohmann::ordered_json tree_to_json(const TreeModel& t) {
  auto nodes = nlohmann::ordered_json::array();
  for (const auto& nd : t.nodes) {
    nlohmann::ordered_json j;
    if (nd.left < 0) {
      j["label"] = nd.label;
    } else {
      j["threshold"] = nd.threshold;
      j["left"] = nd.left;
      j["right"] = nd.right;
      j["label"] = nd.label;
    }
    nodes.push_back(std::move(j));
  }
  return nodes;
}

TreeModel tree_from_json(const nlohmann::json& nodes, int max_depth) {
  TreeModel t;
  t.max_depth = max_depth;
  for (const auto& j : nodes) {
    TreeNode nd;
    nd.label = j.at("label").get<int>();
    if (j.contains("left")) {
      nd.threshold = j.at("threshold").get<double>();
      nd.left = j.at("left").get<int>();
      nd.right = j.at("right").get<int>();
      const auto count = static_cast<int>(nodes.size());
      if (nd.left <= 0 || nd.right <= 0 || nd.left >= count || nd.right >= count)
        data_error("detector JSON: tree child index out of range");
    }
    t.nodes.push_back(nd);
  }
  if (t.nodes.empty()) data_error("detector JSON: empty tree");
  return t;
}

}  // namespace

nlohmann::ordered_json to_json(const DetectorModel& d) {
  nlohmann::ordered_json j;
  j["kind"] = detector_name(d.kind);
  std::visit(
      [&j](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KnnModel>) {
          j["hyperparameters"] = {{"k", m.k}};
          auto train = nlohmann::ordered_json::array();
          for (const auto& p : m.train) train.push_back({p.x, p.y});
          j["train"] = std::move(train);
        } else if constexpr (std::is_same_v<T, TreeModel>) {
          j["hyperparameters"] = {{"max_depth", m.max_depth}};
          j["nodes"] = tree_to_json(m);
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          j["hyperparameters"] = {{"n_trees", m.n_trees},
                                  {"max_depth", m.max_depth},
                                  {"seed", m.seed},
                                  {"bootstrap", m.bootstrap}};
          auto trees = nlohmann::ordered_json::array();
          for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
          j["trees"] = std::move(trees);
        } else {
          j["hyperparameters"] = {{"C", m.C}, {"gamma", m.gamma}};
          j["bias"] = m.bias;
          auto sv = nlohmann::ordered_json::array();
          for (std::size_t i = 0; i < m.xs.size(); ++i)
            if (m.alpha[i] > 0.0)
              sv.push_back({{"x", m.xs[i]}, {"y", m.ys[i]}, {"alpha", m.alpha[i]}});
          j["support_vectors"] = std::move(sv);
        }
      },
      d.model);
  return j;
}

DetectorModel detector_from_json(const nlohmann::json& j) {
  try {
    DetectorModel d;
    d.kind = parse_detector(j.at("kind").get<std::string>());
    const auto& hp = j.at("hyperparameters");
    switch (d.kind) {
      case DetectorKind::knn: {
        std::vector<LabeledScore> train;
        for (const auto& p : j.at("train"))
          train.push_back({p.at(0).get<double>(), p.at(1).get<int>()});
        d.model = knn_fit(train, hp.at("k").get<int>());
        break;
      }
      case DetectorKind::dtree:
        d.model = tree_from_json(j.at("nodes"), hp.at("max_depth").get<int>());
        break;
      case DetectorKind::rforest: {
        ForestModel f;
        f.n_trees = hp.at("n_trees").get<int>();
        f.max_depth = hp.at("max_depth").get<int>();
        f.seed = hp.at("seed").get<std::uint64_t>();
        f.bootstrap = hp.value("bootstrap", true);
        for (const auto& t : j.at("trees")) f.trees.push_back(tree_from_json(t, f.max_depth));
        if (static_cast<int>(f.trees.size()) != f.n_trees)
          data_error("detector JSON: tree count does not match n_trees");
        d.model = std::move(f);
        break;
      }
      case DetectorKind::svm: {
        SvmModel m;
        m.C = hp.at("C").get<double>();
        m.gamma = hp.at("gamma").get<double>();
        m.bias = j.at("bias").get<double>();
        for (const auto& sv : j.at("support_vectors")) {
          m.xs.push_back(sv.at("x").get<double>());
          m.ys.push_back(sv.at("y").get<int>());
          m.alpha.push_back(sv.at("alpha").get<double>());
        }
        d.model = std::move(m);
        break;
      }
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    data_error(std::string("detector JSON: ") + e.what());
  }
}

// ---- tuning -----------------------------------------------------------------

std::vector<Hyperparams> default_grid(DetectorKind kind) {
  std::vector<Hyperparams> g;
  Hyperparams hp;
  hp.kind = kind;
  switch (kind) {
    case DetectorKind::knn:
      for (int k : {1, 3, 5, 7, 9, 11, 13, 15}) { hp.k = k; g.push_back(hp); }
      break;
    case DetectorKind::dtree:
      for (int d : {1, 2, 3, 4, 5}) { hp.max_depth = d; g.push_back(hp); }
      break;
    case DetectorKind::rforest:
      for (int t : {11, 51, 101})
        for (int d : {2, 3, 5}) {
          hp.n_trees = t;
          hp.max_depth = d;
          g.push_back(hp);
        }
      break;
    case DetectorKind::svm:
      for (double c : {0.1, 1.0, 10.0, 100.0})
        for (double gm : {0.1, 1.0, 10.0, 100.0}) {
          hp.C = c;
          hp.gamma = gm;
          g.push_back(hp);
        }
      break;
  }
  return g;
}

TuneResult tune(std::span<const LabeledScore> train, DetectorKind kind,
                const std::vector<Hyperparams>& grid, int folds, std::uint64_t seed) {
  if (grid.empty()) config_error("tune: empty grid");
  if (folds < 2) config_error("tune: folds must be >= 2");
  std::vector<std::size_t> by_label[2];
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].y != 0 && train[i].y != 1) data_error("tune: labels must be 0/1");
    by_label[train[i].y].push_back(i);
  }
  const std::size_t smallest = std::min(by_label[0].size(), by_label[1].size());
  if (smallest < 2)
    data_error("tune: each label needs at least 2 records for cross-validation");
  if (smallest < static_cast<std::size_t>(folds)) folds = static_cast<int>(smallest);

  std::vector<int> fold_of(train.size());
  SplitMix64 rng(seed);
  for (auto& idx : by_label) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    for (std::size_t p = 0; p < idx.size(); ++p)
      fold_of[idx[p]] = static_cast<int>(p % static_cast<std::size_t>(folds));
  }

  TuneResult result;
  result.folds = folds;
  result.cv_accuracy = -1.0;
  std::vector<LabeledScore> tr, te;
  for (const auto& hp0 : grid) {
    Hyperparams hp = hp0;
    hp.kind = kind;
    std::size_t correct = 0;
    bool feasible = true;
    for (int f = 0; f < folds && feasible; ++f) {
      tr.clear();
      te.clear();
      for (std::size_t i = 0; i < train.size(); ++i)
        (fold_of[i] == f ? te : tr).push_back(train[i]);
      if (kind == DetectorKind::knn && static_cast<std::size_t>(hp.k) > tr.size()) {
        feasible = false;
        break;
      }
      const DetectorModel m = fit(tr, hp, derive_seed(seed, static_cast<std::uint64_t>(f)));
      for (const auto& p : te) correct += m.predict(p.x) == p.y;
    }
    const double acc = feasible ? static_cast<double>(correct) / static_cast<double>(train.size())
                                : -1.0;
    result.grid_accuracy.push_back(acc);
    if (acc > result.cv_accuracy) {
      result.cv_accuracy = acc;
      result.best = hp;
    }
  }
  if (result.cv_accuracy < 0.0) config_error("tune: no grid entry is feasible");
  return result;
}

Selection select_best(std::span<const LabeledScore> train, int folds, std::uint64_t seed) {
  Selection s;
  s.tuned.cv_accuracy = -1.0;
  for (DetectorKind kind : {DetectorKind::knn, DetectorKind::dtree, DetectorKind::rforest,
                            DetectorKind::svm}) {
    TuneResult r = tune(train, kind, default_grid(kind), folds, seed);
    s.cv_by_kind[detector_name(kind)] = r.cv_accuracy;
    if (r.cv_accuracy > s.tuned.cv_accuracy) s.tuned = std::move(r);
  }
  return s;
}

// ---- metrics ----------------------------------------------------------------

nlohmann::ordered_json Metrics::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["accuracy"] = accuracy;
  j["confusion"] = {{"tp", tp}, {"tn", tn}, {"fp", fp}, {"fn", fn}};
  nlohmann::ordered_json rates = nlohmann::ordered_json::object();
  for (const auto& [tag, rate] : detection_rate) rates[tag] = rate;
  j["detection_rate"] = std::move(rates);
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& [tag, c] : attack_count) counts[tag] = c;
  j["adversarial_count"] = std::move(counts);
  return j;
}

Metrics evaluate(const DetectorModel& m, const std::vector<ScoreRecord>& test) {
  if (test.empty()) data_error("evaluate: empty test set");
  Metrics out;
  out.n = test.size();
  std::map<std::string, std::size_t> hits;
  for (const auto& r : test) {
    const int pred = m.predict(r.score);
    if (r.label == 1) {
      (pred == 1 ? out.tp : out.fn) += 1;
      const std::string tag = attack_tag_name(r.attack);
      out.attack_count[tag] += 1;
      hits[tag] += pred == 1;
    } else {
      (pred == 0 ? out.tn : out.fp) += 1;
    }
  }
  out.accuracy = static_cast<double>(out.tp + out.tn) / static_cast<double>(out.n);
  for (const auto& [tag, count] : out.attack_count)
    out.detection_rate[tag] = static_cast<double>(hits[tag]) / static_cast<double>(count);
  return out;
}

}  // namespace fmd
