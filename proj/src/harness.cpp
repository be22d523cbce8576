#include "fmd/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fmd/error.hpp"
#include "fmd/rng.hpp"

namespace fmd {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---- hashing ----------------------------------------------------------------

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    data_error("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

namespace {

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) data_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) data_error("cannot write " + path.string());
  out << text;
}

std::string hash_text(const std::string& s) {
  return sha256_hex({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

}  // namespace

std::string sha256_file(const std::string& path) { return sha256_hex(read_bytes(path)); }

// ---- config -----------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (dataset.per_class < 2) config_error("dataset.per_class must be >= 2");
  if (dataset.noise_sigma < 0.0) config_error("dataset.noise_sigma must be >= 0");
  if (dataset.image_size != kInputSize) config_error("dataset.image_size must be 32");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) config_error("model.train_ratio must be in (0,1)");
  if (training.batch < 1) config_error("model.batch must be >= 1");
  if (training.epochs < 0) config_error("model.epochs must be >= 0");
  if (!(training.lr > 0.0)) config_error("model.lr must be > 0");
  if (!(training.momentum >= 0.0 && training.momentum < 1.0))
    config_error("model.momentum must be in [0,1)");
  if (min_candidates < 1) config_error("attacks.min_candidates must be >= 1");
  if (candidates < min_candidates) config_error("attacks.candidates below attacks.min_candidates");
  if (!(fgsm.epsilon > 0.0 && fgsm.epsilon <= 1.0)) config_error("attacks.fgsm.epsilon must be in (0,1]");
  bim.validate();
  if (filters.empty()) config_error("filters.enabled must not be empty");
  if (scoring.k < 1 || scoring.k > kNumClasses) config_error("scoring.k must be in [1,10]");
  if (scoring.denoise.median_window < 3 || scoring.denoise.median_window % 2 == 0)
    config_error("filters.median_window must be odd and >= 3");
  if (scoring.denoise.wiener_window < 3 || scoring.denoise.wiener_window % 2 == 0)
    config_error("filters.wiener_window must be odd and >= 3");
  if (!(detector_split > 0.0 && detector_split < 1.0))
    config_error("detectors.split_ratio must be in (0,1)");
  if (folds < 2) config_error("detectors.folds must be >= 2");
  if (selection != "auto") parse_detector(selection);
}

ojson ExperimentConfig::to_json() const {
  ojson j;
  j["seed"] = seed;
  j["dataset"] = {{"per_class", dataset.per_class},
                  {"image_size", dataset.image_size},
                  {"noise_sigma", dataset.noise_sigma}};
  j["model"] = {{"lr", training.lr},
                {"momentum", training.momentum},
                {"batch", training.batch},
                {"epochs", training.epochs},
                {"train_ratio", train_ratio},
                {"weights", weights}};
  j["attacks"] = {{"candidates", candidates},
                  {"min_candidates", min_candidates},
                  {"fgsm", {{"epsilon", fgsm.epsilon}}},
                  {"bim", {{"epsilon", bim.epsilon}, {"step", bim.step}, {"iterations", bim.iterations}}}};
  auto enabled = ojson::array();
  for (FilterTag f : filters) enabled.push_back(filter_tag_name(f));
  j["filters"] = {{"enabled", enabled},
                  {"median_window", scoring.denoise.median_window},
                  {"wiener_window", scoring.denoise.wiener_window}};
  j["scoring"] = {{"k", scoring.k},
                  {"norm", norm_name(scoring.norm)},
                  {"alignment", alignment_name(scoring.alignment)}};
  j["detectors"] = {{"split_ratio", detector_split}, {"folds", folds}, {"selection", selection}};
  return j;
}

namespace {

template <class T>
void take(const nlohmann::json& obj, const char* key, T& dst) {
  if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    config_error(std::string("config key '") + key + "': " + e.what());
  }
}

const nlohmann::json& section(const nlohmann::json& j, const char* key) {
  static const nlohmann::json empty = nlohmann::json::object();
  if (j.is_object() && j.contains(key)) {
    if (!j.at(key).is_object()) config_error(std::string("config section '") + key + "' must be an object");
    return j.at(key);
  }
  return empty;
}

void apply(ExperimentConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) config_error("config must be a JSON object");
  take(j, "seed", c.seed);
  take(j, "output_dir", c.output_dir);
  const auto& d = section(j, "dataset");
  take(d, "per_class", c.dataset.per_class);
  take(d, "image_size", c.dataset.image_size);
  take(d, "noise_sigma", c.dataset.noise_sigma);
  const auto& m = section(j, "model");
  take(m, "lr", c.training.lr);
  take(m, "momentum", c.training.momentum);
  take(m, "batch", c.training.batch);
  take(m, "epochs", c.training.epochs);
  take(m, "train_ratio", c.train_ratio);
  take(m, "weights", c.weights);
  const auto& a = section(j, "attacks");
  take(a, "candidates", c.candidates);
  take(a, "min_candidates", c.min_candidates);
  const auto& af = section(a, "fgsm");
  take(af, "epsilon", c.fgsm.epsilon);
  const auto& ab = section(a, "bim");
  take(ab, "epsilon", c.bim.epsilon);
  take(ab, "step", c.bim.step);
  take(ab, "iterations", c.bim.iterations);
  const auto& f = section(j, "filters");
  if (f.contains("enabled")) {
    std::vector<std::string> names;
    take(f, "enabled", names);
    c.filters.clear();
    for (const auto& n : names) c.filters.push_back(parse_filter_tag(n));
  }
  take(f, "median_window", c.scoring.denoise.median_window);
  take(f, "wiener_window", c.scoring.denoise.wiener_window);
  const auto& s = section(j, "scoring");
  take(s, "k", c.scoring.k);
  if (s.contains("norm")) c.scoring.norm = parse_norm(s.at("norm").get<std::string>());
  if (s.contains("alignment"))
    c.scoring.alignment = parse_alignment(s.at("alignment").get<std::string>());
  const auto& dt = section(j, "detectors");
  take(dt, "split_ratio", c.detector_split);
  take(dt, "folds", c.folds);
  take(dt, "selection", c.selection);
}

}  // namespace

ExperimentConfig resolve_config(const nlohmann::json* file, const nlohmann::json* overrides,
                                const char* env_seed) {
  ExperimentConfig c;
  if (file) apply(c, *file);
  if (env_seed && *env_seed) {
    try {
      std::size_t used = 0;
      c.seed = std::stoull(env_seed, &used, 10);
      if (used != std::string(env_seed).size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      config_error(std::string("FMD_SEED is not an unsigned integer: '") + env_seed + "'");
    }
  }
  if (overrides) apply(c, *overrides);
  c.dataset.seed = c.seed;
  c.training.seed = c.seed;
  c.validate();
  return c;
}

// ---- experiments ------------------------------------------------------------

namespace {

enum SeedSlot : std::uint64_t {
  kModelSplit = 1,
  kCandidates = 2,
  kDetectorSplit = 100,
  kDetectorTune = 300,
};

std::vector<ScoreRecord> by_attack(const std::vector<ScoreRecord>& records, AttackTag tag) {
  std::vector<ScoreRecord> out;
  for (const auto& r : records)
    if (r.attack == tag) out.push_back(r);
  return out;
}

std::pair<std::vector<ScoreRecord>, std::vector<ScoreRecord>> split_records(
    const std::vector<ScoreRecord>& records, double ratio, std::uint64_t seed) {
  return stratified_split(records, ratio, seed,
                          [](const ScoreRecord& r) { return static_cast<int>(r.attack); });
}

std::uint64_t cell_index(AttackTag attack, FilterTag filter) {
  return static_cast<std::uint64_t>(attack) * 2 + static_cast<std::uint64_t>(filter);
}

void save_detector(const std::string& dir, const std::string& name, const DetectorModel& m) {
  if (dir.empty()) return;
  fs::create_directories(dir);
  write_text(fs::path(dir) / (name + ".json"), to_json(m).dump(2) + "\n");
}

}  // namespace

ojson run_known_attack(const ExperimentConfig& cfg, const std::vector<ScoreRecord>& records,
                       AttackTag attack, FilterTag filter, const std::string& model_dir) {
  if (attack == AttackTag::clean) config_error("known-attack experiment needs fgsm or bim");
  auto data = by_attack(records, attack);
  const auto clean = by_attack(records, AttackTag::clean);
  if (data.size() != clean.size())
    data_error("known-attack set is unbalanced: " + std::to_string(data.size()) +
               " adversarial vs " + std::to_string(clean.size()) + " clean");
  data.insert(data.end(), clean.begin(), clean.end());

  const std::uint64_t cell = cell_index(attack, filter);
  auto [train, test] = split_records(data, cfg.detector_split,
                                     derive_seed(cfg.seed, kDetectorSplit + cell));
  const auto points = to_points(train);
  const std::uint64_t tune_seed = derive_seed(cfg.seed, kDetectorTune + cell);

  std::vector<DetectorKind> kinds{DetectorKind::knn, DetectorKind::dtree, DetectorKind::rforest};
  if (filter == FilterTag::wiener) kinds.push_back(DetectorKind::svm);

  ojson rows = ojson::array();
  for (DetectorKind kind : kinds) {
    const TuneResult tuned = tune(points, kind, default_grid(kind), cfg.folds, tune_seed);
    const DetectorModel model = fit(points, tuned.best, tune_seed);
    save_detector(model_dir,
                  std::string("known_") + attack_tag_name(attack) + "_" +
                      filter_tag_name(filter) + "_" + detector_name(kind),
                  model);
    ojson row;
    row["classifier"] = detector_name(kind);
    row["hyperparameters"] = tuned.best.to_json();
    row["cv_accuracy"] = tuned.cv_accuracy;
    row["cv_folds"] = tuned.folds;
    row["test"] = evaluate(model, test).to_json();
    rows.push_back(std::move(row));
  }
  ojson out;
  out["attack"] = attack_tag_name(attack);
  out["filter"] = filter_tag_name(filter);
  out["train_size"] = train.size();
  out["test_size"] = test.size();
  out["rows"] = std::move(rows);
  return out;
}

ojson run_hybrid(const ExperimentConfig& cfg, const std::vector<ScoreRecord>& records,
                 FilterTag filter, const std::string& model_dir) {
  const auto fg = by_attack(records, AttackTag::fgsm);
  const auto bi = by_attack(records, AttackTag::bim);
  const auto clean = by_attack(records, AttackTag::clean);
  if (fg.size() != bi.size() || fg.size() != clean.size())
    data_error("hybrid experiment expects equal fgsm/bim/clean record counts");
  const std::size_t half = fg.size() / 2;
  std::vector<ScoreRecord> data(fg.begin(), fg.begin() + static_cast<std::ptrdiff_t>(half));
  data.insert(data.end(), bi.begin() + static_cast<std::ptrdiff_t>(half), bi.end());
  data.insert(data.end(), clean.begin(), clean.end());

  const std::uint64_t cell = 10 + static_cast<std::uint64_t>(filter);
  auto [train, test] = split_records(data, cfg.detector_split,
                                     derive_seed(cfg.seed, kDetectorSplit + cell));
  const auto points = to_points(train);
  const std::uint64_t tune_seed = derive_seed(cfg.seed, kDetectorTune + cell);

  ojson out;
  out["filter"] = filter_tag_name(filter);
  out["adversarial"] = data.size() - clean.size();
  out["clean"] = clean.size();
  out["train_size"] = train.size();
  out["test_size"] = test.size();

  TuneResult tuned;
  ojson cv_by_kind = ojson::object();
  if (cfg.selection == "auto") {
    Selection s = select_best(points, cfg.folds, tune_seed);
    tuned = s.tuned;
    for (const char* k : {"knn", "dtree", "rforest", "svm"}) cv_by_kind[k] = s.cv_by_kind.at(k);
  } else {
    const DetectorKind kind = parse_detector(cfg.selection);
    tuned = tune(points, kind, default_grid(kind), cfg.folds, tune_seed);
    cv_by_kind[cfg.selection] = tuned.cv_accuracy;
  }
  const DetectorModel model = fit(points, tuned.best, tune_seed);
  save_detector(model_dir, std::string("hybrid_") + filter_tag_name(filter), model);

  out["selection"] = cfg.selection;
  out["selected"] = detector_name(tuned.best.kind);
  out["hyperparameters"] = tuned.best.to_json();
  out["cv_accuracy"] = tuned.cv_accuracy;
  out["cv_by_kind"] = std::move(cv_by_kind);
  out["test"] = evaluate(model, test).to_json();
  return out;
}

// ---- staged pipeline --------------------------------------------------------

namespace {

class StageRunner {
 public:
  StageRunner(const fs::path& root, bool resume, const LogFn& log)
      : root_(root), resume_(resume), log_(log) {}

  // Runs `compute` unless resume is on and the marker matches.
  template <class Fn>
  std::string run(const std::string& name, const ojson& inputs, const std::string& upstream,
                  Fn&& compute) {
    ojson fp_src{{"stage", name}, {"upstream", upstream}, {"inputs", inputs}};
    const std::string fp = hash_text(fp_src.dump());
    const fs::path marker = root_ / "stages" / (name + ".json");
    if (resume_ && fs::exists(marker)) {
      try {
        std::ifstream in(marker);
        const auto j = nlohmann::json::parse(in);
        bool complete = j.at("fingerprint").get<std::string>() == fp;
        for (const auto& f : j.at("files")) complete = complete && fs::exists(root_ / f.get<std::string>());
        if (complete) {
          say(name, "up to date, resuming from saved artifacts");
          return fp;
        }
      } catch (const std::exception&) {
        // unreadable marker: recompute
      }
    }
    fs::remove(marker);
    std::vector<std::string> files;
    try {
      files = compute();
    } catch (const Error& e) {
      throw Error(e.kind(), "stage " + name + ": " + e.what());
    }
    fs::create_directories(marker.parent_path());
    ojson m{{"stage", name}, {"fingerprint", fp}, {"files", files}};
    write_text(marker, m.dump(2) + "\n");
    return fp;
  }

  void say(const std::string& stage, const std::string& msg) const {
    if (log_) log_("[" + stage + "] " + msg);
  }

 private:
  fs::path root_;
  bool resume_;
  const LogFn& log_;
};

struct HeldOut {
  std::vector<std::string> names;
  Dataset samples;
};

std::string stem_name(int label, int index) {
  return "cls" + std::to_string(label) + "_" + std::to_string(index);
}

// Dataset plus the file stem of each sample, in manifest order.
std::pair<Dataset, std::vector<std::string>> read_named_dataset(const fs::path& dir) {
  Dataset data = read_dataset_dir(dir.string());
  std::vector<std::string> names;
  std::vector<int> counter(kNumClasses, 0);
  for (const auto& s : data) names.push_back(stem_name(s.label, counter[s.label]++));
  return {std::move(data), std::move(names)};
}

void write_named_dir(const fs::path& dir, const std::vector<std::string>& names,
                     const Dataset& data) {
  fs::create_directories(dir);
  std::ostringstream manifest;
  manifest << "filename,label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    save_ppm((dir / (names[i] + ".ppm")).string(), data[i].image);
    manifest << names[i] << ".ppm," << data[i].label << "\n";
  }
  write_text(dir / "manifest.csv", manifest.str());
}

std::vector<std::string> read_names(const fs::path& dir) {
  std::ifstream in(dir / "manifest.csv");
  if (!in) data_error("missing manifest.csv in " + dir.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> names;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    names.push_back(fs::path(line.substr(0, line.find(','))).stem().string());
  }
  return names;
}

std::string fmt(double v, int prec = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

}  // namespace

ExperimentResult run_all(const ExperimentConfig& cfg, bool resume, const LogFn& log) {
  cfg.validate();
  const fs::path root(cfg.output_dir);
  fs::create_directories(root);
  StageRunner stages(root, resume, log);
  const ojson cj = cfg.to_json();

  // dataset
  const fs::path dataset_dir = root / "dataset";
  const std::string fp_data =
      stages.run("dataset", {{"seed", cj["seed"]}, {"dataset", cj["dataset"]}}, "", [&] {
        fs::remove_all(dataset_dir);
        DatasetSpec spec = cfg.dataset;
        spec.seed = cfg.seed;
        write_dataset_dir(dataset_dir.string(), generate(spec));
        stages.say("dataset", "wrote " + std::to_string(spec.per_class * kNumClasses) +
                                  " images to " + dataset_dir.string());
        return std::vector<std::string>{"dataset/manifest.csv"};
      });
  auto [dataset, names] = read_named_dataset(dataset_dir);

  // Tag each sample with its name so the split carries names along.
  struct Named {
    std::size_t index;
    int label;
  };
  std::vector<Named> refs;
  for (std::size_t i = 0; i < dataset.size(); ++i) refs.push_back({i, dataset[i].label});
  auto [train_refs, held_refs] = stratified_split(
      refs, cfg.train_ratio, derive_seed(cfg.seed, kModelSplit), [](const Named& n) { return n.label; });
  Dataset train_set, held_set;
  std::vector<std::string> held_names;
  for (const auto& r : train_refs) train_set.push_back(dataset[r.index]);
  for (const auto& r : held_refs) {
    held_set.push_back(dataset[r.index]);
    held_names.push_back(names[r.index]);
  }

  // model
  const fs::path model_dir = root / "model";
  const fs::path weights_path = model_dir / "weights.fmdw";
  ojson model_inputs = cj["model"];
  if (!cfg.weights.empty()) model_inputs["weights_sha256"] = sha256_file(cfg.weights);
  const std::string fp_model = stages.run("model", model_inputs, fp_data, [&] {
    fs::remove_all(model_dir);
    fs::create_directories(model_dir);
    ojson epochs = ojson::array();
    if (!cfg.weights.empty()) {
      save_weights_file(weights_path.string(), load_weights_file(cfg.weights));
      stages.say("model", "loaded weights from " + cfg.weights);
    } else {
      const TrainResult r = train(train_set, cfg.training, &held_set, [&](const EpochLog& e) {
        stages.say("model", "epoch " + std::to_string(e.epoch) + " loss " + fmt(e.mean_loss, 4) +
                                " train " + fmt(e.train_accuracy, 3) + " held-out " +
                                fmt(e.validation_accuracy, 3));
      });
      for (const auto& e : r.log)
        epochs.push_back({{"epoch", e.epoch},
                          {"mean_loss", e.mean_loss},
                          {"train_accuracy", e.train_accuracy},
                          {"heldout_accuracy", e.validation_accuracy}});
      save_weights_file(weights_path.string(), r.params);
    }
    write_text(model_dir / "train_log.json", epochs.dump(2) + "\n");
    return std::vector<std::string>{"model/weights.fmdw", "model/train_log.json"};
  });
  const ModelParams params = load_weights_file(weights_path.string());
  const Network net(params);
  ojson train_log;
  {
    std::ifstream in(model_dir / "train_log.json");
    train_log = ojson::parse(in);
  }

  // attacks
  const fs::path adv_dir = root / "adversarial";
  ojson attack_inputs{{"attacks", cj["attacks"]}};
  const std::string fp_attacks = stages.run("attacks", attack_inputs, fp_model, [&] {
    fs::remove_all(adv_dir);
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < held_set.size(); ++i)
      if (net.predict(held_set[i].image) == held_set[i].label) candidates.push_back(i);
    SplitMix64 rng(derive_seed(cfg.seed, kCandidates));
    for (std::size_t i = candidates.size(); i > 1; --i)
      std::swap(candidates[i - 1], candidates[rng.below(i)]);

    std::size_t n = static_cast<std::size_t>(cfg.candidates);
    if (2 * n > candidates.size()) {
      n = candidates.size() / 2;
      stages.say("attacks", "warning: only " + std::to_string(candidates.size()) +
                                " correctly classified held-out images; using " +
                                std::to_string(n) + " per attack");
    }
    if (n < static_cast<std::size_t>(cfg.min_candidates))
      data_error("only " + std::to_string(n) + " attack candidates available (floor " +
                 std::to_string(cfg.min_candidates) + ")");

    std::vector<std::string> adv_names, clean_names;
    Dataset sources, clean;
    for (std::size_t i = 0; i < n; ++i) {
      sources.push_back(held_set[candidates[i]]);
      adv_names.push_back(held_names[candidates[i]]);
      clean.push_back(held_set[candidates[n + i]]);
      clean_names.push_back(held_names[candidates[n + i]]);
    }
    write_named_dir(adv_dir / "clean", clean_names, clean);

    for (AttackMethod method : {AttackMethod::fgsm, AttackMethod::bim}) {
      const AttackConfig& ac = method == AttackMethod::fgsm ? cfg.fgsm : cfg.bim;
      Dataset out;
      std::ostringstream logcsv;
      logcsv << "filename,label,pred_clean,pred_adv,linf\n";
      for (std::size_t i = 0; i < n; ++i) {
        const Sample& s = sources[i];
        Image adv = quantize8(attack(method, net, s.image, s.label, ac));
        char linf[32];
        std::snprintf(linf, sizeof linf, "%.9g", linf_distance(adv, s.image));
        logcsv << adv_names[i] << ".ppm," << s.label << "," << net.predict(s.image) << ","
               << net.predict(adv) << "," << linf << "\n";
        out.push_back({std::move(adv), s.label});
      }
      const fs::path dir = adv_dir / attack_name(method);
      write_named_dir(dir, adv_names, out);
      write_text(dir / "attack_log.csv", logcsv.str());
      stages.say("attacks", std::string(attack_name(method)) + ": " + std::to_string(n) + " images");
    }
    return std::vector<std::string>{"adversarial/clean/manifest.csv", "adversarial/fgsm/manifest.csv",
                                    "adversarial/bim/manifest.csv"};
  });

  struct Pool {
    AttackTag tag;
    Dataset data;
    std::vector<std::string> names;
  };
  std::vector<Pool> pools;
  for (AttackTag tag : {AttackTag::fgsm, AttackTag::bim, AttackTag::clean}) {
    const fs::path dir = adv_dir / attack_tag_name(tag);
    pools.push_back({tag, read_dataset_dir(dir.string()), read_names(dir)});
  }
  const std::size_t n_per_attack = pools[0].data.size();

  ojson attacks_report;
  attacks_report["candidates_requested"] = cfg.candidates;
  attacks_report["n_per_attack"] = n_per_attack;
  for (const auto& pool : pools) {
    if (pool.tag == AttackTag::clean) continue;
    std::size_t correct = 0;
    for (const auto& s : pool.data) correct += net.predict(s.image) == s.label;
    attacks_report[attack_tag_name(pool.tag)] = {
        {"accuracy_on_adversarial", static_cast<double>(correct) / static_cast<double>(pool.data.size())}};
  }

  // scores
  const fs::path scores_dir = root / "scores";
  ojson score_inputs{{"filters", cj["filters"]}, {"scoring", cj["scoring"]}};
  stages.run("scores", score_inputs, fp_attacks, [&] {
    fs::remove_all(scores_dir);
    fs::create_directories(scores_dir);
    std::vector<std::string> files;
    for (FilterTag filter : cfg.filters) {
      std::vector<ScoreInput> inputs;
      for (const auto& pool : pools)
        for (std::size_t i = 0; i < pool.data.size(); ++i)
          inputs.push_back({std::string(attack_tag_name(pool.tag)) + "/" + pool.names[i],
                            &pool.data[i].image, pool.tag});
      const auto records = score_dataset(net, inputs, filter, cfg.scoring);
      const std::string rel = std::string("scores/") + filter_tag_name(filter) + ".csv";
      write_scores_csv((root / rel).string(), records);
      files.push_back(rel);
      stages.say("scores", std::string(filter_tag_name(filter)) + ": " +
                               std::to_string(records.size()) + " records");
    }
    return files;
  });

  // detectors + report
  const fs::path det_dir = root / "detectors";
  fs::remove_all(det_dir);
  ojson report;
  report["config"] = cj;
  report["dataset"] = {{"images", dataset.size()},
                       {"model_train", train_set.size()},
                       {"heldout", held_set.size()}};
  report["model"] = {{"train_accuracy", accuracy(params, train_set)},
                     {"heldout_accuracy", accuracy(params, held_set)},
                     {"epochs", train_log}};
  report["attacks"] = attacks_report;

  ojson score_summary = ojson::object();
  ojson known = ojson::array();
  ojson hybrid = ojson::array();
  for (FilterTag filter : cfg.filters) {
    const auto records =
        read_scores_csv((scores_dir / (std::string(filter_tag_name(filter)) + ".csv")).string());
    ojson means;
    for (AttackTag tag : {AttackTag::clean, AttackTag::fgsm, AttackTag::bim}) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& r : records)
        if (r.attack == tag) {
          sum += r.score;
          ++count;
        }
      means[std::string("mean_") + attack_tag_name(tag)] = count ? sum / static_cast<double>(count) : 0.0;
    }
    score_summary[filter_tag_name(filter)] = means;
    for (AttackTag attack : {AttackTag::fgsm, AttackTag::bim}) {
      stages.say("detectors", std::string("known attack ") + attack_tag_name(attack) + " / " +
                                  filter_tag_name(filter));
      known.push_back(run_known_attack(cfg, records, attack, filter, det_dir.string()));
    }
    stages.say("detectors", std::string("hybrid / ") + filter_tag_name(filter));
    hybrid.push_back(run_hybrid(cfg, records, filter, det_dir.string()));
  }
  report["scores"] = score_summary;
  report["known_attack"] = known;
  report["hybrid"] = hybrid;

  ExperimentResult result{report, format_report_text(report)};
  write_text(root / "report.json", report.dump(2) + "\n");
  write_text(root / "report.txt", result.report_text);

  // manifest of every artifact (excluding the manifest itself)
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) {
      const std::string rel = fs::relative(e.path(), root).generic_string();
      if (rel != "manifest.json") files.push_back(rel);
    }
  std::sort(files.begin(), files.end());
  ojson manifest = ojson::array();
  for (const auto& rel : files)
    manifest.push_back({{"path", rel},
                        {"bytes", fs::file_size(root / rel)},
                        {"sha256", sha256_file((root / rel).string())}});
  write_text(root / "manifest.json", manifest.dump(2) + "\n");
  stages.say("report", "wrote " + (root / "report.json").string());
  return result;
}

std::string format_report_text(const ojson& report) {
  std::ostringstream os;
  const auto& model = report.at("model");
  os << "Model: train accuracy " << fmt(model.at("train_accuracy").get<double>(), 3)
     << ", held-out accuracy " << fmt(model.at("heldout_accuracy").get<double>(), 3) << "\n";
  const auto& attacks = report.at("attacks");
  os << "Attacks: " << attacks.at("n_per_attack").get<int>() << " images per attack";
  for (const char* a : {"fgsm", "bim"})
    if (attacks.contains(a))
      os << ", " << a << " accuracy "
         << fmt(attacks.at(a).at("accuracy_on_adversarial").get<double>(), 3);
  os << "\n\n";

  // Known attacks: one block of columns per filter.
  std::vector<std::string> filters;
  for (const auto& h : report.at("hybrid")) filters.push_back(h.at("filter").get<std::string>());

  auto find_cell = [&](const std::string& attack, const std::string& filter) -> const ojson* {
    for (const auto& c : report.at("known_attack"))
      if (c.at("attack") == attack && c.at("filter") == filter) return &c;
    return nullptr;
  };

  os << "Known-attack detection rate (test accuracy)\n";
  std::ostringstream h1, h2;
  h1 << std::left << std::setw(8) << "";
  h2 << std::left << std::setw(8) << "";
  std::vector<std::pair<std::string, std::vector<std::string>>> columns;
  for (const auto& f : filters) {
    const ojson* cell = find_cell("fgsm", f);
    std::vector<std::string> kinds;
    if (cell)
      for (const auto& r : cell->at("rows")) kinds.push_back(r.at("classifier").get<std::string>());
    const std::string title = f == "median" ? "Median filter" : "Wiener filter";
    h1 << std::setw(static_cast<int>(kinds.size()) * 8 + 2) << title;
    for (const auto& k : kinds) {
      std::string up = k == "dtree" ? "DT" : k == "rforest" ? "RF" : k == "knn" ? "KNN" : "SVM";
      h2 << std::setw(8) << up;
    }
    h2 << "  ";
    columns.emplace_back(f, kinds);
  }
  os << h1.str() << "\n" << h2.str() << "\n";
  for (const char* attack : {"fgsm", "bim"}) {
    std::string label = attack;
    std::transform(label.begin(), label.end(), label.begin(), ::toupper);
    os << std::left << std::setw(8) << label;
    for (const auto& [f, kinds] : columns) {
      const ojson* cell = find_cell(attack, f);
      for (std::size_t i = 0; i < kinds.size(); ++i)
        os << std::setw(8)
           << (cell ? fmt(cell->at("rows").at(i).at("test").at("accuracy").get<double>()) : "-");
      os << "  ";
    }
    os << "\n";
  }

  os << "\nHybrid-attack detection rate (best classifier by CV)\n";
  os << std::left << std::setw(10) << "";
  for (const auto& f : filters) os << std::setw(16) << (f == "median" ? "Median filter" : "Wiener filter");
  os << "\n";
  for (const char* attack : {"fgsm", "bim"}) {
    std::string label = attack;
    std::transform(label.begin(), label.end(), label.begin(), ::toupper);
    os << std::setw(10) << label;
    for (const auto& h : report.at("hybrid")) {
      const auto& rates = h.at("test").at("detection_rate");
      os << std::setw(16) << (rates.contains(attack) ? fmt(rates.at(attack).get<double>()) : "-");
    }
    os << "\n";
  }
  os << std::setw(10) << "Overall";
  for (const auto& h : report.at("hybrid"))
    os << std::setw(16) << fmt(h.at("test").at("accuracy").get<double>());
  os << "\n" << std::setw(10) << "Selected";
  for (const auto& h : report.at("hybrid"))
    os << std::setw(16) << h.at("selected").get<std::string>();
  os << "\n";
  return os.str();
}

}  // namespace fmd
