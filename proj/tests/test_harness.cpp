#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fmd/error.hpp"
#include "fmd/harness.hpp"

using namespace fmd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::data;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Separable synthetic score records: clean near 0, adversarial near 1.
std::vector<ScoreRecord> synthetic(int n, FilterTag filter) {
  std::vector<ScoreRecord> out;
  for (AttackTag tag : {AttackTag::fgsm, AttackTag::bim, AttackTag::clean})
    for (int i = 0; i < n; ++i) {
      ScoreRecord r;
      r.image_id = std::string(attack_tag_name(tag)) + "/" + std::to_string(i);
      r.attack = tag;
      r.filter = filter;
      r.label = tag == AttackTag::clean ? 0 : 1;
      r.score = (tag == AttackTag::clean ? 0.0 : 1.0) + 0.001 * i;
      out.push_back(r);
    }
  return out;
}

ExperimentConfig small_config(const fs::path& dir) {
  json o = {{"output_dir", dir.string()},
            {"dataset", {{"per_class", 20}}},
            {"model", {{"epochs", 3}}},
            {"attacks", {{"candidates", 12}, {"min_candidates", 4}}},
            {"detectors", {{"folds", 2}}}};
  return resolve_config(nullptr, &o, nullptr);
}

}  // namespace

TEST(Config, Defaults) {
  const auto c = resolve_config(nullptr, nullptr, nullptr);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.candidates, 200);
  EXPECT_EQ(c.min_candidates, 50);
  EXPECT_EQ(c.folds, 5);
  EXPECT_DOUBLE_EQ(c.detector_split, 0.5);
  EXPECT_EQ(c.filters.size(), 2u);
  EXPECT_EQ(c.dataset.seed, 42u);
  EXPECT_EQ(c.training.seed, 42u);
}

TEST(Config, Layering) {
  const json file = {{"seed", 7}, {"dataset", {{"per_class", 30}}}, {"scoring", {{"k", 3}}}};
  const json over = {{"scoring", {{"k", 4}, {"norm", "l2"}}}};
  auto c = resolve_config(&file, nullptr, nullptr);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.dataset.per_class, 30);
  EXPECT_EQ(c.scoring.k, 3);

  c = resolve_config(&file, nullptr, "99");
  EXPECT_EQ(c.seed, 99u);  // env beats file
  EXPECT_EQ(c.dataset.seed, 99u);

  c = resolve_config(&file, &over, "99");
  EXPECT_EQ(c.scoring.k, 4);  // override beats file
  EXPECT_EQ(c.scoring.norm, Norm::l2);
  EXPECT_EQ(c.dataset.per_class, 30);

  const json seed_over = {{"seed", 5}};
  EXPECT_EQ(resolve_config(&file, &seed_over, "99").seed, 5u);
  EXPECT_EQ(resolve_config(&file, nullptr, "").seed, 7u);  // empty env ignored
}

TEST(Config, Errors) {
  EXPECT_EQ(kind_of([] { resolve_config(nullptr, nullptr, "abc"); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { resolve_config(nullptr, nullptr, "12x"); }), ErrorKind::config);
  auto bad = [](json j) { return kind_of([&] { resolve_config(&j, nullptr, nullptr); }); };
  EXPECT_EQ(bad(json::array()), ErrorKind::config);
  EXPECT_EQ(bad({{"dataset", 3}}), ErrorKind::config);
  EXPECT_EQ(bad({{"dataset", {{"per_class", "many"}}}}), ErrorKind::config);
  EXPECT_EQ(bad({{"dataset", {{"per_class", 1}}}}), ErrorKind::config);
  EXPECT_EQ(bad({{"model", {{"train_ratio", 1.0}}}}), ErrorKind::config);
  EXPECT_EQ(bad({{"model", {{"momentum", 1.0}}}}), ErrorKind::config);
  EXPECT_EQ(bad({{"attacks", {{"candidates", 10}, {"min_candidates", 20}}}}), ErrorKind::config);
  EXPECT_EQ(bad({{"filters", {{"enabled", json::array()}}}}), ErrorKind::config);
  EXPECT_EQ(bad({{"filters", {{"enabled", {"gauss"}}}}}), ErrorKind::config);
  EXPECT_EQ(bad({{"filters", {{"median_window", 4}}}}), ErrorKind::config);
  EXPECT_EQ(bad({{"scoring", {{"k", 11}}}}), ErrorKind::config);
  EXPECT_EQ(bad({{"scoring", {{"norm", "l3"}}}}), ErrorKind::config);
  EXPECT_EQ(bad({{"scoring", {{"alignment", "both"}}}}), ErrorKind::config);
  EXPECT_EQ(bad({{"detectors", {{"folds", 1}}}}), ErrorKind::config);
  EXPECT_EQ(bad({{"detectors", {{"selection", "mlp"}}}}), ErrorKind::config);
}

TEST(Config, ShippedFileLoads) {
  std::ifstream in(FMD_SOURCE_DIR "/configs/default.json");
  ASSERT_TRUE(in);
  const json file = json::parse(in);
  const auto c = resolve_config(&file, nullptr, nullptr);
  EXPECT_EQ(c.seed, 42u);
  // to_json round-trips through apply
  const json echoed = c.to_json();
  const auto again = resolve_config(&echoed, nullptr, nullptr);
  EXPECT_EQ(again.to_json(), c.to_json());
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex({}), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const std::string abc = "abc";
  EXPECT_EQ(sha256_hex({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()}),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(KnownAttack, RowSetsAndSeparableData) {
  ExperimentConfig cfg = resolve_config(nullptr, nullptr, nullptr);
  for (FilterTag filter : {FilterTag::median, FilterTag::wiener}) {
    const auto recs = synthetic(40, filter);
    const auto cell = run_known_attack(cfg, recs, AttackTag::bim, filter);
    std::vector<std::string> kinds;
    for (const auto& r : cell["rows"]) {
      kinds.push_back(r["classifier"]);
      EXPECT_DOUBLE_EQ(r["test"]["accuracy"].get<double>(), 1.0);
    }
    std::vector<std::string> want{"knn", "dtree", "rforest"};
    if (filter == FilterTag::wiener) want.push_back("svm");
    EXPECT_EQ(kinds, want);
    EXPECT_EQ(cell["train_size"].get<int>() + cell["test_size"].get<int>(), 80);
    EXPECT_EQ(cell["train_size"].get<int>(), 40);
  }
  EXPECT_EQ(kind_of([&] { run_known_attack(cfg, synthetic(8, FilterTag::median), AttackTag::clean,
                                           FilterTag::median); }),
            ErrorKind::config);
  auto unbalanced = synthetic(20, FilterTag::median);
  unbalanced.pop_back();
  EXPECT_EQ(kind_of([&] { run_known_attack(cfg, unbalanced, AttackTag::fgsm, FilterTag::median); }),
            ErrorKind::data);
}

TEST(Hybrid, Composition) {
  ExperimentConfig cfg = resolve_config(nullptr, nullptr, nullptr);
  const auto recs = synthetic(40, FilterTag::wiener);
  const auto h = run_hybrid(cfg, recs, FilterTag::wiener);
  EXPECT_EQ(h["adversarial"].get<int>(), 40);
  EXPECT_EQ(h["clean"].get<int>(), 40);
  EXPECT_EQ(h["train_size"].get<int>() + h["test_size"].get<int>(), 80);
  EXPECT_EQ(h["cv_by_kind"].size(), 4u);
  EXPECT_DOUBLE_EQ(h["test"]["accuracy"].get<double>(), 1.0);
  // both attacks show up in the test half
  EXPECT_TRUE(h["test"]["detection_rate"].contains("fgsm"));
  EXPECT_TRUE(h["test"]["detection_rate"].contains("bim"));
  // perfectly separable: every kind ties at 1.0, so the first in order wins
  EXPECT_EQ(h["selected"], "knn");

  cfg.selection = "dtree";
  const auto fixed = run_hybrid(cfg, recs, FilterTag::wiener);
  EXPECT_EQ(fixed["selected"], "dtree");
  EXPECT_EQ(fixed["cv_by_kind"].size(), 1u);

  auto short_bim = recs;
  short_bim.erase(short_bim.begin() + 40);  // first bim record
  EXPECT_EQ(kind_of([&] { run_hybrid(cfg, short_bim, FilterTag::wiener); }), ErrorKind::data);
}

TEST(Pipeline, DeterministicResumableAndManifested) {
  const fs::path base = fs::temp_directory_path() / "fmd_test_harness";
  fs::remove_all(base);
  std::vector<std::string> lines;
  LogFn log = [&](const std::string& s) { lines.push_back(s); };

  const auto a_cfg = small_config(base / "a");
  const auto a = run_all(a_cfg, false, log);
  const std::string report_a = slurp(base / "a" / "report.json");
  ASSERT_FALSE(report_a.empty());
  const int n = a.report["attacks"]["n_per_attack"].get<int>();
  EXPECT_LE(n, 12);
  EXPECT_GE(n, 4);
  bool warned = false;
  for (const auto& l : lines) warned = warned || l.find("warning: only") != std::string::npos;
  EXPECT_EQ(warned, n < 12);
  EXPECT_EQ(a.report["known_attack"].size(), 4u);
  EXPECT_EQ(a.report["hybrid"].size(), 2u);
  EXPECT_EQ(slurp(base / "a" / "report.txt"), a.report_text);
  for (const char* f : {"dataset/manifest.csv", "model/weights.fmdw", "adversarial/fgsm/attack_log.csv",
                        "scores/median.csv", "scores/wiener.csv", "detectors/hybrid_wiener.json",
                        "detectors/known_fgsm_wiener_svm.json", "stages/scores.json"})
    EXPECT_TRUE(fs::exists(base / "a" / f)) << f;

  // manifest hashes match the files on disk
  const json manifest = json::parse(slurp(base / "a" / "manifest.json"));
  ASSERT_GT(manifest.size(), 10u);
  for (const auto& e : manifest) {
    const fs::path p = base / "a" / e["path"].get<std::string>();
    EXPECT_EQ(e["sha256"].get<std::string>(), sha256_file(p.string())) << p;
    EXPECT_EQ(e["bytes"].get<std::uintmax_t>(), fs::file_size(p));
  }

  // fresh run elsewhere: identical bytes
  run_all(small_config(base / "b"), false, {});
  EXPECT_EQ(slurp(base / "b" / "report.json"), report_a);
  EXPECT_EQ(slurp(base / "b" / "report.txt"), slurp(base / "a" / "report.txt"));

  // resume skips every stage and reproduces the report
  lines.clear();
  run_all(a_cfg, true, log);
  int resumed = 0;
  for (const auto& l : lines) resumed += l.find("up to date") != std::string::npos;
  EXPECT_EQ(resumed, 4);
  EXPECT_EQ(slurp(base / "a" / "report.json"), report_a);

  // a scoring change only invalidates the scores stage
  json over = {{"output_dir", (base / "a").string()},
               {"dataset", {{"per_class", 20}}},
               {"model", {{"epochs", 3}}},
               {"attacks", {{"candidates", 12}, {"min_candidates", 4}}},
               {"detectors", {{"folds", 2}}},
               {"scoring", {{"k", 3}}}};
  lines.clear();
  run_all(resolve_config(nullptr, &over, nullptr), true, log);
  std::vector<std::string> reused;
  for (const auto& l : lines)
    if (l.find("up to date") != std::string::npos) reused.push_back(l.substr(0, l.find(']') + 1));
  EXPECT_EQ(reused, (std::vector<std::string>{"[dataset]", "[model]", "[attacks]"}));

  // a deleted artifact forces recomputation of its stage
  fs::remove(base / "a" / "scores" / "wiener.csv");
  lines.clear();
  run_all(resolve_config(nullptr, &over, nullptr), true, log);
  EXPECT_TRUE(fs::exists(base / "a" / "scores" / "wiener.csv"));

  // too few candidates is a data error
  json starved = {{"output_dir", (base / "c").string()},
                  {"dataset", {{"per_class", 20}}},
                  {"model", {{"epochs", 3}}},
                  {"attacks", {{"candidates", 500}, {"min_candidates", 400}}}};
  EXPECT_EQ(kind_of([&] { run_all(resolve_config(nullptr, &starved, nullptr), false, {}); }),
            ErrorKind::data);
  fs::remove_all(base);
}
