// fmd command-line tool. Links only the C API.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fmd/fmd.h"

namespace {

constexpr int kConfigExit = 2;

void log_line(const char* msg, void*) { std::fprintf(stderr, "%s\n", msg); }

// FMD_SEED overrides the seed given on the command line or in a config.
bool env_seed(uint64_t& seed) {
  const char* s = std::getenv("FMD_SEED");
  if (!s || !*s) return true;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0' || s[0] == '-') {
    std::fprintf(stderr, "error: FMD_SEED is not an unsigned integer: '%s'\n", s);
    return false;
  }
  seed = v;
  return true;
}

int finish(fmd_status st, char* json = nullptr) {
  if (st != FMD_OK) {
    std::fprintf(stderr, "error: %s\n", fmd_last_error());
    fmd_string_free(json);
    return static_cast<int>(st);
  }
  if (json) {
    std::printf("%s\n", json);
    fmd_string_free(json);
  }
  return 0;
}

std::vector<const char*> c_strs(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Filter-based adversarial example detection toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fmd_version());
  int rc = 0;

  // dataset gen
  auto* dataset = app.add_subcommand("dataset", "Synthetic dataset tools");
  dataset->require_subcommand(1);
  auto* gen = dataset->add_subcommand("gen", "Generate the synthetic shapes dataset");
  std::string gen_out;
  uint64_t gen_seed = 42;
  int per_class = 100;
  double noise = 0.02;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--per-class", per_class, "Images per class");
  gen->add_option("--noise", noise, "Gaussian noise sigma");
  gen->callback([&] {
    if (!env_seed(gen_seed)) {
      rc = kConfigExit;
      return;
    }
    size_t n = 0;
    rc = finish(fmd_dataset_generate(gen_out.c_str(), gen_seed, per_class, noise, &n));
    if (rc == 0) std::printf("wrote %zu images to %s\n", n, gen_out.c_str());
  });

  // model train
  auto* model = app.add_subcommand("model", "Classifier tools");
  model->require_subcommand(1);
  auto* mtrain = model->add_subcommand("train", "Train the CNN on a dataset directory");
  std::string m_data, m_out, m_val;
  fmd_train_options topts;
  fmd_train_options_default(&topts);
  mtrain->add_option("--data", m_data, "Dataset directory")->required();
  mtrain->add_option("--out", m_out, "Weight file to write")->required();
  mtrain->add_option("--validation", m_val, "Optional validation dataset directory");
  mtrain->add_option("--seed", topts.seed, "Seed");
  mtrain->add_option("--lr", topts.lr, "Learning rate");
  mtrain->add_option("--momentum", topts.momentum, "Momentum");
  mtrain->add_option("--batch", topts.batch, "Batch size");
  mtrain->add_option("--epochs", topts.epochs, "Epochs");
  mtrain->callback([&] {
    if (!env_seed(topts.seed)) {
      rc = kConfigExit;
      return;
    }
    char* json = nullptr;
    rc = finish(fmd_model_train_dir(m_data.c_str(), m_out.c_str(), &topts,
                                    m_val.empty() ? nullptr : m_val.c_str(), log_line, nullptr,
                                    &json),
                json);
  });

  // attack
  auto* att = app.add_subcommand("attack", "Craft adversarial images for a directory");
  std::string a_model, a_in, a_out, a_method = "fgsm";
  double a_eps = 8.0 / 255.0, a_step = 2.0 / 255.0;
  int a_iter = 10;
  att->add_option("--model", a_model, "Weight file")->required();
  att->add_option("--in", a_in, "Input image directory")->required();
  att->add_option("--out", a_out, "Output directory")->required();
  att->add_option("--method", a_method, "fgsm | bim")->check(CLI::IsMember({"fgsm", "bim"}));
  att->add_option("--epsilon", a_eps, "L-infinity budget");
  att->add_option("--step", a_step, "BIM step size");
  att->add_option("--iterations", a_iter, "BIM iterations");
  att->callback([&] {
    char* json = nullptr;
    rc = finish(fmd_attack_dir(a_model.c_str(), a_in.c_str(), a_out.c_str(), a_method.c_str(),
                               a_eps, a_step, a_iter, &json),
                json);
  });

  // denoise
  auto* den = app.add_subcommand("denoise", "Apply a denoising filter to a directory");
  std::string d_in, d_out, d_filter = "median";
  int d_window = 3, d_kernel = 3;
  double d_K = 0.01;
  den->add_option("--in", d_in, "Input image directory")->required();
  den->add_option("--out", d_out, "Output directory")->required();
  den->add_option("--filter", d_filter, "median | wiener | wiener-deconv")
      ->check(CLI::IsMember({"median", "wiener", "wiener-deconv"}));
  den->add_option("--window", d_window, "Window size (odd)");
  den->add_option("--K", d_K, "Deconvolution regulariser");
  den->add_option("--kernel", d_kernel, "Box PSF size for deconvolution");
  den->callback([&] {
    size_t n = 0;
    rc = finish(fmd_denoise_dir(d_in.c_str(), d_out.c_str(), d_filter.c_str(), d_window, d_K,
                                d_kernel, &n));
    if (rc == 0) std::printf("wrote %zu images to %s\n", n, d_out.c_str());
  });

  // score
  auto* sc = app.add_subcommand("score", "Compute FMD scores for a directory");
  std::string s_model, s_in, s_out, s_filter = "median", s_attack = "clean";
  fmd_score_options sopts;
  fmd_score_options_default(&sopts);
  std::string s_norm = sopts.norm, s_align = sopts.alignment;
  bool s_append = false;
  sc->add_option("--model", s_model, "Weight file")->required();
  sc->add_option("--in", s_in, "Image directory")->required();
  sc->add_option("--out", s_out, "Score CSV to write")->required();
  sc->add_option("--filter", s_filter, "median | wiener")->check(CLI::IsMember({"median", "wiener"}));
  sc->add_option("--attack", s_attack, "Tag for the images: clean | fgsm | bim")
      ->check(CLI::IsMember({"clean", "fgsm", "bim"}));
  sc->add_option("--k", sopts.k, "Top-k size");
  sc->add_option("--norm", s_norm, "l1 | l2")->check(CLI::IsMember({"l1", "l2"}));
  sc->add_option("--alignment", s_align, "union | orig-only")->check(CLI::IsMember({"union", "orig-only"}));
  sc->add_option("--median-window", sopts.median_window, "Median window");
  sc->add_option("--wiener-window", sopts.wiener_window, "Adaptive Wiener window");
  sc->add_flag("--append", s_append, "Append to an existing CSV");
  sc->callback([&] {
    sopts.norm = s_norm.c_str();
    sopts.alignment = s_align.c_str();
    size_t n = 0;
    rc = finish(fmd_score_dir(s_model.c_str(), s_in.c_str(), s_filter.c_str(), s_attack.c_str(),
                              &sopts, s_out.c_str(), s_append ? 1 : 0, &n));
    if (rc == 0) std::printf("scored %zu images into %s\n", n, s_out.c_str());
  });

  // detect train / eval
  auto* det = app.add_subcommand("detect", "Score-based detectors");
  det->require_subcommand(1);
  auto* dtrain = det->add_subcommand("train", "Tune and fit a detector on score CSVs");
  std::vector<std::string> t_scores;
  std::string t_out, t_kind = "auto";
  int t_folds = 5;
  uint64_t t_seed = 42;
  dtrain->add_option("--scores", t_scores, "Score CSV files")->required();
  dtrain->add_option("--out", t_out, "Detector JSON to write")->required();
  dtrain->add_option("--classifier", t_kind, "auto | knn | dtree | rforest | svm")
      ->check(CLI::IsMember({"auto", "knn", "dtree", "rforest", "svm"}));
  dtrain->add_option("--folds", t_folds, "Cross-validation folds");
  dtrain->add_option("--seed", t_seed, "Seed");
  dtrain->callback([&] {
    if (!env_seed(t_seed)) {
      rc = kConfigExit;
      return;
    }
    const auto paths = c_strs(t_scores);
    char* json = nullptr;
    rc = finish(fmd_detect_train(paths.data(), paths.size(), t_kind.c_str(), t_folds, t_seed,
                                 t_out.c_str(), &json),
                json);
  });
  auto* deval = det->add_subcommand("eval", "Evaluate a detector on score CSVs");
  std::vector<std::string> e_scores;
  std::string e_model;
  deval->add_option("--model", e_model, "Detector JSON")->required();
  deval->add_option("--scores", e_scores, "Score CSV files")->required();
  deval->callback([&] {
    const auto paths = c_strs(e_scores);
    char* json = nullptr;
    rc = finish(fmd_detect_eval(e_model.c_str(), paths.data(), paths.size(), &json), json);
  });

  // experiment run
  auto* exp = app.add_subcommand("experiment", "End-to-end experiment");
  exp->require_subcommand(1);
  auto* run = exp->add_subcommand("run", "Run every stage and write the report");
  std::string x_config, x_out;
  bool x_resume = false;
  run->add_option("--config", x_config, "JSON config file");
  run->add_option("--out", x_out, "Output directory (overrides the config)");
  run->add_flag("--resume", x_resume, "Reuse completed stages whose inputs are unchanged");
  run->callback([&] {
    std::string text;
    if (!x_config.empty()) {
      std::ifstream in(x_config);
      if (!in) {
        std::fprintf(stderr, "error: cannot open config %s\n", x_config.c_str());
        rc = kConfigExit;
        return;
      }
      std::stringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    std::string overrides;
    if (!x_out.empty()) {
      std::string escaped;
      for (char c : x_out) {
        if (c == '"' || c == '\\') escaped += '\\';
        escaped += c;
      }
      overrides = "{\"output_dir\": \"" + escaped + "\"}";
    }
    char* report = nullptr;
    rc = finish(fmd_experiment_run(x_config.empty() ? nullptr : text.c_str(),
                                   overrides.empty() ? nullptr : overrides.c_str(),
                                   x_resume ? 1 : 0, log_line, nullptr, &report));
    fmd_string_free(report);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigExit;
  }
  return rc;
}
