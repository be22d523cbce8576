#include "fmd/fmd.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <string>

#include "fmd/error.hpp"
#include "fmd/filters.hpp"
#include "fmd/harness.hpp"
#include "fmd/ops.hpp"

struct fmd_image {
  fmd::Image img;
};
struct fmd_model {
  fmd::ModelParams params;
  fmd::Network net;
  explicit fmd_model(fmd::ModelParams p) : params(std::move(p)), net(params) {}
};
struct fmd_detector {
  fmd::DetectorModel model;
};

namespace {

thread_local std::string g_last_error;

template <class Fn>
fmd_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return FMD_OK;
  } catch (const fmd::Error& e) {
    g_last_error = e.what();
    return static_cast<fmd_status>(static_cast<int>(e.kind()));
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return FMD_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return FMD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FMD_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) fmd::config_error(std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

fmd::Norm norm_or_default(const char* s) { return s ? fmd::parse_norm(s) : fmd::Norm::l1; }
fmd::Alignment align_or_default(const char* s) {
  return s ? fmd::parse_alignment(s) : fmd::Alignment::union_set;
}

std::vector<std::string> paths(const char* const* csvs, size_t n) {
  if (n > 0) need(csvs, "csvs");
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) {
    need(csvs[i], "csv path");
    out.emplace_back(csvs[i]);
  }
  return out;
}

fmd::LogFn wrap_log(fmd_log_fn log, void* user) {
  if (!log) return {};
  return [log, user](const std::string& m) { log(m.c_str(), user); };
}

}  // namespace

extern "C" {

const char* fmd_version(void) { return "1.0.0"; }
const char* fmd_last_error(void) { return g_last_error.c_str(); }
void fmd_string_free(char* s) { std::free(s); }

fmd_status fmd_image_create(int height, int width, int channels, const double* data,
                            fmd_image** out) {
  return guarded([&] {
    need(out, "out");
    if (height < 1 || width < 1 || (channels != 1 && channels != 3))
      fmd::config_error("image shape must be positive with 1 or 3 channels");
    fmd::Image img(height, width, channels, 0.0);
    if (data)
      std::copy(data, data + img.data().size(), img.data().begin());
    *out = new fmd_image{std::move(img)};
  });
}

fmd_status fmd_image_load(const char* path, fmd_image** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new fmd_image{fmd::load_ppm(path)};
  });
}

fmd_status fmd_image_save(const fmd_image* img, const char* path) {
  return guarded([&] {
    need(img, "img");
    need(path, "path");
    fmd::save_ppm(path, img->img);
  });
}

void fmd_image_free(fmd_image* img) { delete img; }

fmd_status fmd_image_shape(const fmd_image* img, int* height, int* width, int* channels) {
  return guarded([&] {
    need(img, "img");
    if (height) *height = img->img.height();
    if (width) *width = img->img.width();
    if (channels) *channels = img->img.channels();
  });
}

fmd_status fmd_image_data(const fmd_image* img, double* buf, size_t len) {
  return guarded([&] {
    need(img, "img");
    need(buf, "buf");
    const auto& d = img->img.data();
    if (len < d.size()) fmd::config_error("buffer too small for image data");
    std::copy(d.begin(), d.end(), buf);
  });
}

fmd_status fmd_model_init(uint64_t seed, fmd_model** out) {
  return guarded([&] {
    need(out, "out");
    *out = new fmd_model(fmd::ModelParams::he_uniform(seed));
  });
}

fmd_status fmd_model_load(const char* path, fmd_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new fmd_model(fmd::load_weights_file(path));
  });
}

fmd_status fmd_model_save(const fmd_model* m, const char* path) {
  return guarded([&] {
    need(m, "model");
    need(path, "path");
    fmd::save_weights_file(path, m->params);
  });
}

void fmd_model_free(fmd_model* m) { delete m; }

fmd_status fmd_model_forward(const fmd_model* m, const fmd_image* img, double* probs) {
  return guarded([&] {
    need(m, "model");
    need(img, "img");
    need(probs, "probs");
    const auto p = m->net.forward(img->img);
    std::copy(p.begin(), p.end(), probs);
  });
}

fmd_status fmd_model_predict(const fmd_model* m, const fmd_image* img, int* label) {
  return guarded([&] {
    need(m, "model");
    need(img, "img");
    need(label, "label");
    *label = m->net.predict(img->img);
  });
}

fmd_status fmd_attack(const fmd_model* m, const fmd_image* img, int label, const char* method,
                      double epsilon, double step, int iterations, fmd_image** out) {
  return guarded([&] {
    need(m, "model");
    need(img, "img");
    need(method, "method");
    need(out, "out");
    const fmd::AttackMethod am = fmd::parse_attack(method);
    fmd::AttackConfig cfg{epsilon, am == fmd::AttackMethod::fgsm ? 1 : iterations,
                          am == fmd::AttackMethod::fgsm ? epsilon : step};
    cfg.validate();
    *out = new fmd_image{fmd::attack(am, m->net, img->img, label, cfg)};
  });
}

fmd_status fmd_median(const fmd_image* img, int window, fmd_image** out) {
  return guarded([&] {
    need(img, "img");
    need(out, "out");
    *out = new fmd_image{fmd::median_filter(img->img, window)};
  });
}

fmd_status fmd_wiener_adaptive(const fmd_image* img, int window, double noise_power,
                               fmd_image** out) {
  return guarded([&] {
    need(img, "img");
    need(out, "out");
    std::optional<double> noise;
    if (noise_power >= 0.0) noise = noise_power;
    *out = new fmd_image{fmd::wiener_adaptive(img->img, window, noise)};
  });
}

fmd_status fmd_wiener_deconvolve(const fmd_image* img, int kernel_size, double K,
                                 fmd_image** out) {
  return guarded([&] {
    need(img, "img");
    need(out, "out");
    *out = new fmd_image{fmd::wiener_deconvolve(img->img, fmd::box_kernel(kernel_size), K)};
  });
}

fmd_status fmd_score(const fmd_model* m, const fmd_image* img, const char* filter, int k,
                     const char* norm, const char* alignment, double* score) {
  return guarded([&] {
    need(m, "model");
    need(img, "img");
    need(filter, "filter");
    need(score, "score");
    fmd::ScoreOptions opts;
    opts.k = k;
    opts.norm = norm_or_default(norm);
    opts.alignment = align_or_default(alignment);
    *score = fmd::score_image(m->net, img->img, fmd::parse_filter_tag(filter), opts);
  });
}

fmd_status fmd_score_vectors(const int* orig_ids, const double* orig_conf, const int* den_ids,
                             const double* den_conf, int k, const char* norm,
                             const char* alignment, double* score) {
  return guarded([&] {
    need(orig_ids, "orig_ids");
    need(orig_conf, "orig_conf");
    need(den_ids, "den_ids");
    need(den_conf, "den_conf");
    need(score, "score");
    if (k < 1) fmd::config_error("k must be >= 1");
    fmd::PredictionVector a, b;
    for (int i = 0; i < k; ++i) {
      a.entries.emplace_back(orig_ids[i], orig_conf[i]);
      b.entries.emplace_back(den_ids[i], den_conf[i]);
    }
    *score = fmd::fmd_score(a, b, norm_or_default(norm), align_or_default(alignment));
  });
}

fmd_status fmd_detector_load(const char* path, fmd_detector** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    std::ifstream in(path);
    if (!in) fmd::data_error(std::string("cannot open ") + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      fmd::data_error(std::string("detector model ") + path + ": " + e.what());
    }
    *out = new fmd_detector{fmd::detector_from_json(j)};
  });
}

void fmd_detector_free(fmd_detector* d) { delete d; }

fmd_status fmd_detector_predict(const fmd_detector* d, double score, int* label) {
  return guarded([&] {
    need(d, "detector");
    need(label, "label");
    *label = d->model.predict(score);
  });
}

void fmd_train_options_default(fmd_train_options* o) {
  if (!o) return;
  const fmd::TrainConfig c;
  *o = {c.seed, c.lr, c.momentum, c.batch, c.epochs};
}

void fmd_score_options_default(fmd_score_options* o) {
  if (!o) return;
  const fmd::ScoreOptions s;
  *o = {s.k, "l1", "union", s.denoise.median_window, s.denoise.wiener_window};
}

fmd_status fmd_dataset_generate(const char* out_dir, uint64_t seed, int per_class,
                                double noise_sigma, size_t* count) {
  return guarded([&] {
    need(out_dir, "out_dir");
    fmd::DatasetSpec spec;
    spec.seed = seed;
    spec.per_class = per_class;
    spec.noise_sigma = noise_sigma;
    const size_t n = fmd::ops::dataset_gen(out_dir, spec);
    if (count) *count = n;
  });
}

fmd_status fmd_model_train_dir(const char* data_dir, const char* weights_out,
                               const fmd_train_options* opts, const char* validation_dir,
                               fmd_log_fn log, void* user, char** summary_json) {
  return guarded([&] {
    need(data_dir, "data_dir");
    need(weights_out, "weights_out");
    fmd::TrainConfig cfg;
    if (opts) cfg = {opts->seed, opts->lr, opts->momentum, opts->batch, opts->epochs};
    if (cfg.batch < 1) fmd::config_error("batch must be >= 1");
    if (cfg.epochs < 0) fmd::config_error("epochs must be >= 0");
    if (!(cfg.lr > 0.0)) fmd::config_error("lr must be > 0");
    const auto s = fmd::ops::model_train(data_dir, weights_out, cfg,
                                         validation_dir ? validation_dir : "", wrap_log(log, user));
    if (summary_json) *summary_json = dup(s.dump(2));
  });
}

fmd_status fmd_attack_dir(const char* weights, const char* in_dir, const char* out_dir,
                          const char* method, double epsilon, double step, int iterations,
                          char** summary_json) {
  return guarded([&] {
    need(weights, "weights");
    need(in_dir, "in_dir");
    need(out_dir, "out_dir");
    need(method, "method");
    const fmd::AttackMethod am = fmd::parse_attack(method);
    const fmd::AttackConfig cfg{epsilon, am == fmd::AttackMethod::fgsm ? 1 : iterations,
                                am == fmd::AttackMethod::fgsm ? epsilon : step};
    const auto s = fmd::ops::attack_dir(weights, in_dir, out_dir, am, cfg);
    if (summary_json) *summary_json = dup(s.dump(2));
  });
}

fmd_status fmd_denoise_dir(const char* in_dir, const char* out_dir, const char* mode, int window,
                           double K, int kernel_size, size_t* count) {
  return guarded([&] {
    need(in_dir, "in_dir");
    need(out_dir, "out_dir");
    need(mode, "mode");
    fmd::ops::DenoiseOptions o{fmd::ops::parse_denoise_mode(mode), window, K, kernel_size};
    const size_t n = fmd::ops::denoise_dir(in_dir, out_dir, o);
    if (count) *count = n;
  });
}

fmd_status fmd_score_dir(const char* weights, const char* in_dir, const char* filter,
                         const char* attack, const fmd_score_options* opts, const char* out_csv,
                         int append, size_t* count) {
  return guarded([&] {
    need(weights, "weights");
    need(in_dir, "in_dir");
    need(filter, "filter");
    need(attack, "attack");
    fmd::ScoreOptions so;
    if (opts) {
      so.k = opts->k;
      so.norm = norm_or_default(opts->norm);
      so.alignment = align_or_default(opts->alignment);
      so.denoise.median_window = opts->median_window;
      so.denoise.wiener_window = opts->wiener_window;
    }
    const auto records =
        fmd::ops::score_dir(weights, in_dir, fmd::parse_filter_tag(filter),
                            fmd::parse_attack_tag(attack), so, out_csv ? out_csv : "", append != 0);
    if (count) *count = records.size();
  });
}

fmd_status fmd_detect_train(const char* const* csvs, size_t n, const char* kind, int folds,
                            uint64_t seed, const char* model_out, char** summary_json) {
  return guarded([&] {
    need(model_out, "model_out");
    fmd::ops::DetectTrainOptions o{kind ? kind : "auto", folds, seed};
    const auto s = fmd::ops::detect_train(paths(csvs, n), model_out, o);
    if (summary_json) *summary_json = dup(s.dump(2));
  });
}

fmd_status fmd_detect_eval(const char* model_path, const char* const* csvs, size_t n,
                           char** metrics_json) {
  return guarded([&] {
    need(model_path, "model_path");
    const auto m = fmd::ops::detect_eval(model_path, paths(csvs, n));
    if (metrics_json) *metrics_json = dup(m.dump(2));
  });
}

fmd_status fmd_experiment_run(const char* config_json, const char* overrides_json, int resume,
                              fmd_log_fn log, void* user, char** report_json) {
  return guarded([&] {
    nlohmann::json file, overrides;
    try {
      if (config_json) file = nlohmann::json::parse(config_json);
      if (overrides_json) overrides = nlohmann::json::parse(overrides_json);
    } catch (const nlohmann::json::exception& e) {
      fmd::config_error(std::string("config is not valid JSON: ") + e.what());
    }
    const fmd::ExperimentConfig cfg = fmd::resolve_config(
        config_json ? &file : nullptr, overrides_json ? &overrides : nullptr, std::getenv("FMD_SEED"));
    const auto result = fmd::run_all(cfg, resume != 0, wrap_log(log, user));
    if (report_json) *report_json = dup(result.report.dump(2));
  });
}

}  // extern "C"
