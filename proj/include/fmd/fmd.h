/* C interface to the fmd library. All functions return FMD_OK or an error
 * code; fmd_last_error() then describes the failure (thread-local). Strings
 * returned through char** out-parameters must be released with
 * fmd_string_free. */
#ifndef FMD_FMD_H
#define FMD_FMD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FMD_API __declspec(dllexport)
#else
#define FMD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fmd_status {
  FMD_OK = 0,
  FMD_ERR_INTERNAL = 1,
  FMD_ERR_CONFIG = 2,
  FMD_ERR_DATA = 3,
  FMD_ERR_NUMERIC = 4
} fmd_status;

typedef struct fmd_image fmd_image;
typedef struct fmd_model fmd_model;
typedef struct fmd_detector fmd_detector;

typedef void (*fmd_log_fn)(const char* message, void* user);

FMD_API const char* fmd_version(void);
FMD_API const char* fmd_last_error(void);
FMD_API void fmd_string_free(char* s);

/* ---- images ---- */
FMD_API fmd_status fmd_image_create(int height, int width, int channels, const double* data,
                                    fmd_image** out);
FMD_API fmd_status fmd_image_load(const char* path, fmd_image** out);
FMD_API fmd_status fmd_image_save(const fmd_image* img, const char* path);
FMD_API void fmd_image_free(fmd_image* img);
FMD_API fmd_status fmd_image_shape(const fmd_image* img, int* height, int* width, int* channels);
/* Copies height*width*channels values (HWC order) into buf. */
FMD_API fmd_status fmd_image_data(const fmd_image* img, double* buf, size_t len);

/* ---- model ---- */
FMD_API fmd_status fmd_model_init(uint64_t seed, fmd_model** out);
FMD_API fmd_status fmd_model_load(const char* path, fmd_model** out);
FMD_API fmd_status fmd_model_save(const fmd_model* m, const char* path);
FMD_API void fmd_model_free(fmd_model* m);
/* probs must hold 10 values. */
FMD_API fmd_status fmd_model_forward(const fmd_model* m, const fmd_image* img, double* probs);
FMD_API fmd_status fmd_model_predict(const fmd_model* m, const fmd_image* img, int* label);

/* ---- attacks / filters / scoring ---- */
/* method: "fgsm" or "bim"; step and iterations are ignored for fgsm. */
FMD_API fmd_status fmd_attack(const fmd_model* m, const fmd_image* img, int label,
                              const char* method, double epsilon, double step, int iterations,
                              fmd_image** out);
FMD_API fmd_status fmd_median(const fmd_image* img, int window, fmd_image** out);
/* Grayscale input. noise_power < 0 selects the mean local variance. */
FMD_API fmd_status fmd_wiener_adaptive(const fmd_image* img, int window, double noise_power,
                                       fmd_image** out);
/* Grayscale input, box PSF of kernel_size x kernel_size. */
FMD_API fmd_status fmd_wiener_deconvolve(const fmd_image* img, int kernel_size, double K,
                                         fmd_image** out);
/* filter: "median" or "wiener"; norm: "l1"/"l2"; alignment: "union"/"orig-only". */
FMD_API fmd_status fmd_score(const fmd_model* m, const fmd_image* img, const char* filter, int k,
                             const char* norm, const char* alignment, double* score);
/* Score of two already ranked prediction vectors of length k. */
FMD_API fmd_status fmd_score_vectors(const int* orig_ids, const double* orig_conf,
                                     const int* den_ids, const double* den_conf, int k,
                                     const char* norm, const char* alignment, double* score);

/* ---- detectors ---- */
FMD_API fmd_status fmd_detector_load(const char* path, fmd_detector** out);
FMD_API void fmd_detector_free(fmd_detector* d);
FMD_API fmd_status fmd_detector_predict(const fmd_detector* d, double score, int* label);

/* ---- directory-level tools ---- */
typedef struct fmd_train_options {
  uint64_t seed;
  double lr;
  double momentum;
  int batch;
  int epochs;
} fmd_train_options;
FMD_API void fmd_train_options_default(fmd_train_options* o);

typedef struct fmd_score_options {
  int k;
  const char* norm;      /* "l1" | "l2" */
  const char* alignment; /* "union" | "orig-only" */
  int median_window;
  int wiener_window;
} fmd_score_options;
FMD_API void fmd_score_options_default(fmd_score_options* o);

FMD_API fmd_status fmd_dataset_generate(const char* out_dir, uint64_t seed, int per_class,
                                        double noise_sigma, size_t* count);
/* validation_dir may be NULL. summary_json receives a JSON document. */
FMD_API fmd_status fmd_model_train_dir(const char* data_dir, const char* weights_out,
                                       const fmd_train_options* opts, const char* validation_dir,
                                       fmd_log_fn log, void* user, char** summary_json);
FMD_API fmd_status fmd_attack_dir(const char* weights, const char* in_dir, const char* out_dir,
                                  const char* method, double epsilon, double step,
                                  int iterations, char** summary_json);
/* mode: "median" | "wiener" | "wiener-deconv". */
FMD_API fmd_status fmd_denoise_dir(const char* in_dir, const char* out_dir, const char* mode,
                                   int window, double K, int kernel_size, size_t* count);
FMD_API fmd_status fmd_score_dir(const char* weights, const char* in_dir, const char* filter,
                                 const char* attack, const fmd_score_options* opts,
                                 const char* out_csv, int append, size_t* count);
/* csvs: n paths. kind: "auto" | "knn" | "dtree" | "rforest" | "svm". */
FMD_API fmd_status fmd_detect_train(const char* const* csvs, size_t n, const char* kind,
                                    int folds, uint64_t seed, const char* model_out,
                                    char** summary_json);
FMD_API fmd_status fmd_detect_eval(const char* model_path, const char* const* csvs, size_t n,
                                   char** metrics_json);

/* Full pipeline. config_json and overrides_json are JSON texts (either may
 * be NULL); FMD_SEED in the environment overrides the config seed but not
 * an explicit override. report_json receives the report. */
FMD_API fmd_status fmd_experiment_run(const char* config_json, const char* overrides_json,
                                      int resume, fmd_log_fn log, void* user,
                                      char** report_json);

#ifdef __cplusplus
}
#endif

#endif
