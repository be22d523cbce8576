#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fmd/image.hpp"
#include "fmd/model.hpp"

namespace fmd {

/// Ranked (class id, confidence) pairs: confidence descending, ties by
/// ascending class id.
struct PredictionVector {
  std::vector<std::pair<int, double>> entries;

  std::size_t k() const { return entries.size(); }
  friend bool operator==(const PredictionVector&, const PredictionVector&) = default;
};

PredictionVector top_k(std::span<const double> probs, int k);

enum class Norm { l1, l2 };
// union: classes present on either side; orig_only: the original's classes.
enum class Alignment { union_set, orig_only };

Norm parse_norm(const std::string& s);
const char* norm_name(Norm n);
Alignment parse_alignment(const std::string& s);
const char* alignment_name(Alignment a);

/// (1/k) * || p_orig - p_denoised || over the aligned class set, where a
/// class missing from one side contributes confidence 0 on that side.
double fmd_score(const PredictionVector& orig, const PredictionVector& denoised,
                 Norm norm = Norm::l1, Alignment align = Alignment::union_set);

enum class AttackTag { clean, fgsm, bim };
enum class FilterTag { median, wiener };

const char* attack_tag_name(AttackTag t);
AttackTag parse_attack_tag(const std::string& s);
const char* filter_tag_name(FilterTag t);
FilterTag parse_filter_tag(const std::string& s);

struct DenoiseSettings {
  int median_window = 3;
  int wiener_window = 5;
};

// The model-facing denoiser: median stays 3-channel; wiener goes
// grayscale -> adaptive Wiener -> replicated back to 3 channels.
Image denoise_for_model(const Image& img, FilterTag filter, const DenoiseSettings& s);

struct ScoreRecord {
  std::string image_id;
  double score = 0.0;
  int label = 0;  // 1 adversarial, 0 legitimate
  AttackTag attack = AttackTag::clean;
  FilterTag filter = FilterTag::median;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

struct ScoreOptions {
  int k = 5;
  Norm norm = Norm::l1;
  Alignment alignment = Alignment::union_set;
  DenoiseSettings denoise;
};

struct ScoreInput {
  std::string image_id;
  const Image* image = nullptr;
  AttackTag attack = AttackTag::clean;
};

double score_image(const Network& net, const Image& img, FilterTag filter,
                   const ScoreOptions& opts);

// One record per input, in input order. label = (attack != clean).
std::vector<ScoreRecord> score_dataset(const Network& net,
                                       const std::vector<ScoreInput>& inputs,
                                       FilterTag filter, const ScoreOptions& opts);

// CSV: image_id,attack,filter,score,label with scores at 9 significant digits.
std::string format_scores_csv(const std::vector<ScoreRecord>& records,
                              bool with_header = true);
std::vector<ScoreRecord> parse_scores_csv(const std::string& text);
void write_scores_csv(const std::string& path, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_scores_csv(const std::string& path);

}  // namespace fmd
