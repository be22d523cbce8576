#include "fmd/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "fmd/error.hpp"
#include "fmd/filters.hpp"

namespace fmd {

PredictionVector top_k(std::span<const double> probs, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > probs.size())
    config_error("top_k: k = " + std::to_string(k) + " outside [1, " +
                 std::to_string(probs.size()) + "]");
  std::vector<int> idx(probs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return probs[a] > probs[b]; });
  PredictionVector pv;
  for (int i = 0; i < k; ++i) pv.entries.emplace_back(idx[i], probs[idx[i]]);
  return pv;
}

Norm parse_norm(const std::string& s) {
  if (s == "l1" || s == "L1") return Norm::l1;
  if (s == "l2" || s == "L2") return Norm::l2;
  config_error("unknown norm '" + s + "' (expected l1|l2)");
}
const char* norm_name(Norm n) { return n == Norm::l1 ? "l1" : "l2"; }

Alignment parse_alignment(const std::string& s) {
  if (s == "union") return Alignment::union_set;
  if (s == "orig-only" || s == "orig_only") return Alignment::orig_only;
  config_error("unknown alignment '" + s + "' (expected union|orig-only)");
}
const char* alignment_name(Alignment a) {
  return a == Alignment::union_set ? "union" : "orig-only";
}

double fmd_score(const PredictionVector& orig, const PredictionVector& denoised,
                 Norm norm, Alignment align) {
  if (orig.k() != denoised.k() || orig.k() == 0)
    config_error("fmd_score: prediction vectors must share the same k >= 1");
  std::map<int, std::pair<double, double>> aligned;
  for (const auto& [cls, conf] : orig.entries) aligned[cls].first = conf;
  for (const auto& [cls, conf] : denoised.entries) {
    if (align == Alignment::orig_only && !aligned.contains(cls)) continue;
    aligned[cls].second = conf;
  }
  double acc = 0.0;
  for (const auto& [cls, pair] : aligned) {
    const double d = std::abs(pair.first - pair.second);
    acc += norm == Norm::l1 ? d : d * d;
  }
  if (norm == Norm::l2) acc = std::sqrt(acc);
  return acc / static_cast<double>(orig.k());
}

const char* attack_tag_name(AttackTag t) {
  switch (t) {
    case AttackTag::clean: return "clean";
    case AttackTag::fgsm: return "fgsm";
    case AttackTag::bim: return "bim";
  }
  return "clean";
}

AttackTag parse_attack_tag(const std::string& s) {
  if (s == "clean") return AttackTag::clean;
  if (s == "fgsm") return AttackTag::fgsm;
  if (s == "bim") return AttackTag::bim;
  data_error("unknown attack tag '" + s + "'");
}

const char* filter_tag_name(FilterTag t) {
  return t == FilterTag::median ? "median" : "wiener";
}

FilterTag parse_filter_tag(const std::string& s) {
  if (s == "median") return FilterTag::median;
  if (s == "wiener") return FilterTag::wiener;
  config_error("unknown filter '" + s + "' (expected median|wiener)");
}

Image denoise_for_model(const Image& img, FilterTag filter, const DenoiseSettings& s) {
  if (filter == FilterTag::median) return median_filter(img, s.median_window);
  const Image gray = img.channels() == 3 ? to_grayscale(img) : img;
  return replicate_gray(wiener_adaptive(gray, s.wiener_window));
}

double score_image(const Network& net, const Image& img, FilterTag filter,
                   const ScoreOptions& opts) {
  const auto p = net.forward(img);
  const auto q = net.forward(denoise_for_model(img, filter, opts.denoise));
  return fmd_score(top_k(p, opts.k), top_k(q, opts.k), opts.norm, opts.alignment);
}

std::vector<ScoreRecord> score_dataset(const Network& net,
                                       const std::vector<ScoreInput>& inputs,
                                       FilterTag filter, const ScoreOptions& opts) {
  std::vector<ScoreRecord> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (!in.image) data_error("score_dataset: null image for " + in.image_id);
    ScoreRecord r;
    r.image_id = in.image_id;
    r.score = score_image(net, *in.image, filter, opts);
    r.label = in.attack == AttackTag::clean ? 0 : 1;
    r.attack = in.attack;
    r.filter = filter;
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_scores_csv(const std::vector<ScoreRecord>& records, bool with_header) {
  std::ostringstream os;
  if (with_header) os << "image_id,attack,filter,score,label\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.9g", r.score);
    os << r.image_id << ',' << attack_tag_name(r.attack) << ','
       << filter_tag_name(r.filter) << ',' << buf << ',' << r.label << '\n';
  }
  return os.str();
}

std::vector<ScoreRecord> parse_scores_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("image_id,attack,filter,score,label", 0) != 0)
    data_error("scores CSV: missing header image_id,attack,filter,score,label");
  std::vector<ScoreRecord> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5)
      data_error("scores CSV row " + std::to_string(row) + ": expected 5 fields");
    ScoreRecord r;
    r.image_id = cells[0];
    r.attack = parse_attack_tag(cells[1]);
    if (cells[2] != "median" && cells[2] != "wiener")
      data_error("scores CSV row " + std::to_string(row) + ": bad filter");
    r.filter = parse_filter_tag(cells[2]);
    try {
      r.score = std::stod(cells[3]);
      r.label = std::stoi(cells[4]);
    } catch (const std::exception&) {
      data_error("scores CSV row " + std::to_string(row) + ": bad number");
    }
    if (!(r.score >= 0.0) || !std::isfinite(r.score))
      data_error("scores CSV row " + std::to_string(row) + ": score must be >= 0");
    if (r.label != 0 && r.label != 1)
      data_error("scores CSV row " + std::to_string(row) + ": label must be 0 or 1");
    out.push_back(std::move(r));
  }
  return out;
}

void write_scores_csv(const std::string& path, const std::vector<ScoreRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) data_error("cannot write " + path);
  out << format_scores_csv(records);
}

std::vector<ScoreRecord> read_scores_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) data_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scores_csv(ss.str());
}

}  // namespace fmd
