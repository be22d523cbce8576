#include "fmd/ops.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fmd/error.hpp"
#include "fmd/filters.hpp"

namespace fmd::ops {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

NamedImages read_dir(const std::string& dir) {
  NamedImages out;
  out.samples = read_dataset_dir(dir);
  std::ifstream manifest(fs::path(dir) / "manifest.csv");
  std::string line;
  std::getline(manifest, line);
  while (std::getline(manifest, line))
    if (!line.empty()) out.filenames.push_back(line.substr(0, line.find(',')));
  return out;
}

void write_dir(const std::string& dir, const NamedImages& images) {
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.csv");
  if (!manifest) data_error("cannot write manifest in " + dir);
  manifest << "filename,label\n";
  for (std::size_t i = 0; i < images.samples.size(); ++i) {
    save_ppm((fs::path(dir) / images.filenames[i]).string(), images.samples[i].image);
    manifest << images.filenames[i] << "," << images.samples[i].label << "\n";
  }
}

std::size_t dataset_gen(const std::string& out_dir, const DatasetSpec& spec) {
  const Dataset data = generate(spec);
  write_dataset_dir(out_dir, data);
  return data.size();
}

ojson model_train(const std::string& data_dir, const std::string& weights_out,
                  const TrainConfig& cfg, const std::string& validation_dir, const LogFn& log) {
  const Dataset data = read_dataset_dir(data_dir);
  Dataset validation;
  if (!validation_dir.empty()) validation = read_dataset_dir(validation_dir);
  const TrainResult r = train(data, cfg, validation_dir.empty() ? nullptr : &validation,
                              [&](const EpochLog& e) {
                                if (!log) return;
                                char buf[160];
                                std::snprintf(buf, sizeof buf,
                                              "epoch %d loss %.4f train %.3f", e.epoch,
                                              e.mean_loss, e.train_accuracy);
                                std::string msg = buf;
                                if (e.validation_accuracy >= 0.0) {
                                  std::snprintf(buf, sizeof buf, " validation %.3f",
                                                e.validation_accuracy);
                                  msg += buf;
                                }
                                log(msg);
                              });
  save_weights_file(weights_out, r.params);
  ojson epochs = ojson::array();
  for (const auto& e : r.log) {
    ojson row{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"train_accuracy", e.train_accuracy}};
    if (e.validation_accuracy >= 0.0) row["validation_accuracy"] = e.validation_accuracy;
    epochs.push_back(row);
  }
  return {{"images", data.size()}, {"weights", weights_out}, {"epochs", epochs}};
}

ojson attack_dir(const std::string& weights, const std::string& in_dir, const std::string& out_dir,
                 AttackMethod method, const AttackConfig& cfg) {
  cfg.validate();
  const Network net(load_weights_file(weights));
  const NamedImages in = read_dir(in_dir);
  NamedImages out;
  out.filenames = in.filenames;
  std::ostringstream logcsv;
  logcsv << "filename,label,pred_clean,pred_adv,linf\n";
  std::size_t fooled = 0;
  for (std::size_t i = 0; i < in.samples.size(); ++i) {
    const Sample& s = in.samples[i];
    Image adv = quantize8(attack(method, net, s.image, s.label, cfg));
    const int pc = net.predict(s.image);
    const int pa = net.predict(adv);
    fooled += pa != s.label;
    char linf[32];
    std::snprintf(linf, sizeof linf, "%.9g", linf_distance(adv, s.image));
    logcsv << in.filenames[i] << "," << s.label << "," << pc << "," << pa << "," << linf << "\n";
    out.samples.push_back({std::move(adv), s.label});
  }
  write_dir(out_dir, out);
  std::ofstream(fs::path(out_dir) / "attack_log.csv") << logcsv.str();
  const double n = static_cast<double>(in.samples.size());
  return {{"method", attack_name(method)},
          {"images", in.samples.size()},
          {"misclassified", fooled},
          {"accuracy", n > 0 ? 1.0 - static_cast<double>(fooled) / n : 0.0}};
}

DenoiseMode parse_denoise_mode(const std::string& s) {
  if (s == "median") return DenoiseMode::median;
  if (s == "wiener") return DenoiseMode::wiener;
  if (s == "wiener-deconv") return DenoiseMode::wiener_deconv;
  config_error("unknown filter '" + s + "' (expected median|wiener|wiener-deconv)");
}

std::size_t denoise_dir(const std::string& in_dir, const std::string& out_dir,
                        const DenoiseOptions& opts) {
  FilterConfig fc;
  fc.window = opts.window;
  fc.K = opts.K;
  fc.kernel = box_kernel(opts.kernel_size);
  fc.validate();
  NamedImages images = read_dir(in_dir);
  for (auto& s : images.samples) {
    switch (opts.mode) {
      case DenoiseMode::median:
        s.image = median_filter(s.image, opts.window);
        break;
      case DenoiseMode::wiener: {
        const Image g = s.image.channels() == 1 ? s.image : to_grayscale(s.image);
        s.image = wiener_adaptive(g, opts.window);
        break;
      }
      case DenoiseMode::wiener_deconv: {
        const Image g = s.image.channels() == 1 ? s.image : to_grayscale(s.image);
        s.image = wiener_deconvolve(g, fc.kernel, opts.K);
        break;
      }
    }
  }
  write_dir(out_dir, images);
  return images.samples.size();
}

std::vector<ScoreRecord> score_dir(const std::string& weights, const std::string& in_dir,
                                   FilterTag filter, AttackTag attack, const ScoreOptions& opts,
                                   const std::string& out_csv, bool append) {
  const Network net(load_weights_file(weights));
  const NamedImages in = read_dir(in_dir);
  std::vector<ScoreInput> inputs;
  for (std::size_t i = 0; i < in.samples.size(); ++i)
    inputs.push_back({std::string(attack_tag_name(attack)) + "/" +
                          fs::path(in.filenames[i]).stem().string(),
                      &in.samples[i].image, attack});
  auto records = score_dataset(net, inputs, filter, opts);
  if (!out_csv.empty()) {
    std::vector<ScoreRecord> all;
    if (append && fs::exists(out_csv)) all = read_scores_csv(out_csv);
    all.insert(all.end(), records.begin(), records.end());
    write_scores_csv(out_csv, all);
  }
  return records;
}

namespace {

std::vector<ScoreRecord> read_all(const std::vector<std::string>& csvs) {
  if (csvs.empty()) config_error("no score files given");
  std::vector<ScoreRecord> all;
  for (const auto& p : csvs) {
    auto r = read_scores_csv(p);
    all.insert(all.end(), r.begin(), r.end());
  }
  return all;
}

}  // namespace

ojson detect_train(const std::vector<std::string>& score_csvs, const std::string& model_out,
                   const DetectTrainOptions& opts) {
  const auto records = read_all(score_csvs);
  const auto points = to_points(records);
  TuneResult tuned;
  ojson out;
  if (opts.kind == "auto") {
    const Selection s = select_best(points, opts.folds, opts.seed);
    tuned = s.tuned;
    ojson by_kind;
    for (const auto& [k, v] : s.cv_by_kind) by_kind[k] = v;
    out["cv_by_kind"] = by_kind;
  } else {
    const DetectorKind kind = parse_detector(opts.kind);
    tuned = tune(points, kind, default_grid(kind), opts.folds, opts.seed);
  }
  const DetectorModel model = fit(points, tuned.best, opts.seed);
  std::ofstream f(model_out);
  if (!f) data_error("cannot write " + model_out);
  f << to_json(model).dump(2) << "\n";
  out["selected"] = detector_name(tuned.best.kind);
  out["hyperparameters"] = tuned.best.to_json();
  out["cv_accuracy"] = tuned.cv_accuracy;
  out["folds"] = tuned.folds;
  out["records"] = records.size();
  return out;
}

ojson detect_eval(const std::string& model_json, const std::vector<std::string>& score_csvs) {
  std::ifstream in(model_json);
  if (!in) data_error("cannot open " + model_json);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    data_error("detector model " + model_json + ": " + e.what());
  }
  const DetectorModel model = detector_from_json(j);
  return evaluate(model, read_all(score_csvs)).to_json();
}

}  // namespace fmd::ops
