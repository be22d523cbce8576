#include "fmd/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "fmd/error.hpp"

namespace fmd {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

void AttackConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) config_error("epsilon must be in (0,1]");
  if (iterations < 1) config_error("iterations must be >= 1");
  if (!(step > 0.0 && step <= epsilon)) config_error("step must be in (0, epsilon]");
}

const char* attack_name(AttackMethod m) {
  return m == AttackMethod::fgsm ? "fgsm" : "bim";
}

AttackMethod parse_attack(const std::string& name) {
  if (name == "fgsm") return AttackMethod::fgsm;
  if (name == "bim") return AttackMethod::bim;
  config_error("unknown attack method '" + name + "' (expected fgsm|bim)");
}

Image fgsm(const Network& net, const Image& img, int label, const AttackConfig& cfg) {
  if (!(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0))
    config_error("epsilon must be in (0,1]");
  const Image grad = net.input_gradient(img, label);
  std::vector<double> out(img.data().begin(), img.data().end());
  auto g = grad.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += cfg.epsilon * sign(g[i]);
  return clip01(Image::from_raw(img.height(), img.width(), img.channels(), std::move(out)));
}

Image bim(const Network& net, const Image& img, int label, const AttackConfig& cfg) {
  cfg.validate();
  auto x0 = img.data();
  Image current = img;
  for (int n = 0; n < cfg.iterations; ++n) {
    const Image grad = net.input_gradient(current, label);
    auto g = grad.data();
    auto x = current.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double stepped = x[i] + cfg.step * sign(g[i]);
      const double lo = std::max(0.0, x0[i] - cfg.epsilon);
      const double hi = std::min(1.0, x0[i] + cfg.epsilon);
      x[i] = std::min(hi, std::max(lo, stepped));
    }
  }
  return current;
}

Image fgsm(const ModelParams& params, const Image& img, int label,
           const AttackConfig& cfg) {
  return fgsm(Network(params), img, label, cfg);
}

Image bim(const ModelParams& params, const Image& img, int label,
          const AttackConfig& cfg) {
  return bim(Network(params), img, label, cfg);
}

Image attack(AttackMethod method, const Network& net, const Image& img, int label,
             const AttackConfig& cfg) {
  return method == AttackMethod::fgsm ? fgsm(net, img, label, cfg)
                                      : bim(net, img, label, cfg);
}

double linf_distance(const Image& a, const Image& b) {
  if (!a.same_shape(b)) data_error("linf_distance: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace fmd
