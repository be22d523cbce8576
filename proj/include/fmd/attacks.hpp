#pragma once

#include "fmd/image.hpp"
#include "fmd/model.hpp"

namespace fmd {

struct AttackConfig {
  double epsilon = 8.0 / 255.0;  // L-inf budget
  int iterations = 10;           // BIM only
  double step = 2.0 / 255.0;     // BIM per-iteration step

  // 0 < step <= epsilon <= 1, iterations >= 1
  void validate() const;
};

enum class AttackMethod { fgsm, bim };

const char* attack_name(AttackMethod m);
AttackMethod parse_attack(const std::string& name);

// X' = clip01(X + eps * sign(dJ/dX)), with sign(0) = 0.
Image fgsm(const Network& net, const Image& img, int label, const AttackConfig& cfg);

// X_{n+1} = Clip_{X,eps}(X_n + step * sign(dJ/dX_n)), iterated cfg.iterations
// times; the clip projects onto [X - eps, X + eps] and then onto [0, 1].
Image bim(const Network& net, const Image& img, int label, const AttackConfig& cfg);

Image fgsm(const ModelParams& params, const Image& img, int label,
           const AttackConfig& cfg);
Image bim(const ModelParams& params, const Image& img, int label,
          const AttackConfig& cfg);

Image attack(AttackMethod method, const Network& net, const Image& img, int label,
             const AttackConfig& cfg);

double linf_distance(const Image& a, const Image& b);

}  // namespace fmd
