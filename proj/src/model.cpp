#include "fmd/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "fmd/error.hpp"

namespace fmd {

namespace {

constexpr int kC1 = 8;
constexpr int kC2 = 16;
constexpr int kHidden = 64;
constexpr int kP1 = kInputSize / 2;   // 16
constexpr int kP2 = kInputSize / 4;   // 8
constexpr int kFlat = kP2 * kP2 * kC2;  // 1024
constexpr double kProbFloor = 1e-12;

// 3x3 convolution, stride 1, zero padding 1, HWC layout.
void conv_forward(const double* in, int h, int w, int cin, const double* weight,
                  const double* bias, int cout, double* out) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double* o = out + (static_cast<std::size_t>(y) * w + x) * cout;
      for (int k = 0; k < cout; ++k) o[k] = bias[k];
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = y + ky - 1;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = x + kx - 1;
          if (ix < 0 || ix >= w) continue;
          const double* src = in + (static_cast<std::size_t>(iy) * w + ix) * cin;
          const int tap = (ky * 3 + kx) * cin;
          for (int k = 0; k < cout; ++k) {
            const double* wk = weight + static_cast<std::size_t>(k) * 9 * cin + tap;
            double acc = 0.0;
            for (int c = 0; c < cin; ++c) acc += wk[c] * src[c];
            o[k] += acc;
          }
        }
      }
    }
  }
}

void conv_backward(const double* in, int h, int w, int cin, const double* weight,
                   int cout, const double* dout, double* dweight, double* dbias,
                   double* din) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double* g = dout + (static_cast<std::size_t>(y) * w + x) * cout;
      if (dbias)
        for (int k = 0; k < cout; ++k) dbias[k] += g[k];
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = y + ky - 1;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = x + kx - 1;
          if (ix < 0 || ix >= w) continue;
          const std::size_t src_off = (static_cast<std::size_t>(iy) * w + ix) * cin;
          const int tap = (ky * 3 + kx) * cin;
          for (int k = 0; k < cout; ++k) {
            const double gk = g[k];
            if (gk == 0.0) continue;
            const std::size_t woff = static_cast<std::size_t>(k) * 9 * cin + tap;
            if (dweight)
              for (int c = 0; c < cin; ++c) dweight[woff + c] += gk * in[src_off + c];
            if (din)
              for (int c = 0; c < cin; ++c) din[src_off + c] += gk * weight[woff + c];
          }
        }
      }
    }
  }
}

// 2x2 max pool, stride 2, HWC. First maximum in raster order wins ties.
void pool_forward(const double* in, int h, int w, int c, double* out,
                  std::uint32_t* arg) {
  const int oh = h / 2, ow = w / 2;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int k = 0; k < c; ++k) {
        std::uint32_t best = 0;
        double best_v = -INFINITY;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const auto idx = static_cast<std::uint32_t>(
                ((2 * y + dy) * w + (2 * x + dx)) * c + k);
            if (in[idx] > best_v) {
              best_v = in[idx];
              best = idx;
            }
          }
        const std::size_t o = (static_cast<std::size_t>(y) * ow + x) * c + k;
        out[o] = best_v;
        arg[o] = best;
      }
}

void relu_inplace(std::vector<double>& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

}  // namespace

std::array<std::pair<std::uint32_t, std::uint32_t>, ModelParams::kTensorCount>
reference_shapes() {
  return {{{kC1, 9 * kInputChannels},
           {kC1, 1},
           {kC2, 9 * kC1},
           {kC2, 1},
           {kHidden, kFlat},
           {kHidden, 1},
           {kNumClasses, kHidden},
           {kNumClasses, 1}}};
}

ModelParams ModelParams::zeros() {
  ModelParams p;
  const auto shapes = reference_shapes();
  for (int i = 0; i < kTensorCount; ++i)
    p.tensors[i] = Tensor(shapes[i].first, shapes[i].second);
  return p;
}

ModelParams ModelParams::he_uniform(std::uint64_t seed) {
  SplitMix64 rng(seed);
  return he_uniform(rng);
}

ModelParams ModelParams::he_uniform(SplitMix64& rng) {
  ModelParams p = zeros();
  for (Slot s : {conv1_w, conv2_w, fc1_w, fc2_w}) {
    Tensor& t = p[s];
    const double bound = std::sqrt(6.0 / t.cols);
    for (float& v : t.values)
      v = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
  }
  return p;
}

bool ModelParams::all_finite() const {
  for (const auto& t : tensors)
    for (float v : t.values)
      if (!std::isfinite(v)) return false;
  return true;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double cross_entropy(std::span<const double> probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
    data_error("label " + std::to_string(label) + " out of range");
  return -std::log(std::max(probs[label], kProbFloor));
}

namespace {

// -ln max(p_y, floor) straight from the logits. log1p keeps full relative
// precision when p_y is close to 1, which the finite-difference checks need.
double logit_cross_entropy(std::span<const double> z, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= z.size())
    data_error("label " + std::to_string(label) + " out of range");
  const double cap = -std::log(kProbFloor);
  double s = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (static_cast<int>(j) == label) continue;
    const double d = z[j] - z[label];
    if (d > cap) return cap;
    s += std::exp(d);
  }
  return std::min(std::log1p(s), cap);
}

}  // namespace

struct Network::Trace {
  std::vector<double> input;
  std::vector<double> c1, p1, c2, p2, h, z, prob;
  std::vector<std::uint32_t> arg1, arg2;
};

Network::Network(const ModelParams& params) {
  const auto shapes = reference_shapes();
  for (int i = 0; i < ModelParams::kTensorCount; ++i) {
    const Tensor& t = params.tensors[i];
    if (t.rows != shapes[i].first || t.cols != shapes[i].second ||
        t.values.size() != std::size_t{t.rows} * t.cols)
      data_error("model tensor " + std::to_string(i) + " has the wrong shape");
    w_[i].assign(t.values.begin(), t.values.end());
  }
}

void Network::run_forward(const Image& img, Trace& t) const {
  if (img.height() != kInputSize || img.width() != kInputSize ||
      img.channels() != kInputChannels)
    data_error("model input must be 32x32x3, got " + std::to_string(img.height()) +
               "x" + std::to_string(img.width()) + "x" +
               std::to_string(img.channels()));
  using S = ModelParams::Slot;
  t.input.assign(img.data().begin(), img.data().end());

  t.c1.assign(std::size_t{kInputSize} * kInputSize * kC1, 0.0);
  conv_forward(t.input.data(), kInputSize, kInputSize, kInputChannels,
               w_[S::conv1_w].data(), w_[S::conv1_b].data(), kC1, t.c1.data());
  relu_inplace(t.c1);
  t.p1.assign(std::size_t{kP1} * kP1 * kC1, 0.0);
  t.arg1.assign(t.p1.size(), 0);
  pool_forward(t.c1.data(), kInputSize, kInputSize, kC1, t.p1.data(), t.arg1.data());

  t.c2.assign(std::size_t{kP1} * kP1 * kC2, 0.0);
  conv_forward(t.p1.data(), kP1, kP1, kC1, w_[S::conv2_w].data(),
               w_[S::conv2_b].data(), kC2, t.c2.data());
  relu_inplace(t.c2);
  t.p2.assign(kFlat, 0.0);
  t.arg2.assign(kFlat, 0);
  pool_forward(t.c2.data(), kP1, kP1, kC2, t.p2.data(), t.arg2.data());

  t.h.assign(kHidden, 0.0);
  const double* w1 = w_[S::fc1_w].data();
  for (int j = 0; j < kHidden; ++j) {
    double acc = w_[S::fc1_b][j];
    const double* row = w1 + static_cast<std::size_t>(j) * kFlat;
    for (int i = 0; i < kFlat; ++i) acc += row[i] * t.p2[i];
    t.h[j] = acc > 0.0 ? acc : 0.0;
  }
  t.z.assign(kNumClasses, 0.0);
  const double* w2 = w_[S::fc2_w].data();
  for (int j = 0; j < kNumClasses; ++j) {
    double acc = w_[S::fc2_b][j];
    for (int i = 0; i < kHidden; ++i) acc += w2[j * kHidden + i] * t.h[i];
    t.z[j] = acc;
  }
  t.prob = softmax(t.z);
}

void Network::run_backward(const Trace& t, int label,
                           std::vector<std::vector<double>>* grads,
                           std::vector<double>* input_grad) const {
  using S = ModelParams::Slot;
  if (label < 0 || label >= kNumClasses)
    data_error("label " + std::to_string(label) + " out of range");

  // d(-ln max(p_y, floor))/dz; the floored branch is flat.
  std::vector<double> dz(kNumClasses, 0.0);
  if (logit_cross_entropy(t.z, label) < -std::log(kProbFloor)) {
    // p_y - 1 written as -sum of the other probabilities (no cancellation)
    double rest = 0.0;
    for (int j = 0; j < kNumClasses; ++j) {
      if (j == label) continue;
      dz[j] = t.prob[j];
      rest += t.prob[j];
    }
    dz[label] = -rest;
  }

  const double* w2 = w_[S::fc2_w].data();
  std::vector<double> dh(kHidden, 0.0);
  for (int j = 0; j < kNumClasses; ++j) {
    if (grads) {
      auto& g = (*grads)[S::fc2_w];
      for (int i = 0; i < kHidden; ++i) g[j * kHidden + i] += dz[j] * t.h[i];
      (*grads)[S::fc2_b][j] += dz[j];
    }
    for (int i = 0; i < kHidden; ++i) dh[i] += w2[j * kHidden + i] * dz[j];
  }
  for (int i = 0; i < kHidden; ++i)
    if (t.h[i] <= 0.0) dh[i] = 0.0;

  const double* w1 = w_[S::fc1_w].data();
  std::vector<double> dp2(kFlat, 0.0);
  for (int j = 0; j < kHidden; ++j) {
    const double g = dh[j];
    if (g == 0.0) continue;
    const double* row = w1 + static_cast<std::size_t>(j) * kFlat;
    if (grads) {
      double* grow = (*grads)[S::fc1_w].data() + static_cast<std::size_t>(j) * kFlat;
      for (int i = 0; i < kFlat; ++i) grow[i] += g * t.p2[i];
      (*grads)[S::fc1_b][j] += g;
    }
    for (int i = 0; i < kFlat; ++i) dp2[i] += row[i] * g;
  }

  std::vector<double> dc2(t.c2.size(), 0.0);
  for (int i = 0; i < kFlat; ++i) dc2[t.arg2[i]] += dp2[i];
  for (std::size_t i = 0; i < dc2.size(); ++i)
    if (t.c2[i] <= 0.0) dc2[i] = 0.0;

  std::vector<double> dp1(t.p1.size(), 0.0);
  conv_backward(t.p1.data(), kP1, kP1, kC1, w_[S::conv2_w].data(), kC2, dc2.data(),
                grads ? (*grads)[S::conv2_w].data() : nullptr,
                grads ? (*grads)[S::conv2_b].data() : nullptr, dp1.data());

  std::vector<double> dc1(t.c1.size(), 0.0);
  for (std::size_t i = 0; i < dp1.size(); ++i) dc1[t.arg1[i]] += dp1[i];
  for (std::size_t i = 0; i < dc1.size(); ++i)
    if (t.c1[i] <= 0.0) dc1[i] = 0.0;

  if (input_grad) input_grad->assign(t.input.size(), 0.0);
  conv_backward(t.input.data(), kInputSize, kInputSize, kInputChannels,
                w_[S::conv1_w].data(), kC1, dc1.data(),
                grads ? (*grads)[S::conv1_w].data() : nullptr,
                grads ? (*grads)[S::conv1_b].data() : nullptr,
                input_grad ? input_grad->data() : nullptr);
}

std::vector<double> Network::logits(const Image& img) const {
  Trace t;
  run_forward(img, t);
  return t.z;
}

std::vector<double> Network::forward(const Image& img) const {
  Trace t;
  run_forward(img, t);
  return t.prob;
}

int Network::predict(const Image& img) const {
  const auto p = forward(img);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double Network::loss(const Image& img, int label) const {
  return logit_cross_entropy(logits(img), label);
}

Image Network::input_gradient(const Image& img, int label) const {
  Trace t;
  run_forward(img, t);
  std::vector<double> g;
  run_backward(t, label, nullptr, &g);
  return Image::from_raw(img.height(), img.width(), img.channels(), std::move(g));
}

std::vector<std::uint32_t> Network::activation_pattern(const Image& img) const {
  Trace t;
  run_forward(img, t);
  std::vector<std::uint32_t> out(t.arg1.begin(), t.arg1.end());
  out.insert(out.end(), t.arg2.begin(), t.arg2.end());
  for (const auto* layer : {&t.c1, &t.c2, &t.h})
    for (double v : *layer) out.push_back(v > 0.0 ? 1u : 0u);
  return out;
}

Network::SampleResult Network::accumulate_gradients(
    const Image& img, int label, std::vector<std::vector<double>>& grads) const {
  Trace t;
  run_forward(img, t);
  run_backward(t, label, &grads, nullptr);
  const int pred =
      static_cast<int>(std::max_element(t.prob.begin(), t.prob.end()) - t.prob.begin());
  return {logit_cross_entropy(t.z, label), pred == label};
}

std::vector<double> forward(const ModelParams& params, const Image& img) {
  return Network(params).forward(img);
}

Image input_gradient(const ModelParams& params, const Image& img, int label) {
  return Network(params).input_gradient(img, label);
}

double accuracy(const ModelParams& params, const Dataset& data) {
  if (data.empty()) return 0.0;
  const Network net(params);
  std::size_t correct = 0;
  for (const auto& s : data) correct += net.predict(s.image) == s.label;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train(const Dataset& train_set, const TrainConfig& config,
                  const Dataset* validation, const EpochCallback& on_epoch) {
  if (train_set.empty()) data_error("cannot train on an empty dataset");
  if (config.batch < 1) config_error("batch must be >= 1");
  if (config.epochs < 0) config_error("epochs must be >= 0");
  if (!(config.lr > 0.0)) config_error("learning rate must be > 0");
  if (!(config.momentum >= 0.0 && config.momentum < 1.0))
    config_error("momentum must be in [0,1)");

  SplitMix64 rng(config.seed);
  TrainResult result{ModelParams::he_uniform(rng), {}};
  ModelParams& params = result.params;

  std::vector<std::vector<float>> velocity;
  std::vector<std::vector<double>> grads;
  for (const auto& t : params.tensors) {
    velocity.emplace_back(t.values.size(), 0.0f);
    grads.emplace_back(t.values.size(), 0.0);
  }

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto lr = static_cast<float>(config.lr);
  const auto momentum = static_cast<float>(config.momentum);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[rng.below(i + 1)]);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
      const Network net(params);
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const Sample& s = train_set[order[b]];
        batch_loss += net.accumulate_gradients(s.image, s.label, grads).loss;
      }
      if (!std::isfinite(batch_loss))
        numeric_error("training diverged: non-finite loss at epoch " +
                      std::to_string(epoch) + ", batch starting at " +
                      std::to_string(start));
      loss_sum += batch_loss;
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = 0; k < grads.size(); ++k) {
        auto& w = params.tensors[k].values;
        auto& v = velocity[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = momentum * v[i] + static_cast<float>(grads[k][i] * inv);
          w[i] -= lr * v[i];
        }
      }
      if (!params.all_finite())
        numeric_error("training diverged: non-finite weights at epoch " +
                      std::to_string(epoch));
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss = loss_sum / static_cast<double>(train_set.size());
    entry.train_accuracy = accuracy(params, train_set);
    if (validation) entry.validation_accuracy = accuracy(params, *validation);
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (bytes.size() - pos < 4) data_error("truncated weight file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[pos + i]} << (8 * i);
  pos += 4;
  return v;
}

constexpr char kMagic[] = "FMDW1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

}  // namespace

std::vector<std::uint8_t> save_weights(const ModelParams& params) {
  std::vector<std::uint8_t> out(kMagic, kMagic + kMagicLen);
  for (const auto& t : params.tensors) {
    put_u32(out, t.rows);
    put_u32(out, t.cols);
    for (float v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

ModelParams load_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagicLen ||
      std::memcmp(bytes.data(), kMagic, kMagicLen) != 0)
    data_error("bad magic: not an FMDW1 weight file");
  std::size_t pos = kMagicLen;
  const auto shapes = reference_shapes();
  ModelParams p;
  for (int i = 0; i < ModelParams::kTensorCount; ++i) {
    const std::uint32_t rows = get_u32(bytes, pos);
    const std::uint32_t cols = get_u32(bytes, pos);
    if (rows != shapes[i].first || cols != shapes[i].second)
      data_error("shape mismatch in tensor " + std::to_string(i) + ": file has " +
                 std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                 std::to_string(shapes[i].first) + "x" +
                 std::to_string(shapes[i].second));
    Tensor t(rows, cols);
    if ((bytes.size() - pos) / 4 < t.values.size()) data_error("truncated weight file");
    for (float& v : t.values) v = std::bit_cast<float>(get_u32(bytes, pos));
    p.tensors[i] = std::move(t);
  }
  if (pos != bytes.size()) data_error("trailing bytes after weight tensors");
  return p;
}

void save_weights_file(const std::string& path, const ModelParams& params) {
  const auto bytes = save_weights(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) data_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

ModelParams load_weights_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) data_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_weights(bytes);
}

}  // namespace fmd
