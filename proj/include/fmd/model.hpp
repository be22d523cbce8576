#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fmd/datagen.hpp"
#include "fmd/image.hpp"
#include "fmd/rng.hpp"

namespace fmd {

inline constexpr int kInputSize = 32;
inline constexpr int kInputChannels = 3;

/// Row-major 2-D float tensor. Conv kernels are stored as
/// [out_channel][(ky * 3 + kx) * in_channels + in_channel]; dense weights as
/// [output][input]; biases as [n][1].
struct Tensor {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> values;

  Tensor() = default;
  Tensor(std::uint32_t r, std::uint32_t c) : rows(r), cols(c), values(std::size_t{r} * c, 0.0f) {}
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Reference architecture:
///   32x32x3 -> conv3x3x8 (pad 1) -> ReLU -> maxpool2 -> conv3x3x16 (pad 1)
///   -> ReLU -> maxpool2 -> flatten(8*8*16, HWC order) -> dense 1024->64
///   -> ReLU -> dense 64->10 -> softmax
struct ModelParams {
  enum Slot : int { conv1_w, conv1_b, conv2_w, conv2_b, fc1_w, fc1_b, fc2_w, fc2_b };
  static constexpr int kTensorCount = 8;

  std::array<Tensor, kTensorCount> tensors;

  Tensor& operator[](Slot s) { return tensors[s]; }
  const Tensor& operator[](Slot s) const { return tensors[s]; }

  static ModelParams zeros();
  // He-uniform weights (bound sqrt(6/fan_in)), zero biases. Weights are drawn
  // in slot order from one SplitMix64 stream.
  static ModelParams he_uniform(std::uint64_t seed);
  static ModelParams he_uniform(SplitMix64& rng);

  bool all_finite() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Expected {rows, cols} for each slot.
std::array<std::pair<std::uint32_t, std::uint32_t>, ModelParams::kTensorCount>
reference_shapes();

std::vector<double> softmax(std::span<const double> logits);
double cross_entropy(std::span<const double> probs, int label);

/// Double-precision evaluator over a fixed parameter set. Construction copies
/// the float parameters once; every method is const and re-entrant.
class Network {
 public:
  explicit Network(const ModelParams& params);

  std::vector<double> logits(const Image& img) const;
  std::vector<double> forward(const Image& img) const;
  int predict(const Image& img) const;

  double loss(const Image& img, int label) const;

  // dJ/dpixel; same shape as img.
  Image input_gradient(const Image& img, int label) const;

  // Adds dJ/dtheta for one sample into grads (same layout as ModelParams) and
  // returns the sample's loss and whether it was classified correctly.
  struct SampleResult {
    double loss;
    bool correct;
  };
  // ReLU on/off bits and max-pool argmax indices of the forward pass. Two
  // inputs with equal patterns lie on the same linear piece of the network.
  std::vector<std::uint32_t> activation_pattern(const Image& img) const;

  SampleResult accumulate_gradients(const Image& img, int label,
                                    std::vector<std::vector<double>>& grads) const;

 private:
  struct Trace;
  void run_forward(const Image& img, Trace& t) const;
  void run_backward(const Trace& t, int label, std::vector<std::vector<double>>* grads,
                    std::vector<double>* input_grad) const;

  std::array<std::vector<double>, ModelParams::kTensorCount> w_;
};

std::vector<double> forward(const ModelParams& params, const Image& img);
Image input_gradient(const ModelParams& params, const Image& img, int label);

struct TrainConfig {
  std::uint64_t seed = 42;
  double lr = 0.05;
  double momentum = 0.9;
  int batch = 32;
  int epochs = 10;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = -1.0;  // -1 when no validation set given
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch SGD with heavy-ball momentum (v = m*v + g; w -= lr*v) on the
/// batch-mean cross-entropy. The stream that initialises the weights continues
/// into the per-epoch Fisher-Yates shuffles, so the whole run is a function
/// of config.seed.
TrainResult train(const Dataset& train_set, const TrainConfig& config,
                  const Dataset* validation = nullptr,
                  const EpochCallback& on_epoch = {});

double accuracy(const ModelParams& params, const Dataset& data);

// Weight file: "FMDW1\n", then per tensor: u32 rows, u32 cols (little
// endian), rows*cols little-endian IEEE-754 float32 values.
std::vector<std::uint8_t> save_weights(const ModelParams& params);
ModelParams load_weights(std::span<const std::uint8_t> bytes);

void save_weights_file(const std::string& path, const ModelParams& params);
ModelParams load_weights_file(const std::string& path);

}  // namespace fmd
