#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kneeflex/layers.hpp"

namespace kneeflex {

/// Named view of one trainable tensor inside a Network.
struct ParamRef {
  std::string name;
  Tensor* value;
};

struct LayerSummary {
  std::string type;
  std::vector<int> output_shape;  // without the batch dimension
  std::size_t parameters = 0;
};

/// Sequential layer stack with cached forward activations for backprop.
class Network {
 public:
  Network() = default;
  /// input_shape is (H, W, C). Throws ShapeError if the layers do not chain.
  Network(std::vector<Layer> layers, std::array<int, 3> input_shape);

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::array<int, 3>& input_shape() const { return input_shape_; }

  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  /// Seeds the dropout masks of the next training-mode forward.
  void set_dropout_seed(std::uint64_t seed) { dropout_seed_ = seed; }
  void set_threads(int threads) { threads_ = threads < 1 ? 1 : threads; }
  int threads() const { return threads_; }

  /// (B,H,W,C) -> (B, outputs). Caches activations in training mode.
  Tensor forward(const Tensor& batch);

  /// Inference-mode forward that leaves the cache and mode untouched.
  Tensor predict(const Tensor& batch) const;

  /// Gradients of every trainable tensor, in parameters() order, for the
  /// cached forward pass. Requires training mode.
  std::vector<Tensor> backward(const Tensor& grad_output);

  std::vector<ParamRef> parameters();
  std::vector<const Tensor*> parameter_tensors() const;
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;

  /// Output shape and parameter count for every layer.
  std::vector<LayerSummary> summary() const;

  /// Same architecture and weights, no cache.
  Network clone() const;

 private:
  Tensor run(const Tensor& batch, Mode mode, bool keep_cache);

  std::vector<Layer> layers_;
  std::array<int, 3> input_shape_{};
  Mode mode_ = Mode::Inference;
  std::uint64_t dropout_seed_ = 0;
  int threads_ = 1;

  // Forward cache: activations_[i] is the input of layer i, activations_.back() the output.
  std::vector<Tensor> activations_;
  std::vector<std::vector<std::int32_t>> pool_argmax_;
  std::vector<Tensor> dropout_masks_;
};

inline constexpr std::array<int, 3> kEvaInputShape = {150, 200, 3};
inline constexpr std::size_t kEvaParameterCount = 188692;
inline constexpr int kEvaOutputs = 6;

/// Conv(3x3,32)-Pool-Conv(4x4,64)-Pool-Conv(3x3,4)-Pool-Flatten-Dropout(0.5)
/// -Dense(100)-Dense(50)-Dense(6, linear), Glorot-initialised from `seed`.
/// The output bias starts at the frame centre (W/2, H/2) for every point.
Network build_eva(std::uint64_t seed = 0, float dropout_rate = 0.5f);

/// Same layer sequence at reduced width for a (H, W, 3) input; used by gradient checks.
Network build_eva_variant(std::array<int, 3> input_shape, std::array<int, 3> kernels,
                          std::array<int, 3> channels, std::array<int, 2> hidden, std::uint64_t seed,
                          float dropout_rate = 0.5f);

}  // namespace kneeflex
