#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "kneeflex/rng.hpp"
#include "kneeflex/tensor.hpp"

namespace kneeflex {

enum class Activation { Linear, Relu };
enum class Mode { Training, Inference };

/// Valid (unpadded) stride-1 convolution over channel-last input.
/// Weight layout (kernel_h, kernel_w, in_ch, out_ch).
struct Conv2D {
  int kernel_h = 3;
  int kernel_w = 3;
  int in_ch = 1;
  int out_ch = 1;
  Activation activation = Activation::Relu;
  Tensor weight;
  Tensor bias;

  Conv2D() = default;
  Conv2D(int kh, int kw, int cin, int cout, Activation act = Activation::Relu);
  std::size_t parameter_count() const {
    return (static_cast<std::size_t>(kernel_h) * kernel_w * in_ch + 1) * out_ch;
  }
};

/// 2x2 window, stride 2; an odd trailing row or column is dropped.
struct MaxPool2D {};

struct Flatten {};

struct Dropout {
  float rate = 0.5f;
};

/// Affine map with weight layout (in, out).
struct Dense {
  int in = 1;
  int out = 1;
  Activation activation = Activation::Relu;
  Tensor weight;
  Tensor bias;

  Dense() = default;
  Dense(int in_features, int out_features, Activation act);
  std::size_t parameter_count() const { return static_cast<std::size_t>(in) * out + out; }
};

using Layer = std::variant<Conv2D, MaxPool2D, Flatten, Dropout, Dense>;

struct ConvGrads {
  Tensor input;   // empty when not requested
  Tensor weight;
  Tensor bias;
};

struct DenseGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

struct PoolResult {
  Tensor output;
  std::vector<std::int32_t> argmax;  // flat input offset per output element
};

struct DropoutResult {
  Tensor output;
  Tensor mask;  // 0 or 1/(1-rate); empty in inference mode
};

/// (B,H,W,Cin) -> (B,H-kh+1,W-kw+1,Cout), activation applied.
Tensor conv_forward(const Tensor& input, const Conv2D& layer, int threads = 1);

/// Gradients of the conv layer given its cached input and (post-activation) output.
ConvGrads conv_backward(const Tensor& grad_out, const Tensor& input, const Tensor& output, const Conv2D& layer,
                        bool need_input_grad = true, int threads = 1);

PoolResult maxpool_forward(const Tensor& input);
Tensor maxpool_backward(const Tensor& grad_out, const std::vector<std::int32_t>& argmax,
                        const std::vector<int>& input_shape);

Tensor flatten_forward(const Tensor& input);
Tensor flatten_backward(const Tensor& grad_out, const std::vector<int>& input_shape);

/// Inverted dropout; identity in inference mode or at rate 0.
DropoutResult dropout_forward(const Tensor& input, float rate, Mode mode, Rng& rng);
Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask);

/// (B,in) -> (B,out), activation applied.
Tensor dense_forward(const Tensor& input, const Dense& layer);
DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input, const Tensor& output, const Dense& layer);

/// Glorot-uniform weights (fan-average scaling) and zero biases.
void glorot_init(Conv2D& layer, Rng& rng);
void glorot_init(Dense& layer, Rng& rng);

}  // namespace kneeflex
