#include "kneeflex/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "kneeflex/parallel.hpp"

namespace kneeflex {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

// Patch matrix for one channel-last sample: row = output pixel, column = (ky, kx, c).
void im2col(const float* in, int h, int w, int c, int kh, int kw, float* cols) {
  const int ho = h - kh + 1, wo = w - kw + 1;
  const std::size_t row_len = static_cast<std::size_t>(kw) * c;
  for (int oy = 0; oy < ho; ++oy)
    for (int ox = 0; ox < wo; ++ox) {
      float* dst = cols + (static_cast<std::size_t>(oy) * wo + ox) * kh * row_len;
      for (int ky = 0; ky < kh; ++ky)
        std::memcpy(dst + ky * row_len, in + ((static_cast<std::size_t>(oy) + ky) * w + ox) * c, row_len * sizeof(float));
    }
}

void col2im_add(const float* cols, int h, int w, int c, int kh, int kw, float* in) {
  const int ho = h - kh + 1, wo = w - kw + 1;
  const std::size_t row_len = static_cast<std::size_t>(kw) * c;
  for (int oy = 0; oy < ho; ++oy)
    for (int ox = 0; ox < wo; ++ox) {
      const float* src = cols + (static_cast<std::size_t>(oy) * wo + ox) * kh * row_len;
      for (int ky = 0; ky < kh; ++ky) {
        float* dst = in + ((static_cast<std::size_t>(oy) + ky) * w + ox) * c;
        const float* s = src + ky * row_len;
        for (std::size_t i = 0; i < row_len; ++i) dst[i] += s[i];
      }
    }
}

void relu_inplace(std::span<float> v) {
  for (float& x : v) x = x > 0.0f ? x : 0.0f;
}

// Zeroes gradient entries whose post-activation output is not positive.
void relu_mask(std::span<float> grad, std::span<const float> output) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(output[i] > 0.0f)) grad[i] = 0.0f;
}

void uniform_fill(Tensor& t, Rng& rng, double limit) {
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-limit, limit));
}

// Row-order column sums; Eigen's vectorised reductions vary with buffer alignment.
void column_sums(const float* rows, int n_rows, int n_cols, float* out) {
  std::fill_n(out, n_cols, 0.0f);
  for (int r = 0; r < n_rows; ++r) {
    const float* row = rows + static_cast<std::size_t>(r) * n_cols;
    for (int c = 0; c < n_cols; ++c) out[c] += row[c];
  }
}

}  // namespace

Conv2D::Conv2D(int kh, int kw, int cin, int cout, Activation act)
    : kernel_h(kh), kernel_w(kw), in_ch(cin), out_ch(cout), activation(act),
      weight({kh, kw, cin, cout}), bias({cout}) {}

Dense::Dense(int in_features, int out_features, Activation act)
    : in(in_features), out(out_features), activation(act), weight({in_features, out_features}), bias({out_features}) {}

// --- convolution ----------------------------------------------------------

Tensor conv_forward(const Tensor& input, const Conv2D& layer, int threads) {
  require(input.rank() == 4, "conv input must be (B,H,W,C)");
  const int b = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  require(c == layer.in_ch, "conv input channels do not match the layer");
  require(h >= layer.kernel_h && w >= layer.kernel_w, "conv input smaller than the kernel");
  const int ho = h - layer.kernel_h + 1, wo = w - layer.kernel_w + 1;
  const int k = layer.kernel_h * layer.kernel_w * c;
  const int m = ho * wo;
  Tensor out({b, ho, wo, layer.out_ch});
  const ConstMatMap weight(layer.weight.data(), k, layer.out_ch);
  const Eigen::Map<const Eigen::RowVectorXf> bias(layer.bias.data(), layer.out_ch);
  const std::size_t in_stride = static_cast<std::size_t>(h) * w * c;
  const std::size_t out_stride = static_cast<std::size_t>(m) * layer.out_ch;

  const int workers = std::max(1, std::min(threads, b));
  std::vector<std::vector<float>> scratch(static_cast<std::size_t>(workers),
                                          std::vector<float>(static_cast<std::size_t>(m) * k));
  parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t wi) {
    for (int s = static_cast<int>(wi); s < b; s += workers) {
      float* cols = scratch[wi].data();
      im2col(input.data() + s * in_stride, h, w, c, layer.kernel_h, layer.kernel_w, cols);
      MatMap y(out.data() + s * out_stride, m, layer.out_ch);
      y.noalias() = ConstMatMap(cols, m, k) * weight;
      y.rowwise() += bias;
      if (layer.activation == Activation::Relu)
        relu_inplace({out.data() + s * out_stride, out_stride});
    }
  });
  return out;
}

ConvGrads conv_backward(const Tensor& grad_out, const Tensor& input, const Tensor& output, const Conv2D& layer,
                        bool need_input_grad, int threads) {
  require(input.rank() == 4 && input.dim(3) == layer.in_ch, "conv backward: input shape mismatch");
  const int b = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const int ho = h - layer.kernel_h + 1, wo = w - layer.kernel_w + 1;
  require(grad_out.shape() == std::vector<int>{b, ho, wo, layer.out_ch}, "conv backward: grad_out shape mismatch");
  require(output.shape() == grad_out.shape(), "conv backward: cached output shape mismatch");
  const int k = layer.kernel_h * layer.kernel_w * c;
  const int m = ho * wo;
  const std::size_t in_stride = static_cast<std::size_t>(h) * w * c;
  const std::size_t out_stride = static_cast<std::size_t>(m) * layer.out_ch;

  ConvGrads g;
  g.weight = Tensor(layer.weight.shape());
  g.bias = Tensor(layer.bias.shape());
  if (need_input_grad) g.input = Tensor(input.shape());

  // Per-sample weight/bias gradients, reduced afterwards in sample order so the
  // result does not depend on the worker count.
  std::vector<Tensor> dw(static_cast<std::size_t>(b), Tensor(layer.weight.shape()));
  std::vector<Tensor> db(static_cast<std::size_t>(b), Tensor(layer.bias.shape()));
  const ConstMatMap weight(layer.weight.data(), k, layer.out_ch);

  const int workers = std::max(1, std::min(threads, b));
  struct Scratch {
    std::vector<float> cols, dy, dcols;
  };
  std::vector<Scratch> scratch(static_cast<std::size_t>(workers));
  parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t wi) {
    auto& sc = scratch[wi];
    sc.cols.resize(static_cast<std::size_t>(m) * k);
    sc.dy.resize(out_stride);
    if (need_input_grad) sc.dcols.resize(static_cast<std::size_t>(m) * k);
    for (int s = static_cast<int>(wi); s < b; s += workers) {
      std::copy_n(grad_out.data() + s * out_stride, out_stride, sc.dy.data());
      if (layer.activation == Activation::Relu)
        relu_mask(sc.dy, {output.data() + s * out_stride, out_stride});
      im2col(input.data() + s * in_stride, h, w, c, layer.kernel_h, layer.kernel_w, sc.cols.data());
      const ConstMatMap cols(sc.cols.data(), m, k);
      const ConstMatMap dy(sc.dy.data(), m, layer.out_ch);
      MatMap(dw[static_cast<std::size_t>(s)].data(), k, layer.out_ch).noalias() = cols.transpose() * dy;
      column_sums(sc.dy.data(), m, layer.out_ch, db[static_cast<std::size_t>(s)].data());
      if (need_input_grad) {
        MatMap(sc.dcols.data(), m, k).noalias() = dy * weight.transpose();
        col2im_add(sc.dcols.data(), h, w, c, layer.kernel_h, layer.kernel_w, g.input.data() + s * in_stride);
      }
    }
  });
  for (int s = 0; s < b; ++s) {
    const auto& sw = dw[static_cast<std::size_t>(s)];
    const auto& sb = db[static_cast<std::size_t>(s)];
    for (std::size_t i = 0; i < g.weight.size(); ++i) g.weight[i] += sw[i];
    for (std::size_t i = 0; i < g.bias.size(); ++i) g.bias[i] += sb[i];
  }
  return g;
}

// --- pooling --------------------------------------------------------------

PoolResult maxpool_forward(const Tensor& input) {
  require(input.rank() == 4, "maxpool input must be (B,H,W,C)");
  const int b = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  require(h >= 2 && w >= 2, "maxpool input must be at least 2x2");
  const int ho = h / 2, wo = w / 2;
  PoolResult r{Tensor({b, ho, wo, c}), {}};
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (int s = 0; s < b; ++s)
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x)
        for (int ch = 0; ch < c; ++ch, ++o) {
          float best = -std::numeric_limits<float>::infinity();
          std::int32_t best_idx = -1;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const auto idx = static_cast<std::int32_t>(((static_cast<std::size_t>(s) * h + 2 * y + dy) * w + 2 * x + dx) * c + ch);
              if (best_idx < 0 || input[static_cast<std::size_t>(idx)] > best) {
                best = input[static_cast<std::size_t>(idx)];
                best_idx = idx;
              }
            }
          r.output[o] = best;
          r.argmax[o] = best_idx;
        }
  return r;
}

Tensor maxpool_backward(const Tensor& grad_out, const std::vector<std::int32_t>& argmax,
                        const std::vector<int>& input_shape) {
  require(grad_out.size() == argmax.size(), "maxpool backward: argmax does not match grad_out");
  Tensor g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    require(argmax[i] >= 0 && static_cast<std::size_t>(argmax[i]) < g.size(), "maxpool backward: argmax out of range");
    g[static_cast<std::size_t>(argmax[i])] += grad_out[i];
  }
  return g;
}

// --- flatten / dropout ----------------------------------------------------

Tensor flatten_forward(const Tensor& input) {
  require(input.rank() >= 2, "flatten input needs a batch dimension");
  Tensor out = input;
  out.reshape({input.dim(0), static_cast<int>(input.size() / static_cast<std::size_t>(input.dim(0)))});
  return out;
}

Tensor flatten_backward(const Tensor& grad_out, const std::vector<int>& input_shape) {
  Tensor g = grad_out;
  g.reshape(input_shape);
  return g;
}

DropoutResult dropout_forward(const Tensor& input, float rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0f && rate < 1.0f)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (mode == Mode::Inference || rate == 0.0f) return {input, {}};
  DropoutResult r{Tensor(input.shape()), Tensor(input.shape())};
  const float keep_scale = 1.0f / (1.0f - rate);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const float m = rng.uniform() >= rate ? keep_scale : 0.0f;
    r.mask[i] = m;
    r.output[i] = input[i] * m;
  }
  return r;
}

Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask) {
  if (mask.empty()) return grad_out;
  require(mask.size() == grad_out.size(), "dropout backward: mask shape mismatch");
  Tensor g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_out[i] * mask[i];
  return g;
}

// --- dense ----------------------------------------------------------------

Tensor dense_forward(const Tensor& input, const Dense& layer) {
  require(input.rank() == 2 && input.dim(1) == layer.in, "dense input shape mismatch");
  const int b = input.dim(0);
  Tensor out({b, layer.out});
  MatMap y(out.data(), b, layer.out);
  y.noalias() = ConstMatMap(input.data(), b, layer.in) * ConstMatMap(layer.weight.data(), layer.in, layer.out);
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(layer.bias.data(), layer.out);
  if (layer.activation == Activation::Relu) relu_inplace(out.values());
  return out;
}

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input, const Tensor& output, const Dense& layer) {
  require(input.rank() == 2 && input.dim(1) == layer.in, "dense backward: input shape mismatch");
  const int b = input.dim(0);
  require(grad_out.shape() == std::vector<int>{b, layer.out}, "dense backward: grad_out shape mismatch");
  Tensor dy = grad_out;
  if (layer.activation == Activation::Relu) {
    require(output.shape() == grad_out.shape(), "dense backward: cached output shape mismatch");
    relu_mask(dy.values(), output.values());
  }
  DenseGrads g{Tensor(input.shape()), Tensor(layer.weight.shape()), Tensor(layer.bias.shape())};
  const ConstMatMap x(input.data(), b, layer.in);
  const ConstMatMap d(dy.data(), b, layer.out);
  MatMap(g.weight.data(), layer.in, layer.out).noalias() = x.transpose() * d;
  column_sums(dy.data(), b, layer.out, g.bias.data());
  MatMap(g.input.data(), b, layer.in).noalias() = d * ConstMatMap(layer.weight.data(), layer.in, layer.out).transpose();
  return g;
}

void glorot_init(Conv2D& layer, Rng& rng) {
  const double receptive = static_cast<double>(layer.kernel_h) * layer.kernel_w;
  uniform_fill(layer.weight, rng, std::sqrt(6.0 / (receptive * layer.in_ch + receptive * layer.out_ch)));
  layer.bias.fill(0.0f);
}

void glorot_init(Dense& layer, Rng& rng) {
  uniform_fill(layer.weight, rng, std::sqrt(6.0 / (layer.in + layer.out)));
  layer.bias.fill(0.0f);
}

}  // namespace kneeflex
