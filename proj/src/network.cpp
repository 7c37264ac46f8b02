#include "kneeflex/network.hpp"

#include <algorithm>
#include <stdexcept>

namespace kneeflex {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string layer_type(const Layer& layer) {
  return std::visit(Overloaded{[](const Conv2D&) { return std::string("Conv2D"); },
                               [](const MaxPool2D&) { return std::string("MaxPooling2D"); },
                               [](const Flatten&) { return std::string("Flatten"); },
                               [](const Dropout&) { return std::string("Dropout"); },
                               [](const Dense&) { return std::string("Dense"); }},
                    layer);
}

// Shape propagation without the batch dimension; throws ShapeError on mismatch.
std::vector<int> output_shape(const Layer& layer, const std::vector<int>& in) {
  return std::visit(
      Overloaded{
          [&](const Conv2D& c) -> std::vector<int> {
            if (in.size() != 3 || in[2] != c.in_ch) throw ShapeError("conv layer channel mismatch");
            if (in[0] < c.kernel_h || in[1] < c.kernel_w) throw ShapeError("conv layer input smaller than kernel");
            return {in[0] - c.kernel_h + 1, in[1] - c.kernel_w + 1, c.out_ch};
          },
          [&](const MaxPool2D&) -> std::vector<int> {
            if (in.size() != 3 || in[0] < 2 || in[1] < 2) throw ShapeError("maxpool input must be at least 2x2");
            return {in[0] / 2, in[1] / 2, in[2]};
          },
          [&](const Flatten&) -> std::vector<int> { return {static_cast<int>(Tensor::count(in))}; },
          [&](const Dropout&) -> std::vector<int> { return in; },
          [&](const Dense& d) -> std::vector<int> {
            if (in.size() != 1 || in[0] != d.in) throw ShapeError("dense layer input size mismatch");
            return {d.out};
          }},
      layer);
}

struct Cache {
  std::vector<Tensor>* activations;
  std::vector<std::vector<std::int32_t>>* argmax;
  std::vector<Tensor>* masks;
};

Tensor forward_impl(const std::vector<Layer>& layers, const std::array<int, 3>& input_shape, const Tensor& batch,
                    Mode mode, std::uint64_t dropout_seed, int threads, Cache* cache) {
  if (batch.rank() != 4 || batch.dim(1) != input_shape[0] || batch.dim(2) != input_shape[1] ||
      batch.dim(3) != input_shape[2])
    throw ShapeError("network input must be (B," + std::to_string(input_shape[0]) + "," +
                     std::to_string(input_shape[1]) + "," + std::to_string(input_shape[2]) + "), got " +
                     batch.shape_string());
  if (cache) {
    cache->activations->clear();
    cache->argmax->assign(layers.size(), {});
    cache->masks->assign(layers.size(), {});
    cache->activations->push_back(batch);
  }
  Tensor x = batch;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Tensor y = std::visit(
        Overloaded{[&](const Conv2D& c) { return conv_forward(x, c, threads); },
                   [&](const MaxPool2D&) {
                     PoolResult r = maxpool_forward(x);
                     if (cache) (*cache->argmax)[i] = std::move(r.argmax);
                     return std::move(r.output);
                   },
                   [&](const Flatten&) { return flatten_forward(x); },
                   [&](const Dropout& d) {
                     Rng rng(derive_seed(dropout_seed, {i}));
                     DropoutResult r = dropout_forward(x, d.rate, mode, rng);
                     if (cache) (*cache->masks)[i] = std::move(r.mask);
                     return std::move(r.output);
                   },
                   [&](const Dense& d) { return dense_forward(x, d); }},
        layers[i]);
    if (cache) cache->activations->push_back(y);
    x = std::move(y);
  }
  return x;
}

}  // namespace

Network::Network(std::vector<Layer> layers, std::array<int, 3> input_shape)
    : layers_(std::move(layers)), input_shape_(input_shape) {
  std::vector<int> shape(input_shape_.begin(), input_shape_.end());
  for (const auto& l : layers_) shape = output_shape(l, shape);
  if (shape.size() != 1) throw ShapeError("network must end in a flat output");
}

Tensor Network::forward(const Tensor& batch) {
  if (mode_ == Mode::Training) {
    Cache cache{&activations_, &pool_argmax_, &dropout_masks_};
    return forward_impl(layers_, input_shape_, batch, mode_, dropout_seed_, threads_, &cache);
  }
  activations_.clear();
  return forward_impl(layers_, input_shape_, batch, mode_, dropout_seed_, threads_, nullptr);
}

Tensor Network::predict(const Tensor& batch) const {
  return forward_impl(layers_, input_shape_, batch, Mode::Inference, 0, threads_, nullptr);
}

std::vector<Tensor> Network::backward(const Tensor& grad_output) {
  if (mode_ != Mode::Training) throw std::logic_error("backward requires training mode");
  if (activations_.size() != layers_.size() + 1) throw std::logic_error("backward called without a cached forward");
  if (grad_output.shape() != activations_.back().shape()) throw ShapeError("grad_output shape mismatch");

  // Index of the first parametric layer: no input gradient needed below it.
  std::size_t first_param = layers_.size();
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (std::holds_alternative<Conv2D>(layers_[i]) || std::holds_alternative<Dense>(layers_[i])) {
      first_param = i;
      break;
    }

  std::vector<Tensor> grads_reversed;
  Tensor g = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Tensor& in = activations_[i];
    const Tensor& out = activations_[i + 1];
    const bool need_input = i > first_param;
    std::visit(Overloaded{[&](const Conv2D& c) {
                            ConvGrads cg = conv_backward(g, in, out, c, need_input, threads_);
                            grads_reversed.push_back(std::move(cg.bias));
                            grads_reversed.push_back(std::move(cg.weight));
                            g = std::move(cg.input);
                          },
                          [&](const MaxPool2D&) { g = maxpool_backward(g, pool_argmax_[i], in.shape()); },
                          [&](const Flatten&) { g = flatten_backward(g, in.shape()); },
                          [&](const Dropout&) { g = dropout_backward(g, dropout_masks_[i]); },
                          [&](const Dense& d) {
                            DenseGrads dg = dense_backward(g, in, out, d);
                            grads_reversed.push_back(std::move(dg.bias));
                            grads_reversed.push_back(std::move(dg.weight));
                            g = std::move(dg.input);
                          }},
               layers_[i]);
    if (i == first_param) break;
  }
  std::reverse(grads_reversed.begin(), grads_reversed.end());
  return grads_reversed;
}

std::vector<ParamRef> Network::parameters() {
  std::vector<ParamRef> out;
  int conv = 0, dense = 0;
  for (auto& l : layers_) {
    if (auto* c = std::get_if<Conv2D>(&l)) {
      const std::string base = "conv" + std::to_string(++conv);
      out.push_back({base + ".weight", &c->weight});
      out.push_back({base + ".bias", &c->bias});
    } else if (auto* d = std::get_if<Dense>(&l)) {
      const std::string base = "dense" + std::to_string(++dense);
      out.push_back({base + ".weight", &d->weight});
      out.push_back({base + ".bias", &d->bias});
    }
  }
  return out;
}

std::vector<const Tensor*> Network::parameter_tensors() const {
  std::vector<const Tensor*> out;
  for (const auto& p : const_cast<Network*>(this)->parameters()) out.push_back(p.value);
  return out;
}

std::vector<std::string> Network::parameter_names() const {
  std::vector<std::string> out;
  for (const auto& p : const_cast<Network*>(this)->parameters()) out.push_back(p.name);
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : parameter_tensors()) n += t->size();
  return n;
}

std::vector<LayerSummary> Network::summary() const {
  std::vector<LayerSummary> out;
  std::vector<int> shape(input_shape_.begin(), input_shape_.end());
  for (const auto& l : layers_) {
    shape = output_shape(l, shape);
    std::size_t params = 0;
    if (const auto* c = std::get_if<Conv2D>(&l)) params = c->parameter_count();
    if (const auto* d = std::get_if<Dense>(&l)) params = d->parameter_count();
    out.push_back({layer_type(l), shape, params});
  }
  return out;
}

Network Network::clone() const {
  Network n(layers_, input_shape_);
  n.mode_ = mode_;
  n.dropout_seed_ = dropout_seed_;
  n.threads_ = threads_;
  return n;
}

Network build_eva_variant(std::array<int, 3> input_shape, std::array<int, 3> kernels, std::array<int, 3> channels,
                          std::array<int, 2> hidden, std::uint64_t seed, float dropout_rate) {
  std::vector<Layer> layers;
  layers.emplace_back(Conv2D(kernels[0], kernels[0], input_shape[2], channels[0]));
  layers.emplace_back(MaxPool2D{});
  layers.emplace_back(Conv2D(kernels[1], kernels[1], channels[0], channels[1]));
  layers.emplace_back(MaxPool2D{});
  layers.emplace_back(Conv2D(kernels[2], kernels[2], channels[1], channels[2]));
  layers.emplace_back(MaxPool2D{});
  layers.emplace_back(Flatten{});
  layers.emplace_back(Dropout{dropout_rate});

  // Flattened width follows from the conv/pool chain.
  std::vector<int> shape(input_shape.begin(), input_shape.end());
  for (const auto& l : layers) shape = output_shape(l, shape);
  layers.emplace_back(Dense(shape[0], hidden[0], Activation::Relu));
  layers.emplace_back(Dense(hidden[0], hidden[1], Activation::Relu));
  layers.emplace_back(Dense(hidden[1], kEvaOutputs, Activation::Linear));

  Rng rng(derive_seed(seed, {0x657661 /* "eva" */}));
  for (auto& l : layers) {
    if (auto* c = std::get_if<Conv2D>(&l)) glorot_init(*c, rng);
    if (auto* d = std::get_if<Dense>(&l)) glorot_init(*d, rng);
  }
  // Output bias starts at the frame centre; from zero the regressor collapses to the label mean.
  auto& out = std::get<Dense>(layers.back());
  for (int j = 0; j < kEvaOutputs; ++j)
    out.bias[j] = j % 2 == 0 ? input_shape[1] / 2.0f : input_shape[0] / 2.0f;
  return Network(std::move(layers), input_shape);
}

Network build_eva(std::uint64_t seed, float dropout_rate) {
  return build_eva_variant(kEvaInputShape, {3, 4, 3}, {32, 64, 4}, {100, 50}, seed, dropout_rate);
}

}  // namespace kneeflex
