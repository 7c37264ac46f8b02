#include "kneeflex/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "kneeflex/error.hpp"
#include "kneeflex/loss.hpp"
#include "kneeflex/parallel.hpp"

namespace kneeflex {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kAugmentStream = 2;
constexpr std::uint64_t kDropoutStream = 3;

std::array<double, 6> row(const Tensor& t, std::size_t i) {
  std::array<double, 6> r{};
  for (std::size_t j = 0; j < 6; ++j) r[j] = t[i * 6 + j];
  return r;
}

}  // namespace

void TrainConfig::validate() const {
  Scenario::from_id(scenario);
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(lr >= 0.0f)) throw ConfigError("learning rate must be non-negative");
  if (!(rho >= 0.0f && rho < 1.0f)) throw ConfigError("rho must lie in [0, 1)");
  if (!(eps > 0.0f)) throw ConfigError("epsilon must be positive");
  if (!(dropout_rate >= 0.0f && dropout_rate < 1.0f)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (threads < 1) throw ConfigError("threads must be at least 1");
}

double TrainResult::min_train_loss() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& e : history) m = std::min(m, e.train_loss);
  return m;
}

double TrainResult::min_val_loss() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& e : history)
    if (!std::isnan(e.val_loss)) m = std::min(m, e.val_loss);
  return std::isinf(m) ? std::numeric_limits<double>::quiet_NaN() : m;
}

void image_to_input(const ImageRGBA& img, std::span<float> out) {
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (out.size() != n * 3) throw ShapeError("input buffer does not match the image size");
  constexpr float kScale = 1.0f / (255.0f * 255.0f);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = img.pixels.data() + i * 4;
    for (int c = 0; c < 3; ++c) out[i * 3 + c] = static_cast<float>(p[c] * p[3]) * kScale;
  }
}

Tensor make_batch(std::span<const ImageRGBA* const> images) {
  if (images.empty()) throw ShapeError("empty batch");
  const int h = images[0]->height, w = images[0]->width;
  Tensor batch({static_cast<int>(images.size()), h, w, 3});
  const std::size_t stride = static_cast<std::size_t>(h) * w * 3;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->width != w || images[i]->height != h) throw ShapeError("batch images differ in size");
    image_to_input(*images[i], {batch.data() + i * stride, stride});
  }
  return batch;
}

EvalResult evaluate(const Network& net, const std::vector<Sample>& samples, int batch_size) {
  if (samples.empty()) throw ConfigError("evaluation set is empty");
  EvalResult r;
  r.per_sample.reserve(samples.size());
  for (std::size_t b0 = 0; b0 < samples.size(); b0 += static_cast<std::size_t>(batch_size)) {
    const std::size_t b1 = std::min(samples.size(), b0 + static_cast<std::size_t>(batch_size));
    std::vector<const ImageRGBA*> imgs;
    for (std::size_t i = b0; i < b1; ++i) imgs.push_back(&samples[i].image);
    const Tensor out = net.predict(make_batch(imgs));
    if (out.rank() != 2 || out.dim(1) != 6) throw ShapeError("network must produce 6 outputs");
    for (std::size_t i = b0; i < b1; ++i) {
      const auto pred = row(out, i - b0);
      const auto label = samples[i].label.flat();
      const auto d = point_distances(pred, label);
      r.per_sample.push_back(d[0] + d[1] + d[2]);
      for (int p = 0; p < 3; ++p) r.per_point_error[static_cast<std::size_t>(p)] += d[static_cast<std::size_t>(p)];
    }
  }
  const auto n = static_cast<double>(samples.size());
  r.mean_loss = std::accumulate(r.per_sample.begin(), r.per_sample.end(), 0.0) / n;
  for (double& e : r.per_point_error) e /= n;
  return r;
}

TrainResult train_network(Network net, const std::vector<Sample>& dataset, const std::vector<Sample>& validation,
                          const TrainConfig& config, const BackgroundPool* backgrounds, const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.empty()) throw ConfigError("training set is empty");
  const Scenario scenario = Scenario::from_id(config.scenario);
  const std::size_t pool_size = backgrounds ? backgrounds->size() : 0;
  if (scenario.background && pool_size == 0)
    throw ConfigError("scenario " + std::to_string(config.scenario) + " requires backgrounds");

  net.set_threads(config.threads);
  for (auto& l : net.layers())
    if (auto* d = std::get_if<Dropout>(&l)) d->rate = config.dropout_rate;

  RmsPropState state{config.lr, config.rho, config.eps, {}};
  std::vector<Tensor*> params;
  for (auto& p : net.parameters()) params.push_back(p.value);

  TrainResult result;
  double best_score = std::numeric_limits<double>::infinity();
  const std::size_t n = dataset.size();
  const auto bs = static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(n);
  std::vector<Sample> augmented(bs);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)}));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t b0 = 0; b0 < n; b0 += bs) {
      const std::size_t count = std::min(bs, n - b0);
      parallel_for(count, config.threads, [&](std::size_t i) {
        const std::size_t idx = order[b0 + i];
        const Sample& src = dataset[idx];
        if (!scenario.any()) {
          augmented[i] = src;
          return;
        }
        Rng rng(derive_seed(config.seed, {kAugmentStream, static_cast<std::uint64_t>(epoch), idx}));
        augmented[i] = apply(draw_plan(scenario, rng, src.label, pool_size), src, backgrounds);
      });
      std::vector<const ImageRGBA*> imgs;
      for (std::size_t i = 0; i < count; ++i) imgs.push_back(&augmented[i].image);

      net.set_mode(Mode::Training);
      net.set_dropout_seed(derive_seed(config.seed, {kDropoutStream, static_cast<std::uint64_t>(epoch), b0}));
      const Tensor out = net.forward(make_batch(imgs));
      Tensor grad(out.shape());
      for (std::size_t i = 0; i < count; ++i) {
        const auto pred = row(out, i);
        const auto label = augmented[i].label.flat();
        loss_sum += euclid_loss(pred, label);
        const auto g = euclid_loss_grad(pred, label);
        for (std::size_t j = 0; j < 6; ++j) grad[i * 6 + j] = static_cast<float>(g[j] / static_cast<double>(count));
      }
      rmsprop_step(params, net.backward(grad), state);
    }
    net.set_mode(Mode::Inference);

    EpochStats stats{epoch, loss_sum / static_cast<double>(n), std::numeric_limits<double>::quiet_NaN()};
    if (!validation.empty()) stats.val_loss = evaluate(net, validation, config.batch_size).mean_loss;
    result.history.push_back(stats);
    const double score = validation.empty() ? stats.train_loss : stats.val_loss;
    if (score < best_score || result.best_epoch == 0) {
      best_score = score;
      result.best_epoch = epoch;
      result.best = net.clone();
    }
    if (on_epoch) on_epoch(stats);
  }
  result.last = std::move(net);
  return result;
}

TrainResult train(const std::vector<Sample>& dataset, const std::vector<Sample>& validation,
                  const TrainConfig& config, const BackgroundPool* backgrounds, const EpochCallback& on_epoch) {
  return train_network(build_eva(config.seed, config.dropout_rate), dataset, validation, config, backgrounds,
                       on_epoch);
}

std::string format_history_csv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const auto& e : history) {
    if (std::isnan(e.val_loss))
      std::snprintf(buf, sizeof buf, "%d,%.6f,nan\n", e.epoch, e.train_loss);
    else
      std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f\n", e.epoch, e.train_loss, e.val_loss);
    out += buf;
  }
  return out;
}

}  // namespace kneeflex
