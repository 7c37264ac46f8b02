#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kneeflex/augment.hpp"
#include "kneeflex/keypoints.hpp"
#include "kneeflex/network.hpp"
#include "kneeflex/optimizer.hpp"

namespace kneeflex {

struct TrainConfig {
  int scenario = 1;
  int epochs = 50;
  int batch_size = 32;
  std::uint64_t seed = 0;
  float lr = 0.001f;
  float rho = 0.9f;
  float eps = 1e-7f;
  float dropout_rate = 0.5f;
  int threads = 1;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when no validation set was given

  bool operator==(const EpochStats&) const = default;
};

struct TrainResult {
  Network best;  // weights at the lowest validation loss (train loss without validation)
  Network last;
  int best_epoch = 0;
  std::vector<EpochStats> history;

  double min_train_loss() const;
  double min_val_loss() const;
};

/// Called after each epoch; useful for progress output.
using EpochCallback = std::function<void(const EpochStats&)>;

/// Pixels scaled to [0,1], colour premultiplied by alpha (transparent -> black).
void image_to_input(const ImageRGBA& img, std::span<float> out);

/// Stacks frames into a (B, 150, 200, 3) batch.
Tensor make_batch(std::span<const ImageRGBA* const> images);

/// Mini-batch RMSProp training with a fresh augmentation plan per sample per
/// epoch. Deterministic given config.seed, independent of config.threads.
TrainResult train(const std::vector<Sample>& dataset, const std::vector<Sample>& validation,
                  const TrainConfig& config, const BackgroundPool* backgrounds = nullptr,
                  const EpochCallback& on_epoch = {});

/// Same loop on a caller-supplied network (used for tests on reduced inputs).
TrainResult train_network(Network net, const std::vector<Sample>& dataset, const std::vector<Sample>& validation,
                          const TrainConfig& config, const BackgroundPool* backgrounds = nullptr,
                          const EpochCallback& on_epoch = {});

struct EvalResult {
  double mean_loss = 0.0;
  std::array<double, 3> per_point_error{};  // mean distance for thigh, knee, leg
  std::vector<double> per_sample;
};

/// Inference-mode evaluation of the mean per-sample loss.
EvalResult evaluate(const Network& net, const std::vector<Sample>& samples, int batch_size = 32);

/// `epoch,train_loss,val_loss` with six decimals.
std::string format_history_csv(const std::vector<EpochStats>& history);

}  // namespace kneeflex
