#pragma once

// Mini-batch training of DCNet<float> with Adam and the step-decay schedule.
// An epoch is a pure function of (parameters, optimizer state, patches,
// options, epoch index), so a run resumed from a saved state reproduces the
// uninterrupted loss curve.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "dcnet/data/scene.hpp"
#include "dcnet/model/network.hpp"
#include "dcnet/optim.hpp"

namespace dcnet::train {

/// Normalized network inputs and target for a set of patches.
struct Batch {
  Tensor pan;    // [b,1,H,W]
  Tensor ms;     // [b,B,h,w]
  Tensor truth;  // [b,B,H,W]; empty when the patches carry no truth
};

inline Batch make_batch(const std::vector<data::Patch>& patches, const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw ConfigError("make_batch: empty batch");
  const auto& first = patches.at(idx.front()).scene;
  const std::size_t b = idx.size(), B = first.bands(), H = first.pan.dim(0), W = first.pan.dim(1);
  const std::size_t h = first.ms.dim(1), w = first.ms.dim(2);
  const bool with_truth = first.truth.has_value();
  Batch out{Tensor({b, 1, H, W}), Tensor({b, B, h, w}), with_truth ? Tensor({b, B, H, W}) : Tensor{}};
  for (std::size_t k = 0; k < b; ++k) {
    const auto& s = patches.at(idx[k]).scene;
    if (s.pan.shape() != first.pan.shape() || s.ms.shape() != first.ms.shape() || s.truth.has_value() != with_truth) {
      throw DimensionError("make_batch: patches in one batch must share shapes");
    }
    auto copy_in = [&](const Tensor& src, Tensor& dst) {
      const auto n = data::normalize(src, s.range);
      std::copy(n.values().begin(), n.values().end(), dst.values().begin() + k * n.numel());
    };
    copy_in(s.pan, out.pan);
    copy_in(s.ms, out.ms);
    if (with_truth) copy_in(*s.truth, out.truth);
  }
  return out;
}

struct TrainOptions {
  std::size_t epochs = 200;
  std::size_t batch_size = 4;
  double base_lr = 1e-3;
  std::size_t lr_period = 150;
  double lr_factor = 0.8;
  std::uint64_t seed = 0;
  /// Wall-clock budget; checked between epochs. Not part of the results.
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double l1 = 0.0;     // mean over training patches
  double total = 0.0;  // mean objective over training patches
  std::optional<double> val_l1;
};

/// Everything needed to continue a run.
struct TrainState {
  explicit TrainState(DCNet<float> model) : net(std::move(model)) {}

  DCNet<float> net;
  AdamState<float> adam;
  std::size_t next_epoch = 0;
  std::vector<EpochLog> history;
  double best_score = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> best_epoch;
};

/// Per-epoch shuffle seed; independent of how many epochs ran before.
inline std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(epoch) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Mean l1 of the network over `patches` without recording a tape.
inline double evaluate_l1(const DCNet<float>& net, const std::vector<data::Patch>& patches, std::size_t batch_size) {
  if (patches.empty()) throw ConfigError("evaluate_l1: no patches");
  NoGradScope<float> no_grad;
  double sum = 0.0;
  for (std::size_t s = 0; s < patches.size(); s += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, patches.size() - s));
    std::iota(idx.begin(), idx.end(), s);
    auto batch = make_batch(patches, idx);
    if (!batch.truth.defined()) throw ConfigError("evaluate_l1: patches carry no truth");
    sum += l1_loss(net.forward(batch.pan, batch.ms), batch.truth).item() * static_cast<double>(idx.size());
  }
  return sum / static_cast<double>(patches.size());
}

/// Called after each epoch; `improved` is true when the epoch set a new best
/// validation score (training l1 when there is no validation set).
using EpochCallback = std::function<void(const TrainState&, const EpochLog&, bool improved)>;

/// Runs epochs [state.next_epoch, options.epochs). Returns false when the
/// deadline stopped the run early. Throws NumericError on a non-finite loss.
inline bool run_epochs(TrainState& state, const std::vector<data::Patch>& train, const std::vector<data::Patch>& val,
                       const TrainOptions& options, const EpochCallback& on_epoch = {}) {
  if (train.empty()) throw ConfigError("train: no training patches");
  if (options.batch_size == 0) throw ConfigError("train: batch_size must be positive");
  const double lambda = state.net.config().lambda;
  auto& params = state.net.params();

  for (std::size_t epoch = state.next_epoch; epoch < options.epochs; ++epoch) {
    if (options.deadline && std::chrono::steady_clock::now() >= *options.deadline) return false;
    EpochLog log;
    log.epoch = epoch;
    log.lr = lr_schedule(epoch, options.base_lr, options.lr_period, options.lr_factor);
    state.adam.options.lr = log.lr;

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(epoch_seed(options.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);

    std::size_t batches = 0;
    for (std::size_t s = 0; s < order.size(); s += options.batch_size) {
      std::vector<std::size_t> idx(order.begin() + s, order.begin() + std::min(order.size(), s + options.batch_size));
      auto batch = make_batch(train, idx);
      if (!batch.truth.defined()) throw ConfigError("train: patches carry no truth");
      params.zero_grad();
      Tape<float> tape;
      TapeScope<float> scope(tape);
      auto loss = dcnet_loss(state.net.forward(batch.pan, batch.ms), batch.truth, params, lambda);
      const double total = loss.total.item();
      if (!std::isfinite(total)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches));
      }
      tape.backward(loss.total);
      adam_step(params, state.adam);
      log.l1 += loss.l1 * static_cast<double>(idx.size());
      log.total += total * static_cast<double>(idx.size());
      ++batches;
    }
    log.l1 /= static_cast<double>(train.size());
    log.total /= static_cast<double>(train.size());
    if (!val.empty()) log.val_l1 = evaluate_l1(state.net, val, options.batch_size);

    const double score = log.val_l1.value_or(log.l1);
    const bool improved = score < state.best_score;
    if (improved) {
      state.best_score = score;
      state.best_epoch = epoch;
    }
    state.history.push_back(log);
    state.next_epoch = epoch + 1;
    if (on_epoch) on_epoch(state, log, improved);
  }
  return true;
}

}  // namespace dcnet::train
