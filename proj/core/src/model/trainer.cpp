#include "kmp/model/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "kmp/error.hpp"
#include "kmp/numerics/ops.hpp"
#include "kmp/numerics/parameters.hpp"

namespace kmp {

double PhaseSchedule::lr_at(std::size_t epoch) const {
  std::size_t decays = 0;
  if (!decay_epochs.empty()) {
    decays = static_cast<std::size_t>(std::count_if(decay_epochs.begin(), decay_epochs.end(),
                                                    [&](std::size_t d) { return epoch > d; }));
  } else if (decay_every > 0 && epoch > 0) {
    decays = (epoch - 1) / decay_every;
  }
  return lr * std::pow(decay_factor, static_cast<double>(decays));
}

void PhaseSchedule::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("schedule: lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ConfigError("schedule: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("schedule: weight_decay must be >= 0");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
    throw ConfigError("schedule: decay_factor must be in (0, 1]");
  }
}

SgdMomentum::SgdMomentum(std::vector<Parameter> params, double momentum, double weight_decay)
    : params_(std::move(params)),
      scales_(params_.size(), 1.0),
      momentum_(momentum),
      weight_decay_(weight_decay) {
  for (const auto& p : params_) velocity_.emplace_back(p.tensor.numel(), 0.0);
}

void SgdMomentum::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor t = params_[i].tensor;
    if (!t.has_grad() && weight_decay_ == 0.0) continue;
    auto w = t.mutable_data();
    auto g = t.mutable_grad();
    auto& v = velocity_[i];
    const double rate = lr * scales_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = momentum_ * v[j] + g[j] + weight_decay_ * w[j];
      w[j] -= rate * v[j];
    }
  }
}

void SgdMomentum::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

TrainLog train(KmpNet& net, const Dataset& dataset, const TrainOptions& options) {
  options.schedule.validate();
  if (options.batch_size == 0) throw ConfigError("train: batch size must be >= 1");
  if (options.use_graph && !net.has_graph_branch()) {
    throw ConfigError("train: graph loss requested but the model has no graph branch");
  }
  std::vector<std::size_t> pool = dataset.indices(Split::kTrain);
  if (options.max_tracklets > 0 && pool.size() > options.max_tracklets) {
    pool.resize(options.max_tracklets);
  }
  if (pool.empty()) throw ConfigError("train: dataset has no training tracklets");
  for (std::size_t i : pool) {
    if (dataset.tracklets[i].identity >= net.config().n_classes) {
      throw IndexError("train: identity " + std::to_string(dataset.tracklets[i].identity) +
                       " exceeds the model's " + std::to_string(net.config().n_classes) +
                       " classes");
    }
  }

  std::vector<Parameter> trainable;
  for (const auto& p : net.params().all()) {
    if (p.name.starts_with(options.trainable_prefix)) trainable.push_back(p);
  }
  SgdMomentum opt(trainable, options.schedule.momentum, options.schedule.weight_decay);
  for (std::size_t i = 0; i < trainable.size(); ++i) {
    if (trainable[i].name.starts_with(kGraphPrefix)) opt.set_lr_scale(i, options.graph_lr_scale);
  }

  std::vector<Tensor> frames;
  frames.reserve(pool.size());
  for (std::size_t i : pool) frames.push_back(dataset.frames_tensor(i));

  TrainLog log;
  std::vector<std::size_t> order(pool.size());
  std::size_t global_step = 0;
  for (std::size_t epoch = 1; epoch <= options.schedule.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = options.schedule.lr_at(epoch);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(parameter_seed(options.seed, "shuffle/" + std::to_string(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      const std::size_t end = std::min(order.size(), begin + options.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      opt.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t slot = order[b];
        const Tracklet& tr = dataset.tracklets[pool[slot]];
        const std::uint64_t dropout_seed =
            parameter_seed(options.seed, "dropout/" + std::to_string(global_step)) + b;
        Tape tape;
        TapeScope scope(tape);
        KmpOutput out = net.forward(frames[slot], tr.track, true, dropout_seed, options.use_graph);
        Tensor loss = joint_loss(out.all_logits(), tr.identity);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw NonFiniteError("joint_loss", "training step " + std::to_string(global_step) +
                                                 " (epoch " + std::to_string(epoch) + ")");
        }
        batch_loss += value * inv_batch;
        tape.backward(ops::scale(loss, inv_batch));
      }
      opt.step(lr);
      log.step_losses.push_back(batch_loss);
      loss_sum += batch_loss;
      ++entry.steps;
      ++global_step;
    }
    opt.zero_grad();
    entry.mean_loss = loss_sum / static_cast<double>(entry.steps);
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (options.on_epoch) options.on_epoch(entry);
    log.epochs.push_back(std::move(entry));
  }
  return log;
}

}  // namespace kmp
