#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "kmp/model/dataset.hpp"
#include "kmp/model/kmpnet.hpp"

namespace kmp {

// Step learning-rate schedule over 1-based epochs. Decay points are either
// listed explicitly or fall every `decay_every` epochs; after a decay point d
// the rate is multiplied by `decay_factor` from epoch d + 1 on.
struct PhaseSchedule {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t epochs = 40;
  std::size_t decay_every = 20;           // 0 disables periodic decay
  std::vector<std::size_t> decay_epochs;  // overrides decay_every when non-empty
  double decay_factor = 0.1;

  double lr_at(std::size_t epoch) const;
  void validate() const;
};

// SGD with heavy-ball momentum and L2 weight decay:
//   v <- mu v + (g + wd w),  w <- w - lr * scale * v
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Parameter> params, double momentum, double weight_decay);
  // Optional per-parameter learning-rate multipliers (default 1).
  void set_lr_scale(std::size_t index, double scale) { scales_.at(index) = scale; }
  void step(double lr);
  void zero_grad();
  const std::vector<Parameter>& params() const { return params_; }

 private:
  std::vector<Parameter> params_;
  std::vector<std::vector<double>> velocity_;
  std::vector<double> scales_;
  double momentum_;
  double weight_decay_;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double mean_loss = 0.0;
  std::size_t steps = 0;
  double seconds = 0.0;
  std::vector<std::pair<std::string, double>> metrics;  // filled by on_epoch
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::vector<double> step_losses;
};

struct TrainOptions {
  PhaseSchedule schedule;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  // Include the graph classifiers in the loss (needs a graph branch).
  bool use_graph = true;
  // Only parameters whose name starts with this prefix are updated.
  std::string trainable_prefix;
  // Learning-rate multiplier for "graph." parameters.
  double graph_lr_scale = 1.0;
  // Restrict training to the first n training tracklets (0 = all).
  std::size_t max_tracklets = 0;
  std::function<void(EpochLog&)> on_epoch;
};

// Mini-batch training on the dataset's train split with the identity as the
// class label. The batch loss is the mean over tracklets of the joint loss.
// Deterministic in options.seed. A non-finite loss aborts with the step index.
TrainLog train(KmpNet& net, const Dataset& dataset, const TrainOptions& options);

}  // namespace kmp
