#include "kmp/model/experiment.hpp"

#include <chrono>
#include <cstdio>

#include "kmp/error.hpp"

namespace kmp {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ModelConfig sized_config(const ExperimentConfig& config, const Dataset& dataset) {
  ModelConfig m = config.model;
  m.n_classes = dataset.n_train_identities;
  m.include_head = dataset.include_head;
  m.image_height = dataset.height;
  m.image_width = dataset.width;
  return m;
}

TrainOptions phase_options(const ExperimentConfig& config, const PhaseSchedule& schedule,
                           std::uint64_t seed, const std::string& seed_tag, const std::string& tag,
                           const ProgressFn& progress) {
  TrainOptions o;
  o.schedule = schedule;
  o.batch_size = config.recipe.batch_size;
  o.seed = parameter_seed(seed, seed_tag);
  if (progress) {
    o.on_epoch = [progress, tag](EpochLog& e) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s epoch %zu lr %.3g loss %.4f (%.1fs)", tag.c_str(), e.epoch,
                    e.lr, e.mean_loss, e.seconds);
      progress(buf);
    };
  }
  return o;
}

void append(TrainLog* dst, TrainLog&& src) {
  if (!dst) return;
  dst->epochs.insert(dst->epochs.end(), src.epochs.begin(), src.epochs.end());
  dst->step_losses.insert(dst->step_losses.end(), src.step_losses.begin(), src.step_losses.end());
}

}  // namespace

void Seeds::validate() const {
  if (data == init || data == train || init == train) {
    throw ConfigError("seeds collide: data=" + std::to_string(data) +
                      " init=" + std::to_string(init) + " train=" + std::to_string(train) +
                      " must be pairwise distinct");
  }
}

Seeds Seeds::repeat(std::size_t r) const {
  const std::uint64_t shift = 1000003ULL * r;
  return {data + shift, init + shift, train + shift};
}

Recipe default_recipe() {
  Recipe r;
  r.phase1.lr = 1e-3;
  r.phase1.epochs = 30;
  r.phase1.decay_every = 20;
  r.phase2.lr = r.phase1.lr / 10;
  r.phase2.epochs = 10;
  r.phase2.decay_every = 0;
  r.phase2.decay_epochs = {50, 100};
  return r;
}

std::unique_ptr<KmpNet> train_baseline(const ExperimentConfig& config, const Dataset& dataset,
                                       TrainLog* log, const ProgressFn& progress) {
  ModelConfig m = sized_config(config, dataset);
  m.graph_branch = false;
  auto net = std::make_unique<KmpNet>(m, config.seeds.init);
  TrainOptions o =
      phase_options(config, config.recipe.phase1, config.seeds.train, "phase1", "phase1", progress);
  o.use_graph = false;
  append(log, train(*net, dataset, o));
  return net;
}

std::unique_ptr<KmpNet> train_phase2(const ExperimentConfig& config, const Dataset& dataset,
                                     const KmpNet& baseline, bool graph_branch, GraphMode mode,
                                     TrainLog* log, const ProgressFn& progress) {
  ModelConfig m = sized_config(config, dataset);
  m.graph_branch = graph_branch;
  m.mode = mode;
  auto net = std::make_unique<KmpNet>(m, config.seeds.init);
  net->load_matching(baseline.params());
  const std::string tag = graph_branch ? "phase2-" + std::string(to_string(mode)) : "fine-tune";
  TrainOptions o =
      phase_options(config, config.recipe.phase2, config.seeds.train, "phase2", tag, progress);
  o.use_graph = graph_branch;
  o.graph_lr_scale = config.recipe.graph_lr_scale;
  append(log, train(*net, dataset, o));
  return net;
}

std::unique_ptr<KmpNet> train_two_phase(const ExperimentConfig& config, const Dataset& dataset,
                                        TrainLog* log, const ProgressFn& progress) {
  auto baseline = train_baseline(config, dataset, log, progress);
  if (!config.model.graph_branch) return baseline;
  return train_phase2(config, dataset, *baseline, true, config.model.mode, log, progress);
}

AblationResult run_ablation(const ExperimentConfig& config, std::size_t repeats,
                            const ProgressFn& progress) {
  if (repeats == 0) throw ConfigError("ablation: need at least one repeat");
  config.seeds.validate();
  const auto start = std::chrono::steady_clock::now();
  AblationResult result;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto run_start = std::chrono::steady_clock::now();
    ExperimentConfig c = config;
    c.seeds = config.seeds.repeat(r);
    SyntheticOptions data = config.data;
    data.seed = c.seeds.data;
    const Dataset dataset = generate_synthetic_dataset(data);

    AblationRun run;
    run.seeds = c.seeds;
    EvalOptions eval_options;
    eval_options.ranking = config.ranking;
    auto score = [&](std::size_t arm, const KmpNet& net) {
      const EvalResult e = evaluate(net, dataset, eval_options);
      run.top1[arm] = e.ranking.top(1);
      run.map[arm] = e.ranking.map;
      if (progress) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "repeat %zu %-10s top1 %.4f mAP %.4f", r,
                      kAblationArmNames[arm], run.top1[arm], run.map[arm]);
        progress(buf);
      }
    };
    auto baseline = train_baseline(c, dataset, nullptr, progress);
    score(0, *baseline);
    score(1, *train_phase2(c, dataset, *baseline, false, GraphMode::kBoth, nullptr, progress));
    const GraphMode modes[3] = {GraphMode::kSpatial, GraphMode::kTemporal, GraphMode::kBoth};
    for (std::size_t i = 0; i < 3; ++i) {
      score(2 + i, *train_phase2(c, dataset, *baseline, true, modes[i], nullptr, progress));
    }
    run.seconds = seconds_since(run_start);
    result.runs.push_back(run);
  }
  for (const auto& run : result.runs) {
    for (std::size_t a = 0; a < kAblationArms; ++a) {
      result.mean_top1[a] += run.top1[a] / static_cast<double>(repeats);
      result.mean_map[a] += run.map[a] / static_cast<double>(repeats);
    }
  }
  result.seconds = seconds_since(start);
  return result;
}

std::string format_ablation_table(const AblationResult& result) {
  std::string out = "arm top1 mAP\n";
  char buf[128];
  for (std::size_t a = 0; a < kAblationArms; ++a) {
    std::snprintf(buf, sizeof buf, "%s %.6f %.6f\n", kAblationArmNames[a], result.mean_top1[a],
                  result.mean_map[a]);
    out += buf;
  }
  return out;
}

}  // namespace kmp
