#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "kmp/eval/evaluate.hpp"
#include "kmp/model/dataset.hpp"
#include "kmp/model/kmpnet.hpp"
#include "kmp/model/trainer.hpp"

namespace kmp {

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t init = 2;
  std::uint64_t train = 3;

  // Throws ConfigError when two of the seeds are equal.
  void validate() const;
  // Seeds of repeat r: each base seed shifted by r * 1000003.
  Seeds repeat(std::size_t r) const;
};

struct Recipe {
  PhaseSchedule phase1;  // visual branch alone
  PhaseSchedule phase2;  // graph branch attached
  std::size_t batch_size = 8;
  double graph_lr_scale = 1.0;
};

Recipe default_recipe();

struct ExperimentConfig {
  SyntheticOptions data;
  ModelConfig model;  // n_classes is filled from the dataset
  Recipe recipe;
  Seeds seeds;
  RankingOptions ranking;
};

using ProgressFn = std::function<void(const std::string&)>;

// Visual-only model (graph branch off) trained with phase 1.
std::unique_ptr<KmpNet> train_baseline(const ExperimentConfig& config, const Dataset& dataset,
                                       TrainLog* log = nullptr, const ProgressFn& progress = {});

// Phase 2 from a trained baseline. With the graph branch on, a fresh graph
// branch is attached and both branches train jointly; with it off this is
// the fine-tune control (more visual-only epochs at the phase-2 rate).
std::unique_ptr<KmpNet> train_phase2(const ExperimentConfig& config, const Dataset& dataset,
                                     const KmpNet& baseline, bool graph_branch, GraphMode mode,
                                     TrainLog* log = nullptr, const ProgressFn& progress = {});

// Complete recipe: phase 1, then phase 2 if config.model.graph_branch.
std::unique_ptr<KmpNet> train_two_phase(const ExperimentConfig& config, const Dataset& dataset,
                                        TrainLog* log = nullptr, const ProgressFn& progress = {});

inline constexpr std::size_t kAblationArms = 5;
inline constexpr const char* kAblationArmNames[kAblationArms] = {"baseline", "+fine-tune",
                                                                 "+spatial", "+temporal", "+both"};

struct AblationRun {
  Seeds seeds;
  double top1[kAblationArms] = {};
  double map[kAblationArms] = {};
  double seconds = 0.0;
};

struct AblationResult {
  std::vector<AblationRun> runs;
  double mean_top1[kAblationArms] = {};
  double mean_map[kAblationArms] = {};
  double seconds = 0.0;
};

// For each repeat: generate data, train the shared baseline, then the four
// phase-2 arms, all evaluated on x_c.
AblationResult run_ablation(const ExperimentConfig& config, std::size_t repeats,
                            const ProgressFn& progress = {});

// Five rows (arm, top1, mAP) with 6-decimal values.
std::string format_ablation_table(const AblationResult& result);

}  // namespace kmp
