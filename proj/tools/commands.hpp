#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "kmp/eval/evaluate.hpp"
#include "run_config.hpp"

namespace kmp::app {

namespace fs = std::filesystem;

// Each command returns a process exit code and writes its resolved config
// next to its outputs. Library errors propagate as kmp::Error.

// Writes the synthetic dataset to out.
int cmd_gen_data(const RunConfig& config, const fs::path& out, std::ostream& log);

// Two-phase training; writes out/checkpoint and out/train_log.tsv.
int cmd_train(const RunConfig& config, const fs::path& out, std::ostream& log);

// Scores a checkpoint; writes out/metrics.txt and out/metrics.tsv. With
// `compare`, also evaluates that checkpoint and fails unless embeddings and
// distances are bit-identical.
int cmd_eval(const RunConfig& config, const fs::path& checkpoint, EmbeddingSource source,
             const fs::path& out, const std::optional<fs::path>& compare, std::ostream& log);

// Finite-difference suite over every op and the full model.
int cmd_gradcheck(const RunConfig& config, const std::optional<fs::path>& out, std::ostream& log);

int cmd_export(const fs::path& in, const fs::path& out, std::ostream& log);

// Baseline / fine-tune / spatial / temporal / both table over the
// configured number of repeats; writes out/ablation.tsv.
int cmd_ablation(const RunConfig& config, const fs::path& out, std::ostream& log);

// The dataset a config refers to: loaded from data.path or generated.
Dataset resolve_dataset(const RunConfig& config);

}  // namespace kmp::app
