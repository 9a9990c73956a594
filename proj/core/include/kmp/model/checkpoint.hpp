#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "kmp/model/kmpnet.hpp"

namespace kmp {

// Checkpoint directory layout:
//   manifest.txt  "kmp-checkpoint 1", "config <key> <value>" lines, then one
//                 "param <name> <dims,comma,separated> <byte offset> <count>"
//                 line per tensor
//   params.bin    little-endian float64 blobs in manifest order
struct Checkpoint {
  ModelConfig config;
  ParameterStore params;
};

void save_checkpoint(const ModelConfig& config, const ParameterStore& params,
                     const std::filesystem::path& dir);
inline void save_checkpoint(const KmpNet& net, const std::filesystem::path& dir) {
  save_checkpoint(net.config(), net.params(), dir);
}
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Builds a network from a checkpoint; every model parameter must be present.
std::unique_ptr<KmpNet> load_model(const std::filesystem::path& dir);

// Writes a checkpoint holding only the "visual." parameters, with the graph
// branch switched off in its config.
void export_visual_only(const KmpNet& net, const std::filesystem::path& dir);
void export_visual_only(const std::filesystem::path& in, const std::filesystem::path& out);

// Total bytes of the files in a checkpoint directory.
std::uintmax_t checkpoint_bytes(const std::filesystem::path& dir);

// key/value form of a model config, in a stable order.
std::vector<std::pair<std::string, std::string>> config_entries(const ModelConfig& config);
// Applies one entry; throws ConfigError on an unknown key or bad value.
void apply_config_entry(ModelConfig& config, const std::string& key, const std::string& value);

}  // namespace kmp
