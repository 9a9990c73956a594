#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "kmp/error.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed_data, seed_init, seed_train;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run config file (INI-style key = value)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed-data", c.seed_data, "Override [seeds] data");
  cmd->add_option("--seed-init", c.seed_init, "Override [seeds] init");
  cmd->add_option("--seed-train", c.seed_train, "Override [seeds] train");
}

kmp::app::RunConfig resolve(const Common& c, const std::string& data_dir) {
  auto config =
      c.config.empty() ? kmp::app::default_run_config() : kmp::app::load_run_config(c.config);
  auto& seeds = config.experiment.seeds;
  if (c.seed_data) seeds.data = *c.seed_data;
  if (c.seed_init) seeds.init = *c.seed_init;
  if (c.seed_train) seeds.train = *c.seed_train;
  seeds.validate();
  if (!data_dir.empty()) config.data_path = data_dir;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kmp: keypoint message-passing re-identification toolkit"};
  app.require_subcommand(1);
  Common common;
  std::string out, data, checkpoint, compare, in, source = "xc";

  auto* gen = app.add_subcommand("gen-data", "Generate and save a synthetic dataset");
  add_common(gen, common);
  gen->add_option("--out", out, "Dataset directory")->required();

  auto* train = app.add_subcommand("train", "Two-phase training; writes a checkpoint");
  add_common(train, common);
  train->add_option("--data", data, "Dataset directory (default: generate from config)");
  train->add_option("--out", out, "Run directory")->required();

  auto* eval = app.add_subcommand("eval", "Rank query against gallery with a checkpoint");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  eval->add_option("--data", data, "Dataset directory (default: generate from config)");
  eval->add_option("--source", source, "Embedding source")
      ->check(CLI::IsMember({"xc", "xg", "concat"}));
  eval->add_option("--compare", compare, "Second checkpoint that must give identical results");
  eval->add_option("--out", out, "Report directory")->required();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of all ops and the model");
  add_common(grad, common);
  grad->add_option("--out", out, "Report directory");

  auto* exp = app.add_subcommand("export", "Drop the graph branch from a checkpoint");
  exp->add_option("--in", in, "Full checkpoint")->required()->check(CLI::ExistingDirectory);
  exp->add_option("--out", out, "Visual-only checkpoint")->required();

  auto* abl = app.add_subcommand("ablation", "Spatial/temporal ablation table");
  add_common(abl, common);
  abl->add_option("--out", out, "Report directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    using namespace kmp::app;
    if (*gen) return cmd_gen_data(resolve(common, ""), out, std::cout);
    if (*train) return cmd_train(resolve(common, data), out, std::cout);
    if (*eval) {
      const std::optional<fs::path> other =
          compare.empty() ? std::nullopt : std::optional<fs::path>(compare);
      return cmd_eval(resolve(common, data), checkpoint, kmp::parse_embedding_source(source), out,
                      other, std::cout);
    }
    if (*grad) {
      return cmd_gradcheck(resolve(common, ""),
                           out.empty() ? std::nullopt : std::optional<fs::path>(out), std::cout);
    }
    if (*exp) return cmd_export(in, out, std::cout);
    if (*abl) return cmd_ablation(resolve(common, ""), out, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
