#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "kmp/error.hpp"
#include "run_config.hpp"

namespace kmp::app {
namespace {

std::size_t parse_error_line(std::string_view text) {
  try {
    parse_run_config(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  ADD_FAILURE() << "no ParseError for:\n" << text;
  return 0;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(RunConfig, ParsesOverridesAndKeepsDefaults) {
  const RunConfig c = parse_run_config(
      "# comment\n[data]\nidentities = 12 ; trailing\n\n[phase2]\nlr = 0.25\n[model]\nmode = "
      "temporal\n[eval]\ncross_camera = true\n");
  EXPECT_EQ(c.experiment.data.n_identities, 12u);
  EXPECT_EQ(c.experiment.recipe.phase2.lr, 0.25);
  EXPECT_EQ(c.experiment.model.mode, GraphMode::kTemporal);
  EXPECT_TRUE(c.experiment.ranking.cross_camera);
  const RunConfig d = default_run_config();
  EXPECT_EQ(c.experiment.data.n_frames, d.experiment.data.n_frames);
  EXPECT_EQ(c.experiment.recipe.phase1.lr, d.experiment.recipe.phase1.lr);
}

TEST(RunConfig, ErrorsCarryLineNumbers) {
  EXPECT_EQ(parse_error_line("[data]\nidentities = 4\n[bogus]\n"), 3u);
  EXPECT_EQ(parse_error_line("[data]\n\nwidgets = 4\n"), 3u);
  EXPECT_EQ(parse_error_line("[data]\nidentities = four\n"), 2u);
  EXPECT_EQ(parse_error_line("identities = 4\n"), 1u);
  EXPECT_EQ(parse_error_line("[data\n"), 1u);
  EXPECT_EQ(parse_error_line("[model]\nmode = diagonal\n"), 2u);
  EXPECT_EQ(parse_error_line("[data]\nidentities 4\n"), 2u);
  EXPECT_EQ(parse_error_line("[eval]\ncross_camera = maybe\n"), 2u);
}

TEST(RunConfig, FormatRoundTrips) {
  RunConfig c = default_run_config();
  c.experiment.data.n_identities = 20;
  c.experiment.recipe.phase1.lr = 0.0123;
  c.experiment.recipe.phase1.decay_epochs = {3, 7};
  c.experiment.model.mode = GraphMode::kSpatial;
  c.experiment.seeds = {11, 12, 13};
  c.ablation_repeats = 2;
  const std::string text = format_run_config(c);
  const RunConfig back = parse_run_config(text);
  EXPECT_EQ(format_run_config(back), text);
  EXPECT_EQ(back.experiment.recipe.phase1.decay_epochs, (std::vector<std::size_t>{3, 7}));
  EXPECT_EQ(back.experiment.recipe.phase1.lr, 0.0123);
  EXPECT_EQ(back.ablation_repeats, 2u);
}

TEST(RunConfig, LoadReportsFileAndLine) {
  const fs::path path = fs::temp_directory_path() / "kmp_test_cli_bad.ini";
  std::ofstream(path) << "[data]\nframes = 4\nframes = x\n";
  try {
    load_run_config(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find(path.string()), std::string::npos) << e.what();
  }
  fs::remove(path);
  EXPECT_THROW(load_run_config(path), IoError);
}

TEST(Commands, SeedCollisionIsRefused) {
  RunConfig c = default_run_config();
  c.experiment.seeds = {5, 5, 6};
  std::ostringstream log;
  const fs::path out = fs::temp_directory_path() / "kmp_test_cli_seeds";
  EXPECT_THROW(cmd_gen_data(c, out, log), ConfigError);
  EXPECT_THROW(cmd_train(c, out, log), ConfigError);
}

TEST(Commands, TinyPipelineWritesReports) {
  RunConfig c = parse_run_config(
      "[data]\nidentities = 6\ntracklets_per_id = 2\nframes = 2\nheight = 32\nwidth = 32\n"
      "[model]\nstripes = 2\n[phase1]\nepochs = 1\n[phase2]\nepochs = 1\n");
  const fs::path root = fs::temp_directory_path() / "kmp_test_cli_pipeline";
  fs::remove_all(root);
  std::ostringstream log;
  ASSERT_EQ(cmd_gen_data(c, root / "data", log), 0);
  c.data_path = (root / "data").string();
  ASSERT_EQ(cmd_train(c, root / "run", log), 0);
  EXPECT_TRUE(fs::exists(root / "run" / "train_log.tsv"));
  EXPECT_EQ(parse_run_config(read_file(root / "run" / "resolved_config.ini")).data_path,
            c.data_path);
  ASSERT_EQ(cmd_export(root / "run" / "checkpoint", root / "slim", log), 0);
  ASSERT_EQ(cmd_eval(c, root / "run" / "checkpoint", EmbeddingSource::kVisual, root / "eval",
                     root / "slim", log),
            0)
      << log.str();
  EXPECT_EQ(read_file(root / "eval" / "parity.txt"), "identical\n");
  const std::string metrics = read_file(root / "eval" / "metrics.txt");
  EXPECT_NE(metrics.find("mAP"), std::string::npos) << metrics;
  ASSERT_EQ(cmd_eval(c, root / "run" / "checkpoint", EmbeddingSource::kConcat, root / "eval2",
                     std::nullopt, log),
            0);
  EXPECT_THROW(
      cmd_eval(c, root / "slim", EmbeddingSource::kGraph, root / "eval3", std::nullopt, log),
      ConfigError);
  fs::remove_all(root);
}

TEST(Ablation, TableHasOneRowPerArm) {
  AblationResult r;
  for (std::size_t a = 0; a < kAblationArms; ++a) {
    r.mean_top1[a] = 0.5 + 0.1 * static_cast<double>(a);
    r.mean_map[a] = 0.25;
  }
  const std::string table = format_ablation_table(r);
  std::istringstream in(table);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.find("0.250000") != std::string::npos) {
      EXPECT_NE(line.find(kAblationArmNames[rows]), std::string::npos) << line;
      ++rows;
    }
  }
  EXPECT_EQ(rows, kAblationArms) << table;
}

}  // namespace
}  // namespace kmp::app
