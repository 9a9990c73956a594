#include "commands.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "kmp/error.hpp"
#include "kmp/model/checkpoint.hpp"
#include "kmp/model/gradcheck_suite.hpp"

namespace kmp::app {

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

double max_norm_error(const EmbeddingSet& set) {
  double worst = 0.0;
  for (const auto& v : set.vectors) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    worst = std::max(worst, std::abs(std::sqrt(sq) - 1.0));
  }
  return worst;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
           return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
         });
}

bool same_bits(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.vectors.size() != b.vectors.size()) return false;
  for (std::size_t i = 0; i < a.vectors.size(); ++i) {
    if (!same_bits(a.vectors[i], b.vectors[i])) return false;
  }
  return true;
}

}  // namespace

Dataset resolve_dataset(const RunConfig& config) {
  if (!config.data_path.empty()) return load_dataset(config.data_path);
  SyntheticOptions options = config.experiment.data;
  options.seed = config.experiment.seeds.data;
  return generate_synthetic_dataset(options);
}

int cmd_gen_data(const RunConfig& config, const fs::path& out, std::ostream& log) {
  config.experiment.seeds.validate();
  SyntheticOptions options = config.experiment.data;
  options.seed = config.experiment.seeds.data;
  const Dataset ds = generate_synthetic_dataset(options);
  save_dataset(ds, out);
  write_resolved_config(config, out);
  log << "wrote " << ds.tracklets.size() << " tracklets (" << ds.n_identities << " identities, "
      << ds.indices(Split::kTrain).size() << " train, " << ds.indices(Split::kQuery).size()
      << " query, " << ds.indices(Split::kGallery).size() << " gallery) to " << out.string()
      << "\n";
  return 0;
}

int cmd_train(const RunConfig& config, const fs::path& out, std::ostream& log) {
  config.experiment.seeds.validate();
  const Dataset ds = resolve_dataset(config);
  fs::create_directories(out);
  write_resolved_config(config, out);
  TrainLog train_log;
  auto net = train_two_phase(config.experiment, ds, &train_log, [&log](const std::string& line) {
    log << line << "\n" << std::flush;
  });
  save_checkpoint(*net, out / "checkpoint");

  auto tsv = open_out(out / "train_log.tsv");
  tsv << "phase\tepoch\tlr\tloss\tseconds\n";
  const std::size_t phase1 = config.experiment.recipe.phase1.epochs;
  for (std::size_t i = 0; i < train_log.epochs.size(); ++i) {
    const EpochLog& e = train_log.epochs[i];
    tsv << (i < phase1 ? 1 : 2) << "\t" << e.epoch << "\t" << e.lr << "\t" << fixed6(e.mean_loss)
        << "\t" << fixed6(e.seconds) << "\n";
  }
  log << "checkpoint written to " << (out / "checkpoint").string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& config, const fs::path& checkpoint, EmbeddingSource source,
             const fs::path& out, const std::optional<fs::path>& compare, std::ostream& log) {
  const Dataset ds = resolve_dataset(config);
  auto net = load_model(checkpoint);
  EvalOptions options;
  options.source = source;
  options.ranking = config.experiment.ranking;
  const EvalResult result = evaluate(*net, ds, options);
  const double norm_error = std::max(max_norm_error(result.query), max_norm_error(result.gallery));

  fs::create_directories(out);
  write_resolved_config(config, out);
  const std::string metrics = format_metrics(result.ranking);
  {
    auto txt = open_out(out / "metrics.txt");
    txt << "checkpoint " << checkpoint.string() << "\nsource " << to_string(source) << "\n"
        << metrics << "max_norm_error " << norm_error << "\n";
    auto tsv = open_out(out / "metrics.tsv");
    tsv << "metric\tvalue\n"
        << "top1\t" << fixed6(result.ranking.top(1)) << "\n"
        << "top5\t" << fixed6(result.ranking.top(5)) << "\n"
        << "top10\t" << fixed6(result.ranking.top(10)) << "\n"
        << "mAP\t" << fixed6(result.ranking.map) << "\n";
  }
  log << metrics;
  if (norm_error > 1e-9) {
    log << "embedding norms deviate from 1 by " << norm_error << "\n";
    return 1;
  }
  if (!compare) return 0;

  auto other = load_model(*compare);
  const EvalResult other_result = evaluate(*other, ds, options);
  const bool identical = same_bits(result.query, other_result.query) &&
                         same_bits(result.gallery, other_result.gallery) &&
                         same_bits(result.distances.values, other_result.distances.values);
  log << "parity with " << compare->string() << ": " << (identical ? "bit-identical" : "MISMATCH")
      << "\n";
  auto parity = open_out(out / "parity.txt");
  parity << (identical ? "identical" : "mismatch") << "\n";
  return identical ? 0 : 1;
}

int cmd_gradcheck(const RunConfig& config, const std::optional<fs::path>& out, std::ostream& log) {
  SuiteOptions options;
  options.seed = config.experiment.seeds.init;
  const auto start = std::chrono::steady_clock::now();
  const auto cases = run_gradcheck_suite(options);
  bool ok = true;
  double worst_op = 0.0, worst_model = 0.0;
  std::string report;
  char buf[256];
  for (const auto& c : cases) {
    ok = ok && c.passed();
    double& worst = c.tolerance == kOpTolerance ? worst_op : worst_model;
    worst = std::max(worst, c.report.max_rel_error);
    std::snprintf(buf, sizeof buf, "%-26s %s  rel err %.3e  (tol %.0e, %.2fs)\n", c.name.c_str(),
                  c.passed() ? "PASS" : "FAIL", c.report.max_rel_error, c.tolerance, c.seconds);
    report += buf;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::snprintf(buf, sizeof buf,
                "%s, max rel err ops %.3e < %.0e, model %.3e < %.0e (%zu checks, %.1fs)\n",
                ok ? "PASS" : "FAIL", worst_op, kOpTolerance, worst_model, kModelTolerance,
                cases.size(), seconds);
  report += buf;
  log << report;
  if (out) {
    fs::create_directories(*out);
    write_resolved_config(config, *out);
    open_out(*out / "gradcheck.txt") << report;
  }
  return ok ? 0 : 1;
}

int cmd_export(const fs::path& in, const fs::path& out, std::ostream& log) {
  export_visual_only(in, out);
  const auto full = checkpoint_bytes(in), slim = checkpoint_bytes(out);
  log << "exported visual-only checkpoint to " << out.string() << " (" << slim << " bytes, full "
      << full << " bytes)\n";
  return 0;
}

int cmd_ablation(const RunConfig& config, const fs::path& out, std::ostream& log) {
  fs::create_directories(out);
  write_resolved_config(config, out);
  const AblationResult result =
      run_ablation(config.experiment, config.ablation_repeats, [&log](const std::string& line) {
        log << line << "\n" << std::flush;
      });
  const std::string table = format_ablation_table(result);
  auto tsv = open_out(out / "ablation.tsv");
  tsv << "arm\ttop1\tmAP\n";
  for (std::size_t a = 0; a < kAblationArms; ++a) {
    tsv << kAblationArmNames[a] << "\t" << fixed6(result.mean_top1[a]) << "\t"
        << fixed6(result.mean_map[a]) << "\n";
  }
  auto runs = open_out(out / "ablation_runs.tsv");
  runs << "repeat\tarm\ttop1\tmAP\n";
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    for (std::size_t a = 0; a < kAblationArms; ++a) {
      runs << r << "\t" << kAblationArmNames[a] << "\t" << fixed6(result.runs[r].top1[a]) << "\t"
           << fixed6(result.runs[r].map[a]) << "\n";
    }
  }
  log << table << "total " << fixed6(result.seconds) << " s\n";
  return 0;
}

}  // namespace kmp::app
