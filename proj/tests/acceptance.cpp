// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. `--only N` runs a single criterion.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "kmp/eval/evaluate.hpp"
#include "kmp/eval/metrics.hpp"
#include "kmp/graph_conv.hpp"
#include "kmp/model/checkpoint.hpp"
#include "kmp/model/experiment.hpp"
#include "kmp/model/gradcheck_suite.hpp"
#include "kmp/numerics/ops.hpp"
#include "kmp/skeleton_graph.hpp"
#include "run_config.hpp"

namespace {

namespace fs = std::filesystem;
using namespace kmp;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
           return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
         });
}

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = normal(rng);
  return Tensor(std::move(shape), std::move(data));
}

Outcome gradient_suite() {
  const auto start = Clock::now();
  const auto cases = run_gradcheck_suite();
  const double elapsed = seconds_since(start);
  std::size_t failed = 0, model_cases = 0;
  double worst_op = 0.0, worst_model = 0.0;
  for (const auto& c : cases) {
    if (!c.passed()) {
      ++failed;
      std::cerr << "  gradcheck failure: " << c.name << " rel " << c.report.max_rel_error << "\n";
    }
    if (c.tolerance == kModelTolerance) {
      ++model_cases;
      worst_model = std::max(worst_model, c.report.max_rel_error);
    } else {
      worst_op = std::max(worst_op, c.report.max_rel_error);
    }
  }
  return {failed == 0 && model_cases > 0 && elapsed < 120.0,
          std::to_string(cases.size()) + " cases, worst op rel " + num(worst_op) +
              ", worst model rel " + num(worst_model) + ", " + num(elapsed) + " s"};
}

Outcome aggregation_limits() {
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<std::size_t> count(1, 8);
  double mean_err = 0.0, max_err = 0.0, sum_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = count(rng), c = 6;
    Tensor m = random_tensor({k, c}, rng);
    for (double& v : m.mutable_data()) v = std::abs(v) + kMessageEps;
    const Tensor mean = aggregate_messages(m, Tensor::scalar(1e6));
    const Tensor max = aggregate_messages(m, Tensor::scalar(1e-6));
    for (std::size_t ch = 0; ch < c; ++ch) {
      double avg = 0.0, top = m[ch];
      std::vector<double> column(k);
      for (std::size_t u = 0; u < k; ++u) {
        column[u] = m[u * c + ch];
        avg += column[u] / static_cast<double>(k);
        top = std::max(top, column[u]);
      }
      mean_err = std::max(mean_err, std::abs(mean[ch] - avg));
      max_err = std::max(max_err, std::abs(max[ch] - top));
      for (double tau : {1e-6, 1.0, 1e6}) {
        const Tensor w = ops::softmax_weights(Tensor({k}, column), tau);
        double s = 0.0;
        for (double x : w.data()) s += x;
        sum_err = std::max(sum_err, std::abs(s - 1.0));
      }
    }
  }
  return {mean_err < 1e-4 && max_err < 1e-4 && sum_err < 1e-12,
          "mean err " + num(mean_err) + ", max err " + num(max_err) + ", weight sum err " +
              num(sum_err)};
}

Outcome graph_structure() {
  bool ok = coco_body_topology(true).n_joints == 17 && coco_body_topology(false).n_joints == 12;
  std::size_t checked = 0;
  for (bool head : {false, true}) {
    const auto topo = coco_body_topology(head);
    for (std::size_t T : {1u, 2u, 8u, 32u}) {
      const auto g = build_graph(topo, T, GraphMode::kBoth);
      ok = ok && g.spatial_edges.size() == T * topo.edges.size() &&
           g.temporal_edges.size() == (T - 1) * topo.n_joints;
      ++checked;
    }
  }
  return {ok, std::to_string(checked) + " (N, T) settings, N in {12, 17}"};
}

Outcome permutation_equivariance() {
  constexpr std::size_t T = 4;
  const auto topo = coco_body_topology(false);
  const std::size_t n = topo.n_joints;
  ParameterStore store;
  GcnBlock block = make_gcn_block(store, "b", kNodeDim, kMlpHidden, 0.0, 44);
  std::mt19937_64 rng(404);
  for (Parameter p : store.all()) {
    if (p.name.ends_with(".b")) {
      for (double& v : p.tensor.mutable_data()) v = 0.05 * std::normal_distribution<double>()(rng);
    }
  }
  const Tensor h = random_tensor({T * n, kNodeDim}, rng);
  const Tensor base =
      gcn_block_forward(h, adjacency(build_graph(topo, T, GraphMode::kBoth)), block, false, 0);
  auto permute = [&](const Tensor& x, const std::vector<std::size_t>& perm) {
    std::vector<double> out(x.numel());
    const std::size_t c = x.dim(1);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(x.data().data() + (t * n + i) * c, c, out.data() + (t * n + perm[i]) * c);
      }
    }
    return Tensor(x.shape(), std::move(out));
  };
  double worst = 0.0;
  std::vector<std::size_t> perm(n);
  for (int trial = 0; trial < 100; ++trial) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    JointTopology ptopo = topo;
    for (auto& [a, b] : ptopo.edges) {
      a = perm[a];
      b = perm[b];
    }
    const Tensor out = gcn_block_forward(
        permute(h, perm), adjacency(build_graph(ptopo, T, GraphMode::kBoth)), block, false, 0);
    const Tensor expect = permute(base, perm);
    for (std::size_t i = 0; i < out.numel(); ++i) {
      worst = std::max(worst, std::abs(out[i] - expect[i]));
    }
  }
  return {worst < 1e-9, "100 permutations, max deviation " + num(worst)};
}

app::RunConfig smoke_config() {
  return app::load_run_config(fs::path(KMP_CONFIG_DIR) / "smoke.ini");
}

Outcome drop_gcn_parity() {
  const auto config = smoke_config();
  SyntheticOptions data_options = config.experiment.data;
  data_options.seed = config.experiment.seeds.data;
  const Dataset data = generate_synthetic_dataset(data_options);
  const auto net = train_two_phase(config.experiment, data);
  const fs::path root = fs::temp_directory_path() / "kmp_acceptance_parity";
  fs::remove_all(root);
  save_checkpoint(*net, root / "full");
  export_visual_only(root / "full", root / "slim");
  const auto full = load_model(root / "full");
  const auto slim = load_model(root / "slim");
  const EvalResult a = evaluate(*full, data), b = evaluate(*slim, data);
  const EvalResult direct = evaluate(*net, data);
  bool identical = !slim->has_graph_branch() && a.query.vectors.size() == b.query.vectors.size() &&
                   a.gallery.vectors.size() == b.gallery.vectors.size();
  for (std::size_t i = 0; identical && i < a.query.vectors.size(); ++i) {
    identical = same_bits(a.query.vectors[i], b.query.vectors[i]);
  }
  for (std::size_t i = 0; identical && i < a.gallery.vectors.size(); ++i) {
    identical = same_bits(a.gallery.vectors[i], b.gallery.vectors[i]);
  }
  identical = identical && same_bits(a.distances.values, b.distances.values) &&
              same_bits(direct.distances.values, b.distances.values);
  const auto full_bytes = checkpoint_bytes(root / "full"),
             slim_bytes = checkpoint_bytes(root / "slim");
  fs::remove_all(root);
  return {identical, std::to_string(a.distances.values.size()) + " distances, checkpoint " +
                         std::to_string(full_bytes) + " -> " + std::to_string(slim_bytes) +
                         " bytes"};
}

Outcome metric_oracle() {
  std::mt19937_64 rng(6060);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t Q = 1 + rng() % 8, G = 1 + rng() % 30, ids = 1 + rng() % 5;
    std::vector<EmbeddingMeta> queries, gallery;
    for (std::size_t q = 0; q < Q; ++q) queries.push_back({1000 + q, rng() % ids, 0});
    for (std::size_t g = 0; g < G; ++g) gallery.push_back({g, rng() % ids, 1});
    DistanceMatrix dist{Q, G, {}};
    for (std::size_t i = 0; i < Q * G; ++i)
      dist.values.push_back(static_cast<double>(rng() % 10) / 4.0);
    const auto r = cmc_and_map(dist, queries, gallery);

    // Brute force: rank by counting, AP as the mean precision at each hit.
    std::vector<std::size_t> first_hits;
    double ap_sum = 0.0;
    for (std::size_t q = 0; q < Q; ++q) {
      std::vector<std::size_t> hit_ranks;
      for (std::size_t g = 0; g < G; ++g) {
        if (gallery[g].identity != queries[q].identity) continue;
        std::size_t rank = 1;
        for (std::size_t h = 0; h < G; ++h) {
          if (dist(q, h) < dist(q, g) || (dist(q, h) == dist(q, g) && h < g)) ++rank;
        }
        hit_ranks.push_back(rank);
      }
      std::sort(hit_ranks.begin(), hit_ranks.end());
      double ap = 0.0;
      for (std::size_t i = 0; i < hit_ranks.size(); ++i) {
        ap += static_cast<double>(i + 1) / static_cast<double>(hit_ranks[i]);
      }
      if (!hit_ranks.empty()) {
        ap /= static_cast<double>(hit_ranks.size());
        first_hits.push_back(hit_ranks[0]);
        ap_sum += ap;
      }
      if (r.ap[q] != ap) ++mismatches;
    }
    if (first_hits.empty()) continue;
    const double scored = static_cast<double>(first_hits.size());
    if (r.map != ap_sum / scored) ++mismatches;
    for (std::size_t k = 1; k <= G; ++k) {
      const auto within = std::count_if(first_hits.begin(), first_hits.end(),
                                        [k](std::size_t f) { return f <= k; });
      if (r.cmc[k - 1] != static_cast<double>(within) / scored) ++mismatches;
    }
  }
  const std::vector<EmbeddingMeta> q = {{9, 1, 0}}, g = {{0, 1, 1}, {1, 2, 1}, {2, 1, 1}};
  const auto hand = cmc_and_map(DistanceMatrix{1, 3, {0.1, 0.2, 0.3}}, q, g);
  const bool hand_ok = hand.ap[0] == (1.0 + 2.0 / 3.0) / 2.0;
  return {mismatches == 0 && hand_ok, "100 instances, " + std::to_string(mismatches) +
                                          " mismatches, hand AP " + num(hand.ap[0])};
}

Outcome ablation_direction() {
  app::RunConfig config = app::default_run_config();
  const auto start = Clock::now();
  const AblationResult r = run_ablation(
      config.experiment, 5, [](const std::string& line) { std::cerr << "  " << line << "\n"; });
  const double elapsed = seconds_since(start);
  std::cout << format_ablation_table(r);
  const double base = r.mean_top1[0], finetune = r.mean_top1[1], spatial = r.mean_top1[2],
               temporal = r.mean_top1[3], both = r.mean_top1[4];
  const bool ok = both > base && spatial >= base && temporal >= base &&
                  finetune - base <= both - base && elapsed < 1800.0;
  return {ok, "top-1 baseline " + num(base) + ", fine-tune " + num(finetune) + ", spatial " +
                  num(spatial) + ", temporal " + num(temporal) + ", both " + num(both) + ", " +
                  num(elapsed) + " s"};
}

Outcome architecture() {
  ModelConfig c;
  c.n_classes = 4;
  const KmpNet net(c, 8);
  const std::size_t expected[4] = {5, 7, 11, 4};
  bool ok = net.gcn_stages().size() == 4;
  std::size_t total = 0;
  for (std::size_t s = 0; ok && s < 4; ++s) {
    const auto& blocks = net.gcn_stages()[s].blocks;
    ok = blocks.size() == expected[s];
    for (const auto& b : blocks) {
      ok = ok && b.ln_gamma.numel() == 64 && b.conv.fc1.weight.dim(0) == 64 &&
           b.conv.fc2.weight.dim(1) == 64;
    }
    total += blocks.size();
  }
  std::size_t rho = 0;
  for (const auto& p : net.params().with_prefix(kGraphPrefix)) rho += p.name.ends_with(".conv.rho");
  ok = ok && total == 27 && rho == 27;
  return {ok, std::to_string(total) + " blocks (5/7/11/4), node dim 64, " + std::to_string(rho) +
                  " temperatures"};
}

Outcome loss_formula() {
  const std::size_t cases[][3] = {{1, 1, 2}, {4, 4, 16}, {8, 6, 64}};
  double worst = 0.0;
  for (const auto& [T, k, C] : cases) {
    std::vector<Tensor> logits(k + 5, Tensor::zeros({T, C}));
    const double loss = joint_loss(logits, 0)[0];
    worst = std::max(worst, std::abs(loss - static_cast<double>(T * (k + 5)) * std::log(C)));
  }
  return {worst < 1e-12, "max deviation " + num(worst)};
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string("\"") + KMP_CLI_PATH + "\" " + args + " >> \"" + log.string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

Outcome smoke_pipeline() {
  const fs::path root = fs::temp_directory_path() / "kmp_acceptance_smoke";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path log = root / "log.txt";
  const std::string cfg = "--config \"" + (fs::path(KMP_CONFIG_DIR) / "smoke.ini").string() + "\"";
  const std::string r = "\"" + root.string() + "/";
  const auto start = Clock::now();
  const std::vector<std::string> steps = {
      "gen-data " + cfg + " --out " + r + "data\"",
      "train " + cfg + " --data " + r + "data\" --out " + r + "run\"",
      "eval " + cfg + " --data " + r + "data\" --checkpoint " + r + "run/checkpoint\" --out " + r +
          "eval\"",
      "export --in " + r + "run/checkpoint\" --out " + r + "slim\"",
      "eval " + cfg + " --data " + r + "data\" --checkpoint " + r + "slim\" --compare " + r +
          "run/checkpoint\" --out " + r + "parity\"",
      "eval " + cfg + " --data " + r + "data\" --checkpoint " + r +
          "run/checkpoint\" --source concat --out " + r + "concat\""};
  int failed_step = -1;
  for (std::size_t i = 0; i < steps.size() && failed_step < 0; ++i) {
    if (run_cli(steps[i], log) != 0) failed_step = static_cast<int>(i);
  }
  const double elapsed = seconds_since(start);
  std::string parity;
  std::ifstream(root / "parity" / "parity.txt") >> parity;
  // A report without a max_norm_error row counts as a failure.
  double norm_error = 0.0;
  for (const char* dir : {"eval", "parity", "concat"}) {
    std::ifstream in(root / dir / "metrics.txt");
    std::string line;
    double reported = 1.0;
    while (std::getline(in, line)) {
      if (line.starts_with("max_norm_error ")) reported = std::stod(line.substr(15));
    }
    norm_error = std::max(norm_error, reported);
  }
  if (failed_step >= 0) {
    std::ifstream in(log);
    std::cerr << in.rdbuf();
  } else {
    fs::remove_all(root);
  }
  const bool ok = failed_step < 0 && parity == "identical" && norm_error <= 1e-9 && elapsed < 60.0;
  return {ok, (failed_step >= 0 ? "step " + std::to_string(failed_step) + " failed, " : "") +
                  "parity " + (parity.empty() ? "missing" : parity) + ", max norm error " +
                  num(norm_error) + ", " + num(elapsed) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--only" && i + 1 < argc) only = std::atoi(argv[++i]);
  }
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gradient suite", gradient_suite},
      {"aggregation limits", aggregation_limits},
      {"graph structure", graph_structure},
      {"permutation equivariance", permutation_equivariance},
      {"drop-GCN parity", drop_gcn_parity},
      {"metric oracle", metric_oracle},
      {"synthetic ablation direction", ablation_direction},
      {"architecture conformance", architecture},
      {"loss formula", loss_formula},
      {"end-to-end smoke", smoke_pipeline},
  };
  bool all = true;
  for (int i = 0; i < 10; ++i) {
    if (only != 0 && only != i + 1) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
