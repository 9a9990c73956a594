#include "kmp/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "kmp/error.hpp"
#include "kmp/numerics/parameters.hpp"

namespace kmp {

namespace {

double evaluate(const std::function<Tensor()>& f) {
  const double v = f().item();
  if (!std::isfinite(v))
    throw NonFiniteError("loss", "objective evaluated to " + std::to_string(v));
  return v;
}

std::vector<std::size_t> pick_indices(const Parameter& p, const GradCheckOptions& options) {
  std::vector<std::size_t> all(p.tensor.numel());
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (options.max_elements_per_param == 0 || all.size() <= options.max_elements_per_param) {
    return all;
  }
  std::vector<std::size_t> picked;
  std::mt19937_64 rng(parameter_seed(options.sample_seed, p.name));
  std::sample(all.begin(), all.end(), std::back_inserter(picked), options.max_elements_per_param,
              rng);
  return picked;
}

}  // namespace

GradCheckReport check_gradients(const std::function<Tensor()>& f, std::span<const Parameter> params,
                                const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw DomainError("check_gradients: step must be positive");
  FiniteCheckScope finite(true);

  for (Parameter p : params) p.tensor.zero_grad();
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f();
    if (!std::isfinite(loss.item())) throw NonFiniteError("loss", "objective is not finite");
    tape.backward(loss);
    for (const auto& p : params) {
      auto g = p.tensor.grad();
      analytic.emplace_back(g.begin(), g.end());
    }
  }
  for (Parameter p : params) p.tensor.zero_grad();

  GradCheckReport report;
  const double h = options.step;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor t = params[k].tensor;
    auto data = t.mutable_data();
    GradCheckEntry entry;
    entry.name = params[k].name;
    for (double a : analytic[k]) {
      entry.max_abs_analytic = std::max(entry.max_abs_analytic, std::abs(a));
    }
    for (std::size_t idx : pick_indices(params[k], options)) {
      const double saved = data[idx];
      data[idx] = saved + h;
      const double fp = evaluate(f);
      data[idx] = saved - h;
      const double fm = evaluate(f);
      data[idx] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[k][idx];
      entry.max_abs_numeric = std::max(entry.max_abs_numeric, std::abs(numeric));
      entry.max_abs_diff = std::max(entry.max_abs_diff, std::abs(a - numeric));
      ++entry.checked;
    }
    const double s = std::max(entry.max_abs_analytic, entry.max_abs_numeric);
    entry.rel_error = s < 1e-10 ? entry.max_abs_diff : entry.max_abs_diff / s;
    report.max_rel_error = std::max(report.max_rel_error, entry.rel_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace kmp
