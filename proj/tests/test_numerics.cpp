#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "kmp/error.hpp"
#include "kmp/model/gradcheck_suite.hpp"
#include "kmp/numerics/gradcheck.hpp"
#include "kmp/numerics/ops.hpp"
#include "kmp/numerics/parallel.hpp"
#include "kmp/numerics/parameters.hpp"
#include "test_support.hpp"

namespace kmp {
namespace {

using testing::random_tensor;
using testing::to_vector;

// Central differences computed here, independent of check_gradients, so the
// checker itself is validated against a second implementation.
std::vector<double> numeric_grad(const std::function<double()>& f, Tensor& x, double h = 1e-5) {
  std::vector<double> out(x.numel());
  auto data = x.mutable_data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double keep = data[i];
    data[i] = keep + h;
    const double plus = f();
    data[i] = keep - h;
    const double minus = f();
    data[i] = keep;
    out[i] = (plus - minus) / (2 * h);
  }
  return out;
}

double max_rel_diff(std::span<const double> a, const std::vector<double>& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return scale > 0 ? diff / scale : diff;
}

TEST(Tensor, ShapeMatchesData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  const Tensor t = Tensor::zeros({2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(shape_str(t.shape()), "[2, 3]");
  EXPECT_FALSE(t.has_grad());
}

TEST(Linear, IdentityWeights) {
  const Tensor x({1, 2}, {1, 2});
  const Tensor w({2, 2}, {1, 0, 0, 1});
  EXPECT_EQ(to_vector(ops::linear(x, w)), (std::vector<double>{1, 2}));
}

TEST(Linear, RowSelectionWithBias) {
  const Tensor x({1, 2}, {1, 0});
  const Tensor w({2, 2}, {2, 3, 5, 7});
  const Tensor b({2}, {1, 1});
  EXPECT_EQ(to_vector(ops::linear(x, w, &b)), (std::vector<double>{3, 4}));
}

TEST(Linear, ShapeMismatchNamesBothShapes) {
  const Tensor x = Tensor::zeros({2, 3});
  const Tensor w = Tensor::zeros({4, 2});
  try {
    ops::linear(x, w);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4, 2]"), std::string::npos) << msg;
  }
}

TEST(Linear, WeightGradientMatchesFiniteDifferences) {
  Tensor x = random_tensor({3, 4}, 7);
  Tensor w = random_tensor({4, 5}, 8, 1.0, true);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(ops::sum(ops::linear(x, w)));
  }
  const auto numeric = numeric_grad([&] { return ops::sum(ops::linear(x, w)).item(); }, w);
  EXPECT_LT(max_rel_diff(w.grad(), numeric), 1e-6);
}

TEST(Linear, IsLinearInItsInput) {
  const Tensor w = random_tensor({6, 4}, 1);
  const Tensor x = random_tensor({5, 6}, 2), y = random_tensor({5, 6}, 3);
  const double a = 1.7, b = -0.3;
  const Tensor lhs = ops::linear(ops::add(ops::scale(x, a), ops::scale(y, b)), w);
  const Tensor rhs = ops::add(ops::scale(ops::linear(x, w), a), ops::scale(ops::linear(y, w), b));
  for (std::size_t i = 0; i < lhs.numel(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
}

TEST(LayerNorm, ConstantRowNormalizesToZero) {
  const Tensor x({1, 4}, {5, 5, 5, 5});
  const Tensor g = Tensor::full({4}, 1.0), b = Tensor::zeros({4});
  const Tensor y = ops::layer_norm(x, g, b);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, StandardizedRowIsUnchanged) {
  const Tensor x({1, 2}, {-1, 1});
  const Tensor g = Tensor::full({2}, 1.0), b = Tensor::zeros({2});
  const Tensor y = ops::layer_norm(x, g, b, 1e-15);
  EXPECT_NEAR(y[0], -1.0, 1e-12);
  EXPECT_NEAR(y[1], 1.0, 1e-12);
}

TEST(LayerNorm, RowStatistics) {
  const Tensor x = random_tensor({16, 32}, 11, 3.0);
  const Tensor g = Tensor::full({32}, 1.0), b = Tensor::zeros({32});
  const Tensor y = ops::layer_norm(x, g, b);
  for (std::size_t r = 0; r < 16; ++r) {
    double in_mean = 0.0, in_var = 0.0, mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 32; ++c) {
      in_mean += x[r * 32 + c];
      mean += y[r * 32 + c];
    }
    in_mean /= 32;
    mean /= 32;
    for (std::size_t c = 0; c < 32; ++c) {
      in_var += (x[r * 32 + c] - in_mean) * (x[r * 32 + c] - in_mean);
      var += (y[r * 32 + c] - mean) * (y[r * 32 + c] - mean);
    }
    in_var /= 32;
    var /= 32;
    EXPECT_LT(std::abs(mean), 1e-9);
    // Biased variance normalized with eps = 1e-5 inside the square root.
    EXPECT_NEAR(var, in_var / (in_var + 1e-5), 1e-12);
  }
}

TEST(LayerNorm, EmptyFeatureDimThrows) {
  const Tensor x = Tensor::zeros({2, 0});
  const Tensor g = Tensor::zeros({0}), b = Tensor::zeros({0});
  EXPECT_THROW(ops::layer_norm(x, g, b), DimensionError);
}

TEST(SoftmaxWeights, ClosedFormCases) {
  for (double tau : {0.01, 1.0, 100.0}) {
    const Tensor w = ops::softmax_weights(Tensor({3}, {2.5, 2.5, 2.5}), tau);
    for (double v : w.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
    EXPECT_EQ(ops::softmax_weights(Tensor({1}, {-42.0}), tau)[0], 1.0);
  }
  const Tensor w = ops::softmax_weights(Tensor({2}, {0.0, std::log(3.0)}), 1.0);
  EXPECT_NEAR(w[0], 0.25, 1e-15);
  EXPECT_NEAR(w[1], 0.75, 1e-15);
}

TEST(SoftmaxWeights, NonPositiveTemperatureThrows) {
  EXPECT_THROW(ops::softmax_weights(Tensor({2}, {1, 2}), 0.0), DomainError);
  EXPECT_THROW(ops::softmax_weights(Tensor({2}, {1, 2}), -1.0), DomainError);
}

TEST(SoftmaxWeights, ProbabilityVectorForLargeInputs) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mag(-1e3, 1e3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + trial % 9);
    for (double& x : v) x = mag(rng);
    const Tensor w = ops::softmax_weights(Tensor({v.size()}, v), 1.0);
    double total = 0.0;
    for (double p : w.data()) {
      EXPECT_GE(p, 0.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(SoftmaxWeights, TemperatureLimits) {
  const Tensor v({4}, {0.3, -1.2, 2.0, 0.7});
  const Tensor flat = ops::softmax_weights(v, 1e6);
  for (double p : flat.data()) EXPECT_NEAR(p, 0.25, 1e-5);
  EXPECT_GT(ops::softmax_weights(v, 1e-6)[2], 1.0 - 1e-6);
}

TEST(CrossEntropy, UniformAndConfidentLogits) {
  EXPECT_NEAR(ops::cross_entropy(Tensor({2}, {0, 0}), 0).item(), std::log(2.0), 1e-15);
  const double confident = ops::cross_entropy(Tensor({3}, {-1e3, 1e3, -1e3}), 1).item();
  EXPECT_TRUE(std::isfinite(confident));
  EXPECT_LT(confident, 1e-6);
}

TEST(CrossEntropy, LabelOutOfRangeThrows) {
  EXPECT_THROW(ops::cross_entropy(Tensor({3}, {0, 0, 0}), 3), IndexError);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  Tensor logits = random_tensor({6}, 3, 2.0, true);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(ops::cross_entropy(logits, 4));
  }
  const Tensor p = ops::softmax_weights(logits.detach(), 1.0);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(logits.grad()[i], p[i] - (i == 4 ? 1.0 : 0.0), 1e-14);
  }
  const auto numeric = numeric_grad([&] { return ops::cross_entropy(logits, 4).item(); }, logits);
  EXPECT_LT(max_rel_diff(logits.grad(), numeric), 1e-6);
}

TEST(Dropout, IdentityCases) {
  const Tensor x = random_tensor({100}, 1);
  EXPECT_EQ(to_vector(ops::dropout(x, 0.0, true, 9)), to_vector(x));
  EXPECT_EQ(to_vector(ops::dropout(x, 0.7, false, 9)), to_vector(x));
}

TEST(Dropout, SurvivorFractionAndScaling) {
  const Tensor x = Tensor::full({1000000}, 1.0);
  const Tensor y = ops::dropout(x, 0.5, true, 42);
  std::size_t survivors = 0;
  for (double v : y.data()) {
    if (v != 0.0) {
      ++survivors;
      EXPECT_EQ(v, 2.0);
    }
  }
  const double fraction = survivors / 1e6;
  EXPECT_GE(fraction, 0.497);
  EXPECT_LE(fraction, 0.503);
}

TEST(Dropout, ProbabilityOneThrows) {
  EXPECT_THROW(ops::dropout(Tensor::zeros({3}), 1.0, true, 0), DomainError);
  EXPECT_THROW(ops::dropout(Tensor::zeros({3}), -0.1, true, 0), DomainError);
}

TEST(Dropout, SeedDeterminesMask) {
  const Tensor x = random_tensor({500}, 2);
  EXPECT_EQ(to_vector(ops::dropout(x, 0.3, true, 5)), to_vector(ops::dropout(x, 0.3, true, 5)));
  EXPECT_NE(to_vector(ops::dropout(x, 0.3, true, 5)), to_vector(ops::dropout(x, 0.3, true, 6)));
}

TEST(CheckGradients, LinearSum) {
  const Tensor x = random_tensor({4, 3}, 21);
  const Parameter w{"w", random_tensor({3, 2}, 22, 1.0, true)};
  const Parameter b{"b", random_tensor({2}, 23, 1.0, true)};
  const std::vector<Parameter> params = {w, b};
  const auto report =
      check_gradients([&] { return ops::sum(ops::linear(x, w.tensor, &b.tensor)); }, params);
  ASSERT_EQ(report.entries.size(), 2u);
  EXPECT_EQ(report.entries[0].checked, 6u);
  EXPECT_TRUE(report.passed(1e-6)) << report.max_rel_error;
}

TEST(CheckGradients, ConstantFunction) {
  const Parameter w{"w", random_tensor({5}, 3, 1.0, true)};
  const std::vector<Parameter> params = {w};
  const auto report = check_gradients([] { return Tensor::scalar(2.5); }, params);
  EXPECT_EQ(report.entries[0].max_abs_analytic, 0.0);
  EXPECT_LT(report.entries[0].max_abs_numeric, 1e-10);
  EXPECT_TRUE(report.passed(1e-6));
}

TEST(CheckGradients, DetectsWrongGradient) {
  // A function whose tape omits a term: y = x * x with the second factor
  // detached has analytic gradient x but true derivative 2x.
  const Parameter x{"x", random_tensor({4}, 9, 1.0, true)};
  const std::vector<Parameter> params = {x};
  const auto report =
      check_gradients([&] { return ops::sum(ops::mul(x.tensor, x.tensor.detach())); }, params);
  EXPECT_FALSE(report.passed(1e-2));
  EXPECT_NEAR(report.max_rel_error, 0.5, 1e-6);
}

TEST(CheckGradients, NonFiniteAbortsNamingOp) {
  const Parameter x{"x", Tensor({2}, {1e300, 1e300}, true)};
  const std::vector<Parameter> params = {x};
  try {
    check_gradients([&] { return ops::sum(ops::mul(x.tensor, x.tensor)); }, params);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.op(), "mul");
  }
}

TEST(Tape, BackwardReplaysInReverseOrder) {
  Tensor a = Tensor::scalar(3.0, true);
  Tape tape;
  std::vector<int> order;
  {
    TapeScope scope(tape);
    tape.record([&] { order.push_back(1); });
    tape.record([&] { order.push_back(2); });
    tape.record([&] { order.push_back(3); });
    tape.backward(a);
  }
  EXPECT_EQ(order, (std::vector<int>{3, 2, 1}));
}

TEST(Tape, NothingRecordedWithoutScope) {
  Tensor w = random_tensor({3, 3}, 1, 1.0, true);
  Tape tape;
  ops::linear(random_tensor({2, 3}, 2), w);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_EQ(active_tape(), nullptr);
}

TEST(Tape, EveryReachableParameterGetsGradient) {
  ParameterStore store;
  Tensor w1 = store.add("w1", random_tensor({3, 4}, 1, 1.0, true));
  Tensor w2 = store.add("w2", random_tensor({4, 2}, 2, 1.0, true));
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(ops::sum(ops::linear(ops::relu(ops::linear(random_tensor({5, 3}, 3), w1)), w2)));
  }
  for (const auto& p : store.all()) EXPECT_TRUE(p.tensor.has_grad()) << p.name;
}

TEST(ParameterStore, NamesAreUnique) {
  ParameterStore store;
  store.add("a", Tensor::zeros({1}, true));
  EXPECT_THROW(store.add("a", Tensor::zeros({1}, true)), ConfigError);
  EXPECT_THROW(store.get("missing"), IndexError);
}

TEST(ParameterSeed, DependsOnNameOnly) {
  EXPECT_EQ(parameter_seed(5, "x.w"), parameter_seed(5, "x.w"));
  EXPECT_NE(parameter_seed(5, "x.w"), parameter_seed(5, "x.b"));
  EXPECT_NE(parameter_seed(5, "x.w"), parameter_seed(6, "x.w"));
}

TEST(Determinism, ForwardIsBitIdentical) {
  const Tensor x = random_tensor({2, 3, 8, 8}, 4);
  const Tensor w = random_tensor({4, 3, 3, 3}, 5);
  const auto run = [&] { return to_vector(ops::relu(ops::conv2d(x, w, nullptr, 2, 1))); };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a[i]), std::bit_cast<std::uint64_t>(b[i]));
  }
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; });
  EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  EXPECT_THROW(parallel_for(10,
                            [](std::size_t i) {
                              if (i == 7) throw DomainError("boom");
                            }),
               DomainError);
}

TEST(FiniteChecks, NamesOffendingOp) {
  FiniteCheckScope checks;
  EXPECT_THROW(ops::softplus(Tensor({1}, {std::numeric_limits<double>::infinity()})),
               NonFiniteError);
}

// Every differentiable op in isolation, through the shared suite.
TEST(GradcheckSuite, EveryOpPassesInIsolation) {
  SuiteOptions options;
  options.include_model = false;
  const auto cases = run_gradcheck_suite(options);
  EXPECT_GE(cases.size(), 30u);
  for (const auto& c : cases) {
    EXPECT_TRUE(c.passed()) << c.name << " rel err " << c.report.max_rel_error << " tol "
                            << c.tolerance;
  }
}

}  // namespace
}  // namespace kmp
