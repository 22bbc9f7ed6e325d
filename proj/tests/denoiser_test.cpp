#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fsdd/denoiser.hpp"
#include "fsdd/error.hpp"
#include "fsdd/rng.hpp"

namespace fsdd {
namespace {

DenoiserConfig tiny_config(int classes = 0) {
  DenoiserConfig c;
  c.codebook_size = 4;
  c.target_sum = 3;
  c.num_classes = classes;
  c.embed_dim = 8;
  c.num_layers = 1;
  c.num_heads = 2;
  return c;
}

// Scalar cross-entropy, one position at a time.
double scalar_cross_entropy(const Matrix& z, const std::vector<int>& x0) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    double peak = z(j, 0);
    for (Eigen::Index v = 1; v < z.cols(); ++v) peak = std::max(peak, z(j, v));
    double sum = 0.0;
    for (Eigen::Index v = 0; v < z.cols(); ++v) sum += std::exp(z(j, v) - peak);
    total += peak + std::log(sum) - z(j, x0[static_cast<std::size_t>(j)]);
  }
  return total / static_cast<double>(z.rows());
}

TEST(DenoiserConfig, RejectsBadShapes) {
  auto c = tiny_config();
  c.num_heads = 3;
  EXPECT_THROW(c.validate(), ValidationError);
  c = tiny_config();
  c.label_drop_prob = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = tiny_config();
  c.num_layers = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Denoiser, ForwardIsDeterministicAndShaped) {
  const auto net = Denoiser::initialize(tiny_config(), 7);
  const std::vector<int> x{1, 0, 2, 0};
  const auto a = net.forward(x, 0.3, std::nullopt);
  const auto b = net.forward(x, 0.3, std::nullopt);
  EXPECT_EQ(a.grid.rows(), 4);
  EXPECT_EQ(a.grid.cols(), 4);
  EXPECT_EQ(a.grid, b.grid);
  EXPECT_EQ(Denoiser::initialize(tiny_config(), 7).params(), net.params());
  EXPECT_FALSE(Denoiser::initialize(tiny_config(), 8).params() == net.params());
}

TEST(Denoiser, FiniteAtSupportExtremes) {
  const auto net = Denoiser::initialize(tiny_config(), 1);
  for (double t : {0.0, 1.0}) {
    const auto z = net.forward(std::vector<int>{3, 0, 0, 0}, t, std::nullopt);
    EXPECT_TRUE(z.grid.allFinite());
  }
}

TEST(Denoiser, RejectsInvalidInputs) {
  const auto net = Denoiser::initialize(tiny_config(2), 1);
  EXPECT_THROW(net.forward(std::vector<int>{1, 1, 1}, 0.5, std::nullopt), ValidationError);
  EXPECT_THROW(net.forward(std::vector<int>{4, 0, 0, 0}, 0.5, std::nullopt), ValidationError);
  EXPECT_THROW(net.forward(std::vector<int>{1, 1, 1, 0}, 1.5, std::nullopt), ValidationError);
  EXPECT_THROW(net.forward(std::vector<int>{1, 1, 1, 0}, 0.5, 2), ValidationError);
  EXPECT_NO_THROW(net.forward(std::vector<int>{1, 1, 1, 0}, 0.5, 1));
}

TEST(Denoiser, ConstructorChecksLayout) {
  auto params = Denoiser::layout(tiny_config());
  EXPECT_NO_THROW(Denoiser(tiny_config(), params));
  EXPECT_THROW(Denoiser(tiny_config(2), params), ValidationError);
}

TEST(Denoiser, PermutationEquivariance) {
  auto net = Denoiser::initialize(tiny_config(), 3);
  const std::vector<int> x{2, 0, 1, 0};
  const std::vector<int> perm{2, 0, 3, 1};
  std::vector<int> px(4);
  for (int j = 0; j < 4; ++j) px[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];

  ParameterStore permuted = net.params();
  const Matrix pos = net.params().at("pos_embed");
  for (int j = 0; j < 4; ++j) permuted.at("pos_embed").row(j) = pos.row(perm[static_cast<std::size_t>(j)]);
  const Denoiser other(net.config(), permuted);

  const auto z = net.forward(x, 0.4, std::nullopt);
  const auto pz = other.forward(px, 0.4, std::nullopt);
  for (int j = 0; j < 4; ++j) {
    for (int v = 0; v < 4; ++v) {
      EXPECT_NEAR(pz.grid(j, v), z.grid(perm[static_cast<std::size_t>(j)], v), 1e-12);
    }
  }
}

TEST(CrossEntropy, UniformLogitsGiveLogSupport) {
  DenoiserLogits z{Matrix::Constant(5, 7, 0.25)};
  EXPECT_NEAR(cross_entropy_loss(z, std::vector<int>{0, 1, 2, 3, 6}), std::log(7.0), 1e-14);
}

TEST(CrossEntropy, ConcentratedLogitsGiveZero) {
  const std::vector<int> x0{2, 0, 1};
  DenoiserLogits z{Matrix::Zero(3, 3)};
  for (int j = 0; j < 3; ++j) z.grid(j, x0[static_cast<std::size_t>(j)]) = 200.0;
  EXPECT_LT(cross_entropy_loss(z, x0), 1e-60);
}

TEST(CrossEntropy, MatchesScalarOracle) {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix z(6, 9);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = 5.0 * rng.normal();
    std::vector<int> x0(6);
    for (auto& v : x0) v = static_cast<int>(rng.uniform_index(9));
    EXPECT_NEAR(cross_entropy_loss(DenoiserLogits{z}, x0), scalar_cross_entropy(z, x0), 1e-10);
  }
}

double loss_at(const Denoiser& net, const std::vector<int>& x, double t, std::optional<int> label,
               const std::vector<int>& x0) {
  return cross_entropy_loss(net.forward(x, t, label), x0);
}

void check_gradients(const DenoiserConfig& config, std::optional<int> label) {
  // Larger init than the default so every block contributes visibly.
  auto net = Denoiser::initialize(config, 5);
  RngStream rng(99, 0);
  for (auto& e : net.mutable_params().entries()) {
    for (Eigen::Index i = 0; i < e.value.size(); ++i) e.value.data()[i] += 0.3 * rng.normal();
  }
  const std::vector<int> x{0, 2, 1, 0};
  const std::vector<int> x0{1, 1, 0, 1};
  const double t = 0.37;
  const ParameterStore grad = net.backward(x, t, label, x0);

  const double h = 1e-4;
  double worst = 0.0;
  for (const auto& e : net.params().entries()) {
    const Matrix& g = grad.at(e.name);
    for (Eigen::Index i = 0; i < e.value.size(); ++i) {
      double& w = net.mutable_params().at(e.name).data()[i];
      const double saved = w;
      w = saved + h;
      const double up = loss_at(net, x, t, label, x0);
      w = saved - h;
      const double down = loss_at(net, x, t, label, x0);
      w = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = g.data()[i];
      const double rel = std::abs(numeric - analytic) / std::max(1e-6, std::abs(numeric) + std::abs(analytic));
      worst = std::max(worst, rel);
      EXPECT_LT(rel, 1e-4) << e.name << "[" << i << "] analytic " << analytic << " numeric " << numeric;
    }
  }
  ::testing::Test::RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(DenoiserGradient, MatchesFiniteDifferences) { check_gradients(tiny_config(), std::nullopt); }

TEST(DenoiserGradient, MatchesFiniteDifferencesWithClasses) {
  check_gradients(tiny_config(2), 1);
  check_gradients(tiny_config(2), std::nullopt);
}

TEST(DenoiserGradient, DeterministicAndLayoutMatched) {
  const auto net = Denoiser::initialize(tiny_config(), 2);
  const std::vector<int> x{1, 1, 1, 0};
  const std::vector<int> x0{0, 0, 3, 0};
  const auto a = net.backward(x, 0.5, std::nullopt, x0);
  const auto b = net.backward(x, 0.5, std::nullopt, x0);
  EXPECT_TRUE(a.same_layout(net.params()));
  EXPECT_EQ(a, b);
}

TEST(DenoiserGradient, VanishesAtZeroLoss) {
  auto net = Denoiser::initialize(tiny_config(), 2);
  const std::vector<int> x{1, 1, 1, 0};
  // Saturate the head bias on the target of every position: all rows share
  // the bias, so use a target that is constant across positions.
  const std::vector<int> flat{1, 1, 1, 1};
  net.mutable_params().at("head.b")(0, 1) = 80.0;
  const auto g = net.backward(x, 0.5, std::nullopt, flat);
  double norm2 = 0.0;
  for (const auto& e : g.entries()) norm2 += e.value.squaredNorm();
  EXPECT_LT(std::sqrt(norm2), 1e-8);
}

TEST(DenoiserTraining, FiftyStepsCutLossByNinetyPercent) {
  auto net = Denoiser::initialize(tiny_config(), 4);
  const std::vector<int> x{1, 0, 2, 0};
  const std::vector<int> x0{0, 3, 0, 0};
  const double initial = loss_at(net, x, 0.5, std::nullopt, x0);
  // Plain Adam on a single fixed pair.
  ParameterStore m = net.params().zeros_like();
  ParameterStore v = net.params().zeros_like();
  const double lr = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int step = 1; step <= 50; ++step) {
    const auto g = net.backward(x, 0.5, std::nullopt, x0);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const Matrix& gk = g.entries()[k].value;
      Matrix& mk = m.entries()[k].value;
      Matrix& vk = v.entries()[k].value;
      mk = b1 * mk + (1 - b1) * gk;
      vk = b2 * vk + (1 - b2) * gk.cwiseProduct(gk);
      const double c1 = 1 - std::pow(b1, step), c2 = 1 - std::pow(b2, step);
      Matrix& w = net.mutable_params().entries()[k].value;
      w.array() -= lr * (mk.array() / c1) / ((vk.array() / c2).sqrt() + eps);
    }
  }
  EXPECT_LE(loss_at(net, x, 0.5, std::nullopt, x0), 0.1 * initial);
}

TEST(TimestepEmbedding, WidthAndEndpoints) {
  const auto e = timestep_embedding(0.0, 7);
  ASSERT_EQ(e.cols(), 8);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(e(0, i), 0.0);
    EXPECT_EQ(e(0, 4 + i), 1.0);
  }
}

}  // namespace
}  // namespace fsdd
