#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nvc/metrics.hpp"
#include "test_util.hpp"

using namespace nvc;
using nvc::test::random_tensor;

TEST(Mse, KnownValues) {
  auto a = Tensor<double>::zeros({3, 8, 8});
  EXPECT_DOUBLE_EQ(mse(a, a), 0.0);
  auto b = Tensor<double>::full({3, 8, 8}, 0.5);
  EXPECT_DOUBLE_EQ(mse(a, b), 0.25);
}

TEST(Mse, MatchesDirectSummation) {
  std::mt19937_64 g(1);
  auto a = random_tensor({3, 9, 7}, g, 0, 1);
  auto b = random_tensor({3, 9, 7}, g, 0, 1);
  double acc = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    acc += d * d;
  }
  EXPECT_NEAR(mse(a, b), acc / static_cast<double>(a.data().size()), 1e-12);
}

TEST(Mse, ShapeMismatch) {
  auto a = Tensor<double>::zeros({3, 8, 8});
  auto b = Tensor<double>::zeros({3, 8, 9});
  EXPECT_THROW(mse(a, b), shape_error);
}

TEST(Psnr, ClosedForm) {
  EXPECT_NEAR(psnr_from_mse(0.01), 20.0, 1e-9);
  EXPECT_NEAR(psnr_from_mse(1e-4), 40.0, 1e-9);
  EXPECT_TRUE(std::isinf(psnr_from_mse(0.0)));

  auto a = Tensor<double>::zeros({1, 8, 8});
  EXPECT_TRUE(std::isinf(psnr(a, a)));
}

TEST(Psnr, StrictlyDecreasingInMse) {
  double prev = std::numeric_limits<double>::infinity();
  for (double m : {1e-6, 1e-4, 1e-2, 0.1, 0.5}) {
    const double p = psnr_from_mse(m);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Ssim, SelfSimilarityIsExactlyOne) {
  std::mt19937_64 g(2);
  for (int i = 0; i < 50; ++i) {
    auto x = random_tensor({3, 16, 16}, g, 0, 1);
    EXPECT_DOUBLE_EQ(ssim(x, x), 1.0);
  }
}

TEST(Ssim, ConstantZeroVersusConstantOne) {
  auto a = Tensor<double>::zeros({1, 8, 8});
  auto b = Tensor<double>::full({1, 8, 8}, 1.0);
  const double c1 = 1e-4;
  EXPECT_NEAR(ssim(a, b), c1 / (1 + c1), 1e-9);
}

TEST(Ssim, Symmetric) {
  std::mt19937_64 g(3);
  for (int i = 0; i < 20; ++i) {
    auto a = random_tensor({3, 20, 12}, g, 0, 1);
    auto b = random_tensor({3, 20, 12}, g, 0, 1);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  }
}

TEST(Ssim, BoundedByOneInMagnitude) {
  std::mt19937_64 g(4);
  for (int i = 0; i < 40; ++i) {
    auto a = random_tensor({1, 9, 9}, g, 0, 1);
    auto b = random_tensor({1, 9, 9}, g, 0, 1);
    EXPECT_LE(std::abs(ssim(a, b)), 1.0 + 1e-12);
  }
}

TEST(Ssim, TooSmallImageIsError) {
  auto a = Tensor<double>::zeros({1, 7, 7});
  EXPECT_THROW(ssim(a, a), shape_error);
}

TEST(Metrics, ChannelPermutationInvariance) {
  std::mt19937_64 g(5);
  auto a = random_tensor({3, 12, 12}, g, 0, 1);
  auto b = random_tensor({3, 12, 12}, g, 0, 1);
  // rotate channels of both images identically
  auto rotate = [](const Tensor<double>& t) {
    const std::int64_t hw = 12 * 12;
    std::vector<double> v(t.data().size());
    for (std::int64_t c = 0; c < 3; ++c)
      std::copy_n(t.data().begin() + c * hw, hw, v.begin() + ((c + 1) % 3) * hw);
    return Tensor<double>({3, 12, 12}, std::move(v));
  };
  EXPECT_NEAR(mse(a, b), mse(rotate(a), rotate(b)), 1e-15);
  EXPECT_NEAR(ssim(a, b), ssim(rotate(a), rotate(b)), 1e-12);
}

TEST(Bpp, Arithmetic) {
  EXPECT_DOUBLE_EQ(bits_per_pixel(1000, 100, 10), 1.0);
  EXPECT_GT(bits_per_pixel(2000, 100, 10), bits_per_pixel(1999, 100, 10));
  EXPECT_THROW(bits_per_pixel(8, 0, 4), error);
}
