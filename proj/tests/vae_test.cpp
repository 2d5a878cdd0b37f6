#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nvc/entropy.hpp"
#include "nvc/metrics.hpp"
#include "nvc/vae.hpp"
#include "test_util.hpp"

using namespace nvc;
using nvc::test::random_tensor_f;

namespace {
ArchitectureSpec small_spec(std::int64_t latent = 16, std::int64_t hidden = 32) {
  ArchitectureSpec s;
  s.latent_channels = latent;
  s.hidden_channels = hidden;
  return s;
}
}  // namespace

TEST(ArchitectureSpecTest, Validation) {
  EXPECT_NO_THROW(small_spec().validate());
  EXPECT_THROW(small_spec(0).validate(), config_error);
  EXPECT_THROW(small_spec(64, 32).validate(), config_error);  // hidden < latent
  EXPECT_THROW(small_spec(3, 7).validate(), config_error);    // odd hidden
  ArchitectureSpec s = small_spec();
  s.downsample_factor = 4;
  EXPECT_THROW(s.validate(), config_error);
}

TEST(Encode, LatentShape) {
  auto m = VaeModel<float>::init(small_spec(16, 32), 1);
  std::mt19937_64 g(2);
  auto x = random_tensor_f({2, 3, 64, 64}, g, 0, 1);
  auto z = m.encode(x);
  EXPECT_EQ(z.values.shape(), (Shape{2, 16, 8, 8}));
  EXPECT_FALSE(z.quantized);
}

TEST(Encode, RejectsIndivisibleExtents) {
  auto m = VaeModel<float>::init(small_spec(), 1);
  std::mt19937_64 g(3);
  auto x = random_tensor_f({1, 3, 60, 64}, g, 0, 1);
  try {
    m.encode(x);
    FAIL() << "expected shape_error";
  } catch (const shape_error& e) {
    EXPECT_NE(std::string(e.what()).find("divisible by 8"), std::string::npos) << e.what();
  }
}

TEST(Encode, DeterministicForIdenticalInputs) {
  auto m = VaeModel<float>::init(small_spec(), 7);
  std::mt19937_64 g(4);
  auto x = random_tensor_f({1, 3, 32, 32}, g, 0, 1);
  auto a = m.encode(x);
  auto b = m.encode(Tensor<float>(x.shape(), x.data()));
  EXPECT_EQ(a.values.data(), b.values.data());
}

TEST(Encode, LatentsStayBoundedAtRandomInit) {
  std::mt19937_64 g(5);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto m = VaeModel<float>::init(small_spec(8, 16), seed);
    auto x = random_tensor_f({1, 3, 32, 32}, g, 0, 1);
    auto z = m.encode(x);
    for (float v : z.values.data()) {
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_LT(std::abs(v), 1e4f);
    }
  }
}

TEST(Decode, ShapeRoundTrip) {
  for (std::int64_t latent : {4, 16}) {
    auto m = VaeModel<float>::init(small_spec(latent, 32), 1);
    std::mt19937_64 g(6);
    for (auto [h, w] : {std::pair{32, 32}, std::pair{64, 40}, std::pair{8, 8}}) {
      auto x = random_tensor_f({1, 3, h, w}, g, 0, 1);
      auto y = m.decode(m.encode(x));
      EXPECT_EQ(y.shape(), x.shape());
    }
  }
}

TEST(Decode, OutputsInOpenUnitInterval) {
  auto m = VaeModel<float>::init(small_spec(), 9);
  std::mt19937_64 g(7);
  auto x = random_tensor_f({1, 3, 32, 32}, g, 0, 1);
  auto y = m.decode(m.encode(x));
  for (float v : y.data()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Decode, ZeroLatentGivesConstantImageAtInit) {
  // Biases start at zero, so a zero latent propagates to sigmoid(0) = 1/2.
  auto m = VaeModel<float>::init(small_spec(8, 16), 3);
  Latent<float> z{Tensor<float>::zeros({1, 8, 4, 4}), true};
  auto y = m.decode(z);
  for (float v : y.data()) EXPECT_FLOAT_EQ(v, 0.5f);
}

TEST(Decode, SingleLatentPerturbationIsBounded) {
  auto m = VaeModel<float>::init(small_spec(8, 16), 4);
  std::mt19937_64 g(8);
  auto x = random_tensor_f({1, 3, 32, 32}, g, 0, 1);
  auto z = m.encode(x);
  auto base = m.decode(z);
  auto bumped_vals = z.values.data();
  bumped_vals[13] += 1.0f;
  Latent<float> bumped{Tensor<float>(z.values.shape(), std::move(bumped_vals)), false};
  auto y = m.decode(bumped);
  const double change = mse(base, y);
  EXPECT_TRUE(std::isfinite(change));
  EXPECT_GT(change, 0.0);
  EXPECT_LT(change, 1.0);
}

TEST(Decode, RejectsWrongChannelCount) {
  auto m = VaeModel<float>::init(small_spec(8, 16), 4);
  Latent<float> z{Tensor<float>::zeros({1, 9, 4, 4}), false};
  EXPECT_THROW(m.decode(z), shape_error);
}

TEST(Quantize, RoundingRules) {
  Tensor<float> v({1, 1, 1, 6}, {0.4f, -1.7f, 1.5f, -0.5f, 2.0f, -0.0f});
  auto q = quantize(Latent<float>{v, false});
  EXPECT_TRUE(q.quantized);
  const std::vector<float> expect{0.f, -2.f, 2.f, -1.f, 2.f, -0.f};
  EXPECT_EQ(q.values.data(), expect);
}

TEST(Quantize, IdempotentAndWithinHalf) {
  std::mt19937_64 g(9);
  auto v = random_tensor_f({1, 2, 5, 5}, g, -10, 10);
  auto q = quantize(Latent<float>{v, false});
  for (std::size_t i = 0; i < v.data().size(); ++i) {
    EXPECT_LE(std::abs(q.values.data()[i] - v.data()[i]), 0.5f);
    EXPECT_EQ(q.values.data()[i], std::round(q.values.data()[i]));
  }
  auto qq = quantize(Latent<float>{q.values, false});
  EXPECT_EQ(qq.values.data(), q.values.data());
}

TEST(GaussianHead, SplitsPosterior) {
  auto m = VaeModel<float>::init(small_spec(8, 16), 5, true, /*gaussian_head=*/true);
  std::mt19937_64 g(10);
  auto x = random_tensor_f({1, 3, 32, 32}, g, 0, 1);
  auto enc = m.encode(x);
  EXPECT_EQ(enc.values.shape(), (Shape{1, 16, 4, 4}));
  auto [mu, logvar] = m.split_posterior(enc);
  EXPECT_EQ(mu.shape(), (Shape{1, 8, 4, 4}));
  EXPECT_EQ(logvar.shape(), (Shape{1, 8, 4, 4}));

  auto plain = VaeModel<float>::init(small_spec(8, 16), 5);
  EXPECT_THROW(plain.split_posterior(plain.encode(x)), error);
}

TEST(VaeTraining, NoisyAndRoundedReconstructionsDiffer) {
  auto m = VaeModel<float>::init(small_spec(8, 16), 11);
  std::mt19937_64 g(11);
  auto x = random_tensor_f({1, 3, 32, 32}, g, 0, 1);
  auto z = m.encode(x);
  auto noisy = add_uniform_noise(z, 77);
  auto rounded = quantize(z);
  auto yn = m.decode(noisy);
  auto yr = m.decode(rounded);
  EXPECT_NE(yn.data(), yr.data());
}
