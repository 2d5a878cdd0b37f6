#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nvc/entropy.hpp"
#include "test_util.hpp"

using namespace nvc;
using nvc::test::check_gradients;
using nvc::test::random_tensor;

namespace {

FactorizedPrior<double> make_prior(std::vector<double> mu, std::vector<double> log_s,
                                   bool trainable = false) {
  FactorizedPrior<double> p;
  const std::int64_t c = static_cast<std::int64_t>(mu.size());
  p.location = Parameter<double>("prior.location", Tensor<double>({c}, std::move(mu)), trainable);
  p.log_scale =
      Parameter<double>("prior.log_scale", Tensor<double>({c}, std::move(log_s)), trainable);
  return p;
}

double logistic_cdf(double x, double mu, double s) {
  return 1.0 / (1.0 + std::exp(-(x - mu) / s));
}

double box_mass(double z, double mu, double s) {
  return logistic_cdf(z + 0.5, mu, s) - logistic_cdf(z - 0.5, mu, s);
}

}  // namespace

TEST(Likelihood, ClosedFormAtZero) {
  auto prior = make_prior({0.0}, {0.0});
  Tensor<double> z({1, 1, 1, 1}, {0.0});
  auto p = likelihood(z, prior);
  // sigma(1/2) - sigma(-1/2)
  EXPECT_NEAR(p.item(), 0.244919, 1e-6);
  EXPECT_NEAR(p.item(), box_mass(0, 0, 1), 1e-15);
}

TEST(Likelihood, PmfSumsToOneOverTruncatedSupport) {
  // The support has to scale with s: at s = 10 the logistic tail outside
  // +-100 already holds ~1e-4 of the mass.
  for (double mu : {-5.0, -1.3, 0.0, 2.7, 5.0})
    for (double s : {0.1, 0.5, 1.0, 3.0, 10.0}) {
      const std::int64_t half =
          static_cast<std::int64_t>(std::ceil(std::abs(mu) + 20.0 * s)) + 1;
      auto prior = make_prior({mu}, {std::log(s)});
      double total = 0;
      std::vector<double> zs;
      for (std::int64_t k = -half; k <= half; ++k) zs.push_back(static_cast<double>(k));
      Tensor<double> z({1, 1, 1, static_cast<std::int64_t>(zs.size())}, zs);
      const Tensor<double> p_of_k = likelihood(z, prior);
      for (double p : p_of_k.data()) total += p;
      EXPECT_NEAR(total, 1.0, 1e-6) << "mu=" << mu << " s=" << s;
    }
}

TEST(Likelihood, SymmetricAroundLocation) {
  std::mt19937_64 g(1);
  for (int i = 0; i < 50; ++i) {
    const double mu = uniform(g, -3.0, 3.0);
    const double s = uniform(g, 0.2, 4.0);
    const double z = uniform(g, -8.0, 8.0);
    auto prior = make_prior({mu}, {std::log(s)});
    Tensor<double> za({1, 1, 1, 1}, {z});
    Tensor<double> zb({1, 1, 1, 1}, {2 * mu - z});
    EXPECT_NEAR(likelihood(za, prior).item(), likelihood(zb, prior).item(), 1e-12);
  }
}

TEST(Likelihood, FlooredInFarTailWithZeroGradient) {
  auto prior = make_prior({0.0}, {std::log(0.1)});
  Tensor<double> z({1, 1, 1, 1}, {500.0});
  z.set_requires_grad();
  auto p = likelihood(z, prior);
  EXPECT_DOUBLE_EQ(p.item(), kLikelihoodFloor);
  backward(sum(p));
  EXPECT_DOUBLE_EQ(z.grad()[0], 0.0);
}

TEST(Likelihood, GradientsMatchFiniteDifferences) {
  std::mt19937_64 g(2);
  for (int seed = 0; seed < 5; ++seed) {
    auto z = random_tensor({1, 2, 2, 3}, g, -3, 3);
    auto prior = make_prior({uniform(g, -1.0, 1.0), uniform(g, -1.0, 1.0)},
                            {uniform(g, -0.7, 0.7), uniform(g, -0.7, 0.7)},
                            /*trainable=*/true);
    z.set_requires_grad();
    check_gradients([&] { return sum(likelihood(z, prior)); },
                    {&z, &prior.location.value, &prior.log_scale.value});
  }
}

TEST(RateBits, LikelihoodHalfGivesOneBitPerElement) {
  // Choose s so the box mass at the mode is exactly 1/2:
  // 2*sigma(1/(2s)) - 1 = 1/2  =>  s = 1 / (2 ln 3).
  const double s = 1.0 / (2.0 * std::log(3.0));
  auto prior = make_prior({0.0}, {std::log(s)});
  Tensor<double> z = Tensor<double>::zeros({1, 1, 4, 6});
  auto r = rate_bits(z, prior);
  EXPECT_NEAR(r.item(), 24.0, 1e-9);
}

TEST(RateBits, StrictlyPositive) {
  std::mt19937_64 g(3);
  auto prior = make_prior({0.3}, {0.5});
  for (int i = 0; i < 20; ++i) {
    auto z = random_tensor({1, 1, 3, 3}, g, -50, 50);
    EXPECT_GT(rate_bits(z, prior).item(), 0.0);
  }
}

TEST(RateBits, GradientsMatchFiniteDifferences) {
  std::mt19937_64 g(4);
  auto z = random_tensor({1, 2, 2, 2}, g, -2, 2);
  auto prior = make_prior({0.1, -0.4}, {0.2, -0.3}, /*trainable=*/true);
  z.set_requires_grad();
  check_gradients([&] { return rate_bits(z, prior); },
                  {&z, &prior.location.value, &prior.log_scale.value});
}

TEST(RateBits, WiderPriorCostsMoreAtTheMode) {
  double prev = -1;
  for (double s : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    auto prior = make_prior({0.7}, {std::log(s)});
    Tensor<double> z({1, 1, 1, 1}, {0.7});
    const double bits = rate_bits(z, prior).item();
    EXPECT_GT(bits, prev) << "s=" << s;
    prev = bits;
  }
}

TEST(AddUniformNoise, StaysInsideTheBox) {
  std::mt19937_64 g(5);
  auto z = random_tensor({1, 3, 4, 4}, g, -4, 4);
  Latent<double> latent{z, false};
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    auto noisy = add_uniform_noise(latent, seed);
    for (std::size_t i = 0; i < z.data().size(); ++i) {
      const double u = noisy.values.data()[i] - z.data()[i];
      EXPECT_GE(u, -0.5);
      EXPECT_LE(u, 0.5);
    }
  }
}

TEST(AddUniformNoise, MonteCarloMeanNearZero) {
  Latent<double> latent{Tensor<double>::zeros({1, 1, 1000, 1000}), false};
  auto noisy = add_uniform_noise(latent, 42);
  double mean = 0;
  for (double v : noisy.values.data()) mean += v;
  mean /= 1e6;
  const double sigma = 1.0 / std::sqrt(12.0 * 1e6);
  EXPECT_LT(std::abs(mean), 3 * sigma);
}

TEST(AddUniformNoise, SameSeedSameNoise) {
  std::mt19937_64 g(6);
  auto z = random_tensor({1, 2, 3, 3}, g);
  Latent<double> latent{z, false};
  auto a = add_uniform_noise(latent, 7);
  auto b = add_uniform_noise(latent, 7);
  EXPECT_EQ(a.values.data(), b.values.data());
  auto c = add_uniform_noise(latent, 8);
  EXPECT_NE(a.values.data(), c.values.data());
}

TEST(AddUniformNoise, RejectsQuantizedInput) {
  Latent<double> latent{Tensor<double>::zeros({1, 1, 1, 1}), true};
  EXPECT_THROW(add_uniform_noise(latent, 0), error);
}

TEST(Entropy, KnownValues) {
  std::vector<std::uint64_t> uniform256(256, 7);
  EXPECT_NEAR(entropy_of_source(uniform256), 8.0, 1e-12);

  std::vector<std::uint64_t> coin{5000, 5000};
  EXPECT_NEAR(entropy_of_source(coin), 1.0, 1e-12);

  std::vector<std::uint64_t> skewed{9, 1};
  EXPECT_NEAR(entropy_of_source(skewed), 0.468996, 1e-6);

  EXPECT_THROW(entropy_of_source(std::vector<std::uint64_t>{0, 0}), error);
  EXPECT_THROW(entropy_of_source(std::vector<std::uint64_t>{}), error);
}

TEST(CrossEntropy, GibbsEqualityWhenModelMatches) {
  SymbolHistogram h;
  h.offset = -2;
  h.counts = {10, 25, 40, 20, 5};
  std::uint64_t total = 100;
  std::vector<double> q;
  for (auto c : h.counts) q.push_back(static_cast<double>(c) / total);
  EXPECT_NEAR(cross_entropy(h, q), entropy_of_source(h.counts), 1e-9);
}

TEST(CrossEntropy, GibbsInequalityForMismatchedModels) {
  std::mt19937_64 g(7);
  for (int i = 0; i < 30; ++i) {
    SymbolHistogram h;
    h.offset = 0;
    for (int k = 0; k < 6; ++k) h.counts.push_back(1 + uniform_index(g, 100));
    std::vector<double> q(6);
    double qs = 0;
    for (auto& v : q) qs += (v = uniform(g, 0.01, 1.0));
    for (auto& v : q) v /= qs;
    EXPECT_GE(cross_entropy(h, q), entropy_of_source(h.counts) - 1e-12);
  }
}

TEST(CrossEntropy, RoundedGaussianAgainstLogisticMatchesQuadrature) {
  // Empirical source: N(0,1) draws rounded to integers. Model: logistic(0,1).
  std::mt19937_64 g(8);
  const int n = 200000;
  SymbolHistogram h;
  h.offset = -12;
  h.counts.assign(25, 0);
  for (int i = 0; i < n; ++i) {
    const long k = std::lround(normal_float(g));
    ASSERT_GE(k, h.offset);
    ASSERT_LT(k - h.offset, static_cast<long>(h.counts.size()));
    h.counts[static_cast<std::size_t>(k - h.offset)]++;
  }
  auto prior = make_prior({0.0}, {0.0});
  const double measured = cross_entropy(h, prior, 0);

  // Quadrature oracle: exact binned-Gaussian probabilities against the same
  // logistic box masses.
  auto gauss_bin = [](double k) {
    return 0.5 * (std::erf((k + 0.5) / std::sqrt(2.0)) - std::erf((k - 0.5) / std::sqrt(2.0)));
  };
  double oracle = 0;
  for (int k = -12; k <= 12; ++k)
    oracle -= gauss_bin(k) * std::log2(box_mass(k, 0.0, 1.0));
  EXPECT_NEAR(measured, oracle, 0.1);
}

TEST(FreezeCmf, TablesAreValidCodingDistributions) {
  auto prior = make_prior({0.0, 2.3, -7.9}, {std::log(0.4), 0.0, std::log(6.0)});
  auto tables = freeze_cmf(prior);
  ASSERT_EQ(tables.size(), 3u);
  for (const auto& t : tables) {
    EXPECT_TRUE(t.valid());
    EXPECT_EQ(t.cum.front(), 0u);
    EXPECT_EQ(t.cum.back(), kCoderTotal);
    for (std::size_t i = 0; i + 1 < t.cum.size(); ++i) EXPECT_LT(t.cum[i], t.cum[i + 1]);
  }
}

TEST(FreezeCmf, QuantizedMassesTrackAnalyticLikelihoods) {
  const double mu = 0.8, s = 2.0, tail = 1e-4;
  auto prior = make_prior({mu}, {std::log(s)});
  auto tables = freeze_cmf(prior, tail);
  const CmfTable& t = tables[0];
  for (std::int32_t v = t.support_min; v <= t.support_max; ++v) {
    const double q =
        static_cast<double>(t.freq(static_cast<std::size_t>(v - t.support_min))) / kCoderTotal;
    const double p = box_mass(v, mu, s);
    EXPECT_NEAR(q, p, 3.0 / kCoderTotal + tail) << "v=" << v;
  }
  // Support really covers all but ~tail of the mass.
  const double covered = logistic_cdf(t.support_max + 0.5, mu, s) -
                         logistic_cdf(t.support_min - 0.5, mu, s);
  EXPECT_GE(covered, 1.0 - 2 * tail);
}

TEST(FreezeCmf, DeterministicAcrossCalls) {
  auto prior = make_prior({1.1, -0.2}, {0.3, -1.0});
  auto a = freeze_cmf(prior);
  auto b = freeze_cmf(prior);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].support_min, b[i].support_min);
    EXPECT_EQ(a[i].support_max, b[i].support_max);
    EXPECT_EQ(a[i].cum, b[i].cum);
  }
}

TEST(FreezeCmf, TailMassValidation) {
  auto prior = make_prior({0.0}, {0.0});
  EXPECT_THROW(freeze_cmf(prior, 0.0), error);
  EXPECT_THROW(freeze_cmf(prior, 0.5), error);
  EXPECT_NO_THROW(freeze_cmf(prior, 0.01));
}
