#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "nvc/latent.hpp"
#include "nvc/optim.hpp"
#include "nvc/range_coder.hpp"
#include "nvc/rng.hpp"
#include "nvc/tensor.hpp"

namespace nvc {

// Learned factorized prior over the bottleneck: one logistic density per
// latent channel, shared by all spatial positions. Its box integral gives the
// probability of a quantized value, which drives both the training-time rate
// estimate and the frozen tables the range coder uses. The logistic CDF is
// closed-form, so the integral costs two sigmoids.

inline constexpr double kLikelihoodFloor = 1e-9;

template <typename T>
struct FactorizedPrior {
  Parameter<T> location;   // per-channel mu
  Parameter<T> log_scale;  // per-channel log s, so s = exp(log_scale) > 0 always

  static FactorizedPrior init(std::int64_t channels, bool trainable = true) {
    FactorizedPrior p;
    p.location = Parameter<T>("prior.location", Tensor<T>::zeros({channels}), trainable);
    p.log_scale = Parameter<T>("prior.log_scale", Tensor<T>::zeros({channels}), trainable);
    return p;
  }

  std::int64_t channels() const { return location.value.numel(); }
  double loc(std::int64_t c) const { return static_cast<double>(location.value.data()[c]); }
  double scale(std::int64_t c) const {
    return std::exp(static_cast<double>(log_scale.value.data()[c]));
  }
};

/// Probability that each latent value, quantized to the nearest integer,
/// lands where it did: CDF(z + 1/2) - CDF(z - 1/2) under the channel's
/// logistic. Floored at kLikelihoodFloor so the log stays finite.
/// Differentiable w.r.t. the values and both prior parameters.
template <typename T>
Tensor<T> likelihood(const Tensor<T>& z, const FactorizedPrior<T>& prior) {
  const Shape& s = z.shape();
  if (s.size() != 4 || s[1] != prior.channels())
    throw shape_error("likelihood: latent " + shape_str(s) + " does not match prior with " +
                      std::to_string(prior.channels()) + " channels");
  const std::int64_t N = s[0], C = s[1], HW = s[2] * s[3];
  const T floor_v = static_cast<T>(kLikelihoodFloor);

  auto zn = z.node_ptr();
  auto ln = prior.location.value.node_ptr();
  auto sn = prior.log_scale.value.node_ptr();

  std::vector<T> out(z.data().size());
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t c = 0; c < C; ++c) {
      const T inv_s = std::exp(-sn->value[c]);
      const T mu = ln->value[c];
      const T* zp = zn->value.data() + (n * C + c) * HW;
      T* op = out.data() + (n * C + c) * HW;
      for (std::int64_t i = 0; i < HW; ++i) {
        const T a = (zp[i] - mu + T(0.5)) * inv_s;
        const T b = (zp[i] - mu - T(0.5)) * inv_s;
        const T p = detail::stable_sigmoid(a) - detail::stable_sigmoid(b);
        op[i] = p > floor_v ? p : floor_v;
      }
    }

  return detail::make_op<T>(
      s, std::move(out), {zn, ln, sn},
      [zn, ln, sn, N, C, HW, floor_v](detail::TensorNode<T>& node) {
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t c = 0; c < C; ++c) {
            const T inv_s = std::exp(-sn->value[c]);
            const T mu = ln->value[c];
            const T* zp = zn->value.data() + (n * C + c) * HW;
            const T* gp = node.grad.data() + (n * C + c) * HW;
            const T* vp = node.value.data() + (n * C + c) * HW;
            T dmu = 0, dls = 0;
            for (std::int64_t i = 0; i < HW; ++i) {
              if (vp[i] <= floor_v) continue;  // clamped: no gradient
              const T a = (zp[i] - mu + T(0.5)) * inv_s;
              const T b = (zp[i] - mu - T(0.5)) * inv_s;
              const T sa = detail::stable_sigmoid(a);
              const T sb = detail::stable_sigmoid(b);
              const T da = sa * (T(1) - sa);
              const T db = sb * (T(1) - sb);
              const T g = gp[i];
              if (zn->requires_grad)
                zn->grad[(n * C + c) * HW + i] += g * (da - db) * inv_s;
              dmu -= g * (da - db) * inv_s;
              dls -= g * (da * a - db * b);
            }
            if (ln->requires_grad) ln->grad[c] += dmu;
            if (sn->requires_grad) sn->grad[c] += dls;
          }
      });
}

/// Total information content of the latent under the prior, in bits:
/// sum over elements of -log2 P. Differentiable.
template <typename T>
Tensor<T> rate_bits(const Tensor<T>& z, const FactorizedPrior<T>& prior) {
  return scale(sum(log(likelihood(z, prior))), static_cast<T>(-1.0 / std::log(2.0)));
}

/// Training-time quantizer relaxation: adds i.i.d. Uniform(-1/2, 1/2) noise.
/// Gradients pass straight through to the input values.
template <typename T>
Latent<T> add_uniform_noise(const Latent<T>& latent, std::uint64_t rng_seed) {
  if (latent.quantized) throw error("add_uniform_noise: latent is already quantized");
  std::mt19937_64 g(rng_seed);
  std::vector<T> noise(latent.values.data().size());
  for (auto& u : noise) u = static_cast<T>(unit_double(g) - 0.5);
  Tensor<T> u(latent.values.shape(), std::move(noise));
  return Latent<T>{add(latent.values, u), false};
}

// ---- diagnostics -------------------------------------------------------------

/// Shannon entropy of a count histogram, bits per symbol.
inline double entropy_of_source(std::span<const std::uint64_t> counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw error("entropy_of_source: empty histogram");
  double h = 0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

/// Histogram over consecutive integer symbol values starting at `offset`.
struct SymbolHistogram {
  std::int64_t offset = 0;
  std::vector<std::uint64_t> counts;
};

/// Average code length when the histogram's source is coded with explicit
/// model probabilities aligned to its bins, bits per symbol.
inline double cross_entropy(const SymbolHistogram& p, std::span<const double> q) {
  if (p.counts.size() != q.size())
    throw error("cross_entropy: histogram and model sizes differ");
  std::uint64_t total = std::accumulate(p.counts.begin(), p.counts.end(), std::uint64_t{0});
  if (total == 0) throw error("cross_entropy: empty histogram");
  double h = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (p.counts[i] == 0) continue;
    const double pi = static_cast<double>(p.counts[i]) / static_cast<double>(total);
    h -= pi * std::log2(std::max(q[i], kLikelihoodFloor));
  }
  return h;
}

/// Same, with the model given by one channel of the factorized prior.
template <typename T>
double cross_entropy(const SymbolHistogram& p, const FactorizedPrior<T>& prior,
                     std::int64_t channel) {
  const double mu = prior.loc(channel);
  const double s = prior.scale(channel);
  auto cdf = [&](double x) { return 1.0 / (1.0 + std::exp(-(x - mu) / s)); };
  std::vector<double> q(p.counts.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double k = static_cast<double>(p.offset + static_cast<std::int64_t>(i));
    q[i] = cdf(k + 0.5) - cdf(k - 0.5);
  }
  return cross_entropy(p, q);
}

// ---- frozen coding tables ------------------------------------------------------

/// Builds one range-coder table per channel from the prior: integer support
/// covering all but `tail_mass` of the density, masses quantized to a total
/// of exactly 2^16 with every slot (escape included) kept above zero.
/// Pure function of the prior values; both codec sides rebuild identical
/// tables from the checkpoint instead of shipping them in the stream.
template <typename T>
std::vector<CmfTable> freeze_cmf(const FactorizedPrior<T>& prior, double tail_mass = 1e-4) {
  if (!(tail_mass > 0.0) || tail_mass > 0.01)
    throw error("freeze_cmf: tail_mass must be in (0, 0.01]");
  constexpr std::int64_t kMaxHalfWidth = 1 << 12;

  std::vector<CmfTable> tables;
  tables.reserve(static_cast<std::size_t>(prior.channels()));
  for (std::int64_t c = 0; c < prior.channels(); ++c) {
    const double mu = prior.loc(c);
    const double s = prior.scale(c);
    auto cdf = [&](double x) { return 1.0 / (1.0 + std::exp(-(x - mu) / s)); };

    // Smallest symmetric-ish integer support with outside mass <= tail_mass.
    const double half_tail = tail_mass / 2.0;
    const double spread = s * std::log(1.0 / half_tail - 1.0);  // logit(1 - tail/2)
    const std::int64_t center = static_cast<std::int64_t>(std::llround(mu));
    std::int64_t lo = static_cast<std::int64_t>(std::floor(mu - spread));
    std::int64_t hi = static_cast<std::int64_t>(std::ceil(mu + spread));
    lo = std::max(lo, center - kMaxHalfWidth);
    hi = std::min(hi, center + kMaxHalfWidth);
    lo = std::min(lo, center);
    hi = std::max(hi, center);

    const std::size_t n_support = static_cast<std::size_t>(hi - lo + 1);
    std::vector<double> p(n_support + 1);  // + escape
    double in_support = 0;
    for (std::size_t i = 0; i < n_support; ++i) {
      const double k = static_cast<double>(lo + static_cast<std::int64_t>(i));
      p[i] = cdf(k + 0.5) - cdf(k - 0.5);
      in_support += p[i];
    }
    p[n_support] = std::max(1.0 - in_support, 0.0);

    // Largest-remainder quantization to a fixed total, one count minimum.
    const std::size_t n = p.size();
    std::vector<std::uint32_t> counts(n);
    std::vector<std::pair<double, std::size_t>> rem(n);
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double exact = p[i] * static_cast<double>(kCoderTotal);
      counts[i] = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(exact));
      rem[i] = {exact - std::floor(exact), i};
      sum += counts[i];
    }
    std::stable_sort(rem.begin(), rem.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::size_t idx = 0;
    while (sum < static_cast<std::int64_t>(kCoderTotal)) {
      counts[rem[idx % n].second] += 1;
      ++sum;
      ++idx;
    }
    idx = 0;
    while (sum > static_cast<std::int64_t>(kCoderTotal)) {
      auto& cnt = counts[rem[n - 1 - (idx % n)].second];
      if (cnt > 1) {
        cnt -= 1;
        --sum;
      }
      ++idx;
    }

    CmfTable t;
    t.support_min = static_cast<std::int32_t>(lo);
    t.support_max = static_cast<std::int32_t>(hi);
    t.cum.resize(n + 1);
    t.cum[0] = 0;
    for (std::size_t i = 0; i < n; ++i) t.cum[i + 1] = t.cum[i] + counts[i];
    tables.push_back(std::move(t));
  }
  return tables;
}

}  // namespace nvc
