#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <future>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "nvc/checkpoint.hpp"
#include "nvc/codec.hpp"
#include "nvc/dataset.hpp"
#include "nvc/entropy.hpp"
#include "nvc/metrics.hpp"
#include "nvc/rng.hpp"
#include "nvc/vae.hpp"

namespace nvc {

struct TrainConfig {
  double lambda = 0.001;
  std::int64_t latent_channels = 32;
  std::int64_t hidden_channels = 256;
  std::int64_t patch_size = 64;
  std::int64_t batch_size = 16;
  std::int64_t steps = 2000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  LossMode loss_mode = LossMode::rate_distortion;

  ArchitectureSpec arch() const {
    ArchitectureSpec a;
    a.latent_channels = latent_channels;
    a.hidden_channels = hidden_channels;
    return a;
  }

  void validate() const {
    arch().validate();
    if (lambda < 0) throw config_error("train: lambda must be >= 0");
    if (patch_size < 1 || patch_size % arch().downsample_factor != 0)
      throw config_error("train: patch_size must be a positive multiple of " +
                         std::to_string(arch().downsample_factor));
    if (batch_size < 1) throw config_error("train: batch_size must be positive");
    if (steps < 1) throw config_error("train: steps must be positive");
    if (learning_rate <= 0) throw config_error("train: learning_rate must be positive");
  }
};

/// One point of the rate-distortion curve, measured from real coded streams.
struct RDPoint {
  std::int64_t latent_channels = 0;
  double bpp = 0;
  double mse = 0;
  double psnr = 0;
  double ssim = 0;
};

/// Composite objective: MSE plus lambda times the rate estimate normalized
/// per pixel, so lambda means the same thing at any resolution.
template <typename T>
Tensor<T> rd_loss(const Tensor<T>& original, const Tensor<T>& reconstruction,
                  const Tensor<T>& noisy_latent, const FactorizedPrior<T>& prior, T lambda) {
  detail::check_same_shape("rd_loss", original, reconstruction);
  if (lambda < T(0)) throw config_error("rd_loss: lambda must be >= 0");
  const Shape& s = original.shape();
  const T pixels = static_cast<T>(s[0] * s[2] * s[3]);
  auto distortion = mse_loss(original, reconstruction);
  if (lambda == T(0)) return distortion;
  auto rate = rate_bits(noisy_latent, prior);
  return add(distortion, scale(rate, lambda / pixels));
}

/// Diagnostic ELBO-style objective: MSE plus lambda times the closed-form
/// KL of a diagonal Gaussian posterior against a unit Gaussian prior
/// (nats, normalized per pixel like the rate term).
template <typename T>
Tensor<T> beta_vae_loss(const Tensor<T>& original, const Tensor<T>& reconstruction,
                        const Tensor<T>& post_mean, const Tensor<T>& post_logvar, T lambda) {
  detail::check_same_shape("beta_vae_loss", original, reconstruction);
  detail::check_same_shape("beta_vae_loss posterior", post_mean, post_logvar);
  if (lambda < T(0)) throw config_error("beta_vae_loss: lambda must be >= 0");
  const Shape& s = original.shape();
  const T pixels = static_cast<T>(s[0] * s[2] * s[3]);
  auto distortion = mse_loss(original, reconstruction);
  if (lambda == T(0)) return distortion;
  // KL per element: (mu^2 + exp(logvar) - 1 - logvar) / 2
  auto t = sub(add_scalar(add(mul(post_mean, post_mean), exp(post_logvar)), T(-1)),
               post_logvar);
  auto kl = scale(sum(t), T(0.5));
  return add(distortion, scale(kl, lambda / pixels));
}

/// Per-dimension KL of a diagonal Gaussian against the unit Gaussian, nats.
inline double gaussian_kl(double mean, double logvar) {
  return 0.5 * (mean * mean + std::exp(logvar) - 1.0 - logvar);
}

/// One telemetry row per optimizer step.
struct TrainTelemetry {
  std::ostream* out = nullptr;
  void header() {
    if (out) *out << "step,loss,mse,rate_bpp\n";
  }
  void row(std::int64_t step, double loss, double mse_v, double rate_bpp) {
    if (out) *out << step << ',' << loss << ',' << mse_v << ',' << rate_bpp << '\n';
  }
};

/// Runs the training loop and returns the trained model. Fully reproducible:
/// the same config and an identically seeded patch source give bit-identical
/// parameters.
inline CodecModel train(const TrainConfig& config, PatchSource& dataset,
                        TrainTelemetry telemetry = {}) {
  config.validate();
  if (dataset.patch_size() != config.patch_size)
    throw config_error("train: dataset patch size " + std::to_string(dataset.patch_size()) +
                       " != config patch size " + std::to_string(config.patch_size));
  const bool beta = config.loss_mode == LossMode::beta_vae;
  CodecModel model = CodecModel::init(config.arch(), derive_seed(config.seed, 0),
                                      /*trainable=*/true, /*gaussian_head=*/beta);
  model.meta.lambda = config.lambda;
  model.meta.steps = static_cast<std::uint64_t>(config.steps);
  model.meta.seed = config.seed;
  model.meta.loss_mode = config.loss_mode;

  std::vector<Parameter<float>*> params =
      beta ? model.vae.trainable_params() : model.trainable_params();
  AdamConfig adam;
  adam.lr = config.learning_rate;

  const float lambda = static_cast<float>(config.lambda);
  const double pixels =
      static_cast<double>(config.batch_size * config.patch_size * config.patch_size);
  telemetry.header();

  for (std::int64_t step = 1; step <= config.steps; ++step) {
    Tensor<float> batch = dataset.next_batch(config.batch_size);
    Tensor<float> loss;
    double mse_v = 0, rate_bpp = 0;

    if (!beta) {
      Latent<float> z = model.vae.encode(batch);
      Latent<float> zn = add_uniform_noise(z, derive_seed(config.seed, 0x5eed + step));
      Tensor<float> recon = model.vae.decode(zn);
      Tensor<float> distortion = mse_loss(batch, recon);
      Tensor<float> rate = rate_bits(zn.values, model.prior);
      mse_v = distortion.item();
      rate_bpp = rate.item() / pixels;
      loss = lambda == 0.0f
                 ? distortion
                 : add(distortion, scale(rate, static_cast<float>(lambda / pixels)));
    } else {
      Latent<float> enc = model.vae.encode(batch);
      auto [mu, logvar] = model.vae.split_posterior(enc);
      std::mt19937_64 g(derive_seed(config.seed, 0x6eed + step));
      std::vector<float> noise(mu.data().size());
      for (auto& v : noise) v = normal_float(g);
      Tensor<float> eps(mu.shape(), std::move(noise));
      Tensor<float> z = add(mu, mul(exp(scale(logvar, 0.5f)), eps));
      Tensor<float> recon = model.vae.decode(Latent<float>{z, false});
      loss = beta_vae_loss(batch, recon, mu, logvar, lambda);
      mse_v = mse(batch, recon);
      double kl = 0;
      for (std::size_t i = 0; i < mu.data().size(); ++i)
        kl += gaussian_kl(mu.data()[i], logvar.data()[i]);
      rate_bpp = kl / (std::log(2.0) * pixels);  // KL in bits per pixel
    }

    const double loss_v = loss.item();
    if (!std::isfinite(loss_v) || !std::isfinite(mse_v) || !std::isfinite(rate_bpp))
      throw training_error("non-finite loss at step " + std::to_string(step) + ": loss=" +
                           std::to_string(loss_v) + " mse=" + std::to_string(mse_v) +
                           " rate_bpp=" + std::to_string(rate_bpp));

    backward(loss);
    adam_step(params, adam);
    zero_grads(params);
    telemetry.row(step, loss_v, mse_v, rate_bpp);
  }
  return model;
}

// ---- latent-width sweep ----------------------------------------------------------

struct SweepOptions {
  std::size_t pool_size = 0;       // fixed patch pool per grid point (0 = sample freely)
  unsigned max_threads = 0;        // 0 = hardware concurrency
  std::string csv_path;            // optional rate-distortion CSV
  std::string checkpoint_dir;      // optional; saves one checkpoint per grid point
};

/// Trains one model per latent width (same seed, same budget), evaluates each
/// with real coded files, and returns one rate-distortion point per width.
inline std::vector<RDPoint> sweep(const TrainConfig& base_config,
                                  const std::vector<std::int64_t>& latent_grid,
                                  const std::vector<ImageU8>& train_images,
                                  const std::vector<ImageU8>& eval_images,
                                  const SweepOptions& options = {}) {
  if (latent_grid.empty()) throw config_error("sweep: empty latent grid");
  if (eval_images.empty()) throw config_error("sweep: no evaluation images");

  std::vector<std::pair<std::string, ImageU8>> eval_named;
  for (std::size_t i = 0; i < eval_images.size(); ++i)
    eval_named.emplace_back("eval_" + std::to_string(i), eval_images[i]);

  auto run_point = [&](std::int64_t latent) -> std::pair<RDPoint, CodecModel> {
    TrainConfig cfg = base_config;
    cfg.latent_channels = latent;
    try {
      cfg.validate();
      PatchSource src(train_images, cfg.patch_size, derive_seed(cfg.seed, 1),
                      options.pool_size);
      CodecModel model = train(cfg, src);
      const Digest id = checkpoint_digest(model);
      EvalReport rep = evaluate_images(eval_named, model, id);
      RDPoint p;
      p.latent_channels = latent;
      p.bpp = rep.mean.bpp;
      p.mse = rep.mean.mse;
      p.psnr = rep.mean.psnr;
      p.ssim = rep.mean.ssim;
      return {p, std::move(model)};
    } catch (const error& e) {
      throw training_error("sweep: grid point latent_channels=" + std::to_string(latent) +
                           " failed: " + e.what());
    }
  };

  unsigned threads = options.max_threads ? options.max_threads
                                         : std::max(1u, std::thread::hardware_concurrency());
  std::vector<RDPoint> points(latent_grid.size());
  std::vector<CodecModel> models(latent_grid.size());
  for (std::size_t begin = 0; begin < latent_grid.size(); begin += threads) {
    const std::size_t end = std::min(begin + threads, latent_grid.size());
    std::vector<std::future<std::pair<RDPoint, CodecModel>>> futs;
    for (std::size_t i = begin; i < end; ++i)
      futs.push_back(std::async(std::launch::async, run_point, latent_grid[i]));
    for (std::size_t i = begin; i < end; ++i) {
      auto [p, m] = futs[i - begin].get();
      points[i] = p;
      models[i] = std::move(m);
    }
  }

  if (!options.checkpoint_dir.empty()) {
    std::filesystem::create_directories(options.checkpoint_dir);
    for (std::size_t i = 0; i < models.size(); ++i)
      save_checkpoint(models[i], options.checkpoint_dir + "/latent" +
                                     std::to_string(latent_grid[i]) + ".nvck");
  }
  if (!options.csv_path.empty()) {
    std::ofstream f(options.csv_path);
    if (!f) throw io_error("cannot write csv: " + options.csv_path);
    f << "latent_channels,bpp,mse,psnr,ssim\n";
    for (const auto& p : points)
      f << p.latent_channels << ',' << p.bpp << ',' << p.mse << ',' << p.psnr << ',' << p.ssim
        << '\n';
  }
  return points;
}

}  // namespace nvc
