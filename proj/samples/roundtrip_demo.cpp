// Minimal in-memory use of the library: initialize a codec, run a few
// training steps on procedural scenes, compress one image to container bytes,
// decompress it, and report the numbers.

#include <iostream>

#include "nvc/nvc.hpp"

int main() {
  nvc::TrainConfig cfg;
  cfg.latent_channels = 8;
  cfg.hidden_channels = 16;
  cfg.patch_size = 32;
  cfg.batch_size = 4;
  cfg.steps = 200;
  cfg.seed = 11;

  auto images = nvc::synthetic_corpus(8, 64, 64, cfg.seed);
  nvc::PatchSource src(images, cfg.patch_size, nvc::derive_seed(cfg.seed, 1));
  nvc::CodecModel model = nvc::train(cfg, src);
  const nvc::Digest id = nvc::checkpoint_digest(model);

  nvc::ImageU8 probe = nvc::synthetic_image(96, 80, 12345);
  auto coded = nvc::compress_to_bytes(probe, model, id);
  nvc::ImageU8 recon = nvc::decompress_from_bytes(coded, model, id);

  auto a = nvc::image_to_tensor<float>(probe);
  auto b = nvc::image_to_tensor<float>(recon);
  std::cout << "compressed " << probe.width << "x" << probe.height << " to " << coded.size()
            << " bytes (" << nvc::bits_per_pixel(8 * coded.size(), probe.width, probe.height)
            << " bpp)\n"
            << "psnr: " << nvc::psnr(a, b) << " dB, ssim: " << nvc::ssim(a, b) << "\n";
  return 0;
}
