#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nvc/errors.hpp"
#include "nvc/image.hpp"
#include "nvc/rng.hpp"
#include "nvc/tensor.hpp"

namespace nvc {

/// Seeded source of training patches. Images are held in memory as float
/// tensors in [0,1]; batches are random crops, or draws from a fixed pool of
/// pre-sampled patches when `pool_size` is set. Same seed, same sequence.
class PatchSource {
 public:
  PatchSource(std::vector<ImageU8> images, std::int64_t patch_size, std::uint64_t seed,
              std::size_t pool_size = 0)
      : patch_size_(patch_size), rng_(seed) {
    if (patch_size < 1) throw config_error("patch source: patch_size must be positive");
    if (images.empty()) throw training_error("patch source: no images");
    for (const auto& img : images) {
      if (img.width < patch_size || img.height < patch_size)
        throw training_error("patch source: image " + std::to_string(img.width) + "x" +
                             std::to_string(img.height) + " is smaller than patch size " +
                             std::to_string(patch_size));
      images_.push_back(image_to_tensor<float>(img));
    }
    if (pool_size > 0) {
      pool_.reserve(pool_size);
      for (std::size_t i = 0; i < pool_size; ++i) pool_.push_back(sample_patch());
    }
  }

  static PatchSource from_directory(const std::string& dir, std::int64_t patch_size,
                                    std::uint64_t seed, std::size_t pool_size = 0) {
    return PatchSource(load_directory(dir), patch_size, seed, pool_size);
  }

  /// All readable .png/.ppm files under `dir`, sorted by name.
  static std::vector<ImageU8> load_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw io_error("not a directory: " + dir);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      const std::string p = e.path().string();
      if (has_extension(p, ".png") || has_extension(p, ".ppm")) names.push_back(p);
    }
    std::sort(names.begin(), names.end());
    std::vector<ImageU8> images;
    for (const auto& n : names) images.push_back(read_image(n));
    if (images.empty()) throw io_error("no readable .png/.ppm images in " + dir);
    return images;
  }

  std::int64_t patch_size() const { return patch_size_; }
  std::size_t image_count() const { return images_.size(); }

  /// N x 3 x patch x patch batch in [0,1].
  Tensor<float> next_batch(std::int64_t batch_size) {
    const std::int64_t ps = patch_size_;
    std::vector<float> out(static_cast<std::size_t>(batch_size * 3 * ps * ps));
    for (std::int64_t b = 0; b < batch_size; ++b) {
      const std::array<std::int64_t, 3>& loc =
          pool_.empty() ? sample_patch()
                        : pool_[uniform_index(rng_, pool_.size())];
      copy_patch(loc, out.data() + b * 3 * ps * ps);
    }
    return Tensor<float>({batch_size, 3, ps, ps}, std::move(out));
  }

 private:
  std::array<std::int64_t, 3> sample_patch() {
    const std::size_t i = uniform_index(rng_, images_.size());
    const Shape& s = images_[i].shape();
    const std::int64_t y = static_cast<std::int64_t>(
        uniform_index(rng_, static_cast<std::uint64_t>(s[2] - patch_size_ + 1)));
    const std::int64_t x = static_cast<std::int64_t>(
        uniform_index(rng_, static_cast<std::uint64_t>(s[3] - patch_size_ + 1)));
    return {static_cast<std::int64_t>(i), y, x};
  }

  void copy_patch(const std::array<std::int64_t, 3>& loc, float* dst) const {
    const auto& img = images_[static_cast<std::size_t>(loc[0])];
    const Shape& s = img.shape();
    const std::int64_t ps = patch_size_;
    for (std::int64_t c = 0; c < 3; ++c)
      for (std::int64_t y = 0; y < ps; ++y)
        std::copy_n(img.data().begin() + ((c + 0) * s[2] + loc[1] + y) * s[3] + loc[2], ps,
                    dst + (c * ps + y) * ps);
  }

  std::int64_t patch_size_;
  std::mt19937_64 rng_;
  std::vector<Tensor<float>> images_;  // each 1 x 3 x H x W
  std::vector<std::array<std::int64_t, 3>> pool_;
};

}  // namespace nvc
