#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "nvc/checkpoint.hpp"
#include "nvc/container.hpp"
#include "nvc/dataset.hpp"
#include "nvc/entropy.hpp"
#include "nvc/image.hpp"
#include "nvc/metrics.hpp"
#include "nvc/range_coder.hpp"
#include "nvc/vae.hpp"

namespace nvc {

// File-level compression pipeline: ingest -> pad -> encode -> quantize ->
// freeze tables -> range-code -> container. Everything after encoding is
// exact, so the only loss in a round trip is the VAE itself.

struct CompressStats {
  std::uint64_t payload_bits = 0;
  std::uint64_t total_bits = 0;  // header + payload
  double bpp = 0;                // total_bits over true extents
  std::size_t escape_count = 0;
  std::size_t symbol_count = 0;
};

namespace detail {

/// Latents serialized channel-major, then row-major spatially; table i
/// covers channel i. The assignment is implicit (symbol j belongs to channel
/// j / (h*w)), so no per-symbol table vector is materialized.
inline std::vector<std::int32_t> latent_to_symbols(const Tensor<float>& q) {
  std::vector<std::int32_t> out(q.data().size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::int32_t>(q.data()[i]);
  return out;
}

inline std::vector<std::uint32_t> channel_assignment(std::int64_t channels, std::int64_t hw) {
  std::vector<std::uint32_t> table_of(static_cast<std::size_t>(channels * hw));
  for (std::int64_t c = 0; c < channels; ++c)
    std::fill_n(table_of.begin() + c * hw, hw, static_cast<std::uint32_t>(c));
  return table_of;
}

}  // namespace detail

/// Compresses an in-memory image to container bytes.
inline std::vector<std::uint8_t> compress_to_bytes(const ImageU8& img, const CodecModel& model,
                                                   const Digest& model_id,
                                                   CompressStats* stats = nullptr) {
  if (model.meta.loss_mode != LossMode::rate_distortion || model.vae.gaussian_head)
    throw format_error("checkpoint was trained in beta_vae mode; the codec path needs a "
                       "rate_distortion checkpoint");
  auto x = image_to_tensor<float>(img);
  auto padded = pad_to_multiple(x, model.vae.spec.downsample_factor);
  auto latent = model.vae.encode(padded);
  auto q = quantize(latent);

  const Shape& ls = q.values.shape();
  const std::int64_t hw = ls[2] * ls[3];
  auto symbols = detail::latent_to_symbols(q.values);
  auto table_of = detail::channel_assignment(ls[1], hw);
  auto tables = freeze_cmf(model.prior);
  Bitstream payload = encode_symbols(symbols, tables, table_of);

  CodedImage c;
  c.model_id = model_id;
  c.width = static_cast<std::uint32_t>(img.width);
  c.height = static_cast<std::uint32_t>(img.height);
  c.channels = static_cast<std::uint8_t>(model.vae.spec.input_channels);
  c.latent_channels = static_cast<std::uint16_t>(model.vae.spec.latent_channels);
  c.payload = std::move(payload);

  if (stats) {
    stats->payload_bits = c.payload.bit_length;
    stats->total_bits = c.total_bits();
    stats->bpp = bits_per_pixel(c.total_bits(), img.width, img.height);
    stats->symbol_count = symbols.size();
    stats->escape_count = 0;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      const CmfTable& t = tables[table_of[i]];
      if (symbols[i] < t.support_min || symbols[i] > t.support_max) ++stats->escape_count;
    }
  }
  return serialize_container(c);
}

/// Decompresses container bytes to the reconstructed image. The model digest
/// must equal the container's model_id.
inline ImageU8 decompress_from_bytes(const std::vector<std::uint8_t>& bytes,
                                     const CodecModel& model, const Digest& model_id) {
  CodedImage c = parse_container(bytes);
  if (c.model_id != model_id)
    throw model_key_error("file is keyed to model " + hex(c.model_id).substr(0, 16) +
                          "... but the supplied checkpoint is " + hex(model_id).substr(0, 16) +
                          "...");
  if (c.channels != model.vae.spec.input_channels ||
      c.latent_channels != model.vae.spec.latent_channels)
    throw format_error("container architecture fields do not match the checkpoint");

  const std::int64_t f = model.vae.spec.downsample_factor;
  const std::int64_t Hp = (c.height + f - 1) / f * f;
  const std::int64_t Wp = (c.width + f - 1) / f * f;
  const std::int64_t lh = Hp / f, lw = Wp / f;
  const std::int64_t lc = model.vae.spec.latent_channels;
  const std::size_t count = static_cast<std::size_t>(lc * lh * lw);

  auto tables = freeze_cmf(model.prior);
  auto table_of = detail::channel_assignment(lc, lh * lw);
  auto symbols = decode_symbols(c.payload, tables, count, table_of);

  std::vector<float> vals(count);
  for (std::size_t i = 0; i < count; ++i) vals[i] = static_cast<float>(symbols[i]);
  Latent<float> latent{Tensor<float>({1, lc, lh, lw}, std::move(vals)), true};
  auto recon = model.vae.decode(latent);
  return tensor_to_image(crop(recon, c.height, c.width));
}

inline CompressStats compress_file(const std::string& image_path, const CodecModel& model,
                                   const Digest& model_id, const std::string& output_path) {
  ImageU8 img = read_image(image_path);
  CompressStats stats;
  write_file(output_path, compress_to_bytes(img, model, model_id, &stats));
  return stats;
}

inline void decompress_file(const std::string& coded_path, const CodecModel& model,
                            const Digest& model_id, const std::string& output_path) {
  write_image(output_path, decompress_from_bytes(read_file(coded_path), model, model_id));
}

// ---- evaluation ---------------------------------------------------------------

/// One compress/decompress measurement. `name` is the source file or a
/// generated label; metrics compare the original against the file-level
/// reconstruction.
struct EvalRow {
  std::string name;
  double bpp = 0;
  double mse = 0;
  double psnr = 0;
  double ssim = 0;
};

inline EvalRow evaluate_image(const ImageU8& img, const std::string& name,
                              const CodecModel& model, const Digest& model_id) {
  auto bytes = compress_to_bytes(img, model, model_id);
  ImageU8 recon = decompress_from_bytes(bytes, model, model_id);
  auto a = image_to_tensor<float>(img);
  auto b = image_to_tensor<float>(recon);
  EvalRow row;
  row.name = name;
  row.bpp = bits_per_pixel(8 * bytes.size(), img.width, img.height);
  row.mse = mse(a, b);
  row.psnr = psnr_from_mse(row.mse);
  row.ssim = ssim(a, b);
  return row;
}

struct EvalReport {
  std::vector<EvalRow> rows;  // ordered by name
  EvalRow mean;               // name = "mean"
};

inline EvalReport evaluate_images(const std::vector<std::pair<std::string, ImageU8>>& images,
                                  const CodecModel& model, const Digest& model_id) {
  if (images.empty()) throw io_error("evaluate: no images");
  EvalReport rep;
  for (const auto& [name, img] : images)
    rep.rows.push_back(evaluate_image(img, name, model, model_id));
  rep.mean.name = "mean";
  for (const auto& r : rep.rows) {
    rep.mean.bpp += r.bpp;
    rep.mean.mse += r.mse;
    rep.mean.psnr += r.psnr;
    rep.mean.ssim += r.ssim;
  }
  const double n = static_cast<double>(rep.rows.size());
  rep.mean.bpp /= n;
  rep.mean.mse /= n;
  rep.mean.psnr /= n;
  rep.mean.ssim /= n;
  return rep;
}

/// Compress/decompress every readable image under `dir` in memory and
/// measure fidelity. Unreadable files are skipped with a warning on
/// `warnings`; it is an error if nothing is readable.
inline EvalReport evaluate_directory(const std::string& dir, const CodecModel& model,
                                     const Digest& model_id,
                                     std::ostream* warnings = nullptr) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw io_error("not a directory: " + dir);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) names.push_back(e.path().string());
  std::sort(names.begin(), names.end());

  std::vector<std::pair<std::string, ImageU8>> images;
  for (const auto& n : names) {
    try {
      images.emplace_back(fs::path(n).filename().string(), read_image(n));
    } catch (const error& e) {
      if (warnings) *warnings << "warning: skipping " << n << ": " << e.what() << "\n";
    }
  }
  if (images.empty()) throw io_error("no readable images in " + dir);
  return evaluate_images(images, model, model_id);
}

inline void write_eval_csv(const EvalReport& rep, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw io_error("cannot write csv: " + path);
  f << "name,bpp,mse,psnr,ssim\n";
  auto emit = [&](const EvalRow& r) {
    f << r.name << ',' << r.bpp << ',' << r.mse << ',' << r.psnr << ',' << r.ssim << '\n';
  };
  for (const auto& r : rep.rows) emit(r);
  emit(rep.mean);
  if (!f) throw io_error("short write: " + path);
}

}  // namespace nvc
