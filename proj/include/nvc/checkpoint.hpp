#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "nvc/bytes.hpp"
#include "nvc/entropy.hpp"
#include "nvc/vae.hpp"

namespace nvc {

// Checkpoint file: "NVCK" magic, version, architecture, training metadata,
// the named parameter tensors as raw little-endian f32, then a SHA-256 over
// everything before it. The digest doubles as the model id that compressed
// files are keyed to: a decoder can only open streams made by the exact
// same weights.

inline constexpr char kCheckpointMagic[4] = {'N', 'V', 'C', 'K'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

enum class LossMode : std::uint8_t { rate_distortion = 0, beta_vae = 1 };

inline const char* to_string(LossMode m) {
  return m == LossMode::rate_distortion ? "rate_distortion" : "beta_vae";
}

inline LossMode loss_mode_from_string(const std::string& s) {
  if (s == "rate_distortion") return LossMode::rate_distortion;
  if (s == "beta_vae") return LossMode::beta_vae;
  throw config_error("unknown loss_mode '" + s + "' (rate_distortion | beta_vae)");
}

struct TrainMeta {
  double lambda = 0.001;
  std::uint64_t steps = 0;
  std::uint64_t seed = 0;
  LossMode loss_mode = LossMode::rate_distortion;
};

/// A trained (or freshly initialized) codec: the VAE parameters plus the
/// factorized prior. This is the in-memory form of a checkpoint.
struct CodecModel {
  VaeModel<float> vae;
  FactorizedPrior<float> prior;
  TrainMeta meta;

  static CodecModel init(const ArchitectureSpec& spec, std::uint64_t seed,
                         bool trainable = true, bool gaussian_head = false) {
    CodecModel m;
    m.vae = VaeModel<float>::init(spec, seed, trainable, gaussian_head);
    m.prior = FactorizedPrior<float>::init(spec.latent_channels, trainable);
    m.meta.seed = seed;
    return m;
  }

  std::vector<Parameter<float>*> trainable_params() {
    auto out = vae.trainable_params();
    out.push_back(&prior.location);
    out.push_back(&prior.log_scale);
    return out;
  }
};

namespace detail {

inline void write_param(ByteWriter& w, const Parameter<float>& p) {
  w.str(p.name);
  const Shape& s = p.value.shape();
  w.u8(static_cast<std::uint8_t>(s.size()));
  for (auto d : s) w.u32(static_cast<std::uint32_t>(d));
  for (float v : p.value.data()) w.f32(v);
}

inline Parameter<float> read_param(ByteReader& r, bool trainable) {
  std::string name = r.str();
  const std::size_t ndim = r.u8();
  Shape s(ndim);
  for (auto& d : s) d = r.u32();
  std::vector<float> data(static_cast<std::size_t>(numel_of(s)));
  for (auto& v : data) v = r.f32();
  return Parameter<float>(std::move(name), Tensor<float>(std::move(s), std::move(data)),
                          trainable);
}

}  // namespace detail

/// Serializes the model; the returned bytes end with the 32-byte digest.
inline std::vector<std::uint8_t> serialize_checkpoint(const CodecModel& m) {
  ByteWriter w;
  w.bytes(kCheckpointMagic, 4);
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(m.vae.spec.latent_channels));
  w.u32(static_cast<std::uint32_t>(m.vae.spec.hidden_channels));
  w.u32(static_cast<std::uint32_t>(m.vae.spec.input_channels));
  w.u32(static_cast<std::uint32_t>(m.vae.spec.downsample_factor));
  w.u8(m.vae.gaussian_head ? 1 : 0);
  w.f64(m.meta.lambda);
  w.u64(m.meta.steps);
  w.u64(m.meta.seed);
  w.u8(static_cast<std::uint8_t>(m.meta.loss_mode));
  w.u32(static_cast<std::uint32_t>(m.vae.params.size() + 2));
  for (const auto& p : m.vae.params) detail::write_param(w, p);
  detail::write_param(w, m.prior.location);
  detail::write_param(w, m.prior.log_scale);
  Digest d = sha256(w.data());
  w.bytes(d.data(), d.size());
  return w.take();
}

/// The model id a compressed file is keyed to.
inline Digest checkpoint_digest(const CodecModel& m) {
  auto bytes = serialize_checkpoint(m);
  Digest d;
  std::copy(bytes.end() - 32, bytes.end(), d.begin());
  return d;
}

inline CodecModel parse_checkpoint(const std::vector<std::uint8_t>& bytes,
                                   bool trainable = false) {
  if (bytes.size() < 4 + 2 + 32 ||
      std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw format_error("not a checkpoint file (bad magic)");
  Digest stored;
  std::copy(bytes.end() - 32, bytes.end(), stored.begin());
  if (sha256(bytes.data(), bytes.size() - 32) != stored)
    throw format_error("checkpoint digest mismatch: file is corrupt or was modified");

  ByteReader r(bytes.data(), bytes.size() - 32);
  char magic[4];
  r.bytes(magic, 4);
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion)
    throw format_error("unsupported checkpoint version " + std::to_string(version));

  ArchitectureSpec spec;
  spec.latent_channels = r.u32();
  spec.hidden_channels = r.u32();
  spec.input_channels = r.u32();
  spec.downsample_factor = r.u32();
  const bool gaussian_head = r.u8() != 0;
  spec.validate();

  CodecModel m;
  m.vae.spec = spec;
  m.vae.gaussian_head = gaussian_head;
  m.meta.lambda = r.f64();
  m.meta.steps = r.u64();
  m.meta.seed = r.u64();
  m.meta.loss_mode = static_cast<LossMode>(r.u8());

  const auto expected = VaeModel<float>::layout(spec, gaussian_head);
  const std::uint32_t n_params = r.u32();
  if (n_params != expected.size() + 2)
    throw format_error("checkpoint parameter count " + std::to_string(n_params) +
                       " does not match the declared architecture");
  for (const auto& info : expected) {
    auto p = detail::read_param(r, trainable);
    if (p.name != info.name || p.value.shape() != info.shape)
      throw format_error("checkpoint parameter '" + p.name + "' " +
                         shape_str(p.value.shape()) + " does not match expected '" +
                         info.name + "' " + shape_str(info.shape));
    m.vae.params.push_back(std::move(p));
  }
  m.prior.location = detail::read_param(r, trainable);
  m.prior.log_scale = detail::read_param(r, trainable);
  if (m.prior.location.value.shape() != Shape{spec.latent_channels} ||
      m.prior.log_scale.value.shape() != Shape{spec.latent_channels})
    throw format_error("checkpoint prior does not match architecture");
  if (r.remaining() != 0) throw format_error("trailing bytes in checkpoint");
  return m;
}

inline void save_checkpoint(const CodecModel& m, const std::string& path) {
  write_file(path, serialize_checkpoint(m));
}

/// Loads and digest-verifies a checkpoint. Returns the model and its id.
inline std::pair<CodecModel, Digest> load_checkpoint(const std::string& path,
                                                     bool trainable = false) {
  auto bytes = read_file(path);
  CodecModel m = parse_checkpoint(bytes, trainable);
  Digest d;
  std::copy(bytes.end() - 32, bytes.end(), d.begin());
  return {std::move(m), d};
}

}  // namespace nvc
