// nvc — train, sweep, compress, decompress, evaluate, inspect.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error.

#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "nvc/nvc.hpp"

namespace {

struct TrainFlags {
  nvc::TrainConfig cfg;
  std::string config_path;
  std::string loss_mode_str = "rate_distortion";
  std::map<std::string, std::pair<CLI::Option*, std::function<void(const std::string&)>>> binds;
};

std::int64_t parse_i64(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw nvc::config_error("config: bad integer for '" + key + "': '" + s + "'");
  }
}

double parse_f64(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw nvc::config_error("config: bad number for '" + key + "': '" + s + "'");
  }
}

// Registers the TrainConfig flags on a subcommand, keyed so that a
// `--config` file can fill any field the command line left untouched.
void add_train_flags(CLI::App* app, TrainFlags& tf) {
  auto& c = tf.cfg;
  auto bind_i64 = [&](const char* flag, const char* key, std::int64_t& var,
                      const char* desc) {
    auto* opt = app->add_option(flag, var, desc);
    tf.binds[key] = {opt, [key, &var](const std::string& s) { var = parse_i64(key, s); }};
  };
  auto* lam = app->add_option("--lambda", c.lambda, "rate weight in the objective");
  tf.binds["lambda"] = {lam, [&c](const std::string& s) { c.lambda = parse_f64("lambda", s); }};
  bind_i64("--latent-channels", "latent_channels", c.latent_channels,
           "bottleneck channel count");
  bind_i64("--hidden-channels", "hidden_channels", c.hidden_channels,
           "hidden layer channel count");
  bind_i64("--patch-size", "patch_size", c.patch_size, "training patch extent (multiple of 8)");
  bind_i64("--batch-size", "batch_size", c.batch_size, "patches per step");
  bind_i64("--steps", "steps", c.steps, "optimizer steps");
  auto* lr = app->add_option("--learning-rate,--lr", c.learning_rate, "Adam learning rate");
  tf.binds["learning_rate"] = {
      lr, [&c](const std::string& s) { c.learning_rate = parse_f64("learning_rate", s); }};
  auto* seed = app->add_option("--seed", c.seed, "run seed");
  tf.binds["seed"] = {seed, [&c](const std::string& s) {
                        c.seed = static_cast<std::uint64_t>(parse_i64("seed", s));
                      }};
  auto* lm = app->add_option("--loss-mode", tf.loss_mode_str,
                             "rate_distortion (codec) or beta_vae (diagnostic)");
  tf.binds["loss_mode"] = {lm, [&c](const std::string& s) {
                             c.loss_mode = nvc::loss_mode_from_string(s);
                           }};
  app->add_option("--config", tf.config_path,
                  "flat key=value config file; command-line flags override");
  app->parse_complete_callback([lm, &tf]() {
    if (lm->count() > 0) tf.cfg.loss_mode = nvc::loss_mode_from_string(tf.loss_mode_str);
  });
}

void apply_config_file(TrainFlags& tf) {
  if (tf.config_path.empty()) return;
  for (const auto& [key, value] : nvc::read_config_file(tf.config_path)) {
    auto it = tf.binds.find(key);
    if (it == tf.binds.end())
      throw nvc::config_error("config: unknown key '" + key + "' in " + tf.config_path);
    if (it->second.first->count() == 0) it->second.second(value);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"nvc — learned lossy image codec"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a codec model on an image directory");
  TrainFlags train_tf;
  std::string train_data, train_out = "model.nvck", train_telemetry;
  train_cmd->add_option("--data", train_data, "directory of .png/.ppm training images")
      ->required();
  train_cmd->add_option("--out", train_out, "output checkpoint path");
  train_cmd->add_option("--telemetry", train_telemetry, "per-step CSV (step,loss,mse,rate_bpp)");
  add_train_flags(train_cmd, train_tf);

  // sweep
  auto* sweep_cmd =
      app.add_subcommand("sweep", "train one model per latent width and trace the RD curve");
  TrainFlags sweep_tf;
  std::string sweep_data, sweep_eval, sweep_csv = "rd_curve.csv", sweep_models;
  std::string sweep_grid = "4,8,16,32,64,128";
  std::size_t sweep_pool = 0;
  sweep_cmd->add_option("--data", sweep_data, "training image directory")->required();
  sweep_cmd->add_option("--eval", sweep_eval, "held-out image directory")->required();
  sweep_cmd->add_option("--grid", sweep_grid, "comma-separated latent widths");
  sweep_cmd->add_option("--out", sweep_csv, "rate-distortion CSV path");
  sweep_cmd->add_option("--save-models", sweep_models, "directory for per-width checkpoints");
  sweep_cmd->add_option("--patch-pool", sweep_pool,
                        "fixed number of pre-sampled patches (0 = sample freely)");
  add_train_flags(sweep_cmd, sweep_tf);

  // compress
  auto* comp_cmd = app.add_subcommand("compress", "compress an image to a .nvc file");
  std::string comp_model, comp_in, comp_out;
  comp_cmd->add_option("--model", comp_model, "checkpoint path")->required();
  comp_cmd->add_option("--in", comp_in, "input image (.png/.ppm)")->required();
  comp_cmd->add_option("--out", comp_out, "output coded file")->required();

  // decompress
  auto* dec_cmd = app.add_subcommand("decompress", "reconstruct an image from a .nvc file");
  std::string dec_model, dec_in, dec_out;
  dec_cmd->add_option("--model", dec_model, "checkpoint path")->required();
  dec_cmd->add_option("--in", dec_in, "input coded file")->required();
  dec_cmd->add_option("--out", dec_out, "output image (.png/.ppm)")->required();

  // evaluate
  auto* eval_cmd =
      app.add_subcommand("evaluate", "compress/decompress a directory and report fidelity");
  std::string eval_model, eval_dir, eval_csv;
  eval_cmd->add_option("--model", eval_model, "checkpoint path")->required();
  eval_cmd->add_option("--dir", eval_dir, "image directory")->required();
  eval_cmd->add_option("--out", eval_csv, "per-image CSV path");

  // inspect
  auto* ins_cmd = app.add_subcommand("inspect", "dump container or checkpoint headers");
  std::string ins_in;
  ins_cmd->add_option("--in", ins_in, "coded file or checkpoint")->required();

  app.parse(argc, argv);

  if (*train_cmd) {
    apply_config_file(train_tf);
    const nvc::TrainConfig& cfg = train_tf.cfg;
    cfg.validate();
    auto images = nvc::PatchSource::load_directory(train_data);
    nvc::PatchSource src(std::move(images), cfg.patch_size, nvc::derive_seed(cfg.seed, 1));
    std::ofstream telemetry_file;
    nvc::TrainTelemetry telemetry;
    if (!train_telemetry.empty()) {
      telemetry_file.open(train_telemetry);
      if (!telemetry_file) throw nvc::io_error("cannot write telemetry: " + train_telemetry);
      telemetry.out = &telemetry_file;
    }
    nvc::CodecModel model = nvc::train(cfg, src, telemetry);
    nvc::save_checkpoint(model, train_out);
    std::cout << "checkpoint: " << train_out << "\n"
              << "model id:   " << nvc::hex(nvc::checkpoint_digest(model)) << "\n";
    return 0;
  }

  if (*sweep_cmd) {
    apply_config_file(sweep_tf);
    const nvc::TrainConfig& cfg = sweep_tf.cfg;
    std::vector<std::int64_t> grid;
    std::stringstream ss(sweep_grid);
    std::string tok;
    while (std::getline(ss, tok, ',')) grid.push_back(parse_i64("grid", tok));
    auto train_images = nvc::PatchSource::load_directory(sweep_data);
    auto eval_images = nvc::PatchSource::load_directory(sweep_eval);
    nvc::SweepOptions opt;
    opt.pool_size = sweep_pool;
    opt.csv_path = sweep_csv;
    opt.checkpoint_dir = sweep_models;
    auto points = nvc::sweep(cfg, grid, train_images, eval_images, opt);
    std::cout << "latent_channels,bpp,mse,psnr,ssim\n";
    for (const auto& p : points)
      std::cout << p.latent_channels << ',' << p.bpp << ',' << p.mse << ',' << p.psnr << ','
                << p.ssim << '\n';
    std::cout << "wrote " << sweep_csv << "\n";
    return 0;
  }

  if (*comp_cmd) {
    auto [model, id] = nvc::load_checkpoint(comp_model);
    nvc::CompressStats stats = nvc::compress_file(comp_in, model, id, comp_out);
    std::cout << "wrote " << comp_out << "\n"
              << "payload bits: " << stats.payload_bits << "\n"
              << "bpp:          " << stats.bpp << "\n"
              << "symbols:      " << stats.symbol_count << " (" << stats.escape_count
              << " escaped)\n";
    return 0;
  }

  if (*dec_cmd) {
    auto [model, id] = nvc::load_checkpoint(dec_model);
    nvc::decompress_file(dec_in, model, id, dec_out);
    std::cout << "wrote " << dec_out << "\n";
    return 0;
  }

  if (*eval_cmd) {
    auto [model, id] = nvc::load_checkpoint(eval_model);
    nvc::EvalReport rep = nvc::evaluate_directory(eval_dir, model, id, &std::cerr);
    if (!eval_csv.empty()) nvc::write_eval_csv(rep, eval_csv);
    std::cout << "name,bpp,mse,psnr,ssim\n";
    for (const auto& r : rep.rows)
      std::cout << r.name << ',' << r.bpp << ',' << r.mse << ',' << r.psnr << ',' << r.ssim
                << '\n';
    std::cout << "mean," << rep.mean.bpp << ',' << rep.mean.mse << ',' << rep.mean.psnr << ','
              << rep.mean.ssim << '\n';
    return 0;
  }

  if (*ins_cmd) {
    auto bytes = nvc::read_file(ins_in);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), nvc::kContainerMagic, 4) == 0) {
      nvc::CodedImage c = nvc::parse_container(bytes);
      std::cout << "coded image container\n"
                << "  version:          " << c.version << "\n"
                << "  model id:         " << nvc::hex(c.model_id) << "\n"
                << "  extents:          " << c.width << "x" << c.height << "\n"
                << "  channels:         " << static_cast<int>(c.channels) << "\n"
                << "  latent channels:  " << c.latent_channels << "\n"
                << "  payload bits:     " << c.payload.bit_length << "\n"
                << "  bpp:              "
                << nvc::bits_per_pixel(c.total_bits(), c.width, c.height) << "\n";
    } else if (bytes.size() >= 4 && std::memcmp(bytes.data(), nvc::kCheckpointMagic, 4) == 0) {
      nvc::CodecModel m = nvc::parse_checkpoint(bytes);
      nvc::Digest d;
      std::copy(bytes.end() - 32, bytes.end(), d.begin());
      std::size_t n_values = 0;
      for (const auto& p : m.vae.params) n_values += p.value.data().size();
      std::cout << "model checkpoint\n"
                << "  model id:         " << nvc::hex(d) << "\n"
                << "  latent channels:  " << m.vae.spec.latent_channels << "\n"
                << "  hidden channels:  " << m.vae.spec.hidden_channels << "\n"
                << "  input channels:   " << m.vae.spec.input_channels << "\n"
                << "  downsample:       " << m.vae.spec.downsample_factor << "\n"
                << "  loss mode:        " << nvc::to_string(m.meta.loss_mode) << "\n"
                << "  lambda:           " << m.meta.lambda << "\n"
                << "  steps:            " << m.meta.steps << "\n"
                << "  seed:             " << m.meta.seed << "\n"
                << "  parameter values: " << n_values << "\n";
    } else {
      throw nvc::format_error(ins_in + ": neither a coded image nor a checkpoint");
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::CallForHelp&) {
    CLI::App help{"nvc — learned lossy image codec"};
    std::cout << "run 'nvc --help' or 'nvc <subcommand> --help'\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const nvc::config_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const nvc::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
