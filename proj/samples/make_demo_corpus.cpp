// Writes a small deterministic corpus of procedural RGB scenes, split into
// train/ and eval/ subdirectories — enough to exercise the CLI end to end:
//
//   samples/make_demo_corpus out_dir [count] [size] [seed]
//   nvc train --data out_dir/train --out model.nvck --steps 500
//   nvc evaluate --model model.nvck --dir out_dir/eval

#include <filesystem>
#include <iostream>
#include <string>

#include "nvc/synthetic.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_demo_corpus <out_dir> [count=24] [size=96] [seed=7]\n";
    return 1;
  }
  const std::string out = argv[1];
  const std::size_t count = argc > 2 ? std::stoul(argv[2]) : 24;
  const std::int64_t size = argc > 3 ? std::stol(argv[3]) : 96;
  const std::uint64_t seed = argc > 4 ? std::stoull(argv[4]) : 7;

  namespace fs = std::filesystem;
  fs::create_directories(out + "/train");
  fs::create_directories(out + "/eval");
  const std::size_t n_eval = std::max<std::size_t>(2, count / 5);
  for (std::size_t i = 0; i < count; ++i) {
    nvc::ImageU8 img = nvc::synthetic_image(size, size, nvc::derive_seed(seed, 100 + i));
    const std::string dir = i < count - n_eval ? "/train/" : "/eval/";
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03zu.ppm", i);
    nvc::write_ppm(out + dir + name, img);
  }
  std::cout << "wrote " << (count - n_eval) << " train + " << n_eval << " eval images under "
            << out << "\n";
  return 0;
}
