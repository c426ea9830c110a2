// Writes a directory of procedural clear fundus images for desk-scale runs.

#include <cstdio>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "scrnet/image_io.hpp"
#include "scrnet/phantom.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate procedural clear fundus images"};
  std::string output;
  int count = 20;
  int size = 64;
  std::uint64_t seed = 1;
  app.add_option("--output", output, "Output directory")->required();
  app.add_option("--count", count, "Number of images")->check(CLI::PositiveNumber);
  app.add_option("--size", size, "Image side in pixels")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(output);
    for (int i = 0; i < count; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "fundus_%03d.png", i);
      scrnet::save_image(scrnet::make_fundus_phantom(size, seed * 1000003ULL + i),
                         std::filesystem::path(output) / name);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
