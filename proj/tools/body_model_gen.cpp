// Writes the simplified body model generated from a seed as JSON.
#include "sif3d/body_model.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace sif3d {
extern const char* const kEmbeddedBodyModelJson;
const char* const kEmbeddedBodyModelJson = "";
}

int main(int argc, char** argv) {
  CLI::App app{"Generate the simplified body model file"};
  std::uint64_t seed = 7;
  std::string out = "body_model.json";
  app.add_option("--seed", seed, "generation seed")->capture_default_str();
  app.add_option("-o,--out", out, "output path")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    sif3d::BodyModel::generate(seed).save(out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
