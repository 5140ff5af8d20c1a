// Generates a synthetic portrait dataset whose BMI is linearly encoded in
// skin brightness; handy for demos and end-to-end smoke runs.

#include <iostream>

#include <CLI11.hpp>

#include "bmi/img/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthetic BMI dataset generator"};
  bmi::img::SynthDatasetOptions options;
  std::string out_dir = "synth_data";
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--count", options.count, "portrait count");
  app.add_option("--blank", options.blank_count, "blank (FTE) image count");
  app.add_option("--seed", options.seed, "generator seed");
  app.add_option("--canvas", options.canvas, "canvas size in pixels");
  CLI11_PARSE(app, argc, argv);

  const std::string manifest = bmi::img::write_synthetic_dataset(out_dir, options);
  std::cout << "wrote " << manifest << "\n";
  return 0;
}
