// Trains the HOG face detector on procedural portraits and writes the model
// asset. The committed asset under assets/ was produced by this tool; rerun
// with the same seed to reproduce it byte for byte.

#include <iostream>

#include <CLI11.hpp>

#include "bmi/facepipe/detector.hpp"

int main(int argc, char** argv) {
  CLI::App app{"HOG face detector trainer"};
  bmi::facepipe::DetectorTrainOptions options;
  std::string out_path = "hog_frontal.det";
  app.add_option("--out", out_path, "output model path");
  app.add_option("--seed", options.seed, "training seed");
  app.add_option("--positives", options.positives, "positive window count");
  app.add_option("--negatives", options.negatives, "negative window count");
  app.add_option("--epochs", options.epochs, "SGD epochs");
  CLI11_PARSE(app, argc, argv);

  const auto model = bmi::facepipe::train_face_detector(options);
  model.save(out_path);
  std::cout << "wrote " << out_path << " (bias " << model.bias << ", threshold "
            << model.threshold << ")\n";
  return 0;
}
