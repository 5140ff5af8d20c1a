// Minimal inference service: POST /predict, GET /history/<user_id>.

#include <iostream>

#include <CLI11.hpp>

#include "bmi/service/server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"BMI inference service"};
  bmi::service::ServiceOptions options;
  app.add_option("--model", options.model_path, "trained .bmimodel")->required();
  app.add_option("--detector", options.detector_path, "HOG detector model")->required();
  app.add_option("--weights-dir", options.weights_dir,
                 "weight archives dir or random:<seed> (backbone heads)");
  app.add_option("--store", options.store_path, "sqlite history file");
  app.add_option("--port", options.port, "listen port");
  app.add_option("--margin", options.margin, "crop margin fraction");
  CLI11_PARSE(app, argc, argv);

  try {
    bmi::service::BmiService service(options);
    return service.run_blocking();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
