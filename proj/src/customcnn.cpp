#include "bmi/customcnn/customcnn.hpp"

#include <fstream>

namespace bmi::customcnn {

namespace {

using Kind = LayerSpec::Kind;

std::string kind_name(Kind kind) {
  switch (kind) {
    case Kind::conv: return "conv";
    case Kind::batchnorm: return "batchnorm";
    case Kind::relu: return "relu";
    case Kind::maxpool: return "maxpool";
    case Kind::flatten: return "flatten";
    case Kind::dense: return "dense";
  }
  return "?";
}

Kind kind_from_name(const std::string& name) {
  if (name == "conv") return Kind::conv;
  if (name == "batchnorm") return Kind::batchnorm;
  if (name == "relu") return Kind::relu;
  if (name == "maxpool") return Kind::maxpool;
  if (name == "flatten") return Kind::flatten;
  if (name == "dense") return Kind::dense;
  throw std::runtime_error("custom cnn spec: unknown layer kind '" + name + "'");
}

}  // namespace

CustomCnnSpec CustomCnnSpec::standard() {
  CustomCnnSpec spec;
  for (int channels : {32, 64, 128}) {
    spec.layers.push_back({Kind::conv, channels, 3});
    spec.layers.push_back({Kind::batchnorm});
    spec.layers.push_back({Kind::relu});
    spec.layers.push_back({Kind::maxpool, 2});
  }
  spec.layers.push_back({Kind::flatten});
  spec.layers.push_back({Kind::dense, 200});
  spec.layers.push_back({Kind::relu});
  spec.layers.push_back({Kind::dense, 1});
  return spec;
}

CustomCnnSpec CustomCnnSpec::miniature() {
  CustomCnnSpec spec;
  spec.input_h = spec.input_w = 8;
  spec.layers.push_back({Kind::conv, 4, 3});
  spec.layers.push_back({Kind::relu});
  spec.layers.push_back({Kind::maxpool, 2});
  spec.layers.push_back({Kind::flatten});
  spec.layers.push_back({Kind::dense, 1});
  return spec;
}

nlohmann::json CustomCnnSpec::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : this->layers) {
    layers.push_back(
        {{"kind", kind_name(layer.kind)}, {"arg", layer.arg}, {"kernel", layer.kernel}});
  }
  return {{"input_h", input_h}, {"input_w", input_w}, {"input_c", input_c}, {"layers", layers}};
}

CustomCnnSpec CustomCnnSpec::from_json(const nlohmann::json& doc) {
  CustomCnnSpec spec;
  spec.input_h = doc.at("input_h").get<int>();
  spec.input_w = doc.at("input_w").get<int>();
  spec.input_c = doc.at("input_c").get<int>();
  spec.layers.clear();
  for (const auto& layer : doc.at("layers")) {
    spec.layers.push_back({kind_from_name(layer.at("kind").get<std::string>()),
                           layer.value("arg", 0), layer.value("kernel", 3)});
  }
  return spec;
}

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("history: cannot write " + path);
  }
  out << "epoch,train_mae,val_mae\n";
  for (const auto& row : history) {
    out << row.epoch << "," << row.train_mae << "," << row.val_mae << "\n";
  }
}

}  // namespace bmi::customcnn
