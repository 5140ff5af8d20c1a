#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bmi/facepipe/facepipe.hpp"
#include "bmi/nn/tensor.hpp"

namespace bmi::features {

// Registry row for one deep-feature extractor. feature_dim is the contract:
// every extraction must produce exactly this many finite values.
struct BackboneSpec {
  std::string backbone_id;
  int input_h = 224;
  int input_w = 224;
  int feature_dim = 0;
  long param_count_info = 0;  // published size, informational only
  std::string weights_ref;    // file name under the weights dir; empty = none needed
  facepipe::NormSpec norm;
};

// The five pretrained CNN families plus a stub that flattens its input
// (for plumbing tests and synthetic end-to-end runs).
const std::vector<BackboneSpec>& registry();
const BackboneSpec& find_backbone(const std::string& backbone_id);  // throws on unknown id

struct FeatureVector {
  std::string backbone_id;
  Eigen::VectorXf values;

  int dim() const { return static_cast<int>(values.size()); }
};

// A loaded, immutable feature extractor. Thread-safe for concurrent forward
// calls once constructed.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual const BackboneSpec& spec() const = 0;
  virtual Eigen::VectorXf forward(const nn::Tensor<float>& input) const = 0;
  // Named parameter blobs in registration order (for archives and tests).
  virtual std::vector<std::pair<std::string, Eigen::Index>> parameter_layout() const = 0;
};

// weights_ref resolution:
//   ""             -> only valid for the stub (it has no weights)
//   "random:<n>"   -> deterministic seeded initialization (tests, smoke runs)
//   anything else  -> path of a weight archive (envelope with named tensors)
std::unique_ptr<Backbone> make_backbone(const std::string& backbone_id,
                                        const std::string& weights_ref);

// Saves the current parameters of `backbone` as a weight archive readable by
// make_backbone.
void save_backbone_weights(const Backbone& backbone, const std::string& path);

// Shape-checks the tensor against the backbone's registry row, runs the
// forward pass and enforces the dimension/finiteness contract.
FeatureVector extract_features(const nn::Tensor<float>& crop_tensor, const Backbone& backbone);

}  // namespace bmi::features
