#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "bmi/facepipe/hog.hpp"
#include "bmi/img/image.hpp"

namespace bmi::facepipe {

struct Detection {
  img::Box box;  // window footprint in source-image coordinates
  double score = 0.0;
};

// Frontal face detector contract. Any conforming implementation can be
// plugged into enrollment; the toolkit ships a HOG + linear classifier.
class FaceDetector {
 public:
  virtual ~FaceDetector() = default;
  virtual std::optional<Detection> detect_best(const img::Image& image) const = 0;
};

// Linear scoring model over HOG descriptors, persisted as a pinned asset.
struct DetectorModel {
  HogSpec hog;
  Eigen::VectorXf weights;
  float bias = 0.0f;
  float threshold = 0.0f;

  void save(const std::string& path) const;
  static DetectorModel load(const std::string& path);
};

// Sliding-window scan over a scale pyramid; returns the single best-scoring
// window above the model threshold. Deterministic for a fixed model.
class HogFaceDetector final : public FaceDetector {
 public:
  explicit HogFaceDetector(DetectorModel model, int stride = 4,
                           double scale_step = 1.25)
      : model_(std::move(model)), stride_(stride), scale_step_(scale_step) {}

  static HogFaceDetector from_file(const std::string& path) {
    return HogFaceDetector(DetectorModel::load(path));
  }

  std::optional<Detection> detect_best(const img::Image& image) const override;

  const DetectorModel& model() const { return model_; }

 private:
  DetectorModel model_;
  int stride_;
  double scale_step_;
};

// Trains the shipped detector on procedural portraits and backgrounds.
// Fully seeded; the committed asset is reproducible from the same options.
struct DetectorTrainOptions {
  std::uint64_t seed = 7;
  int positives = 400;
  int negatives = 900;
  int epochs = 40;
  double svm_lambda = 1e-4;
};

DetectorModel train_face_detector(const DetectorTrainOptions& options);

}  // namespace bmi::facepipe
