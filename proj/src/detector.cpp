#include "bmi/facepipe/detector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bmi/common/rng.hpp"
#include "bmi/img/synth.hpp"
#include "bmi/io/envelope.hpp"

namespace bmi::facepipe {

void DetectorModel::save(const std::string& path) const {
  nlohmann::json header = {
      {"type", "hog_detector"},
      {"window", hog.window},
      {"cell", hog.cell},
      {"bins", hog.bins},
      {"block", hog.block},
      {"clip", hog.clip},
      {"bias", bias},
      {"threshold", threshold},
  };
  std::vector<float> payload(weights.data(), weights.data() + weights.size());
  io::save_envelope_f32(path, std::move(header), payload);
}

DetectorModel DetectorModel::load(const std::string& path) {
  const io::Envelope env = io::load_envelope(path);
  if (env.header.value("type", "") != "hog_detector") {
    throw std::runtime_error("detector: not a detector model: " + path);
  }
  DetectorModel model;
  model.hog.window = env.header.at("window").get<int>();
  model.hog.cell = env.header.at("cell").get<int>();
  model.hog.bins = env.header.at("bins").get<int>();
  model.hog.block = env.header.at("block").get<int>();
  model.hog.clip = env.header.at("clip").get<float>();
  model.bias = env.header.at("bias").get<float>();
  model.threshold = env.header.at("threshold").get<float>();
  model.weights = Eigen::Map<const Eigen::VectorXf>(env.payload_f32.data(),
                                                    static_cast<Eigen::Index>(env.payload_f32.size()));
  if (model.weights.size() != model.hog.descriptor_size()) {
    throw std::runtime_error("detector: weight size does not match HOG layout in " + path);
  }
  return model;
}

std::optional<Detection> HogFaceDetector::detect_best(const img::Image& image) const {
  if (image.empty()) {
    throw img::ImageError("detect_best: empty raster");
  }
  const int win = model_.hog.window;
  double best_score = -std::numeric_limits<double>::infinity();
  img::Box best_box;

  double scale = 1.0;
  while (static_cast<int>(image.width / scale) >= win &&
         static_cast<int>(image.height / scale) >= win) {
    const int lw = static_cast<int>(image.width / scale);
    const int lh = static_cast<int>(image.height / scale);
    const img::Image level = img::resize_bilinear(image, lw, lh);
    const GradientHistograms grads(level, model_.hog.bins);
    for (int y = 0; y + win <= lh; y += stride_) {
      for (int x = 0; x + win <= lw; x += stride_) {
        const Eigen::VectorXf d = hog_descriptor(grads, model_.hog, x, y);
        const double score = static_cast<double>(model_.weights.dot(d)) + model_.bias;
        if (score > best_score) {
          best_score = score;
          best_box = img::Box{static_cast<int>(std::lround(x * scale)),
                              static_cast<int>(std::lround(y * scale)),
                              static_cast<int>(std::lround(win * scale)),
                              static_cast<int>(std::lround(win * scale))};
        }
      }
    }
    scale *= scale_step_;
  }

  if (best_score < model_.threshold) {
    return std::nullopt;
  }
  return Detection{best_box, best_score};
}

namespace {

// Window-sized portrait for detector training: face fills most of the frame,
// with jitter, brightness and background variety matching what enrollment
// will see.
img::Image training_positive(std::mt19937_64& gen, int win) {
  img::PortraitParams p;
  p.canvas_w = p.canvas_h = win;
  p.face_size = win * uniform(gen, 0.74, 0.86);
  p.face_cx = win / 2.0 + uniform(gen, -2.5, 2.5);
  p.face_cy = win / 2.0 + uniform(gen, -2.5, 2.5);
  p.brightness = uniform(gen, 0.25, 0.95);
  p.bg_style = static_cast<int>(uniform_index(gen, 3));
  p.seed = gen();
  return render_portrait(p);
}

img::Image training_negative(std::mt19937_64& gen, int win) {
  const int kind = static_cast<int>(uniform_index(gen, 8));
  if (kind == 0) {
    return img::render_blank(win, win,
                             static_cast<std::uint8_t>(uniform_index(gen, 256)));
  }
  return img::render_background(win, win, static_cast<int>(uniform_index(gen, 3)), gen());
}

Eigen::VectorXf window_descriptor(const img::Image& window, const HogSpec& spec) {
  const GradientHistograms grads(window, spec.bins);
  return hog_descriptor(grads, spec, 0, 0);
}

}  // namespace

DetectorModel train_face_detector(const DetectorTrainOptions& o) {
  DetectorModel model;
  const int win = model.hog.window;
  std::mt19937_64 gen(o.seed);

  std::vector<Eigen::VectorXf> xs;
  std::vector<float> ys;
  xs.reserve(o.positives + o.negatives);
  for (int i = 0; i < o.positives; ++i) {
    xs.push_back(window_descriptor(training_positive(gen, win), model.hog));
    ys.push_back(1.0f);
  }
  for (int i = 0; i < o.negatives; ++i) {
    xs.push_back(window_descriptor(training_negative(gen, win), model.hog));
    ys.push_back(-1.0f);
  }

  // Pegasos-style hinge-loss SGD; the bias stays unregularized.
  const int dim = model.hog.descriptor_size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  double b = 0.0;
  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  long t = 0;
  for (int epoch = 0; epoch < o.epochs; ++epoch) {
    shuffle_indices(order, gen);
    for (std::size_t idx : order) {
      ++t;
      const double eta = 1.0 / (o.svm_lambda * static_cast<double>(t));
      const double margin =
          ys[idx] * (w.dot(xs[idx].cast<double>()) + b);
      w *= (1.0 - eta * o.svm_lambda);
      if (margin < 1.0) {
        w += eta * ys[idx] * xs[idx].cast<double>();
        b += eta * 0.1 * ys[idx];
      }
    }
  }

  // Calibrate the acceptance threshold on a held-out set.
  double min_pos = std::numeric_limits<double>::infinity();
  double max_neg = -std::numeric_limits<double>::infinity();
  std::vector<double> pos_scores;
  for (int i = 0; i < 120; ++i) {
    const double s = w.dot(window_descriptor(training_positive(gen, win), model.hog).cast<double>()) + b;
    pos_scores.push_back(s);
    min_pos = std::min(min_pos, s);
  }
  for (int i = 0; i < 240; ++i) {
    const double s = w.dot(window_descriptor(training_negative(gen, win), model.hog).cast<double>()) + b;
    max_neg = std::max(max_neg, s);
  }
  double threshold;
  if (min_pos > max_neg) {
    threshold = 0.5 * (min_pos + max_neg);
  } else {
    std::sort(pos_scores.begin(), pos_scores.end());
    threshold = pos_scores[pos_scores.size() / 20];  // 5th percentile fallback
  }
  // A zero descriptor (blank frame) scores exactly the bias; keep it below
  // threshold so featureless images can never enroll.
  threshold = std::max(threshold, b + 1e-3);

  model.weights = w.cast<float>();
  model.bias = static_cast<float>(b);
  model.threshold = static_cast<float>(threshold);
  return model;
}

}  // namespace bmi::facepipe
