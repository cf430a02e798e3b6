#ifndef ADAFOCUS_MODEL_HPP
#define ADAFOCUS_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adafocus {

// Logits are clamped to [-30, 30] before the sigmoid and scores pinned to
// [kScoreEps, 1 - kScoreEps], so -log p and -log(1-p) stay finite. The clamp
// is far outside the range reached during training.
inline constexpr double kLogitClamp = 30.0;
inline constexpr double kScoreEps = 1e-13;

inline double clamped_sigmoid(double z) {
  z = std::clamp(z, -kLogitClamp, kLogitClamp);
  const double p = 1.0 / (1.0 + std::exp(-z));
  return std::clamp(p, kScoreEps, 1.0 - kScoreEps);
}

// Multi-label classifier over clip features: linear (hidden == 0) or one
// rectified hidden layer (feature_dim -> hidden -> K). All parameters live
// in one flat vector so the optimizer and finite-difference checks can treat
// the model as a plain coordinate vector.
//
// Flat layout, linear:  [W (K x D, row-major by class), b (K)]
// Flat layout, hidden:  [W1 (H x D), b1 (H), W2 (K x H), b2 (K)]
class Model {
 public:
  Model() = default;

  // Weights drawn zero-mean normal with scale 1/sqrt(fan_in); biases zero.
  static Model init(int feature_dim, int num_classes, int hidden,
                    std::uint64_t seed);

  int feature_dim() const { return feature_dim_; }
  int num_classes() const { return num_classes_; }
  int hidden() const { return hidden_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t param_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  // Raw logits z = (W2 relu(W1 x + b1) + b2) or (W x + b).
  std::vector<double> logits(std::span<const double> features) const;

  // Sigmoid scores after the clamp; every entry in (0, 1).
  // Throws InputError on dimension mismatch or non-finite input.
  std::vector<double> forward(std::span<const double> features) const;

  // Gradient of sum_k grad_coeffs[k] * z_k with respect to the flat
  // parameter vector (same layout). grad_coeffs[k] is d loss / d z_k,
  // supplied by the loss functions.
  std::vector<double> backward(std::span<const double> features,
                               std::span<const double> grad_coeffs) const;

 private:
  int feature_dim_ = 0;
  int num_classes_ = 0;
  int hidden_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> params_;
};

// A loss over the score vector: returns (value, d loss / d logits).
using LossFn =
    std::function<std::pair<double, std::vector<double>>(std::span<const double>)>;

// Compares Model::backward against central finite differences of
// loss(forward(params)) with step h = 1e-6. Returns the max relative error
// |a - f| / max(1e-8, |a| + |f|) over all parameters.
double grad_check(const Model& model, std::span<const double> features,
                  const LossFn& loss);

// Checkpoint: one JSON record with shapes, seed and parameter arrays at
// 9 significant digits.
std::string checkpoint_to_string(const Model& model);
void write_checkpoint(const std::string& path, const Model& model);
Model read_checkpoint(const std::string& path);

}  // namespace adafocus

#endif  // ADAFOCUS_MODEL_HPP
